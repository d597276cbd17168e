#include "cropmon/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "cropmon/errors.hpp"

namespace cropmon {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

ConfidenceCurve confidence_progression(const ModelBundle& model, const WindowedSequence& seq) {
  if (!model.trained) throw StateError("confidence_progression needs a trained model");
  const Tensor hiddens = encode_input(model, seq.steps);
  const std::size_t t_len = hiddens.rows(), classes = model.num_classes();
  ConfidenceCurve curve{Tensor::matrix(t_len, classes)};
  for (std::size_t t = 1; t <= t_len; ++t) {
    const auto p = probabilities_from_hidden(model, hiddens, t);
    std::copy(p.begin(), p.end(), curve.per_step.row(t - 1).begin());
  }
  return curve;
}

std::optional<std::size_t> earliest_detection(const ConfidenceCurve& curve, std::size_t cls, double threshold,
                                              std::size_t patience) {
  if (cls >= curve.classes()) {
    throw IndexError("class " + std::to_string(cls) + " out of range for a curve over " +
                     std::to_string(curve.classes()) + " classes");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("detection threshold must lie in (0, 1)");
  if (patience == 0) throw ValidationError("patience must be at least 1");
  std::size_t run = 0;
  for (std::size_t t = 0; t < curve.steps(); ++t) {
    run = curve.per_step.at(t, cls) >= threshold ? run + 1 : 0;
    if (run == patience) return t + 2 - patience;
  }
  return std::nullopt;
}

CohortCurve cohort_statistics(std::span<const ConfidenceCurve> curves, std::size_t cls) {
  if (curves.empty()) throw ValidationError("cohort is empty");
  const std::size_t t_len = curves.front().steps();
  CohortCurve out{cls, std::vector<double>(t_len, 0.0), std::vector<double>(t_len, 0.0)};
  for (const auto& c : curves) {
    if (c.steps() != t_len) throw DimensionError("cohort curves have different lengths");
    if (cls >= c.classes()) throw IndexError("class " + std::to_string(cls) + " out of range");
  }
  const double n = static_cast<double>(curves.size());
  for (std::size_t t = 0; t < t_len; ++t) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c.per_step.at(t, cls);
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& c : curves) {
      const double d = c.per_step.at(t, cls) - mean;
      sq += d * d;
    }
    out.mean[t] = mean;
    out.std[t] = std::sqrt(sq / n);
  }
  return out;
}

CohortCurve cohort_confidence(const ModelBundle& model, const Dataset& cohort, std::size_t cls, Execution exec) {
  if (cohort.empty()) throw ValidationError("cohort is empty");
  if (cls >= model.num_classes()) throw IndexError("class " + std::to_string(cls) + " out of range");
  std::vector<ConfidenceCurve> curves(cohort.size());
  for_each_index(cohort.size(), exec,
                 [&](std::size_t i) { curves[i] = confidence_progression(model, cohort[i].windowed); });
  return cohort_statistics(curves, cls);
}

double mean_earliest_detection(std::span<const ConfidenceCurve> curves, std::size_t cls, double threshold,
                               std::size_t patience) {
  if (curves.empty()) throw ValidationError("cohort is empty");
  double total = 0.0;
  for (const auto& c : curves) {
    const auto step = earliest_detection(c, cls, threshold, patience);
    total += static_cast<double>(step.value_or(c.steps() + 1));
  }
  return total / static_cast<double>(curves.size());
}

std::string confidence_csv(std::span<const CohortCurve> curves, std::span<const std::string> class_names) {
  std::string out = "step,class,mean,std\n";
  for (const auto& c : curves) {
    const std::string& name = class_names[c.class_index];
    for (std::size_t t = 0; t < c.mean.size(); ++t) {
      out += std::to_string(t + 1) + "," + name + "," + format_double(c.mean[t]) + "," + format_double(c.std[t]) + "\n";
    }
  }
  return out;
}

std::string confidence_svg(std::span<const CohortCurve> curves, std::span<const std::string> class_names) {
  static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  const double width = 640, height = 360, left = 50, right = 120, top = 20, bottom = 40;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  std::size_t t_len = 1;
  for (const auto& c : curves) t_len = std::max(t_len, c.mean.size());
  auto x_of = [&](std::size_t t) { return left + (t_len == 1 ? 0.0 : plot_w * t / (t_len - 1.0)); };
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\">\n";
  svg += "<rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
  svg += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(top + plot_h, 1) + "\" x2=\"" + fixed(left + plot_w, 1) +
         "\" y2=\"" + fixed(top + plot_h, 1) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(top, 1) + "\" x2=\"" + fixed(left, 1) + "\" y2=\"" +
         fixed(top + plot_h, 1) + "\" stroke=\"black\"/>\n";
  for (double v : {0.0, 0.5, 1.0}) {
    svg += "<text x=\"" + fixed(left - 8, 1) + "\" y=\"" + fixed(y_of(v) + 4, 1) +
           "\" font-size=\"11\" text-anchor=\"end\">" + fixed(v, 1) + "</text>\n";
  }
  svg += "<text x=\"" + fixed(left + plot_w / 2, 1) + "\" y=\"" + fixed(height - 8, 1) +
         "\" font-size=\"12\" text-anchor=\"middle\">time step</text>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const std::string color = colors[k % 6];
    std::string points;
    for (std::size_t t = 0; t < c.mean.size(); ++t) {
      const double x = x_of(t);
      points += fixed(x, 1) + "," + fixed(y_of(c.mean[t]), 1) + " ";
      svg += "<line x1=\"" + fixed(x, 1) + "\" y1=\"" + fixed(y_of(c.mean[t] - c.std[t]), 1) + "\" x2=\"" +
             fixed(x, 1) + "\" y2=\"" + fixed(y_of(c.mean[t] + c.std[t]), 1) + "\" stroke=\"" + color +
             "\" stroke-opacity=\"0.5\"/>\n";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    svg += "<text x=\"" + fixed(left + plot_w + 10, 1) + "\" y=\"" + fixed(top + 16 + 16.0 * k, 1) +
           "\" font-size=\"12\" fill=\"" + color + "\">" + class_names[c.class_index] + "</text>\n";
  }
  return svg + "</svg>\n";
}

std::string to_string(CoverClass c) {
  switch (c) {
    case CoverClass::primary_only: return "primary_only";
    case CoverClass::cover_cropped: return "cover_cropped";
    case CoverClass::evergreen: return "evergreen";
  }
  return "unknown";
}

void CoverCropRule::validate(std::size_t composites) const {
  if (post_window == 0) throw ValidationError("post_window must be positive");
  if (harvest_step + post_window > composites) {
    throw ValidationError("harvest_step " + std::to_string(harvest_step) + " + post_window " +
                          std::to_string(post_window) + " exceeds series of " + std::to_string(composites));
  }
  if (!(green_threshold > 0.0 && green_threshold < evergreen_min && evergreen_min < 1.0)) {
    throw ValidationError("cover-crop thresholds must satisfy 0 < green_threshold < evergreen_min < 1");
  }
  if (season_first > season_last || season_last >= composites) {
    throw ValidationError("growing-season range [" + std::to_string(season_first) + ", " +
                          std::to_string(season_last) + "] is outside the series");
  }
}

std::vector<double> median3(std::span<const double> s) {
  std::vector<double> out(s.begin(), s.end());
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    double w[3] = {s[i - 1], s[i], s[i + 1]};
    std::sort(w, w + 3);
    out[i] = w[1];
  }
  return out;
}

CoverClass detect_cover_crop(std::span<const double> ndvi, const CoverCropRule& rule) {
  rule.validate(ndvi.size());
  const std::vector<double> s = rule.median_filter ? median3(ndvi) : std::vector<double>(ndvi.begin(), ndvi.end());
  const std::size_t post_first = rule.harvest_step, post_last = rule.harvest_step + rule.post_window - 1;

  double season_min = 1e300, season_max = -1e300;
  std::size_t peak_at = rule.season_first;
  for (std::size_t i = rule.season_first; i <= rule.season_last; ++i) {
    season_min = std::min(season_min, s[i]);
    if (s[i] > season_max) {
      season_max = s[i];
      peak_at = i;
    }
  }
  double post_min = 1e300, post_sum = 0.0;
  for (std::size_t i = post_first; i <= post_last; ++i) {
    post_min = std::min(post_min, s[i]);
    post_sum += s[i];
  }
  if (std::min(season_min, post_min) >= rule.evergreen_min) return CoverClass::evergreen;

  const double post_mean = post_sum / static_cast<double>(rule.post_window);
  bool cover = post_mean >= rule.green_threshold && season_max >= rule.evergreen_min;
  if (cover && rule.require_dip) {
    bool dip = false;
    for (std::size_t i = peak_at; i < post_first; ++i) dip = dip || s[i] < rule.green_threshold;
    cover = dip;
  }
  return cover ? CoverClass::cover_cropped : CoverClass::primary_only;
}

std::string CoverTable::to_csv() const {
  std::string out = "class,total_area,cover_area,cover_percent\n";
  auto line = [](const CoverTableRow& r) {
    return r.class_name + "," + format_double(r.total_area) + "," + format_double(r.cover_area) + "," +
           fixed(r.percent(), 2) + "\n";
  };
  for (const auto& r : rows) out += line(r);
  return out + line(total);
}

std::string CoverTable::to_text() const {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.class_name.size());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %14s %14s %9s\n", static_cast<int>(name_w), "class", "total_area",
                "cover_area", "cover_%");
  std::string out = buf;
  auto line = [&](const CoverTableRow& r) {
    std::snprintf(buf, sizeof(buf), "%-*s %14.0f %14.0f %9.2f\n", static_cast<int>(name_w), r.class_name.c_str(),
                  r.total_area, r.cover_area, r.percent());
    out += buf;
  };
  for (const auto& r : rows) line(r);
  line(total);
  return out;
}

CoverTable cover_crop_table(std::span<const std::string> labels, std::span<const CoverClass> detections,
                            std::span<const double> areas) {
  if (labels.size() != detections.size() || (!areas.empty() && areas.size() != labels.size())) {
    throw DimensionError("cover_crop_table needs aligned labels, detections and areas (" +
                         std::to_string(labels.size()) + ", " + std::to_string(detections.size()) + ", " +
                         std::to_string(areas.size()) + ")");
  }
  CoverTable table;
  table.total.class_name = "total";
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double area = areas.empty() ? 1.0 : areas[i];
    if (!(area >= 0.0) || !std::isfinite(area)) throw ValidationError("pixel areas must be finite and nonnegative");
    auto [it, inserted] = index.try_emplace(labels[i], table.rows.size());
    if (inserted) table.rows.push_back({labels[i], 0.0, 0.0});
    CoverTableRow& row = table.rows[it->second];
    row.total_area += area;
    table.total.total_area += area;
    if (detections[i] == CoverClass::cover_cropped) {
      row.cover_area += area;
      table.total.cover_area += area;
    }
  }
  return table;
}

}  // namespace cropmon
