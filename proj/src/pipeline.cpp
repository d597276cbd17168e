#include "cropmon/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "cropmon/digest.hpp"
#include "cropmon/errors.hpp"
#include "cropmon/rng.hpp"

namespace cropmon {

namespace {

constexpr const char* kCsvHeader = "pixel_id,label,composite_index,band_index,value";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::size_t parse_index(std::string_view field, const std::string& where) {
  std::size_t value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(where + ": expected a nonnegative integer, got '" + std::string(field) + "'");
  }
  return value;
}

double parse_value(std::string_view field, const std::string& where) {
  // strtod rather than from_chars<double>: the latter is missing from older libstdc++.
  std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ValidationError(where + ": expected a finite decimal, got '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

WindowedSequence window_sequence(const SpectralSequence& raw, std::size_t window, std::size_t stride) {
  const std::size_t n = raw.composites();
  const std::size_t bands = raw.bands();
  if (window == 0) throw ValidationError("window_composites must be positive");
  if (stride == 0) throw ValidationError("stride_composites must be positive");
  if (raw.values.empty() || n < window) {
    throw ValidationError("window of " + std::to_string(window) + " composites exceeds sequence of " +
                          std::to_string(n));
  }
  const std::size_t steps = (n - window) / stride + 1;
  const std::size_t dim = window * bands;
  Tensor out = Tensor::matrix(steps, dim);
  for (std::size_t t = 0; t < steps; ++t) {
    auto dst = out.row(t);
    for (std::size_t w = 0; w < window; ++w) {
      const auto src = raw.values.row(t * stride + w);
      std::copy(src.begin(), src.end(), dst.begin() + w * bands);
    }
  }
  return WindowedSequence{std::move(out), window, stride};
}

Dataset::Dataset(std::vector<Pixel> pixels, std::vector<std::string> class_names, WindowConfig window)
    : pixels_(std::move(pixels)), class_names_(std::move(class_names)), window_(window) {
  validate();
}

Dataset Dataset::from_labeled(std::vector<LabeledPixel> pixels, std::vector<std::string> class_names,
                              WindowConfig window) {
  std::vector<Pixel> out;
  out.reserve(pixels.size());
  for (LabeledPixel& lp : pixels) {
    Pixel p;
    p.id = std::move(lp.pixel_id);
    p.label = lp.class_label;
    p.windowed = window_sequence(lp.sequence, window.window_composites, window.stride_composites);
    p.raw = std::move(lp.sequence);
    out.push_back(std::move(p));
  }
  return Dataset(std::move(out), std::move(class_names), window);
}

void Dataset::validate() const {
  if (pixels_.empty()) return;
  const Pixel& first = pixels_.front();
  for (const Pixel& p : pixels_) {
    if (p.label >= class_names_.size()) {
      throw ValidationError("pixel '" + p.id + "' has label index " + std::to_string(p.label) +
                            " but only " + std::to_string(class_names_.size()) + " classes");
    }
    if (p.windowed.steps.shape() != first.windowed.steps.shape()) {
      throw ValidationError("pixel '" + p.id + "' has layout " + p.windowed.steps.shape_string() +
                            " but '" + first.id + "' has " + first.windowed.steps.shape_string());
    }
  }
}

std::size_t Dataset::steps() const { return pixels_.empty() ? 0 : pixels_.front().windowed.length(); }
std::size_t Dataset::feature_dim() const {
  return pixels_.empty() ? 0 : pixels_.front().windowed.feature_dim();
}
std::size_t Dataset::raw_composites() const {
  return pixels_.empty() ? 0 : pixels_.front().raw.composites();
}
std::size_t Dataset::bands() const { return pixels_.empty() ? 0 : pixels_.front().raw.bands(); }

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(pixels_.size());
  for (const Pixel& p : pixels_) out.push_back(p.label);
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (const Pixel& p : pixels_) ++counts[p.label];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Pixel> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(pixels_.at(i));
  return Dataset(std::move(out), class_names_, window_);
}

std::string Dataset::to_csv() const {
  std::string out = kCsvHeader;
  out += '\n';
  for (const Pixel& p : pixels_) {
    const std::string prefix = p.id + "," + class_names_[p.label] + ",";
    for (std::size_t t = 0; t < p.raw.composites(); ++t) {
      for (std::size_t b = 0; b < p.raw.bands(); ++b) {
        out += prefix;
        out += std::to_string(t);
        out += ',';
        out += std::to_string(b);
        out += ',';
        out += format_double(p.raw.values.at(t, b));
        out += '\n';
      }
    }
  }
  return out;
}

std::string Dataset::digest() const { return fnv1a_hex(to_csv()); }

Dataset parse_dataset_csv(const std::string& text, const LoadOptions& options, const std::string& source) {
  struct Cell {
    std::size_t composite, band;
    double value;
  };
  struct Raw {
    std::string label;
    std::size_t first_line;
    std::vector<Cell> cells;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Raw> raws;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (line != kCsvHeader) {
        throw ValidationError(where + ": expected header '" + std::string(kCsvHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != 5) {
      throw ValidationError(where + ": expected 5 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ValidationError(where + ": empty pixel_id");
    Cell cell{parse_index(fields[2], where), parse_index(fields[3], where), parse_value(fields[4], where)};
    if (cell.value < 0.0 || cell.value > 1.0) {
      throw ValidationError(where + ": value out of [0,1]: " + std::string(fields[4]));
    }
    std::string id(fields[0]);
    auto it = raws.find(id);
    if (it == raws.end()) {
      order.push_back(id);
      it = raws.emplace(id, Raw{std::string(fields[1]), line_no, {}}).first;
    } else if (it->second.label != fields[1]) {
      throw ValidationError(where + ": pixel '" + id + "' relabelled from '" + it->second.label + "' to '" +
                            std::string(fields[1]) + "'");
    }
    it->second.cells.push_back(cell);
  }
  if (!header_seen) throw ValidationError(source + ": missing header");

  std::vector<std::string> names = options.class_names;
  std::map<std::string, std::size_t> name_index;
  for (std::size_t i = 0; i < names.size(); ++i) name_index[names[i]] = i;
  const bool fixed_names = !names.empty();

  std::vector<Pixel> pixels;
  pixels.reserve(order.size());
  std::size_t expected_t = 0, expected_b = 0;
  std::string first_id;
  for (const std::string& id : order) {
    const Raw& r = raws.at(id);
    const std::string where = source + ":" + std::to_string(r.first_line);
    std::size_t t_raw = 0, bands = 0;
    for (const Cell& c : r.cells) {
      t_raw = std::max(t_raw, c.composite + 1);
      bands = std::max(bands, c.band + 1);
    }
    if (first_id.empty()) {
      expected_t = t_raw;
      expected_b = bands;
      first_id = id;
    } else if (t_raw != expected_t || bands != expected_b) {
      throw ValidationError(where + ": pixel '" + id + "' has T_raw=" + std::to_string(t_raw) +
                            ", B=" + std::to_string(bands) + " but pixel '" + first_id + "' has T_raw=" +
                            std::to_string(expected_t) + ", B=" + std::to_string(expected_b));
    }
    if (r.cells.size() != t_raw * bands) {
      throw ValidationError(where + ": pixel '" + id + "' has " + std::to_string(r.cells.size()) +
                            " cells, expected " + std::to_string(t_raw * bands));
    }
    Tensor values = Tensor::matrix(t_raw, bands, -1.0);
    for (const Cell& c : r.cells) {
      double& slot = values.at(c.composite, c.band);
      if (slot >= 0.0) {
        throw ValidationError(where + ": pixel '" + id + "' repeats composite " +
                              std::to_string(c.composite) + " band " + std::to_string(c.band));
      }
      slot = c.value;
    }
    auto found = name_index.find(r.label);
    if (found == name_index.end()) {
      if (fixed_names) throw ValidationError(where + ": unknown class label '" + r.label + "'");
      found = name_index.emplace(r.label, names.size()).first;
      names.push_back(r.label);
    }
    Pixel p;
    p.id = id;
    p.label = found->second;
    p.raw = SpectralSequence{std::move(values), options.window.composite_period_days};
    p.windowed = window_sequence(p.raw, options.window.window_composites, options.window.stride_composites);
    pixels.push_back(std::move(p));
  }
  return Dataset(std::move(pixels), std::move(names), options.window);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_dataset_csv(read_file(path), options, path.string());
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, dataset.to_csv());
}

std::vector<Dataset> split(const Dataset& dataset, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ValidationError("split needs at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ValidationError("split fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-12) throw ValidationError("split fractions sum to more than 1");

  const std::size_t parts = fractions.size();
  std::vector<std::vector<std::size_t>> members(dataset.num_classes());
  for (std::size_t i = 0; i < dataset.size(); ++i) members[dataset[i].label].push_back(i);

  std::vector<std::vector<std::size_t>> assigned(parts);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& ids = members[c];
    if (ids.empty()) continue;
    if (ids.size() < parts) {
      throw ValidationError("class '" + dataset.class_names()[c] + "' has " + std::to_string(ids.size()) +
                            " pixels, fewer than the " + std::to_string(parts) + " split parts");
    }
    Rng rng(mix_seed(seed, c));
    rng.shuffle(ids);
    const double n = static_cast<double>(ids.size());
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < parts; ++k) {
      cumulative += fractions[k];
      const std::size_t end = std::min(ids.size(), static_cast<std::size_t>(std::llround(cumulative * n)));
      assigned[k].insert(assigned[k].end(), ids.begin() + begin, ids.begin() + end);
      begin = end;
    }
  }
  std::vector<Dataset> out;
  out.reserve(parts);
  for (auto& idx : assigned) {
    std::sort(idx.begin(), idx.end());
    out.push_back(dataset.subset(idx));
  }
  return out;
}

}  // namespace cropmon
