#include "cropmon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cropmon/errors.hpp"

namespace cropmon {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auc: " + std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) +
                         " labels");
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("auc labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw ValidationError("auc scores must be finite");
    pos += labels[i] == 1;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ValidationError("auc needs both positive and negative samples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double macro_auc(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels) {
  if (probs.size() != labels.size()) throw DimensionError("macro_auc: probabilities and labels differ in length");
  if (probs.empty()) throw ValidationError("macro_auc of an empty set");
  const std::size_t classes = probs.front().size();
  double total = 0.0;
  std::size_t used = 0;
  std::vector<double> s(probs.size());
  std::vector<int> y(probs.size());
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      s[i] = probs[i].at(c);
      y[i] = labels[i] == c;
      pos += y[i];
    }
    if (pos == 0 || pos == probs.size()) continue;
    total += auc(s, y);
    ++used;
  }
  if (used == 0) throw ValidationError("macro_auc needs at least two classes present");
  return total / static_cast<double>(used);
}

double f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t positive) {
  if (predictions.size() != labels.size()) throw DimensionError("f1: predictions and labels differ in length");
  if (predictions.empty()) throw ValidationError("f1 of an empty set");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive, l = labels[i] == positive;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double macro_f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t classes) {
  if (classes == 0) throw ValidationError("macro_f1 needs at least one class");
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) total += f1(predictions, labels, c);
  return total / static_cast<double>(classes);
}

Scores score_probabilities(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                           std::size_t positive) {
  if (probs.size() != labels.size()) throw DimensionError("score_probabilities: length mismatch");
  if (probs.empty()) throw ValidationError("cannot score an empty set");
  const std::size_t classes = probs.front().size();
  std::vector<std::size_t> predicted(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) predicted[i] = argmax(probs[i]);
  if (classes > 2) return {macro_auc(probs, labels), macro_f1(predicted, labels, classes)};
  if (positive >= classes) throw IndexError("positive class " + std::to_string(positive) + " out of range");
  std::vector<double> s(probs.size());
  std::vector<int> y(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    s[i] = probs[i][positive];
    y[i] = labels[i] == positive;
  }
  return {auc(s, y), f1(predicted, labels, positive)};
}

Dataset slice_steps(const Dataset& data, std::size_t first, std::size_t last) {
  if (data.empty()) throw ValidationError("cannot slice an empty dataset");
  if (first > last || last >= data.steps()) {
    throw ValidationError("step interval [" + std::to_string(first) + ", " + std::to_string(last) +
                          "] is empty or outside [0, " + std::to_string(data.steps()) + ")");
  }
  return data.map_windowed([&](const WindowedSequence& w) {
    WindowedSequence out = w;
    const std::size_t d = w.steps.cols();
    out.steps = Tensor::matrix(last - first + 1, d);
    std::copy(w.steps.storage().begin() + static_cast<std::ptrdiff_t>(first * d),
              w.steps.storage().begin() + static_cast<std::ptrdiff_t>((last + 1) * d), out.steps.storage().begin());
    return out;
  });
}

Scores restricted_period_probe(const Dataset& train_set, const Dataset& test_set, std::size_t first,
                               std::size_t last, const TrainConfig& config) {
  const Dataset train_slice = slice_steps(train_set, first, last);
  const Dataset test_slice = slice_steps(test_set, first, last);
  const AnnModel model = ann_train(train_slice, config);
  std::vector<std::vector<double>> probs;
  probs.reserve(test_slice.size());
  for (const Pixel& p : test_slice.pixels()) probs.push_back(ann_predict(model, p.windowed));
  return score_probabilities(probs, test_slice.labels());
}

std::string to_string(Method m) {
  switch (m) {
    case Method::ann: return "ANN";
    case Method::knn_dtw: return "1-NN-DTW";
    case Method::lstm: return "LSTM";
    case Method::lstm_att: return "LSTM-ATT";
    case Method::da: return "DA";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods()) {
    if (s == to_string(m)) return m;
  }
  if (s == "ann") return Method::ann;
  if (s == "knn_dtw") return Method::knn_dtw;
  if (s == "lstm") return Method::lstm;
  if (s == "lstm_att") return Method::lstm_att;
  if (s == "da") return Method::da;
  throw ValidationError("unknown method '" + s + "' (expected ann, knn_dtw, lstm, lstm_att or da)");
}

std::vector<Method> all_methods() { return {Method::ann, Method::knn_dtw, Method::lstm, Method::lstm_att, Method::da}; }

const EvalRow* EvalReport::find(Method m, const std::string& scenario) const {
  for (const auto& r : rows) {
    if (r.method == m && r.scenario == scenario) return &r;
  }
  return nullptr;
}

std::string EvalReport::to_csv() const {
  std::string out = "method,scenario,auc,f1,train_digest,test_digest,seed\n";
  for (const auto& r : rows) {
    out += to_string(r.method) + "," + r.scenario + "," + format_double(r.auc) + "," + format_double(r.f1) + "," +
           r.train_digest + "," + r.test_digest + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string EvalReport::to_table() const {
  std::vector<std::string> scenarios;
  std::vector<Method> methods;
  for (const auto& r : rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) scenarios.push_back(r.scenario);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  std::size_t col = 13;
  for (const auto& s : scenarios) col = std::max(col, s.size());
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-10s", "method");
  std::string out = buf;
  for (const auto& s : scenarios) {
    std::snprintf(buf, sizeof(buf), "  %*s", static_cast<int>(col), s.c_str());
    out += buf;
  }
  out += "\n";
  for (Method m : methods) {
    std::snprintf(buf, sizeof(buf), "%-10s", to_string(m).c_str());
    out += buf;
    for (const auto& s : scenarios) {
      const EvalRow* r = find(m, s);
      std::string cell = "-";
      if (r) {
        std::snprintf(buf, sizeof(buf), "%.3f / %.3f", r->auc, r->f1);
        cell = buf;
      }
      std::snprintf(buf, sizeof(buf), "  %*s", static_cast<int>(col), cell.c_str());
      out += buf;
    }
    out += "\n";
  }
  out += "cells: AUC / F1\n";
  return out;
}

EvalReport compare_methods(const Dataset& train_set, std::span<const Scenario> test_sets,
                           std::span<const Method> methods, std::uint64_t seed, const CompareConfig& config) {
  if (train_set.empty()) throw ValidationError("compare_methods needs a nonempty training set");
  if (methods.empty()) throw ValidationError("compare_methods needs at least one method");
  for (const auto& [name, data] : test_sets) {
    if (data.empty()) throw ValidationError("scenario '" + name + "' is empty");
    check_domain_pair(train_set, data);
  }
  TrainConfig base = config.train;
  base.seed = seed;
  const std::string train_digest = train_set.digest();
  const bool need_att = std::find(methods.begin(), methods.end(), Method::lstm_att) != methods.end() ||
                        std::find(methods.begin(), methods.end(), Method::da) != methods.end();

  const ModelBundle* pre = config.pretrained;
  if (pre && pre->train_digest != train_digest) {
    throw ValidationError("model was trained on dataset " + pre->train_digest + ", training set is " + train_digest);
  }
  const bool pre_att = pre && pre->pooling == Pooling::attention;
  const bool pre_lstm = pre && pre->pooling == Pooling::last_hidden;

  ModelBundle att, lstm;
  AnnModel ann;
  if (pre_att) {
    att = *pre;
  } else if (need_att) {
    TrainConfig c = base;
    c.pooling = Pooling::attention;
    att = train(train_set, c);
  }

  EvalReport report;
  for (Method m : methods) {
    if (m == Method::lstm && pre_lstm) {
      lstm = *pre;
    } else if (m == Method::lstm) {
      TrainConfig c = base;
      c.pooling = Pooling::last_hidden;
      lstm = train(train_set, c);
    } else if (m == Method::ann) {
      ann = ann_train(train_set, base);
    }
    for (const auto& [name, data] : test_sets) {
      std::vector<std::vector<double>> probs;
      switch (m) {
        case Method::ann:
          for (const Pixel& p : data.pixels()) probs.push_back(ann_predict(ann, p.windowed));
          break;
        case Method::knn_dtw: {
          for (const KnnResult& r : knn_dtw_batch(train_set, data)) {
            std::vector<double> s(train_set.num_classes());
            for (std::size_t c = 0; c < s.size(); ++c) s[c] = knn_class_score(r, c);
            // The 1-NN label decides F1; its soft scores only rank for AUC.
            const double top = *std::max_element(s.begin(), s.end());
            s[r.label] = std::max(s[r.label], std::nextafter(top, 2.0));
            probs.push_back(std::move(s));
          }
          break;
        }
        case Method::lstm: probs = predict_batch(lstm, data); break;
        case Method::lstm_att: probs = predict_batch(att, data); break;
        case Method::da: {
          DaConfig dc = config.da;
          dc.seed = seed;
          const AdaptedBundle adapted = train_da(train_set, data, att, dc);
          probs = predict_adapted_batch(att, adapted, data);
          break;
        }
      }
      const Scores s = score_probabilities(probs, data.labels(), config.positive_class);
      report.rows.push_back({m, name, s.auc, s.f1, train_digest, data.digest(), seed});
    }
  }
  return report;
}

}  // namespace cropmon
