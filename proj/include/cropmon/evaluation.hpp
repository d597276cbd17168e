#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cropmon/baselines.hpp"
#include "cropmon/classifier.hpp"
#include "cropmon/domain_adaptation.hpp"
#include "cropmon/pipeline.hpp"

namespace cropmon {

// Rank-sum AUC with midranks for ties; labels are 1 (positive) or 0.
double auc(std::span<const double> scores, std::span<const int> labels);
// One-vs-rest AUC averaged over classes present in `labels`.
double macro_auc(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels);
double f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t positive = 0);
double macro_f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t classes);

struct Scores {
  double auc = 0.0;
  double f1 = 0.0;
};

// Binary tasks: AUC of the positive-class probability and F1 of argmax
// predictions for that class. More classes: macro one-vs-rest AUC and macro F1.
Scores score_probabilities(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                           std::size_t positive = 0);

// Keeps steps first..last (inclusive) of every sequence.
Dataset slice_steps(const Dataset& data, std::size_t first, std::size_t last);

Scores restricted_period_probe(const Dataset& train_set, const Dataset& test_set, std::size_t first,
                               std::size_t last, const TrainConfig& config);

enum class Method { ann, knn_dtw, lstm, lstm_att, da };
std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::vector<Method> all_methods();

struct EvalRow {
  Method method = Method::ann;
  std::string scenario;
  double auc = 0.0;
  double f1 = 0.0;
  std::string train_digest;
  std::string test_digest;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  const EvalRow* find(Method m, const std::string& scenario) const;
  // method,scenario,auc,f1,train_digest,test_digest,seed
  std::string to_csv() const;
  // Methods down, scenarios across, "AUC / F1" cells.
  std::string to_table() const;
};

struct CompareConfig {
  TrainConfig train;
  DaConfig da;
  std::size_t positive_class = 0;
  // Used instead of training when set; its pooling decides whether it stands
  // in for LSTM or LSTM-ATT (and DA). Must be trained on train_set.
  const ModelBundle* pretrained = nullptr;
};

using Scenario = std::pair<std::string, Dataset>;

// Trains each method once on train_set (DA once per scenario, using that
// scenario's features without labels) and scores every scenario.
EvalReport compare_methods(const Dataset& train_set, std::span<const Scenario> test_sets,
                           std::span<const Method> methods, std::uint64_t seed, const CompareConfig& config = {});

}  // namespace cropmon
