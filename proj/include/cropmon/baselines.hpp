#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cropmon/classifier.hpp"
#include "cropmon/parallel.hpp"
#include "cropmon/pipeline.hpp"

namespace cropmon {

// Single-hidden-layer network on the flattened T*D sequence; ignores
// temporal order.
struct AnnModel {
  // Per-feature standardization of the flattened input; empty = identity.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  DenseParams hidden;
  DenseParams output;
  std::vector<std::string> class_names;
  TrainConfig config;
  std::vector<double> loss_history;
};

std::vector<double> flatten(const WindowedSequence& seq);

AnnModel ann_train(const Dataset& train_set, const TrainConfig& config);
AnnModel ann_train(std::span<const std::vector<double>> features, std::span<const std::size_t> labels,
                   std::vector<std::string> class_names, const TrainConfig& config);
std::vector<double> ann_predict(const AnnModel& model, std::span<const double> features);
std::vector<double> ann_predict(const AnnModel& model, const WindowedSequence& seq);

// Dynamic time warping with Euclidean local cost and the symmetric
// match/insert/delete step pattern, no warping band.
double dtw_distance(const Tensor& a, const Tensor& b);

struct KnnResult {
  std::size_t label = 0;
  std::size_t neighbour = 0;  // index into the training set
  double distance = 0.0;
  // Nearest distance to each class (infinity when the class is absent).
  std::vector<double> class_distances;
};

// Ties on distance go to the lexicographically lowest pixel_id.
KnnResult knn_dtw_query(const Dataset& train_set, const WindowedSequence& query);
std::size_t knn_dtw_classify(const Dataset& train_set, const WindowedSequence& query);
std::vector<KnnResult> knn_dtw_batch(const Dataset& train_set, const Dataset& queries,
                                     Execution exec = Execution::parallel);

// Soft score for `cls` from per-class nearest distances:
// d_other / (d_cls + d_other), where d_other is the nearest non-`cls` distance.
double knn_class_score(const KnnResult& r, std::size_t cls);

}  // namespace cropmon
