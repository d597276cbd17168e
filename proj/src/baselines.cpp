#include "cropmon/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cropmon/errors.hpp"

namespace cropmon {

std::vector<double> flatten(const WindowedSequence& seq) { return seq.steps.storage(); }

namespace {

struct AnnVars {
  tape::DenseVars hidden, output;
};

double ann_batch_step(AnnModel& model, AdamState& adam, std::span<const std::vector<double>* const> rows,
                      std::span<const std::size_t> labels) {
  ad::Tape t;
  const std::size_t k = rows.front()->size();
  Tensor x = Tensor::matrix(rows.size(), k);
  for (std::size_t n = 0; n < rows.size(); ++n) std::copy(rows[n]->begin(), rows[n]->end(), x.row(n).begin());
  AnnVars v{tape::bind(t, model.hidden, true), tape::bind(t, model.output, true)};
  ad::Var in = t.constant(std::move(x));
  ad::Var hidden = ad::tanh(ad::linear(in, v.hidden.weight, v.hidden.bias));
  ad::Var loss = ad::cross_entropy(tape::classify(hidden, v.output), labels);
  t.backward(loss);
  std::vector<Tensor*> params = {&model.hidden.weight, &model.hidden.bias, &model.output.weight, &model.output.bias};
  const std::vector<Tensor> grads = {t.grad(v.hidden.weight), t.grad(v.hidden.bias), t.grad(v.output.weight),
                                     t.grad(v.output.bias)};
  adam.update(params, grads);
  return loss.value()[0];
}

std::vector<double> ann_scale(const AnnModel& model, std::span<const double> features) {
  std::vector<double> out(features.begin(), features.end());
  if (model.feature_mean.empty()) return out;
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = (out[p] - model.feature_mean[p]) / model.feature_scale[p];
  return out;
}

// Forward pass on already-standardized features.
std::vector<double> ann_forward(const AnnModel& model, std::span<const double> features) {
  std::vector<double> hidden(model.hidden.out_dim());
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    const auto w = model.hidden.weight.row(j);
    double acc = model.hidden.bias[j];
    for (std::size_t p = 0; p < features.size(); ++p) acc += features[p] * w[p];
    hidden[j] = std::tanh(acc);
  }
  return classify(hidden, model.output);
}

}  // namespace

AnnModel ann_train(std::span<const std::vector<double>> features, std::span<const std::size_t> labels,
                   std::vector<std::string> class_names, const TrainConfig& config) {
  if (features.empty()) throw ValidationError("ANN training set is empty");
  if (features.size() != labels.size()) throw DimensionError("ANN features/labels length mismatch");
  if (config.batch_size == 0) throw ValidationError("batch_size must be positive");
  const std::size_t k = features.front().size();
  for (const auto& f : features) {
    if (f.size() != k) throw DimensionError("ANN rows have inconsistent lengths");
  }
  const std::size_t classes = class_names.size();
  if (config.validate_classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t l : labels) ++counts.at(l);
    std::size_t present = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (counts[c] == 0) continue;
      ++present;
      if (counts[c] < 2) throw ValidationError("class '" + class_names[c] + "' has fewer than 2 training pixels");
    }
    if (present < 2) throw ValidationError("training set needs at least 2 classes");
  }

  AnnModel model;
  if (config.standardize) {
    const double n = static_cast<double>(features.size());
    model.feature_mean.assign(k, 0.0);
    model.feature_scale.assign(k, 0.0);
    for (const auto& f : features)
      for (std::size_t p = 0; p < k; ++p) model.feature_mean[p] += f[p] / n;
    for (const auto& f : features) {
      for (std::size_t p = 0; p < k; ++p) {
        const double diff = f[p] - model.feature_mean[p];
        model.feature_scale[p] += diff * diff / n;
      }
    }
    for (double& s : model.feature_scale) s = std::max(config.scale_floor, std::sqrt(s));
  }
  std::vector<std::vector<double>> scaled;
  if (config.standardize) {
    scaled.reserve(features.size());
    for (const auto& f : features) scaled.push_back(ann_scale(model, f));
    features = scaled;
  }
  Rng rng(mix_seed(config.seed, 0));
  model.hidden = DenseParams::init(k, config.hidden_dim, rng);
  model.output = DenseParams::init(config.hidden_dim, classes, rng);
  model.class_names = std::move(class_names);
  model.config = config;

  std::vector<Tensor*> params = {&model.hidden.weight, &model.hidden.bias, &model.output.weight, &model.output.bias};
  AdamState adam(params, AdamConfig{config.learning_rate});

  auto full_loss = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) total += cross_entropy(ann_forward(model, features[i]), labels[i]);
    return total / static_cast<double>(features.size());
  };
  model.loss_history.push_back(full_loss());

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const std::vector<double>*> rows;
  std::vector<std::size_t> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle(mix_seed(config.seed, epoch + 1));
    shuffle.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      rows.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        rows.push_back(&features[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      total += ann_batch_step(model, adam, rows, batch_labels) * static_cast<double>(end - start);
    }
    model.loss_history.push_back(total / static_cast<double>(order.size()));
  }
  return model;
}

AnnModel ann_train(const Dataset& train_set, const TrainConfig& config) {
  std::vector<std::vector<double>> features;
  features.reserve(train_set.size());
  for (const Pixel& p : train_set.pixels()) features.push_back(flatten(p.windowed));
  const auto labels = train_set.labels();
  return ann_train(features, labels, train_set.class_names(), config);
}

std::vector<double> ann_predict(const AnnModel& model, std::span<const double> features) {
  if (features.size() != model.hidden.in_dim()) {
    throw DimensionError("ANN input of length " + std::to_string(features.size()) + " for weight " +
                         model.hidden.weight.shape_string());
  }
  return ann_forward(model, ann_scale(model, features));
}

std::vector<double> ann_predict(const AnnModel& model, const WindowedSequence& seq) {
  return ann_predict(model, std::span<const double>(seq.steps.storage()));
}

double dtw_distance(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw DimensionError("dtw feature dimension mismatch: " + a.shape_string() + " vs " + b.shape_string());
  }
  const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Two rolling rows of the (n+1) x (m+1) cost table.
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    const double* ai = a.row(i - 1).data();
    for (std::size_t j = 1; j <= m; ++j) {
      const double* bj = b.row(j - 1).data();
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = ai[k] - bj[k];
        sq += diff * diff;
      }
      cur[j] = std::sqrt(sq) + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

KnnResult knn_dtw_query(const Dataset& train_set, const WindowedSequence& query) {
  if (train_set.empty()) throw ValidationError("1-NN needs a nonempty training set");
  KnnResult r;
  r.class_distances.assign(train_set.num_classes(), std::numeric_limits<double>::infinity());
  r.distance = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const Pixel& p = train_set[i];
    const double d = dtw_distance(p.windowed.steps, query.steps);
    r.class_distances[p.label] = std::min(r.class_distances[p.label], d);
    if (!found || d < r.distance || (d == r.distance && p.id < train_set[r.neighbour].id)) {
      r.distance = d;
      r.neighbour = i;
      r.label = p.label;
      found = true;
    }
  }
  return r;
}

std::size_t knn_dtw_classify(const Dataset& train_set, const WindowedSequence& query) {
  return knn_dtw_query(train_set, query).label;
}

std::vector<KnnResult> knn_dtw_batch(const Dataset& train_set, const Dataset& queries, Execution exec) {
  if (train_set.empty()) throw ValidationError("1-NN needs a nonempty training set");
  if (!queries.empty() && queries.feature_dim() != train_set.feature_dim()) {
    throw DimensionError("1-NN query feature dim " + std::to_string(queries.feature_dim()) + " vs training " +
                         std::to_string(train_set.feature_dim()));
  }
  std::vector<KnnResult> out(queries.size());
  for_each_index(queries.size(), exec, [&](std::size_t i) { out[i] = knn_dtw_query(train_set, queries[i].windowed); });
  return out;
}

double knn_class_score(const KnnResult& r, std::size_t cls) {
  const double own = r.class_distances.at(cls);
  double other = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < r.class_distances.size(); ++c) {
    if (c != cls) other = std::min(other, r.class_distances[c]);
  }
  if (std::isinf(own) && std::isinf(other)) return 0.5;
  if (std::isinf(own)) return 0.0;
  if (std::isinf(other)) return 1.0;
  const double total = own + other;
  return total > 0.0 ? other / total : 0.5;
}

}  // namespace cropmon
