#pragma once

// Attention-pooled LSTM crop classifier.
//
//   h_t, c_t = lstm_step(x_t, h_{t-1}, c_{t-1})
//   e_t      = w . h_t + b
//   alpha    = softmax(e)
//   context  = sum_t alpha_t h_t
//   p        = softmax(W_head context + b_head)
//
// The attention-free baseline shares the encoder and head but classifies
// from the last hidden state h_T.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cropmon/autodiff.hpp"
#include "cropmon/optimizer.hpp"
#include "cropmon/parallel.hpp"
#include "cropmon/pipeline.hpp"
#include "cropmon/rng.hpp"
#include "cropmon/tensor.hpp"

namespace cropmon {

// Gate matrices are H x (D + H) acting on [x_t; h_{t-1}].
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_input, w_forget, w_output, w_candidate;
  Tensor b_input, b_forget, b_output, b_candidate;

  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  // Uniform in +-1/sqrt(D + H); forget-gate bias set to +1.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  void validate() const;
};

struct AttentionParams {
  Tensor weight;  // 1 x H
  Tensor bias;    // length 1

  static AttentionParams zeros(std::size_t hidden_dim);
  static AttentionParams init(std::size_t hidden_dim, Rng& rng);
};

struct DenseParams {
  Tensor weight;  // out x in
  Tensor bias;    // out

  static DenseParams zeros(std::size_t in, std::size_t out);
  static DenseParams init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct AttentionProfile {
  std::vector<double> weights;
  std::size_t length() const { return weights.size(); }
};

enum class Pooling { attention, last_hidden };
std::string to_string(Pooling p);
Pooling pooling_from_string(const std::string& s);

struct TrainConfig {
  std::size_t hidden_dim = 32;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  Pooling pooling = Pooling::attention;
  // Reject training sets with fewer than 2 classes or 2 pixels per class.
  bool validate_classes = true;
  // Standardize every (step, feature) position with training-set statistics;
  // per-position scales are floored at scale_floor (reflectance units).
  bool standardize = true;
  double scale_floor = 0.05;
};

// Per-position affine input transform (x - mean) / scale, both T x D.
// An empty scaler is the identity.
struct InputScaler {
  Tensor mean;
  Tensor scale;

  bool empty() const { return mean.size() == 0; }
  static InputScaler fit(const Dataset& data, double scale_floor);
  Tensor apply(const Tensor& steps) const;
  void validate(std::size_t feature_dim) const;
};

struct ModelBundle {
  static constexpr int kFormatVersion = 1;

  LstmParams lstm;
  AttentionParams attention;
  DenseParams head;
  InputScaler scaler;
  Pooling pooling = Pooling::attention;
  std::vector<std::string> class_names;
  TrainConfig config;
  std::string train_digest;
  // Entry 0 is the loss before the first update; entry e the mean batch loss of epoch e.
  std::vector<double> loss_history;
  bool trained = false;

  std::size_t input_dim() const { return lstm.input_dim; }
  std::size_t hidden_dim() const { return lstm.hidden_dim; }
  std::size_t num_classes() const { return head.out_dim(); }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void validate() const;
  // FNV-1a over dims, class names, scaler and parameter values.
  std::string digest() const;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

LstmState lstm_step(std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, const LstmParams& params);

// T x H hidden states from a zero initial state.
Tensor encode(const WindowedSequence& seq, const LstmParams& params);
Tensor encode(const Tensor& steps, const LstmParams& params);

std::vector<double> attention_scores(const Tensor& hiddens, const AttentionParams& params,
                                     std::size_t prefix = 0);
AttentionProfile attend(const Tensor& hiddens, const AttentionParams& params, std::size_t prefix = 0);
std::vector<double> aggregate(const Tensor& hiddens, const AttentionProfile& profile);
std::vector<double> classify(std::span<const double> context, const DenseParams& head);

// Scaled inputs followed by the LSTM encoder.
Tensor encode_input(const ModelBundle& model, const Tensor& steps);

// Class probabilities from the first `prefix` hidden states (0 = all).
// Attention is renormalised over the prefix.
std::vector<double> probabilities_from_hidden(const ModelBundle& model, const Tensor& hiddens,
                                              std::size_t prefix = 0);
std::vector<double> predict_proba(const ModelBundle& model, const WindowedSequence& seq);
std::vector<double> context_vector(const ModelBundle& model, const WindowedSequence& seq);

std::vector<std::vector<double>> predict_batch(const ModelBundle& model, const Dataset& data,
                                               Execution exec = Execution::parallel);
std::vector<AttentionProfile> attention_batch(const ModelBundle& model, const Dataset& data,
                                              Execution exec = Execution::parallel);

std::size_t argmax(std::span<const double> v);

// Taped forward pieces shared by training and domain adaptation.
namespace tape {

struct LstmVars {
  ad::Var w_input, w_forget, w_output, w_candidate;
  ad::Var b_input, b_forget, b_output, b_candidate;
};
struct DenseVars {
  ad::Var weight, bias;
};

LstmVars bind(ad::Tape& t, const LstmParams& p, bool trainable);
ad::Var bind_attention_weight(ad::Tape& t, const AttentionParams& p, bool trainable, ad::Var* bias);
DenseVars bind(ad::Tape& t, const DenseParams& p, bool trainable);

// Per-step N x D inputs for a batch of sequences.
std::vector<ad::Var> batch_inputs(ad::Tape& t, std::span<const Tensor* const> sequences);
// Applies the scaler to each per-step N x D input; identity when empty.
std::vector<ad::Var> scale_inputs(const InputScaler& scaler, std::span<const ad::Var> inputs);
std::vector<ad::Var> encode(const LstmVars& lstm, std::span<const ad::Var> inputs);

struct Pooled {
  ad::Var context;  // N x H
  ad::Var alpha;    // N x T (attention pooling only)
};
Pooled pool(const std::vector<ad::Var>& hiddens, Pooling pooling, ad::Var score_weight, ad::Var score_bias);

ad::Var classify(ad::Var context, const DenseVars& head);

}  // namespace tape

// Mean cross-entropy of a batch plus its gradient w.r.t. every parameter of
// `model` (in parameters() order).
struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;
};
LossAndGrad loss_and_gradient(const ModelBundle& model, std::span<const Tensor* const> sequences,
                              std::span<const std::size_t> labels);

double mean_loss(const ModelBundle& model, const Dataset& data);

ModelBundle init_model(std::size_t input_dim, std::size_t num_classes, const TrainConfig& config);
ModelBundle train(const Dataset& train_set, const TrainConfig& config);

struct Interval {
  std::size_t first = 0;  // inclusive step indices
  std::size_t last = 0;
  double mean_weight = 0.0;
  double mass = 0.0;

  std::size_t length() const { return last - first + 1; }
  bool overlaps(const Interval& o) const { return first <= o.last && o.first <= last; }
};

AttentionProfile mean_attention(const ModelBundle& model, const Dataset& data,
                                Execution exec = Execution::parallel);
// Maximal runs with weight strictly above 1/T, sorted by mass (descending).
std::vector<Interval> above_uniform_intervals(const AttentionProfile& profile);
std::vector<Interval> discriminative_period(const ModelBundle& model, const Dataset& data);

std::string model_to_json(const ModelBundle& model);
ModelBundle model_from_json(const std::string& text);
void save_model(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace cropmon
