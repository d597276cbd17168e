#include "cropmon/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "cropmon/digest.hpp"
#include "cropmon/errors.hpp"
#include "cropmon/tensor_json.hpp"

namespace cropmon {

using nlohmann::json;

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& shape, const std::string& name) {
  if (t.shape() != shape) {
    throw DimensionError(name + " has shape " + t.shape_string() + ", expected " + shape_string(shape));
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::size_t k = input_dim + hidden_dim;
  for (Tensor* w : {&p.w_input, &p.w_forget, &p.w_output, &p.w_candidate}) *w = Tensor::matrix(hidden_dim, k);
  for (Tensor* b : {&p.b_input, &p.b_forget, &p.b_output, &p.b_candidate}) *b = Tensor({hidden_dim});
  return p;
}

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p = zeros(input_dim, hidden_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim + hidden_dim));
  for (Tensor* w : {&p.w_input, &p.w_forget, &p.w_output, &p.w_candidate}) {
    *w = uniform_tensor(w->shape(), bound, rng);
  }
  for (Tensor* b : {&p.b_input, &p.b_output, &p.b_candidate}) *b = uniform_tensor(b->shape(), bound, rng);
  p.b_forget.fill(1.0);
  return p;
}

void LstmParams::validate() const {
  const std::vector<std::size_t> w_shape = {hidden_dim, input_dim + hidden_dim};
  const std::vector<std::size_t> b_shape = {hidden_dim};
  require_shape(w_input, w_shape, "lstm w_input");
  require_shape(w_forget, w_shape, "lstm w_forget");
  require_shape(w_output, w_shape, "lstm w_output");
  require_shape(w_candidate, w_shape, "lstm w_candidate");
  require_shape(b_input, b_shape, "lstm b_input");
  require_shape(b_forget, b_shape, "lstm b_forget");
  require_shape(b_output, b_shape, "lstm b_output");
  require_shape(b_candidate, b_shape, "lstm b_candidate");
}

AttentionParams AttentionParams::zeros(std::size_t hidden_dim) {
  return {Tensor::matrix(1, hidden_dim), Tensor({1})};
}

AttentionParams AttentionParams::init(std::size_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  return {uniform_tensor({1, hidden_dim}, bound, rng), uniform_tensor({1}, bound, rng)};
}

DenseParams DenseParams::zeros(std::size_t in, std::size_t out) { return {Tensor::matrix(out, in), Tensor({out})}; }

DenseParams DenseParams::init(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {uniform_tensor({out, in}, bound, rng), uniform_tensor({out}, bound, rng)};
}

InputScaler InputScaler::fit(const Dataset& data, double scale_floor) {
  if (data.empty()) throw ValidationError("cannot fit a scaler on an empty dataset");
  if (!(scale_floor > 0.0)) throw ValidationError("scale_floor must be positive");
  const std::size_t t_len = data.steps(), d = data.feature_dim();
  InputScaler s{Tensor::matrix(t_len, d), Tensor::matrix(t_len, d)};
  const double n = static_cast<double>(data.size());
  for (const Pixel& p : data.pixels())
    for (std::size_t i = 0; i < s.mean.size(); ++i) s.mean[i] += p.windowed.steps[i];
  for (std::size_t i = 0; i < s.mean.size(); ++i) s.mean[i] /= n;
  for (const Pixel& p : data.pixels()) {
    for (std::size_t i = 0; i < s.scale.size(); ++i) {
      const double diff = p.windowed.steps[i] - s.mean[i];
      s.scale[i] += diff * diff;
    }
  }
  for (std::size_t i = 0; i < s.scale.size(); ++i) s.scale[i] = std::max(scale_floor, std::sqrt(s.scale[i] / n));
  return s;
}

Tensor InputScaler::apply(const Tensor& steps) const {
  if (empty()) return steps;
  if (steps.shape() != mean.shape()) {
    throw DimensionError("scaler fitted on " + mean.shape_string() + " applied to " + steps.shape_string());
  }
  Tensor out = steps;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (steps[i] - mean[i]) / scale[i];
  return out;
}

void InputScaler::validate(std::size_t feature_dim) const {
  if (empty()) {
    if (scale.size() != 0) throw DimensionError("scaler has a scale but no mean");
    return;
  }
  if (mean.rank() != 2 || mean.cols() != feature_dim) {
    throw DimensionError("scaler mean " + mean.shape_string() + " does not match input dim " +
                         std::to_string(feature_dim));
  }
  require_shape(scale, mean.shape(), "scaler scale");
  for (double v : scale.data()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("scaler scale entries must be positive and finite");
  }
}

std::string to_string(Pooling p) { return p == Pooling::attention ? "attention" : "last_hidden"; }

Pooling pooling_from_string(const std::string& s) {
  if (s == "attention") return Pooling::attention;
  if (s == "last_hidden") return Pooling::last_hidden;
  throw ValidationError("unknown pooling '" + s + "' (expected attention or last_hidden)");
}

std::vector<Tensor*> ModelBundle::parameters() {
  return {&lstm.w_input,  &lstm.w_forget, &lstm.w_output, &lstm.w_candidate, &lstm.b_input,
          &lstm.b_forget, &lstm.b_output, &lstm.b_candidate, &attention.weight, &attention.bias,
          &head.weight,   &head.bias};
}

std::vector<const Tensor*> ModelBundle::parameters() const {
  auto p = const_cast<ModelBundle*>(this)->parameters();
  return {p.begin(), p.end()};
}

void ModelBundle::validate() const {
  lstm.validate();
  require_shape(attention.weight, {1, lstm.hidden_dim}, "attention weight");
  require_shape(attention.bias, {1}, "attention bias");
  if (head.weight.rank() != 2 || head.weight.cols() != lstm.hidden_dim) {
    throw DimensionError("head weight " + head.weight.shape_string() + " does not chain from hidden size " +
                         std::to_string(lstm.hidden_dim));
  }
  require_shape(head.bias, {head.weight.rows()}, "head bias");
  scaler.validate(lstm.input_dim);
  if (class_names.size() != head.out_dim()) {
    throw DimensionError("model has " + std::to_string(class_names.size()) + " class names but head outputs " +
                         std::to_string(head.out_dim()));
  }
}

std::string ModelBundle::digest() const {
  Fnv1a h;
  h.update(std::to_string(lstm.input_dim) + "," + std::to_string(lstm.hidden_dim) + "," + to_string(pooling));
  for (const auto& name : class_names) h.update("|" + name);
  std::vector<const Tensor*> tensors = {&scaler.mean, &scaler.scale};
  for (const Tensor* t : parameters()) tensors.push_back(t);
  for (const Tensor* t : tensors) {
    h.update(";");
    for (double v : t->data()) {
      h.update(format_double(v));
      h.update(",");
    }
  }
  return h.hex();
}

LstmState lstm_step(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
                    const LstmParams& p) {
  const std::size_t d = p.input_dim, hd = p.hidden_dim;
  if (x.size() != d) {
    throw DimensionError("lstm_step input has length " + std::to_string(x.size()) + " but w_input is " +
                         p.w_input.shape_string());
  }
  if (h_prev.size() != hd || c_prev.size() != hd) {
    throw DimensionError("lstm_step state has lengths " + std::to_string(h_prev.size()) + "/" +
                         std::to_string(c_prev.size()) + " but w_forget is " + p.w_forget.shape_string());
  }
  std::vector<double> xh(d + hd);
  std::copy(x.begin(), x.end(), xh.begin());
  std::copy(h_prev.begin(), h_prev.end(), xh.begin() + d);
  LstmState out{std::vector<double>(hd), std::vector<double>(hd)};
  for (std::size_t j = 0; j < hd; ++j) {
    const double zi = p.b_input[j] + dot(xh.data(), p.w_input.row(j).data(), d + hd);
    const double zf = p.b_forget[j] + dot(xh.data(), p.w_forget.row(j).data(), d + hd);
    const double zo = p.b_output[j] + dot(xh.data(), p.w_output.row(j).data(), d + hd);
    const double zg = p.b_candidate[j] + dot(xh.data(), p.w_candidate.row(j).data(), d + hd);
    const double c = sigmoid(zf) * c_prev[j] + sigmoid(zi) * std::tanh(zg);
    out.c[j] = c;
    out.h[j] = sigmoid(zo) * std::tanh(c);
  }
  return out;
}

Tensor encode(const Tensor& steps, const LstmParams& params) {
  if (steps.rank() != 2 || steps.cols() != params.input_dim) {
    throw DimensionError("encode: sequence " + steps.shape_string() + " does not match w_input " +
                         params.w_input.shape_string());
  }
  const std::size_t t_len = steps.rows(), hd = params.hidden_dim;
  Tensor hiddens = Tensor::matrix(t_len, hd);
  LstmState state{std::vector<double>(hd, 0.0), std::vector<double>(hd, 0.0)};
  for (std::size_t t = 0; t < t_len; ++t) {
    state = lstm_step(steps.row(t), state.h, state.c, params);
    std::copy(state.h.begin(), state.h.end(), hiddens.row(t).begin());
  }
  return hiddens;
}

Tensor encode(const WindowedSequence& seq, const LstmParams& params) { return encode(seq.steps, params); }

std::vector<double> attention_scores(const Tensor& hiddens, const AttentionParams& params, std::size_t prefix) {
  const std::size_t t_len = prefix == 0 ? hiddens.rows() : prefix;
  if (t_len == 0 || t_len > hiddens.rows()) throw DimensionError("attention prefix out of range");
  if (hiddens.cols() != params.weight.cols()) {
    throw DimensionError("attend: hiddens " + hiddens.shape_string() + " vs score weight " +
                         params.weight.shape_string());
  }
  std::vector<double> scores(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    scores[t] = params.bias[0] + dot(hiddens.row(t).data(), params.weight.data().data(), hiddens.cols());
  }
  return scores;
}

AttentionProfile attend(const Tensor& hiddens, const AttentionParams& params, std::size_t prefix) {
  return {softmax(std::span<const double>(attention_scores(hiddens, params, prefix)))};
}

std::vector<double> aggregate(const Tensor& hiddens, const AttentionProfile& profile) {
  if (profile.length() == 0 || profile.length() > hiddens.rows()) {
    throw DimensionError("aggregate: profile of length " + std::to_string(profile.length()) + " for hiddens " +
                         hiddens.shape_string());
  }
  std::vector<double> context(hiddens.cols(), 0.0);
  for (std::size_t t = 0; t < profile.length(); ++t) {
    const double w = profile.weights[t];
    const auto row = hiddens.row(t);
    for (std::size_t j = 0; j < context.size(); ++j) context[j] += w * row[j];
  }
  return context;
}

std::vector<double> classify(std::span<const double> context, const DenseParams& head) {
  if (context.size() != head.in_dim()) {
    throw DimensionError("classify: context of length " + std::to_string(context.size()) + " for head " +
                         head.weight.shape_string());
  }
  std::vector<double> logits(head.out_dim());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    logits[c] = head.bias[c] + dot(context.data(), head.weight.row(c).data(), context.size());
  }
  return softmax(std::span<const double>(logits));
}

namespace {

std::vector<double> pooled_context(const ModelBundle& model, const Tensor& hiddens, std::size_t prefix) {
  const std::size_t t_len = prefix == 0 ? hiddens.rows() : prefix;
  if (t_len == 0 || t_len > hiddens.rows()) throw DimensionError("prefix out of range");
  if (model.pooling == Pooling::last_hidden) {
    const auto row = hiddens.row(t_len - 1);
    return {row.begin(), row.end()};
  }
  return aggregate(hiddens, attend(hiddens, model.attention, t_len));
}

}  // namespace

Tensor encode_input(const ModelBundle& model, const Tensor& steps) {
  return encode(model.scaler.apply(steps), model.lstm);
}

std::vector<double> probabilities_from_hidden(const ModelBundle& model, const Tensor& hiddens, std::size_t prefix) {
  return classify(pooled_context(model, hiddens, prefix), model.head);
}

std::vector<double> predict_proba(const ModelBundle& model, const WindowedSequence& seq) {
  return probabilities_from_hidden(model, encode_input(model, seq.steps), 0);
}

std::vector<double> context_vector(const ModelBundle& model, const WindowedSequence& seq) {
  return pooled_context(model, encode_input(model, seq.steps), 0);
}

std::vector<std::vector<double>> predict_batch(const ModelBundle& model, const Dataset& data, Execution exec) {
  if (!data.empty() && data.feature_dim() != model.input_dim()) {
    throw DimensionError("dataset feature dim " + std::to_string(data.feature_dim()) + " vs model input dim " +
                         std::to_string(model.input_dim()));
  }
  std::vector<std::vector<double>> out(data.size());
  for_each_index(data.size(), exec, [&](std::size_t i) { out[i] = predict_proba(model, data[i].windowed); });
  return out;
}

std::vector<AttentionProfile> attention_batch(const ModelBundle& model, const Dataset& data, Execution exec) {
  if (!data.empty() && data.feature_dim() != model.input_dim()) {
    throw DimensionError("dataset feature dim " + std::to_string(data.feature_dim()) + " vs model input dim " +
                         std::to_string(model.input_dim()));
  }
  std::vector<AttentionProfile> out(data.size());
  for_each_index(data.size(), exec, [&](std::size_t i) {
    out[i] = attend(encode_input(model, data[i].windowed.steps), model.attention);
  });
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

namespace tape {

LstmVars bind(ad::Tape& t, const LstmParams& p, bool trainable) {
  auto b = [&](const Tensor& x) { return trainable ? t.parameter(x) : t.constant(x); };
  return {b(p.w_input), b(p.w_forget), b(p.w_output), b(p.w_candidate),
          b(p.b_input), b(p.b_forget), b(p.b_output), b(p.b_candidate)};
}

ad::Var bind_attention_weight(ad::Tape& t, const AttentionParams& p, bool trainable, ad::Var* bias) {
  ad::Var w = trainable ? t.parameter(p.weight) : t.constant(p.weight);
  *bias = trainable ? t.parameter(p.bias) : t.constant(p.bias);
  return w;
}

DenseVars bind(ad::Tape& t, const DenseParams& p, bool trainable) {
  if (trainable) return {t.parameter(p.weight), t.parameter(p.bias)};
  return {t.constant(p.weight), t.constant(p.bias)};
}

std::vector<ad::Var> batch_inputs(ad::Tape& t, std::span<const Tensor* const> sequences) {
  if (sequences.empty()) throw ValidationError("empty batch");
  const std::size_t t_len = sequences.front()->rows(), d = sequences.front()->cols();
  for (const Tensor* s : sequences) {
    if (s->rows() != t_len || s->cols() != d) {
      throw DimensionError("batch mixes sequence layouts " + sequences.front()->shape_string() + " and " +
                           s->shape_string());
    }
  }
  std::vector<ad::Var> inputs;
  inputs.reserve(t_len);
  for (std::size_t step = 0; step < t_len; ++step) {
    Tensor x = Tensor::matrix(sequences.size(), d);
    for (std::size_t n = 0; n < sequences.size(); ++n) {
      const auto row = sequences[n]->row(step);
      std::copy(row.begin(), row.end(), x.row(n).begin());
    }
    inputs.push_back(t.constant(std::move(x)));
  }
  return inputs;
}

std::vector<ad::Var> scale_inputs(const InputScaler& scaler, std::span<const ad::Var> inputs) {
  std::vector<ad::Var> out(inputs.begin(), inputs.end());
  if (scaler.empty()) return out;
  if (inputs.size() != scaler.mean.rows()) {
    throw DimensionError("scaler has " + std::to_string(scaler.mean.rows()) + " steps, batch has " +
                         std::to_string(inputs.size()));
  }
  for (std::size_t step = 0; step < inputs.size(); ++step) {
    ad::Tape& t = *inputs[step].tape;
    const std::size_t n = inputs[step].value().rows(), d = inputs[step].value().cols();
    if (d != scaler.mean.cols()) throw DimensionError("scaler feature dim mismatch");
    Tensor shift = Tensor::matrix(n, d), inv = Tensor::matrix(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < d; ++k) {
        shift.at(r, k) = -scaler.mean.at(step, k);
        inv.at(r, k) = 1.0 / scaler.scale.at(step, k);
      }
    }
    out[step] = (inputs[step] + t.constant(std::move(shift))) * t.constant(std::move(inv));
  }
  return out;
}

std::vector<ad::Var> encode(const LstmVars& v, std::span<const ad::Var> inputs) {
  if (inputs.empty()) throw ValidationError("encode of an empty sequence");
  ad::Tape& t = *inputs.front().tape;
  const std::size_t n = inputs.front().value().rows();
  const std::size_t hd = v.b_input.value().size();
  ad::Var h = t.constant(Tensor::matrix(n, hd));
  ad::Var c = t.constant(Tensor::matrix(n, hd));
  std::vector<ad::Var> hiddens;
  hiddens.reserve(inputs.size());
  for (ad::Var x : inputs) {
    const ad::Var parts[] = {x, h};
    ad::Var xh = ad::concat_cols(parts);
    ad::Var i = ad::sigmoid(ad::linear(xh, v.w_input, v.b_input));
    ad::Var f = ad::sigmoid(ad::linear(xh, v.w_forget, v.b_forget));
    ad::Var o = ad::sigmoid(ad::linear(xh, v.w_output, v.b_output));
    ad::Var g = ad::tanh(ad::linear(xh, v.w_candidate, v.b_candidate));
    c = f * c + i * g;
    h = o * ad::tanh(c);
    hiddens.push_back(h);
  }
  return hiddens;
}

Pooled pool(const std::vector<ad::Var>& hiddens, Pooling pooling, ad::Var score_weight, ad::Var score_bias) {
  if (pooling == Pooling::last_hidden) return {hiddens.back(), ad::Var{}};
  std::vector<ad::Var> scores;
  scores.reserve(hiddens.size());
  for (ad::Var h : hiddens) scores.push_back(ad::linear(h, score_weight, score_bias));
  ad::Var alpha = ad::softmax_rows(ad::concat_cols(scores));
  return {ad::weighted_sum(alpha, hiddens), alpha};
}

ad::Var classify(ad::Var context, const DenseVars& head) {
  return ad::softmax_rows(ad::linear(context, head.weight, head.bias));
}

}  // namespace tape

LossAndGrad loss_and_gradient(const ModelBundle& model, std::span<const Tensor* const> sequences,
                              std::span<const std::size_t> labels) {
  ad::Tape t;
  const tape::LstmVars lstm = tape::bind(t, model.lstm, true);
  ad::Var score_bias;
  const ad::Var score_w = tape::bind_attention_weight(t, model.attention, true, &score_bias);
  const tape::DenseVars head = tape::bind(t, model.head, true);
  const auto inputs = tape::scale_inputs(model.scaler, tape::batch_inputs(t, sequences));
  const auto hiddens = tape::encode(lstm, inputs);
  const auto pooled = tape::pool(hiddens, model.pooling, score_w, score_bias);
  const ad::Var loss = ad::cross_entropy(tape::classify(pooled.context, head), labels);
  t.backward(loss);

  LossAndGrad out;
  out.loss = loss.value()[0];
  for (ad::Var v : {lstm.w_input, lstm.w_forget, lstm.w_output, lstm.w_candidate, lstm.b_input, lstm.b_forget,
                    lstm.b_output, lstm.b_candidate, score_w, score_bias, head.weight, head.bias}) {
    out.grads.push_back(t.grad(v));
  }
  return out;
}

double mean_loss(const ModelBundle& model, const Dataset& data) {
  if (data.empty()) throw ValidationError("mean_loss of an empty dataset");
  const auto probs = predict_batch(model, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += cross_entropy(probs[i], data[i].label);
  return total / static_cast<double>(data.size());
}

ModelBundle init_model(std::size_t input_dim, std::size_t num_classes, const TrainConfig& config) {
  if (input_dim == 0 || num_classes == 0 || config.hidden_dim == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  Rng rng(mix_seed(config.seed, 0));
  ModelBundle m;
  m.lstm = LstmParams::init(input_dim, config.hidden_dim, rng);
  m.attention = AttentionParams::init(config.hidden_dim, rng);
  m.head = DenseParams::init(config.hidden_dim, num_classes, rng);
  m.pooling = config.pooling;
  m.config = config;
  return m;
}

namespace {

void validate_training_set(const Dataset& data, bool strict) {
  if (data.empty()) throw ValidationError("training set is empty");
  if (!strict) return;
  const auto counts = data.class_counts();
  std::size_t present = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    ++present;
    if (counts[c] < 2) {
      throw ValidationError("class '" + data.class_names()[c] + "' has fewer than 2 training pixels");
    }
  }
  if (present < 2) throw ValidationError("training set needs at least 2 classes, found " + std::to_string(present));
}

}  // namespace

ModelBundle train(const Dataset& train_set, const TrainConfig& config) {
  validate_training_set(train_set, config.validate_classes);
  if (config.batch_size == 0) throw ValidationError("batch_size must be positive");
  ModelBundle model = init_model(train_set.feature_dim(), train_set.num_classes(), config);
  model.class_names = train_set.class_names();
  model.train_digest = train_set.digest();
  if (config.standardize) model.scaler = InputScaler::fit(train_set, config.scale_floor);

  auto params = model.parameters();
  AdamState adam(params, AdamConfig{config.learning_rate});
  model.loss_history.push_back(mean_loss(model, train_set));

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Tensor*> seqs;
  std::vector<std::size_t> labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, epoch + 1));
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      seqs.clear();
      labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        seqs.push_back(&train_set[order[k]].windowed.steps);
        labels.push_back(train_set[order[k]].label);
      }
      const LossAndGrad lg = loss_and_gradient(model, seqs, labels);
      adam.update(params, lg.grads);
      total += lg.loss * static_cast<double>(end - start);
    }
    model.loss_history.push_back(total / static_cast<double>(n));
  }
  model.trained = true;
  return model;
}

AttentionProfile mean_attention(const ModelBundle& model, const Dataset& data, Execution exec) {
  if (data.empty()) throw ValidationError("mean_attention of an empty dataset");
  const auto profiles = attention_batch(model, data, exec);
  AttentionProfile mean{std::vector<double>(data.steps(), 0.0)};
  for (const auto& p : profiles)
    for (std::size_t t = 0; t < p.length(); ++t) mean.weights[t] += p.weights[t];
  for (double& w : mean.weights) w /= static_cast<double>(profiles.size());
  return mean;
}

std::vector<Interval> above_uniform_intervals(const AttentionProfile& profile) {
  const std::size_t t_len = profile.length();
  std::vector<Interval> out;
  if (t_len == 0) return out;
  const double uniform = 1.0 / static_cast<double>(t_len);
  std::size_t t = 0;
  while (t < t_len) {
    if (!(profile.weights[t] > uniform)) {
      ++t;
      continue;
    }
    Interval iv;
    iv.first = t;
    while (t < t_len && profile.weights[t] > uniform) {
      iv.mass += profile.weights[t];
      ++t;
    }
    iv.last = t - 1;
    iv.mean_weight = iv.mass / static_cast<double>(iv.length());
    out.push_back(iv);
  }
  std::stable_sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.mass > b.mass; });
  return out;
}

std::vector<Interval> discriminative_period(const ModelBundle& model, const Dataset& data) {
  if (model.pooling != Pooling::attention) {
    throw ValidationError("discriminative_period needs an attention-pooled model");
  }
  return above_uniform_intervals(mean_attention(model, data));
}

namespace {

json tensor_json(const Tensor& t) { return tensor_to_json(t); }

Tensor tensor_from(const json& j, const std::string& name) {
  if (j.is_null()) throw ValidationError("model field '" + name + "' is missing");
  return tensor_from_json(j, "model." + name);
}

}  // namespace

std::string model_to_json(const ModelBundle& m) {
  json j;
  j["format"] = "cropmon-model";
  j["version"] = ModelBundle::kFormatVersion;
  j["dims"] = {{"input", m.lstm.input_dim}, {"hidden", m.lstm.hidden_dim}, {"classes", m.head.out_dim()}};
  j["pooling"] = to_string(m.pooling);
  j["class_names"] = m.class_names;
  j["lstm"] = {{"w_input", tensor_json(m.lstm.w_input)},         {"w_forget", tensor_json(m.lstm.w_forget)},
               {"w_output", tensor_json(m.lstm.w_output)},       {"w_candidate", tensor_json(m.lstm.w_candidate)},
               {"b_input", tensor_json(m.lstm.b_input)},         {"b_forget", tensor_json(m.lstm.b_forget)},
               {"b_output", tensor_json(m.lstm.b_output)},       {"b_candidate", tensor_json(m.lstm.b_candidate)}};
  j["attention"] = {{"weight", tensor_json(m.attention.weight)}, {"bias", tensor_json(m.attention.bias)}};
  j["head"] = {{"weight", tensor_json(m.head.weight)}, {"bias", tensor_json(m.head.bias)}};
  j["input_scaler"] = m.scaler.empty() ? json(nullptr)
                                       : json{{"mean", tensor_json(m.scaler.mean)}, {"scale", tensor_json(m.scaler.scale)}};
  j["training"] = {{"hidden_dim", m.config.hidden_dim},   {"batch_size", m.config.batch_size},
                   {"epochs", m.config.epochs},           {"learning_rate", m.config.learning_rate},
                   {"seed", m.config.seed},               {"pooling", to_string(m.config.pooling)},
                   {"validate_classes", m.config.validate_classes}, {"standardize", m.config.standardize},
                   {"scale_floor", m.config.scale_floor}};
  j["train_digest"] = m.train_digest;
  j["loss_history"] = m.loss_history;
  j["trained"] = m.trained;
  j["digest"] = m.digest();
  return j.dump(1) + "\n";
}

ModelBundle model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "cropmon-model") throw ValidationError("not a cropmon model document");
  const int version = j.value("version", -1);
  if (version != ModelBundle::kFormatVersion) {
    throw ValidationError("model format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(ModelBundle::kFormatVersion) + ")");
  }
  try {
    ModelBundle m;
    m.lstm.input_dim = j.at("dims").at("input").get<std::size_t>();
    m.lstm.hidden_dim = j.at("dims").at("hidden").get<std::size_t>();
    const json& l = j.at("lstm");
    m.lstm.w_input = tensor_from(l.at("w_input"), "w_input");
    m.lstm.w_forget = tensor_from(l.at("w_forget"), "w_forget");
    m.lstm.w_output = tensor_from(l.at("w_output"), "w_output");
    m.lstm.w_candidate = tensor_from(l.at("w_candidate"), "w_candidate");
    m.lstm.b_input = tensor_from(l.at("b_input"), "b_input");
    m.lstm.b_forget = tensor_from(l.at("b_forget"), "b_forget");
    m.lstm.b_output = tensor_from(l.at("b_output"), "b_output");
    m.lstm.b_candidate = tensor_from(l.at("b_candidate"), "b_candidate");
    m.attention.weight = tensor_from(j.at("attention").at("weight"), "attention.weight");
    m.attention.bias = tensor_from(j.at("attention").at("bias"), "attention.bias");
    m.head.weight = tensor_from(j.at("head").at("weight"), "head.weight");
    m.head.bias = tensor_from(j.at("head").at("bias"), "head.bias");
    if (const json& sc = j.at("input_scaler"); !sc.is_null()) {
      m.scaler.mean = tensor_from(sc.at("mean"), "input_scaler.mean");
      m.scaler.scale = tensor_from(sc.at("scale"), "input_scaler.scale");
    }
    m.pooling = pooling_from_string(j.at("pooling").get<std::string>());
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    const json& tr = j.at("training");
    m.config.hidden_dim = tr.at("hidden_dim").get<std::size_t>();
    m.config.batch_size = tr.at("batch_size").get<std::size_t>();
    m.config.epochs = tr.at("epochs").get<std::size_t>();
    m.config.learning_rate = tr.at("learning_rate").get<double>();
    m.config.seed = tr.at("seed").get<std::uint64_t>();
    m.config.pooling = pooling_from_string(tr.at("pooling").get<std::string>());
    m.config.validate_classes = tr.at("validate_classes").get<bool>();
    m.config.standardize = tr.at("standardize").get<bool>();
    m.config.scale_floor = tr.at("scale_floor").get<double>();
    m.train_digest = j.at("train_digest").get<std::string>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    m.trained = j.at("trained").get<bool>();
    m.validate();
    if (j.contains("digest") && j["digest"].get<std::string>() != m.digest()) {
      throw ValidationError("model digest mismatch: file says " + j["digest"].get<std::string>() +
                            ", parameters hash to " + m.digest());
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const ModelBundle& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model));
}

ModelBundle load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

}  // namespace cropmon
