#include "cropmon/domain_adaptation.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cropmon/autodiff.hpp"
#include "cropmon/digest.hpp"
#include "cropmon/errors.hpp"
#include "cropmon/tensor_json.hpp"

namespace cropmon {

using nlohmann::json;

MapperParams MapperParams::identity(std::size_t window, std::size_t bands, std::size_t residual_dim, Rng& rng) {
  if (window == 0 || bands == 0) throw ValidationError("mapper window and bands must be positive");
  const std::size_t dim = window * bands;
  MapperParams m;
  m.bands = bands;
  m.mix = Tensor::matrix(window, window);
  m.offset = Tensor({dim});
  if (residual_dim > 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    m.u_weight = Tensor::matrix(residual_dim, dim);
    m.u_bias = Tensor({residual_dim});
    for (std::size_t i = 0; i < m.u_weight.size(); ++i) m.u_weight[i] = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < m.u_bias.size(); ++i) m.u_bias[i] = rng.uniform(-bound, bound);
    m.v_weight = Tensor::matrix(dim, residual_dim);
  }
  return m;
}

std::vector<Tensor*> MapperParams::parameters() {
  std::vector<Tensor*> p = {&mix, &offset};
  if (residual_dim() > 0) p.insert(p.end(), {&u_weight, &u_bias, &v_weight});
  return p;
}

std::vector<const Tensor*> MapperParams::parameters() const {
  auto p = const_cast<MapperParams*>(this)->parameters();
  return {p.begin(), p.end()};
}

void MapperParams::validate() const {
  const std::size_t d = dim(), r = residual_dim();
  if (d == 0 || mix.rank() != 2 || mix.rows() != mix.cols() || bands == 0 || window() * bands != d) {
    throw DimensionError("mapper mix " + mix.shape_string() + " with " + std::to_string(bands) +
                         " bands does not match offset length " + std::to_string(d));
  }
  if (r == 0) {
    if (!u_weight.empty() || !v_weight.empty()) throw DimensionError("affine-only mapper carries residual weights");
    return;
  }
  if (u_weight.shape() != std::vector<std::size_t>{r, d} || v_weight.shape() != std::vector<std::size_t>{d, r}) {
    throw DimensionError("mapper residual weights " + u_weight.shape_string() + " / " + v_weight.shape_string() +
                         " do not match dim " + std::to_string(d) + " and residual " + std::to_string(r));
  }
}

DiscriminatorParams DiscriminatorParams::init(std::size_t context_dim, std::size_t hidden_dim, Rng& rng) {
  if (context_dim == 0 || hidden_dim == 0) throw ValidationError("discriminator dimensions must be positive");
  DiscriminatorParams d;
  d.hidden = DenseParams::init(context_dim, hidden_dim, rng);
  d.output = DenseParams::init(hidden_dim, 1, rng);
  return d;
}

std::vector<Tensor*> DiscriminatorParams::parameters() {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

std::vector<const Tensor*> DiscriminatorParams::parameters() const {
  auto p = const_cast<DiscriminatorParams*>(this)->parameters();
  return {p.begin(), p.end()};
}

void DiscriminatorParams::validate() const {
  if (hidden.weight.rank() != 2 || hidden.bias.size() != hidden.out_dim()) {
    throw DimensionError("discriminator hidden layer " + hidden.weight.shape_string() + " / bias " +
                         hidden.bias.shape_string());
  }
  if (output.weight.shape() != std::vector<std::size_t>{1, hidden.out_dim()} || output.bias.size() != 1) {
    throw DimensionError("discriminator output layer " + output.weight.shape_string() + " does not chain from " +
                         hidden.weight.shape_string());
  }
}

std::string AdaptedBundle::digest() const {
  Fnv1a h;
  h.update(source_digest + "|" + target_digest);
  for (const auto& group : {mapper.parameters(), disc.parameters()}) {
    for (const Tensor* t : group) {
      h.update(";");
      for (double v : t->data()) {
        h.update(format_double(v));
        h.update(",");
      }
    }
  }
  return h.hex();
}

std::vector<double> map_step(std::span<const double> x, const MapperParams& m) {
  const std::size_t d = m.dim(), r = m.residual_dim();
  if (x.size() != d) {
    throw DimensionError("mapper of dim " + std::to_string(d) + " given a step of length " + std::to_string(x.size()));
  }
  std::vector<double> out(x.begin(), x.end());
  const std::size_t w_len = m.window(), nb = m.bands;
  for (std::size_t w = 0; w < w_len; ++w) {
    for (std::size_t b = 0; b < nb; ++b) {
      double acc = m.offset[w * nb + b];
      for (std::size_t v = 0; v < w_len; ++v) acc += m.mix.at(w, v) * x[v * nb + b];
      out[w * nb + b] += acc;
    }
  }
  if (r > 0) {
    std::vector<double> z(r);
    for (std::size_t j = 0; j < r; ++j) {
      const auto row = m.u_weight.row(j);
      double acc = m.u_bias[j];
      for (std::size_t k = 0; k < d; ++k) acc += row[k] * x[k];
      z[j] = std::tanh(acc);
    }
    for (std::size_t i = 0; i < d; ++i) {
      const auto row = m.v_weight.row(i);
      for (std::size_t j = 0; j < r; ++j) out[i] += row[j] * z[j];
    }
  }
  return out;
}

Tensor map_steps(const Tensor& steps, const MapperParams& mapper) {
  if (steps.rank() != 2) throw DimensionError("map_steps expects a T x D matrix, got " + steps.shape_string());
  Tensor out = steps;
  for (std::size_t t = 0; t < steps.rows(); ++t) {
    const auto mapped = map_step(steps.row(t), mapper);
    std::copy(mapped.begin(), mapped.end(), out.row(t).begin());
  }
  return out;
}

WindowedSequence map_target(const WindowedSequence& x, const MapperParams& mapper) {
  WindowedSequence out = x;
  out.steps = map_steps(x.steps, mapper);
  return out;
}

Dataset map_dataset(const Dataset& data, const MapperParams& mapper, Execution exec) {
  std::vector<Pixel> pixels(data.pixels().begin(), data.pixels().end());
  for_each_index(pixels.size(), exec,
                 [&](std::size_t i) { pixels[i].windowed = map_target(pixels[i].windowed, mapper); });
  return Dataset(std::move(pixels), data.class_names(), data.window());
}

double domain_score(std::span<const double> context, const DiscriminatorParams& disc) {
  if (context.size() != disc.hidden.in_dim()) {
    throw DimensionError("discriminator expects contexts of length " + std::to_string(disc.hidden.in_dim()) +
                         ", got " + std::to_string(context.size()));
  }
  double logit = disc.output.bias[0];
  for (std::size_t j = 0; j < disc.hidden.out_dim(); ++j) {
    const auto row = disc.hidden.weight.row(j);
    double acc = disc.hidden.bias[j];
    for (std::size_t k = 0; k < context.size(); ++k) acc += row[k] * context[k];
    logit += disc.output.weight[j] * std::tanh(acc);
  }
  return sigmoid(logit);
}

double attention_consistency(const AttentionProfile& original, const AttentionProfile& mapped) {
  if (original.length() != mapped.length()) {
    throw DimensionError("attention profiles of lengths " + std::to_string(original.length()) + " and " +
                         std::to_string(mapped.length()));
  }
  if (original.length() == 0) throw ValidationError("attention_consistency of empty profiles");
  double acc = 0.0;
  for (std::size_t t = 0; t < original.length(); ++t) {
    const double d = original.weights[t] - mapped.weights[t];
    acc += d * d;
  }
  return acc / static_cast<double>(original.length());
}

namespace {

double bce(double p, double target) {
  const double q = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

void require_attention(const ModelBundle& model) {
  if (model.pooling != Pooling::attention) {
    throw ValidationError("domain adaptation needs an attention-pooled source model");
  }
}

tape::DenseVars bind_const(ad::Tape& t, const DenseParams& p) { return tape::bind(t, p, false); }

ad::Var disc_forward(ad::Var context, const tape::DenseVars& hidden, const tape::DenseVars& output) {
  ad::Var z = ad::tanh(ad::linear(context, hidden.weight, hidden.bias));
  return ad::sigmoid(ad::linear(z, output.weight, output.bias));
}

Tensor stack_rows(std::span<const std::vector<double>> rows) {
  Tensor out = Tensor::matrix(rows.size(), rows.front().size());
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (rows[n].size() != out.cols()) throw DimensionError("context rows have inconsistent lengths");
    std::copy(rows[n].begin(), rows[n].end(), out.row(n).begin());
  }
  return out;
}

struct MapperVars {
  ad::Var mix, offset, u_weight, u_bias, v_weight;
  bool residual = false;
};

ad::Var apply_mapper(ad::Var x, ad::Var linear, const MapperVars& m) {
  ad::Var out = x + ad::linear(x, linear, m.offset);
  if (m.residual) out = out + ad::linear(ad::tanh(ad::linear(x, m.u_weight, m.u_bias)), m.v_weight);
  return out;
}

}  // namespace

double discriminator_loss(std::span<const std::vector<double>> source_contexts,
                          std::span<const std::vector<double>> target_contexts, const DiscriminatorParams& disc) {
  if (source_contexts.empty() || target_contexts.empty()) throw ValidationError("discriminator loss of an empty batch");
  double total = 0.0;
  for (const auto& c : source_contexts) total += bce(domain_score(c, disc), 1.0);
  for (const auto& c : target_contexts) total += bce(domain_score(c, disc), 0.0);
  return total / static_cast<double>(source_contexts.size() + target_contexts.size());
}

DiscriminatorTrainer::DiscriminatorTrainer(DiscriminatorParams& disc, double learning_rate)
    : disc_(&disc), adam_(disc.parameters(), AdamConfig{learning_rate}) {}

double DiscriminatorTrainer::step(std::span<const std::vector<double>> source_contexts,
                                  std::span<const std::vector<double>> target_contexts) {
  if (source_contexts.empty() || target_contexts.empty()) throw ValidationError("discriminator step on an empty batch");
  std::vector<std::vector<double>> rows(source_contexts.begin(), source_contexts.end());
  rows.insert(rows.end(), target_contexts.begin(), target_contexts.end());
  std::vector<double> targets(source_contexts.size(), 1.0);
  targets.resize(rows.size(), 0.0);

  ad::Tape t;
  const tape::DenseVars hidden = tape::bind(t, disc_->hidden, true);
  const tape::DenseVars output = tape::bind(t, disc_->output, true);
  ad::Var ctx = t.constant(stack_rows(rows));
  ad::Var loss = ad::binary_cross_entropy(disc_forward(ctx, hidden, output), targets);
  t.backward(loss);
  const std::vector<Tensor> grads = {t.grad(hidden.weight), t.grad(hidden.bias), t.grad(output.weight),
                                     t.grad(output.bias)};
  auto params = disc_->parameters();
  adam_.update(params, grads);
  return loss.value()[0];
}

AdversarialLosses adversarial_losses(std::span<const Tensor* const> source_batch,
                                     std::span<const Tensor* const> target_batch, const ModelBundle& model,
                                     const MapperParams& mapper, const DiscriminatorParams& disc,
                                     double lambda_att) {
  require_attention(model);
  if (source_batch.empty() || target_batch.empty()) throw ValidationError("adversarial losses of an empty batch");
  std::vector<std::vector<double>> src, tgt;
  double adversarial = 0.0, consistency = 0.0;
  for (const Tensor* s : source_batch) {
    const Tensor h = encode_input(model, *s);
    src.push_back(aggregate(h, attend(h, model.attention)));
  }
  for (const Tensor* x : target_batch) {
    const AttentionProfile original = attend(encode_input(model, *x), model.attention);
    const Tensor h = encode_input(model, map_steps(*x, mapper));
    const AttentionProfile mapped = attend(h, model.attention);
    tgt.push_back(aggregate(h, mapped));
    adversarial += bce(domain_score(tgt.back(), disc), 1.0);
    consistency += attention_consistency(original, mapped);
  }
  const double n = static_cast<double>(target_batch.size());
  AdversarialLosses out;
  out.disc_loss = discriminator_loss(src, tgt, disc);
  out.adversarial = adversarial / n;
  out.consistency = consistency / n;
  out.adapt_loss = out.adversarial + lambda_att * out.consistency;
  return out;
}

void check_domain_pair(const Dataset& source, const Dataset& target) {
  if (source.empty() || target.empty()) throw ValidationError("domain adaptation needs nonempty source and target");
  if (source.steps() != target.steps() || source.feature_dim() != target.feature_dim()) {
    throw DimensionError("source layout " + std::to_string(source.steps()) + "x" +
                         std::to_string(source.feature_dim()) + " differs from target layout " +
                         std::to_string(target.steps()) + "x" + std::to_string(target.feature_dim()));
  }
  if (source.class_names() != target.class_names()) {
    throw ValidationError("source and target datasets use different class name lists");
  }
}

AdaptedBundle train_da(const Dataset& source, const Dataset& target, const ModelBundle& model,
                       const DaConfig& config) {
  check_domain_pair(source, target);
  require_attention(model);
  if (!model.trained) throw StateError("train_da needs a trained source model");
  if (source.feature_dim() != model.input_dim()) {
    throw DimensionError("source feature dim " + std::to_string(source.feature_dim()) + " vs model input dim " +
                         std::to_string(model.input_dim()));
  }
  if (config.batch_size == 0 || config.disc_steps == 0) {
    throw ValidationError("DA batch_size and disc_steps must be positive");
  }
  if (config.lambda_att < 0.0) throw ValidationError("lambda_att must be nonnegative");
  if (config.mapper_decay < 0.0) throw ValidationError("mapper_decay must be nonnegative");

  AdaptedBundle out;
  out.config = config;
  out.source_digest = model.digest();
  out.target_digest = target.digest();
  Rng init_rng(mix_seed(config.seed, 0));
  const std::size_t window = source.window().window_composites;
  if (window == 0 || model.input_dim() % window != 0) {
    throw DimensionError("feature dim " + std::to_string(model.input_dim()) + " is not a multiple of the window " +
                         std::to_string(window));
  }
  out.mapper = MapperParams::identity(window, model.input_dim() / window, config.mapper_hidden, init_rng);
  out.disc = DiscriminatorParams::init(model.hidden_dim(), config.disc_hidden, init_rng);

  // The source model is frozen, so source contexts and the target's
  // unmapped attention never change.
  std::vector<std::vector<double>> source_ctx(source.size());
  for_each_index(source.size(), Execution::parallel,
                 [&](std::size_t i) { source_ctx[i] = context_vector(model, source[i].windowed); });
  const auto target_alpha = attention_batch(model, target);

  DiscriminatorTrainer disc_trainer(out.disc, config.disc_learning_rate);
  auto mapper_params = out.mapper.parameters();
  AdamState mapper_adam(mapper_params, AdamConfig{config.mapper_learning_rate});
  Rng rng(mix_seed(config.seed, 1));
  const std::size_t b = config.batch_size;
  const std::size_t t_len = target.steps();
  const bool residual = out.mapper.residual_dim() > 0;

  std::vector<std::vector<double>> src_batch, tgt_batch;
  std::vector<std::size_t> tgt_index(b);
  const std::size_t average_from = config.tail_average ? config.iterations / 2 : config.iterations;
  std::vector<Tensor> average;
  std::size_t averaged = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    double disc_loss = 0.0;
    for (std::size_t k = 0; k < config.disc_steps; ++k) {
      src_batch.clear();
      tgt_batch.clear();
      for (std::size_t n = 0; n < b; ++n) src_batch.push_back(source_ctx[rng.below(source.size())]);
      for (std::size_t n = 0; n < b; ++n) {
        tgt_batch.push_back(context_vector(model, map_target(target[rng.below(target.size())].windowed, out.mapper)));
      }
      disc_loss = disc_trainer.step(src_batch, tgt_batch);
    }

    for (std::size_t n = 0; n < b; ++n) tgt_index[n] = rng.below(target.size());
    ad::Tape t;
    MapperVars mv{t.parameter(out.mapper.mix), t.parameter(out.mapper.offset), {}, {}, {}, residual};
    if (residual) {
      mv.u_weight = t.parameter(out.mapper.u_weight);
      mv.u_bias = t.parameter(out.mapper.u_bias);
      mv.v_weight = t.parameter(out.mapper.v_weight);
    }
    const tape::LstmVars lstm = tape::bind(t, model.lstm, false);
    ad::Var score_bias;
    const ad::Var score_w = tape::bind_attention_weight(t, model.attention, false, &score_bias);
    std::vector<const Tensor*> seqs;
    for (std::size_t i : tgt_index) seqs.push_back(&target[i].windowed.steps);
    auto inputs = tape::batch_inputs(t, seqs);
    const ad::Var linear = ad::kron_identity(mv.mix, out.mapper.bands);
    for (ad::Var& x : inputs) x = apply_mapper(x, linear, mv);
    const auto hiddens = tape::encode(lstm, tape::scale_inputs(model.scaler, inputs));
    const tape::Pooled pooled = tape::pool(hiddens, Pooling::attention, score_w, score_bias);
    const ad::Var p = disc_forward(pooled.context, bind_const(t, out.disc.hidden), bind_const(t, out.disc.output));
    const ad::Var adversarial = ad::binary_cross_entropy(p, std::vector<double>(b, 1.0));

    Tensor alpha0 = Tensor::matrix(b, t_len);
    for (std::size_t n = 0; n < b; ++n) {
      const auto& w = target_alpha[tgt_index[n]].weights;
      std::copy(w.begin(), w.end(), alpha0.row(n).begin());
    }
    // mean over the N x T entries = batch mean of sum_t(diff^2) / T
    const ad::Var consistency = ad::mean(ad::square(pooled.alpha - t.constant(std::move(alpha0))));
    const ad::Var loss = adversarial + ad::scale(consistency, config.lambda_att);
    t.backward(loss);

    std::vector<Tensor> grads = {t.grad(mv.mix), t.grad(mv.offset)};
    if (residual) grads.insert(grads.end(), {t.grad(mv.u_weight), t.grad(mv.u_bias), t.grad(mv.v_weight)});
    if (!config.learn_offset) grads[1].fill(0.0);
    if (config.mapper_decay > 0.0) {
      // U and u are not pulled: with V = 0 they leave the map unchanged.
      for (std::size_t g = 0; g < grads.size(); ++g) {
        if (g == 2 || g == 3) continue;
        const auto& theta = mapper_params[g]->storage();
        auto& gv = grads[g].storage();
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += 2.0 * config.mapper_decay * theta[i];
      }
    }
    mapper_adam.update(mapper_params, grads);
    if (it >= average_from) {
      if (average.empty()) {
        for (const Tensor* p : mapper_params) average.emplace_back(p->shape());
      }
      for (std::size_t g = 0; g < average.size(); ++g) {
        for (std::size_t i = 0; i < average[g].size(); ++i) average[g][i] += (*mapper_params[g])[i];
      }
      ++averaged;
    }

    out.disc_loss_history.push_back(disc_loss);
    out.adapt_loss_history.push_back(loss.value()[0]);
    out.consistency_history.push_back(consistency.value()[0]);
  }
  if (averaged > 0) {
    for (std::size_t g = 0; g < average.size(); ++g) {
      for (std::size_t i = 0; i < average[g].size(); ++i) {
        (*mapper_params[g])[i] = average[g][i] / static_cast<double>(averaged);
      }
    }
  }
  return out;
}

std::vector<double> predict_adapted(const ModelBundle& model, const AdaptedBundle& adapted,
                                    const WindowedSequence& seq) {
  return predict_proba(model, map_target(seq, adapted.mapper));
}

std::vector<std::vector<double>> predict_adapted_batch(const ModelBundle& model, const AdaptedBundle& adapted,
                                                       const Dataset& data, Execution exec) {
  std::vector<std::vector<double>> out(data.size());
  for_each_index(data.size(), exec, [&](std::size_t i) { out[i] = predict_adapted(model, adapted, data[i].windowed); });
  return out;
}

AttentionProfile mean_adapted_attention(const ModelBundle& model, const AdaptedBundle& adapted, const Dataset& data,
                                        Execution exec) {
  return mean_attention(model, map_dataset(data, adapted.mapper, exec), exec);
}

double mean_attention_consistency(const ModelBundle& model, const AdaptedBundle& adapted, const Dataset& data,
                                  Execution exec) {
  require_attention(model);
  if (data.empty()) throw ValidationError("mean_attention_consistency of an empty dataset");
  std::vector<double> per(data.size());
  for_each_index(data.size(), exec, [&](std::size_t i) {
    const Tensor& x = data[i].windowed.steps;
    const AttentionProfile a = attend(encode_input(model, x), model.attention);
    const AttentionProfile b = attend(encode_input(model, map_steps(x, adapted.mapper)), model.attention);
    per[i] = attention_consistency(a, b);
  });
  double total = 0.0;
  for (double v : per) total += v;
  return total / static_cast<double>(per.size());
}

std::string adapted_to_json(const AdaptedBundle& a) {
  json j;
  j["format"] = "cropmon-adapted";
  j["version"] = AdaptedBundle::kFormatVersion;
  j["source_digest"] = a.source_digest;
  j["target_digest"] = a.target_digest;
  j["mapper"] = {{"bands", a.mapper.bands},
                 {"mix", tensor_to_json(a.mapper.mix)},
                 {"offset", tensor_to_json(a.mapper.offset)},
                 {"u_weight", tensor_to_json(a.mapper.u_weight)}, {"u_bias", tensor_to_json(a.mapper.u_bias)},
                 {"v_weight", tensor_to_json(a.mapper.v_weight)}};
  j["discriminator"] = {{"hidden_weight", tensor_to_json(a.disc.hidden.weight)},
                        {"hidden_bias", tensor_to_json(a.disc.hidden.bias)},
                        {"output_weight", tensor_to_json(a.disc.output.weight)},
                        {"output_bias", tensor_to_json(a.disc.output.bias)}};
  const DaConfig& c = a.config;
  j["config"] = {{"lambda_att", c.lambda_att},
                 {"disc_steps", c.disc_steps},
                 {"iterations", c.iterations},
                 {"batch_size", c.batch_size},
                 {"mapper_learning_rate", c.mapper_learning_rate},
                 {"disc_learning_rate", c.disc_learning_rate},
                 {"learn_offset", c.learn_offset},
                 {"mapper_decay", c.mapper_decay},
                 {"tail_average", c.tail_average},
                 {"mapper_hidden", c.mapper_hidden},
                 {"disc_hidden", c.disc_hidden},
                 {"seed", c.seed}};
  j["disc_loss_history"] = a.disc_loss_history;
  j["adapt_loss_history"] = a.adapt_loss_history;
  j["consistency_history"] = a.consistency_history;
  j["digest"] = a.digest();
  return j.dump(1) + "\n";
}

AdaptedBundle adapted_from_json(const std::string& text, const ModelBundle& source_model) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("adaptation file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "cropmon-adapted") throw ValidationError("not a cropmon adaptation document");
  const int version = j.value("version", -1);
  if (version != AdaptedBundle::kFormatVersion) {
    throw ValidationError("adaptation format version " + std::to_string(version) + " is not supported");
  }
  try {
    AdaptedBundle a;
    a.source_digest = j.at("source_digest").get<std::string>();
    if (a.source_digest != source_model.digest()) {
      throw ValidationError("adaptation was trained against model " + a.source_digest + ", loaded model is " +
                            source_model.digest());
    }
    a.target_digest = j.at("target_digest").get<std::string>();
    const json& m = j.at("mapper");
    a.mapper.bands = m.at("bands").get<std::size_t>();
    a.mapper.mix = tensor_from_json(m.at("mix"), "mapper.mix");
    a.mapper.offset = tensor_from_json(m.at("offset"), "mapper.offset");
    a.mapper.u_weight = tensor_from_json(m.at("u_weight"), "mapper.u_weight");
    a.mapper.u_bias = tensor_from_json(m.at("u_bias"), "mapper.u_bias");
    a.mapper.v_weight = tensor_from_json(m.at("v_weight"), "mapper.v_weight");
    const json& d = j.at("discriminator");
    a.disc.hidden.weight = tensor_from_json(d.at("hidden_weight"), "discriminator.hidden_weight");
    a.disc.hidden.bias = tensor_from_json(d.at("hidden_bias"), "discriminator.hidden_bias");
    a.disc.output.weight = tensor_from_json(d.at("output_weight"), "discriminator.output_weight");
    a.disc.output.bias = tensor_from_json(d.at("output_bias"), "discriminator.output_bias");
    const json& c = j.at("config");
    a.config.lambda_att = c.at("lambda_att").get<double>();
    a.config.disc_steps = c.at("disc_steps").get<std::size_t>();
    a.config.iterations = c.at("iterations").get<std::size_t>();
    a.config.batch_size = c.at("batch_size").get<std::size_t>();
    a.config.mapper_learning_rate = c.at("mapper_learning_rate").get<double>();
    a.config.disc_learning_rate = c.at("disc_learning_rate").get<double>();
    a.config.learn_offset = c.at("learn_offset").get<bool>();
    a.config.mapper_decay = c.at("mapper_decay").get<double>();
    a.config.tail_average = c.at("tail_average").get<bool>();
    a.config.mapper_hidden = c.at("mapper_hidden").get<std::size_t>();
    a.config.disc_hidden = c.at("disc_hidden").get<std::size_t>();
    a.config.seed = c.at("seed").get<std::uint64_t>();
    a.disc_loss_history = j.at("disc_loss_history").get<std::vector<double>>();
    a.adapt_loss_history = j.at("adapt_loss_history").get<std::vector<double>>();
    a.consistency_history = j.at("consistency_history").get<std::vector<double>>();
    a.mapper.validate();
    a.disc.validate();
    if (a.mapper.dim() != source_model.input_dim() || a.disc.hidden.in_dim() != source_model.hidden_dim()) {
      throw DimensionError("adaptation dimensions do not match the loaded model");
    }
    if (j.contains("digest") && j["digest"].get<std::string>() != a.digest()) {
      throw ValidationError("adaptation digest mismatch");
    }
    return a;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed adaptation document: ") + e.what());
  }
}

void save_adapted(const AdaptedBundle& adapted, const std::filesystem::path& path) {
  write_file_atomic(path, adapted_to_json(adapted));
}

AdaptedBundle load_adapted(const std::filesystem::path& path, const ModelBundle& source_model) {
  return adapted_from_json(read_file(path), source_model);
}

}  // namespace cropmon
