#pragma once

// Adversarial adaptation of a frozen source model to a shifted target domain.
//
//   g(x)    = x + (M (x) I_B) x + a + V tanh(U x + u)   (per step, shared over t)
//   ctx(x)  = aggregate(attend(encode(x)))          (frozen source model)
//   D(ctx)  = sigmoid(w2 . tanh(W1 ctx + b1) + b2)  (probability "source")
//
// The discriminator minimises BCE(D(ctx_S), 1) + BCE(D(ctx_T'), 0); the mapper
// minimises BCE(D(ctx_T'), 1) + lambda_att * consistency(alpha_T, alpha_T').

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cropmon/classifier.hpp"
#include "cropmon/parallel.hpp"
#include "cropmon/pipeline.hpp"

namespace cropmon {

// A step holds W composites of B bands (D = W * B). The affine part mixes
// composites with one W x W matrix shared by every band, which can express
// moving content between slots of the window.
struct MapperParams {
  std::size_t bands = 0;
  Tensor mix;       // W x W, added to the identity
  Tensor offset;    // D
  Tensor u_weight;  // R x D
  Tensor u_bias;    // R
  Tensor v_weight;  // D x R

  std::size_t window() const { return mix.rows(); }
  std::size_t dim() const { return offset.size(); }
  std::size_t residual_dim() const { return u_bias.size(); }

  // M = 0, a = 0, V = 0 so the map starts as the identity; U, u random.
  // residual_dim = 0 gives an affine-only mapper.
  static MapperParams identity(std::size_t window, std::size_t bands, std::size_t residual_dim, Rng& rng);
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void validate() const;
};

struct DiscriminatorParams {
  DenseParams hidden;  // K x H, tanh
  DenseParams output;  // 1 x K, sigmoid

  static DiscriminatorParams init(std::size_t context_dim, std::size_t hidden_dim, Rng& rng);
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void validate() const;
};

struct DaConfig {
  double lambda_att = 1.0;
  std::size_t disc_steps = 1;  // discriminator updates per mapper update
  std::size_t iterations = 400;
  std::size_t batch_size = 32;
  double mapper_learning_rate = 1e-3;
  double disc_learning_rate = 1e-3;
  // When false the offset a stays at zero.
  bool learn_offset = false;
  // L2 pull of the mapper parameters toward the identity map.
  double mapper_decay = 0.0;
  // Return the mean mapper over the second half of the iterations instead of
  // the last iterate.
  bool tail_average = false;
  std::size_t mapper_hidden = 0;
  std::size_t disc_hidden = 16;
  std::uint64_t seed = 1;
};

struct AdaptedBundle {
  static constexpr int kFormatVersion = 1;

  MapperParams mapper;
  DiscriminatorParams disc;
  DaConfig config;
  std::string source_digest;
  std::string target_digest;
  // One entry per mapper update.
  std::vector<double> disc_loss_history;
  std::vector<double> adapt_loss_history;
  std::vector<double> consistency_history;

  std::string digest() const;
};

std::vector<double> map_step(std::span<const double> x, const MapperParams& mapper);
Tensor map_steps(const Tensor& steps, const MapperParams& mapper);
WindowedSequence map_target(const WindowedSequence& x, const MapperParams& mapper);
Dataset map_dataset(const Dataset& data, const MapperParams& mapper, Execution exec = Execution::parallel);

double domain_score(std::span<const double> context, const DiscriminatorParams& disc);

// sum_t (a_t - b_t)^2 / T.
double attention_consistency(const AttentionProfile& original, const AttentionProfile& mapped);

struct AdversarialLosses {
  double disc_loss = 0.0;
  double adversarial = 0.0;  // BCE of mapped target contexts against label 1
  double consistency = 0.0;  // mean attention_consistency over the target batch
  double adapt_loss = 0.0;   // adversarial + lambda_att * consistency
};

AdversarialLosses adversarial_losses(std::span<const Tensor* const> source_batch,
                                     std::span<const Tensor* const> target_batch, const ModelBundle& model,
                                     const MapperParams& mapper, const DiscriminatorParams& disc,
                                     double lambda_att);

// Mean and per-sample BCE on raw contexts; used by tests and diagnostics.
double discriminator_loss(std::span<const std::vector<double>> source_contexts,
                          std::span<const std::vector<double>> target_contexts, const DiscriminatorParams& disc);

// One discriminator Adam step per call; exposed for the sanity tests.
struct DiscriminatorTrainer {
  DiscriminatorTrainer(DiscriminatorParams& disc, double learning_rate);
  double step(std::span<const std::vector<double>> source_contexts,
              std::span<const std::vector<double>> target_contexts);

 private:
  DiscriminatorParams* disc_;
  AdamState adam_;
};

void check_domain_pair(const Dataset& source, const Dataset& target);

// Target labels are never read.
AdaptedBundle train_da(const Dataset& source, const Dataset& target, const ModelBundle& source_model,
                       const DaConfig& config);

std::vector<double> predict_adapted(const ModelBundle& model, const AdaptedBundle& adapted,
                                    const WindowedSequence& seq);
std::vector<std::vector<double>> predict_adapted_batch(const ModelBundle& model, const AdaptedBundle& adapted,
                                                       const Dataset& data, Execution exec = Execution::parallel);
AttentionProfile mean_adapted_attention(const ModelBundle& model, const AdaptedBundle& adapted, const Dataset& data,
                                        Execution exec = Execution::parallel);
// Mean attention_consistency between original and mapped inputs.
double mean_attention_consistency(const ModelBundle& model, const AdaptedBundle& adapted, const Dataset& data,
                                  Execution exec = Execution::parallel);

std::string adapted_to_json(const AdaptedBundle& adapted);
// Refuses documents whose source digest differs from `source_model.digest()`.
AdaptedBundle adapted_from_json(const std::string& text, const ModelBundle& source_model);
void save_adapted(const AdaptedBundle& adapted, const std::filesystem::path& path);
AdaptedBundle load_adapted(const std::filesystem::path& path, const ModelBundle& source_model);

}  // namespace cropmon
