#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cropmon/tensor.hpp"

namespace cropmon {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<Tensor* const> params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  // One bias-corrected Adam update of `params` in place.
  void update(std::span<Tensor* const> params, std::span<const Tensor> grads);

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t step_ = 0;
};

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace cropmon
