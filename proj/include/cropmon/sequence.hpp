#pragma once

#include <cstddef>

#include "cropmon/tensor.hpp"

namespace cropmon {

// One pixel's raw series: T_raw composites x B bands of reflectance in [0, 1].
struct SpectralSequence {
  Tensor values;
  int composite_period_days = 8;

  std::size_t composites() const { return values.rows(); }
  std::size_t bands() const { return values.cols(); }
};

// Model input: step t concatenates composites [t*stride, t*stride + window).
struct WindowedSequence {
  Tensor steps;  // T x D, D = window * B
  std::size_t window_composites = 4;
  std::size_t stride_composites = 1;

  std::size_t length() const { return steps.rows(); }
  std::size_t feature_dim() const { return steps.cols(); }
};

}  // namespace cropmon
