#pragma once

// Reverse-mode differentiation over a linear tape of tensor-valued nodes.
//
// Nodes are appended in evaluation order, so the tape is topologically
// sorted by construction and backward() is a single reverse sweep. Only
// nodes reachable from a requires_grad leaf carry a backward closure; data
// inputs and frozen parameters cost nothing in the reverse sweep.
//
// Typical use:
//
//   Tape tape;
//   Var w = tape.parameter(weights);
//   Var x = tape.constant(batch);
//   Var loss = mean(square(linear(x, w)));
//   tape.backward(loss);
//   const Tensor& dw = tape.grad(w);

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cropmon/tensor.hpp"

namespace cropmon::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(const Tensor& value);
  Var constant(const Tensor& value);
  Var constant(Tensor&& value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient of the last backward() loss w.r.t. `v`; zeros when `v` is not
  // on any path to the loss.
  Tensor grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(Tensor value, std::span<const Var> inputs, Backward backward);
  Tensor& grad_slot(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };

  void check(Var v) const;

  std::vector<Node> nodes_;
  bool backpropagated_ = false;
};

Var matmul(Var a, Var b);
// x (N x K) times W^T (W is H x K) plus optional bias (length H).
Var linear(Var x, Var weight, Var bias);
Var linear(Var x, Var weight);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);  // elementwise
Var scale(Var a, double s);

Var sigmoid(Var a);
Var tanh(Var a);
Var square(Var a);

// Horizontal concatenation of matrices sharing a row count.
Var concat_cols(std::span<const Var> parts);

// Row-wise max-subtracted softmax.
Var softmax_rows(Var a);

// Row-wise sum over steps: out[n] = sum_t alpha[n, t] * steps[t][n].
Var weighted_sum(Var alpha, std::span<const Var> steps);

// Kronecker product a (W x W) with the n x n identity: out[w*n+b, v*n+b] = a[w, v].
Var kron_identity(Var a, std::size_t n);

Var sum(Var a);
Var mean(Var a);

// Mean over rows of -ln(max(p[n, label_n], floor)); gradient is zero where
// the floor is active.
Var cross_entropy(Var probs, std::span<const std::size_t> labels);

// Mean binary cross-entropy of probabilities p (N x 1) against targets.
Var binary_cross_entropy(Var p, std::span<const double> targets);

}  // namespace cropmon::ad
