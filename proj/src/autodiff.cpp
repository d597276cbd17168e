#include "cropmon/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cropmon/errors.hpp"

namespace cropmon::ad {

const Tensor& Var::value() const {
  if (!tape) throw StateError("value() of an unbound Var");
  return tape->value(*this);
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw StateError("Var does not belong to this tape");
  }
}

Var Tape::parameter(const Tensor& value) {
  nodes_.push_back(Node{value, {}, true, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(const Tensor& value) {
  nodes_.push_back(Node{value, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor&& value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id].requires_grad;
}

Tensor Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id];
  if (!backpropagated_ || n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) {
    check(in);
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward() called before any forward operation");
  check(loss);
  if (nodes_[loss.id].value.size() != 1) {
    throw StateError("backward() requires a scalar loss, got shape " +
                     nodes_[loss.id].value.shape_string());
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Closures only write into their inputs' gradients, which precede node i.
    n.backward(*this, n.grad);
  }
  backpropagated_ = true;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.tape) throw StateError("operation on an unbound Var");
  return *a.tape;
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw StateError("operands live on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " expects a matrix, got " + t.shape_string());
}

template <typename Fn>
Var unary_elementwise(Var a, Fn&& fn, Tape::Backward back) {
  Tape& t = tape_of(a);
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  const Var in[] = {a};
  return t.push(std::move(out), in, std::move(back));
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  Tensor out = cropmon::matmul(av, bv);
  const Var in[] = {a, b};
  return t.push(std::move(out), in, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    const Tensor& y = tp.value(b);
    const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_slot(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g.at(i, j) * y.at(p, j);
          ga.at(i, p) += acc;
        }
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_slot(b.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = x.at(i, p);
          for (std::size_t j = 0; j < n; ++j) gb.at(p, j) += xip * g.at(i, j);
        }
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_same_tape(x, weight);
  Tape& t = tape_of(x);
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(weight);
  require_matrix(xv, "linear input");
  require_matrix(wv, "linear weight");
  const std::size_t n = xv.rows(), k = xv.cols(), h = wv.rows();
  if (wv.cols() != k) {
    throw DimensionError("linear shape mismatch: input " + xv.shape_string() + " vs weight " +
                         wv.shape_string());
  }
  const bool has_bias = bias.valid();
  if (has_bias) {
    require_same_tape(x, bias);
    if (t.value(bias).size() != h) {
      throw DimensionError("linear bias " + t.value(bias).shape_string() + " does not match weight " +
                           wv.shape_string());
    }
  }
  Tensor out = Tensor::matrix(n, h);
  const double* bptr = has_bias ? t.value(bias).data().data() : nullptr;
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = xv.row(r).data();
    double* orow = out.row(r).data();
    for (std::size_t j = 0; j < h; ++j) {
      const double* wr = wv.row(j).data();
      double acc = bptr ? bptr[j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += xr[p] * wr[p];
      orow[j] = acc;
    }
  }
  std::vector<Var> in = {x, weight};
  if (has_bias) in.push_back(bias);
  return t.push(std::move(out), in, [x, weight, bias, has_bias](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    const Tensor& wv = tp.value(weight);
    const std::size_t n = xv.rows(), k = xv.cols(), h = wv.rows();
    if (tp.requires_grad(x)) {
      Tensor& gx = tp.grad_slot(x.id);
      for (std::size_t r = 0; r < n; ++r) {
        double* gxr = gx.row(r).data();
        for (std::size_t j = 0; j < h; ++j) {
          const double gj = g.at(r, j);
          if (gj == 0.0) continue;
          const double* wr = wv.row(j).data();
          for (std::size_t p = 0; p < k; ++p) gxr[p] += gj * wr[p];
        }
      }
    }
    if (tp.requires_grad(weight)) {
      Tensor& gw = tp.grad_slot(weight.id);
      for (std::size_t r = 0; r < n; ++r) {
        const double* xr = xv.row(r).data();
        for (std::size_t j = 0; j < h; ++j) {
          const double gj = g.at(r, j);
          if (gj == 0.0) continue;
          double* gwr = gw.row(j).data();
          for (std::size_t p = 0; p < k; ++p) gwr[p] += gj * xr[p];
        }
      }
    }
    if (has_bias && tp.requires_grad(bias)) {
      Tensor& gb = tp.grad_slot(bias.id);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < h; ++j) gb[j] += g.at(r, j);
    }
  });
}

Var linear(Var x, Var weight) { return linear(x, weight, Var{}); }

Var operator+(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const Var in[] = {a, b};
  return t.push(std::move(out), in, [a, b](Tape& tp, const Tensor& g) {
    for (Var v : {a, b}) {
      if (!tp.requires_grad(v)) continue;
      Tensor& gv = tp.grad_slot(v.id);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var operator-(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const Var in[] = {a, b};
  return t.push(std::move(out), in, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_slot(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var operator*(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const Var in[] = {a, b};
  return t.push(std::move(out), in, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(a);
    const Tensor& bv = tp.value(b);
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_slot(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary_elementwise(
      a, [s](double x) { return s * x; },
      [a, s](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
      });
}

Var kron_identity(Var a, std::size_t n) {
  Tape& t = tape_of(a);
  const Tensor& av = t.value(a);
  if (av.rank() != 2 || n == 0) throw DimensionError("kron_identity needs a matrix and n > 0, got " + av.shape_string());
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = Tensor::matrix(r * n, c * n);
  for (std::size_t w = 0; w < r; ++w)
    for (std::size_t v = 0; v < c; ++v)
      for (std::size_t b = 0; b < n; ++b) out.at(w * n + b, v * n + b) = av.at(w, v);
  const Var in[] = {a};
  return t.push(std::move(out), in, [a, n, r, c](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_slot(a.id);
    for (std::size_t w = 0; w < r; ++w)
      for (std::size_t v = 0; v < c; ++v)
        for (std::size_t b = 0; b < n; ++b) ga.at(w, v) += g.at(w * n + b, v * n + b);
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const std::size_t out_id = t.size();
  return unary_elementwise(
      a, [](double x) { return cropmon::sigmoid(x); },
      [a, out_id](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(Var{&tp, out_id});
        Tensor& ga = tp.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  const std::size_t out_id = t.size();
  return unary_elementwise(
      a, [](double x) { return std::tanh(x); },
      [a, out_id](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(Var{&tp, out_id});
        Tensor& ga = tp.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      });
}

Var square(Var a) {
  return unary_elementwise(
      a, [](double x) { return x * x; },
      [a](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero parts");
  Tape& t = tape_of(parts.front());
  const std::size_t n = t.value(parts.front()).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    require_same_tape(parts.front(), p);
    const Tensor& v = t.value(p);
    require_matrix(v, "concat_cols");
    if (v.rows() != n) {
      throw DimensionError("concat_cols row mismatch: " + t.value(parts.front()).shape_string() +
                           " vs " + v.shape_string());
    }
    total += v.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = t.value(p);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + offset);
    offset += v.cols();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [in](Tape& tp, const Tensor& g) {
    std::size_t offset = 0;
    for (Var p : in) {
      const std::size_t c = tp.value(p).cols();
      if (tp.requires_grad(p)) {
        Tensor& gp = tp.grad_slot(p.id);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) gp.at(r, j) += g.at(r, offset + j);
      }
      offset += c;
    }
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = t.value(a);
  require_matrix(x, "softmax_rows");
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = cropmon::softmax(x.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  const std::size_t out_id = t.size();
  const Var in[] = {a};
  return t.push(std::move(out), in, [a, out_id](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value(Var{&tp, out_id});
    Tensor& ga = tp.grad_slot(a.id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g.at(r, j) * y.at(r, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga.at(r, j) += y.at(r, j) * (g.at(r, j) - dot);
    }
  });
}

Var weighted_sum(Var alpha, std::span<const Var> steps) {
  Tape& t = tape_of(alpha);
  const Tensor& av = t.value(alpha);
  require_matrix(av, "weighted_sum weights");
  if (av.cols() != steps.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(steps.size()) + " steps but weights " +
                         av.shape_string());
  }
  if (steps.empty()) throw DimensionError("weighted_sum of zero steps");
  const Tensor& first = t.value(steps.front());
  require_matrix(first, "weighted_sum step");
  const std::size_t n = first.rows(), h = first.cols();
  if (av.rows() != n) {
    throw DimensionError("weighted_sum: weights " + av.shape_string() + " vs step " + first.shape_string());
  }
  Tensor out = Tensor::matrix(n, h);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    require_same_tape(alpha, steps[s]);
    const Tensor& hv = t.value(steps[s]);
    require_same_shape(first, hv, "weighted_sum step");
    for (std::size_t r = 0; r < n; ++r) {
      const double w = av.at(r, s);
      for (std::size_t j = 0; j < h; ++j) out.at(r, j) += w * hv.at(r, j);
    }
  }
  std::vector<Var> in;
  in.reserve(steps.size() + 1);
  in.push_back(alpha);
  in.insert(in.end(), steps.begin(), steps.end());
  return t.push(std::move(out), in, [in](Tape& tp, const Tensor& g) {
    const Var alpha = in.front();
    const Tensor& av = tp.value(alpha);
    const bool want_alpha = tp.requires_grad(alpha);
    for (std::size_t s = 0; s + 1 < in.size(); ++s) {
      const Var step = in[s + 1];
      const Tensor& hv = tp.value(step);
      if (want_alpha) {
        Tensor& ga = tp.grad_slot(alpha.id);
        for (std::size_t r = 0; r < hv.rows(); ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < hv.cols(); ++j) acc += g.at(r, j) * hv.at(r, j);
          ga.at(r, s) += acc;
        }
      }
      if (tp.requires_grad(step)) {
        Tensor& gh = tp.grad_slot(step.id);
        for (std::size_t r = 0; r < hv.rows(); ++r) {
          const double w = av.at(r, s);
          for (std::size_t j = 0; j < hv.cols(); ++j) gh.at(r, j) += w * g.at(r, j);
        }
      }
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double total = 0.0;
  for (double x : t.value(a).data()) total += x;
  const Var in[] = {a};
  return t.push(Tensor::vector({total}), in, [a](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_slot(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(tape_of(a).value(a).size());
  return scale(sum(a), 1.0 / n);
}

Var cross_entropy(Var probs, std::span<const std::size_t> labels) {
  Tape& t = tape_of(probs);
  const Tensor& p = t.value(probs);
  require_matrix(p, "cross_entropy");
  if (labels.size() != p.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         p.shape_string() + " probabilities");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    if (labels[r] >= p.cols()) {
      throw IndexError("cross_entropy label " + std::to_string(labels[r]) + " out of range for " +
                       std::to_string(p.cols()) + " classes");
    }
    total += -std::log(std::max(p.at(r, labels[r]), kProbabilityFloor));
  }
  const double n = static_cast<double>(p.rows());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const Var in[] = {probs};
  return t.push(Tensor::vector({total / n}), in, [probs, lab, n](Tape& tp, const Tensor& g) {
    const Tensor& p = tp.value(probs);
    Tensor& gp = tp.grad_slot(probs.id);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const double pr = p.at(r, lab[r]);
      if (pr > kProbabilityFloor) gp.at(r, lab[r]) += -g[0] / (n * pr);
    }
  });
}

Var binary_cross_entropy(Var p, std::span<const double> targets) {
  Tape& t = tape_of(p);
  const Tensor& pv = t.value(p);
  if (pv.size() != targets.size()) {
    throw DimensionError("binary_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         pv.shape_string() + " probabilities");
  }
  if (targets.empty()) throw ValidationError("binary_cross_entropy of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double q = std::clamp(pv[i], kProbabilityFloor, 1.0 - kProbabilityFloor);
    total += -(targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q));
  }
  const double n = static_cast<double>(pv.size());
  std::vector<double> tgt(targets.begin(), targets.end());
  const Var in[] = {p};
  return t.push(Tensor::vector({total / n}), in, [p, tgt, n](Tape& tp, const Tensor& g) {
    const Tensor& pv = tp.value(p);
    Tensor& gp = tp.grad_slot(p.id);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double q = pv[i];
      if (q <= kProbabilityFloor || q >= 1.0 - kProbabilityFloor) continue;
      gp[i] += g[0] * (-(tgt[i] / q) + (1.0 - tgt[i]) / (1.0 - q)) / n;
    }
  });
}

}  // namespace cropmon::ad
