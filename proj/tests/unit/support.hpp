#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cropmon/phenology.hpp"
#include "cropmon/pipeline.hpp"
#include "cropmon/rng.hpp"
#include "cropmon/tensor.hpp"

namespace cropmon::testing {

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

// Central differences of f with respect to every entry of `param`, which f
// must read by reference.
inline Tensor numeric_gradient(const std::function<double()>& f, Tensor& param, double h = 1e-5) {
  Tensor g(param.shape());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = f();
    param[i] = saved - h;
    const double down = f();
    param[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|, floor); the floor keeps entries that are zero up to
// finite-difference noise from dominating.
inline double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Minimum over every monotone alignment path of 1-D sequences, enumerated
// explicitly rather than by dynamic programming.
inline double brute_force_dtw(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double cost) {
    cost += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, cost);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, cost);
    if (j + 1 < b.size()) walk(i, j + 1, cost);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, cost);
  };
  walk(0, 0, 0.0);
  return best;
}

// All sequences over {0, 1, 2} of lengths 1..max_len.
inline std::vector<std::vector<double>> ternary_sequences(std::size_t max_len) {
  std::vector<std::vector<double>> out;
  std::vector<std::vector<double>> level = {{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<double>> next;
    for (const auto& s : level) {
      for (double v : {0.0, 1.0, 2.0}) {
        auto e = s;
        e.push_back(v);
        next.push_back(e);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return out;
}

// Probability that a random positive outranks a random negative, counting
// ties as one half, by looping over every pair.
inline double pair_count_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline Dataset two_class_set(std::size_t per_class, int shift_days, std::uint64_t seed, double sigma = 0.02,
                             double cloud = 0.03) {
  SeasonScenario sc;
  sc.name = "shift" + std::to_string(shift_days);
  sc.planting_shift_days = shift_days;
  sc.noise_sigma = sigma;
  sc.cloud_drop_prob = cloud;
  const std::vector<ClassCount> mix = {{"corn", per_class}, {"soybean", per_class}};
  return Dataset::from_labeled(synth_dataset(mix, default_templates(), sc, seed), {"corn", "soybean"});
}

}  // namespace cropmon::testing
