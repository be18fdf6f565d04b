//
// Copyright 2026 The FedCVR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Fixed-topology multilayer perceptron (6 -> 64 -> 32 -> 1) for binary risk
// prediction, with hand-written backpropagation so that exact per-sample
// gradients are available to DP-SGD.
//
// Canonical parameter layout (all row-major, output index major):
//   W1[h1][in], b1[h1], W2[h2][h1], b2[h2], W3[h2], b3
// which for the default shape gives 6*64 + 64 + 64*32 + 32 + 32 + 1 = 2561.

#ifndef FEDCVR_MODEL_HPP_
#define FEDCVR_MODEL_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedcvr/common.hpp"

namespace fedcvr {

inline constexpr std::size_t kNumFeatures = 6;
inline constexpr double kLogitClamp = 30.0;
inline constexpr double kProbClamp = 1e-7;

using Features = std::array<double, kNumFeatures>;

struct Sample {
  Features features{};
  int label = 0;
};

/// Hidden widths are fixed at 64/32 for every experiment; smaller shapes are
/// only used to keep some unit tests fast.
struct ModelConfig {
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
};

struct ParamLayout {
  std::size_t w1, b1, w2, b2, w3, b3, total;

  explicit constexpr ParamLayout(const ModelConfig& c = {})
      : w1(0),
        b1(w1 + c.hidden1 * kNumFeatures),
        w2(b1 + c.hidden1),
        b2(w2 + c.hidden2 * c.hidden1),
        w3(b2 + c.hidden2),
        b3(w3 + c.hidden2),
        total(b3 + 1) {}
};

inline constexpr std::size_t kNumParams = ParamLayout{}.total;
static_assert(kNumParams == 2561);

inline constexpr std::size_t param_count(const ModelConfig& cfg = {}) { return ParamLayout(cfg).total; }

/// Unflattened view of the network weights, mainly for inspection and tests.
struct MlpWeights {
  std::vector<double> w1, b1, w2, b2, w3;
  double b3 = 0.0;
};

inline MlpWeights unflatten(const ParamVector& p, const ModelConfig& cfg = {}) {
  const ParamLayout l(cfg);
  if (p.size() != l.total) throw InputError("unflatten: wrong parameter count");
  auto slice = [&](std::size_t from, std::size_t to) {
    return std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(from),
                               p.begin() + static_cast<std::ptrdiff_t>(to));
  };
  return {slice(l.w1, l.b1), slice(l.b1, l.w2), slice(l.w2, l.b2),
          slice(l.b2, l.w3), slice(l.w3, l.b3), p[l.b3]};
}

inline ParamVector flatten(const MlpWeights& w) {
  std::vector<double> v;
  v.reserve(w.w1.size() + w.b1.size() + w.w2.size() + w.b2.size() + w.w3.size() + 1);
  for (const auto* part : {&w.w1, &w.b1, &w.w2, &w.b2, &w.w3}) v.insert(v.end(), part->begin(), part->end());
  v.push_back(w.b3);
  return ParamVector(std::move(v));
}

/// Fan-in uniform initialization U(-sqrt(1/fan_in), +sqrt(1/fan_in)); biases 0.
inline ParamVector init_params(std::uint64_t seed, const ModelConfig& cfg = {}) {
  const ParamLayout l(cfg);
  ParamVector p(l.total, 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t from, std::size_t to, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = from; i < to; ++i) p[i] = u(rng);
  };
  fill(l.w1, l.b1, kNumFeatures);
  fill(l.w2, l.b2, cfg.hidden1);
  fill(l.w3, l.b3, cfg.hidden2);
  return p;
}

namespace detail {

inline void check_features(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("forward: non-finite feature");
  }
}

inline double clamp_logit(double z) { return std::clamp(z, -kLogitClamp, kLogitClamp); }

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Forward pass storing post-activation hidden values; returns the raw logit.
inline double forward_trace(std::span<const double> p, const Features& x, const ModelConfig& cfg,
                            std::vector<double>& h1, std::vector<double>& h2) {
  const ParamLayout l(cfg);
  h1.resize(cfg.hidden1);
  h2.resize(cfg.hidden2);
  for (std::size_t j = 0; j < cfg.hidden1; ++j) {
    const double* row = &p[l.w1 + j * kNumFeatures];
    double a = p[l.b1 + j];
    for (std::size_t k = 0; k < kNumFeatures; ++k) a += row[k] * x[k];
    h1[j] = a > 0.0 ? a : 0.0;
  }
  for (std::size_t j = 0; j < cfg.hidden2; ++j) {
    const double* row = &p[l.w2 + j * cfg.hidden1];
    double a = p[l.b2 + j];
    for (std::size_t k = 0; k < cfg.hidden1; ++k) a += row[k] * h1[k];
    h2[j] = a > 0.0 ? a : 0.0;
  }
  double z = p[l.b3];
  for (std::size_t k = 0; k < cfg.hidden2; ++k) z += p[l.w3 + k] * h2[k];
  return z;
}

}  // namespace detail

/// P(y = 1 | x). The logit is clamped to +/-30 before the sigmoid.
inline double forward(const ParamVector& params, const Features& x, const ModelConfig& cfg = {}) {
  if (params.size() != param_count(cfg)) throw InputError("forward: wrong parameter count");
  detail::check_features(x);
  std::vector<double> h1, h2;
  return detail::sigmoid(detail::clamp_logit(detail::forward_trace(params.span(), x, cfg, h1, h2)));
}

/// Which hidden units are active (pre-activation > 0), layer 1 then layer 2.
inline std::vector<bool> activation_pattern(const ParamVector& params, const Features& x,
                                            const ModelConfig& cfg = {}) {
  if (params.size() != param_count(cfg)) throw InputError("activation_pattern: wrong parameter count");
  std::vector<double> h1, h2;
  detail::forward_trace(params.span(), x, cfg, h1, h2);
  std::vector<bool> out;
  out.reserve(h1.size() + h2.size());
  for (double v : h1) out.push_back(v > 0.0);
  for (double v : h2) out.push_back(v > 0.0);
  return out;
}

/// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(double prediction, int label) {
  const double p = std::clamp(prediction, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

/// Reusable buffers for repeated backprop calls on one thread.
struct BackpropScratch {
  std::vector<double> h1, h2, d1, d2;
};

/// Writes d(loss)/d(params) for one sample into `grad` (overwriting it) and
/// returns the sample's loss. The logit derivative is (p - y), and zero when
/// the logit clamp is active.
inline double loss_and_gradient(std::span<const double> p, const Sample& s, std::span<double> grad,
                                BackpropScratch& scratch, const ModelConfig& cfg = {}) {
  const ParamLayout l(cfg);
  auto& h1 = scratch.h1;
  auto& h2 = scratch.h2;
  const auto& x = s.features;
  const double z = detail::forward_trace(p, x, cfg, h1, h2);
  const double prob = detail::sigmoid(detail::clamp_logit(z));
  const double loss = bce_loss(prob, s.label);

  const double dz = std::abs(z) > kLogitClamp ? 0.0 : prob - static_cast<double>(s.label);

  grad[l.b3] = dz;
  auto& d2 = scratch.d2;
  d2.assign(cfg.hidden2, 0.0);
  for (std::size_t j = 0; j < cfg.hidden2; ++j) {
    grad[l.w3 + j] = dz * h2[j];
    d2[j] = h2[j] > 0.0 ? dz * p[l.w3 + j] : 0.0;
  }
  auto& d1 = scratch.d1;
  d1.assign(cfg.hidden1, 0.0);
  for (std::size_t j = 0; j < cfg.hidden2; ++j) {
    const double dj = d2[j];
    grad[l.b2 + j] = dj;
    const std::size_t row = l.w2 + j * cfg.hidden1;
    for (std::size_t k = 0; k < cfg.hidden1; ++k) {
      grad[row + k] = dj * h1[k];
      d1[k] += dj * p[row + k];
    }
  }
  for (std::size_t j = 0; j < cfg.hidden1; ++j) {
    const double dj = h1[j] > 0.0 ? d1[j] : 0.0;
    grad[l.b1 + j] = dj;
    for (std::size_t k = 0; k < kNumFeatures; ++k) grad[l.w1 + j * kNumFeatures + k] = dj * x[k];
  }
  return loss;
}

/// Exact gradient of bce_loss(forward(params, x), y) for a single sample.
inline ParamVector per_sample_gradient(const ParamVector& params, const Sample& s, const ModelConfig& cfg = {}) {
  if (params.size() != param_count(cfg)) throw InputError("per_sample_gradient: wrong parameter count");
  if (s.label != 0 && s.label != 1) throw InputError("per_sample_gradient: label must be 0 or 1");
  detail::check_features(s.features);
  ParamVector g(params.size());
  BackpropScratch scratch;
  loss_and_gradient(params.span(), s, g.span(), scratch, cfg);
  return g;
}

/// Mean BCE of the model over a set of samples.
inline double mean_loss(const ParamVector& params, std::span<const Sample> samples, const ModelConfig& cfg = {}) {
  if (samples.empty()) throw InputError("mean_loss: empty sample set");
  double total = 0.0;
  for (const auto& s : samples) total += bce_loss(forward(params, s.features, cfg), s.label);
  return total / static_cast<double>(samples.size());
}

}  // namespace fedcvr

#endif  // FEDCVR_MODEL_HPP_
