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

// DP-SGD primitives (per-sample clipping, Gaussian noise on the clipped sum)
// and a Renyi-DP accountant for the (subsampled) Gaussian mechanism.

#ifndef FEDCVR_PRIVACY_HPP_
#define FEDCVR_PRIVACY_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedcvr/common.hpp"
#include "json.hpp"

namespace fedcvr {

struct PrivacyConfig {
  double clip_norm = 1.0;         // C
  double noise_multiplier = 1.0;  // sigma; 0 means clipping only
  double delta = 1e-5;
  double sampling_rate = 1.0;     // q
  bool enabled = false;

  void validate() const {
    if (!(clip_norm > 0.0) || !std::isfinite(clip_norm)) throw ConfigError("clip_norm must be positive");
    if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
      throw ConfigError("noise_multiplier must be non-negative");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) throw ConfigError("sampling_rate must lie in (0, 1]");
  }
};

/// Rescales g so that its L2 norm is min(|g|, C). The result always satisfies
/// |result| <= C as computed by ParamVector::l2_norm, which makes clipping
/// idempotent bit-for-bit.
inline ParamVector clip_gradient(const ParamVector& g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ConfigError("clip_gradient: clip norm must be positive");
  if (!g.all_finite()) throw NumericError("clip_gradient: non-finite gradient");
  const double norm = g.l2_norm();
  if (norm <= clip_norm) return g;
  double scale = clip_norm / norm;
  ParamVector out(g.size());
  for (;;) {
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * scale;
    if (out.l2_norm() <= clip_norm) return out;
    scale = std::nextafter(scale, 0.0);
  }
}

/// Sum of clipped per-sample gradients plus N(0, (sigma C)^2) per coordinate,
/// drawing from the caller's noise stream. The caller divides by batch size.
inline ParamVector noisy_batch_gradient(std::span<const ParamVector> per_sample_grads, const PrivacyConfig& cfg,
                                        std::mt19937_64& noise_rng) {
  if (per_sample_grads.empty()) throw InputError("noisy_batch_gradient: empty batch");
  if (!cfg.enabled) throw ConfigError("noisy_batch_gradient: privacy is disabled");
  ParamVector sum(per_sample_grads.front().size(), 0.0);
  for (const auto& g : per_sample_grads) {
    require_same_size(sum, g, "noisy_batch_gradient");
    const ParamVector c = clip_gradient(g, cfg.clip_norm);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += c[i];
  }
  if (cfg.noise_multiplier > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_multiplier * cfg.clip_norm);
    for (double& x : sum) x += noise(noise_rng);
  }
  return sum;
}

inline ParamVector noisy_batch_gradient(std::span<const ParamVector> per_sample_grads, const PrivacyConfig& cfg,
                                        std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return noisy_batch_gradient(per_sample_grads, cfg, rng);
}

// ---------------------------------------------------------------------------
// Renyi-DP accounting

inline constexpr std::array<double, 18> kRdpOrders{1.25, 1.5, 1.75, 2, 2.5, 3, 4, 5, 6,
                                                   8, 10, 12, 16, 20, 32, 64, 128, 256};

namespace detail {

// log A_alpha for integer alpha, with
//   A_alpha = sum_k C(alpha, k) (1-q)^(alpha-k) q^k exp((k^2 - k) / (2 sigma^2)),
// evaluated with log-sum-exp.
inline double log_a_integer(double q, double sigma, int alpha) {
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(alpha) + 1);
  const double log_q = std::log(q), log_1mq = std::log1p(-q);
  const double a = static_cast<double>(alpha);
  for (int k = 0; k <= alpha; ++k) {
    const double kd = static_cast<double>(k);
    const double log_binom = std::lgamma(a + 1) - std::lgamma(kd + 1) - std::lgamma(a - kd + 1);
    terms.push_back(log_binom + (a - kd) * log_1mq + kd * log_q + (kd * kd - kd) / (2.0 * sigma * sigma));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

inline double rdp_integer(double q, double sigma, int alpha) {
  return log_a_integer(q, sigma, alpha) / static_cast<double>(alpha - 1);
}

}  // namespace detail

/// RDP of one step of the Gaussian mechanism with sampling rate q at order
/// alpha. Exact alpha / (2 sigma^2) for q = 1; otherwise the integer-order
/// binomial expansion, linearly interpolated between neighbouring integer
/// orders. Orders in (1, 2) take the alpha = 2 value, which upper-bounds them.
/// Returns +inf for sigma = 0.
inline double rdp_of_step(double q, double sigma, double alpha) {
  if (!(alpha > 1.0)) throw ConfigError("rdp_of_step: order must exceed 1");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("rdp_of_step: sampling rate must lie in (0, 1]");
  if (!(sigma >= 0.0)) throw ConfigError("rdp_of_step: noise multiplier must be non-negative");
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);
  if (alpha <= 2.0) return detail::rdp_integer(q, sigma, 2);
  const double lo = std::floor(alpha);
  if (lo == alpha) return detail::rdp_integer(q, sigma, static_cast<int>(lo));
  const double r_lo = detail::rdp_integer(q, sigma, static_cast<int>(lo));
  const double r_hi = detail::rdp_integer(q, sigma, static_cast<int>(lo) + 1);
  return r_lo + (alpha - lo) * (r_hi - r_lo);
}

struct EpsilonResult {
  double epsilon = 0.0;
  double best_order = 0.0;
};

class PrivacyLedger {
 public:
  PrivacyLedger() : PrivacyLedger(PrivacyConfig{}) {}
  explicit PrivacyLedger(PrivacyConfig cfg) : config_(cfg) {
    config_.validate();
    totals_.fill(0.0);
  }

  const PrivacyConfig& config() const { return config_; }
  std::uint64_t steps_taken() const { return steps_; }
  static constexpr const std::array<double, kRdpOrders.size()>& orders() { return kRdpOrders; }
  const std::array<double, kRdpOrders.size()>& rdp_totals() const { return totals_; }

  /// Adds `steps` identical mechanism invocations.
  void compose(std::uint64_t steps) {
    if (steps == 0) return;
    for (std::size_t i = 0; i < kRdpOrders.size(); ++i) {
      totals_[i] += static_cast<double>(steps) * rdp_of_step(config_.sampling_rate, config_.noise_multiplier,
                                                             kRdpOrders[i]);
    }
    steps_ += steps;
  }

  /// eps = min over orders of RDP(alpha) + ln(1/delta) / (alpha - 1). For
  /// q = 1 the RDP curve is linear in alpha, so the continuous optimum
  /// alpha* = 1 + sqrt(2 sigma^2 ln(1/delta) / T) is used directly.
  EpsilonResult to_epsilon(double delta) const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("to_epsilon: delta must lie in (0, 1)");
    if (steps_ == 0) throw AccountingError("to_epsilon: ledger has no steps");
    const double log_inv_delta = std::log(1.0 / delta);
    EpsilonResult best{std::numeric_limits<double>::infinity(), 0.0};
    for (std::size_t i = 0; i < kRdpOrders.size(); ++i) {
      const double eps = totals_[i] + log_inv_delta / (kRdpOrders[i] - 1.0);
      if (eps < best.epsilon) best = {eps, kRdpOrders[i]};
    }
    const double sigma = config_.noise_multiplier;
    if (config_.sampling_rate == 1.0 && sigma > 0.0) {
      const double t = static_cast<double>(steps_);
      const double alpha = 1.0 + std::sqrt(2.0 * sigma * sigma * log_inv_delta / t);
      const double eps = t * alpha / (2.0 * sigma * sigma) + log_inv_delta / (alpha - 1.0);
      if (eps < best.epsilon) best = {eps, alpha};
    }
    if (!std::isfinite(best.epsilon)) throw AccountingError("to_epsilon: every order yields an infinite budget");
    return best;
  }

  nlohmann::ordered_json report() const {
    nlohmann::ordered_json j;
    j["steps"] = steps_;
    j["sigma"] = config_.noise_multiplier;
    j["clip_norm"] = config_.clip_norm;
    j["q"] = config_.sampling_rate;
    j["delta"] = config_.delta;
    if (steps_ > 0 && config_.noise_multiplier > 0.0) {
      const auto e = to_epsilon(config_.delta);
      j["epsilon"] = e.epsilon;
      j["best_alpha"] = e.best_order;
    } else {
      j["epsilon"] = nullptr;
      j["best_alpha"] = nullptr;
    }
    return j;
  }

 private:
  PrivacyConfig config_;
  std::uint64_t steps_ = 0;
  std::array<double, kRdpOrders.size()> totals_{};
};

inline PrivacyLedger compose(PrivacyLedger ledger, std::uint64_t steps) {
  ledger.compose(steps);
  return ledger;
}

inline EpsilonResult to_epsilon(const PrivacyLedger& ledger, double delta) { return ledger.to_epsilon(delta); }

/// Convenience: epsilon after `steps` steps at (q, sigma, delta).
inline EpsilonResult epsilon_for(double q, double sigma, std::uint64_t steps, double delta) {
  PrivacyConfig cfg;
  cfg.sampling_rate = q;
  cfg.noise_multiplier = sigma;
  cfg.delta = delta;
  cfg.enabled = true;
  PrivacyLedger ledger(cfg);
  ledger.compose(steps);
  return ledger.to_epsilon(delta);
}

}  // namespace fedcvr

#endif  // FEDCVR_PRIVACY_HPP_
