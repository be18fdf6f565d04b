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

// Server-side aggregation strategies. The element-wise recurrences are free
// functions over explicit state so they can be checked in isolation; the
// Strategy classes wrap them behind one interface for the round engine.
//
// Update averaging: adaptive optimizers use the uniform mean of client deltas,
// FedAvg/FedProx/FedCluster use the sample-size weighted mean of client
// weights.

#ifndef FEDCVR_STRATEGIES_HPP_
#define FEDCVR_STRATEGIES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedcvr/common.hpp"

namespace fedcvr {

/// What a client sends back after local training.
struct RoundUpdate {
  int client_id = 0;
  ParamVector pseudo_gradient;  // delta w = w_broadcast - w_local_final
  ParamVector local_params;     // w_local_final
  std::size_t n_samples = 0;
  double local_loss = 0.0;
  std::uint64_t noise_steps = 0;
};

struct StrategyConfig {
  double server_lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double tau = 1e-3;
  double prox_mu = 0.01;
  std::size_t n_clusters = 2;

  void validate() const {
    if (!(server_lr > 0.0)) throw ConfigError("server_lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(prox_mu >= 0.0)) throw ConfigError("prox_mu must be non-negative");
    if (n_clusters < 1) throw ConfigError("n_clusters must be at least 1");
  }
};

inline constexpr std::array<std::string_view, 6> kStrategyNames{"fedavg",     "fedprox",  "fedcluster",
                                                                "fedadagrad", "fedyogi", "fedcvr"};

inline bool is_strategy_name(std::string_view name) {
  return std::find(kStrategyNames.begin(), kStrategyNames.end(), name) != kStrategyNames.end();
}

namespace detail {

inline std::vector<const RoundUpdate*> sorted_by_client(std::span<const RoundUpdate> updates) {
  std::vector<const RoundUpdate*> out;
  out.reserve(updates.size());
  for (const auto& u : updates) out.push_back(&u);
  std::stable_sort(out.begin(), out.end(),
                   [](const RoundUpdate* a, const RoundUpdate* b) { return a->client_id < b->client_id; });
  return out;
}

inline void check_finite(const ParamVector& v, const char* what) {
  if (!v.all_finite()) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace detail

/// Uniform mean of pseudo-gradients, summed in ascending client id order.
inline ParamVector aggregate_mean(std::span<const RoundUpdate> updates) {
  if (updates.empty()) throw AggregationError("aggregate_mean: no updates");
  const auto ordered = detail::sorted_by_client(updates);
  ParamVector sum(ordered.front()->pseudo_gradient.size(), 0.0);
  for (const auto* u : ordered) {
    require_same_size(sum, u->pseudo_gradient, "aggregate_mean");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += u->pseudo_gradient[i];
  }
  const double count = static_cast<double>(ordered.size());
  for (double& x : sum) x /= count;
  return sum;
}

/// Sample-size weighted average of the clients' final local weights. Updates
/// without local_params fall back to w - pseudo_gradient.
inline ParamVector fedavg_step(const ParamVector& w, std::span<const RoundUpdate> updates) {
  if (updates.empty()) throw AggregationError("fedavg_step: no updates");
  const auto ordered = detail::sorted_by_client(updates);
  std::size_t total = 0;
  for (const auto* u : ordered) total += u->n_samples;
  if (total == 0) throw AggregationError("fedavg_step: total sample count is zero");
  ParamVector out(w.size(), 0.0);
  for (const auto* u : ordered) {
    const double coef = static_cast<double>(u->n_samples) / static_cast<double>(total);
    if (!u->local_params.empty()) {
      require_same_size(out, u->local_params, "fedavg_step");
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * u->local_params[i];
    } else {
      require_same_size(out, u->pseudo_gradient, "fedavg_step");
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * (w[i] - u->pseudo_gradient[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive server optimizers

/// First/second moment state shared by FedCVR and FedYogi. `t` counts
/// completed rounds.
struct MomentState {
  ParamVector m;
  ParamVector v;
  std::uint64_t t = 0;
};

struct AdagradState {
  ParamVector v;
};

namespace detail {

inline void ensure_shape(ParamVector& v, std::size_t n) {
  if (v.empty()) v = ParamVector(n, 0.0);
  if (v.size() != n) throw InputError("optimizer state has the wrong length");
}

}  // namespace detail

/// Adam-style server step on an already aggregated update g:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   w <- w - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + tau)
inline ParamVector fedcvr_update(MomentState& s, const ParamVector& w, const ParamVector& g,
                                 const StrategyConfig& cfg) {
  require_same_size(w, g, "fedcvr_update");
  detail::ensure_shape(s.m, w.size());
  detail::ensure_shape(s.v, w.size());
  const std::uint64_t t = s.t + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  ParamVector out(w.size());
  MomentState next{ParamVector(w.size()), ParamVector(w.size()), t};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double m = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g[i];
    const double v = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    next.m[i] = m;
    next.v[i] = v;
    out[i] = w[i] - cfg.server_lr * m_hat / (std::sqrt(v_hat) + cfg.tau);
  }
  detail::check_finite(out, "fedcvr_update");
  s = std::move(next);
  return out;
}

/// Yogi: additive second moment v <- v - (1-b2) g^2 sign(v - g^2), otherwise
/// identical to fedcvr_update (same bias corrections).
inline ParamVector fedyogi_update(MomentState& s, const ParamVector& w, const ParamVector& g,
                                  const StrategyConfig& cfg) {
  require_same_size(w, g, "fedyogi_update");
  detail::ensure_shape(s.m, w.size());
  detail::ensure_shape(s.v, w.size());
  const std::uint64_t t = s.t + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  ParamVector out(w.size());
  MomentState next{ParamVector(w.size()), ParamVector(w.size()), t};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g2 = g[i] * g[i];
    const double diff = s.v[i] - g2;
    const double sign = static_cast<double>((diff > 0.0) - (diff < 0.0));
    const double m = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g[i];
    const double v = s.v[i] - (1.0 - cfg.beta2) * g2 * sign;
    next.m[i] = m;
    next.v[i] = v;
    out[i] = w[i] - cfg.server_lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.tau);
  }
  detail::check_finite(out, "fedyogi_update");
  s = std::move(next);
  return out;
}

/// Adagrad: v += g^2;  w <- w - lr g / (sqrt(v) + tau). No momentum.
inline ParamVector fedadagrad_update(AdagradState& s, const ParamVector& w, const ParamVector& g,
                                     const StrategyConfig& cfg) {
  require_same_size(w, g, "fedadagrad_update");
  detail::ensure_shape(s.v, w.size());
  ParamVector out(w.size());
  ParamVector v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = s.v[i] + g[i] * g[i];
    out[i] = w[i] - cfg.server_lr * g[i] / (std::sqrt(v[i]) + cfg.tau);
  }
  detail::check_finite(out, "fedadagrad_update");
  s.v = std::move(v);
  return out;
}

inline std::pair<ParamVector, MomentState> fedcvr_step(MomentState state, const ParamVector& w,
                                                       std::span<const RoundUpdate> updates,
                                                       const StrategyConfig& cfg) {
  auto next = fedcvr_update(state, w, aggregate_mean(updates), cfg);
  return {std::move(next), std::move(state)};
}

inline std::pair<ParamVector, MomentState> fedyogi_step(MomentState state, const ParamVector& w,
                                                        std::span<const RoundUpdate> updates,
                                                        const StrategyConfig& cfg) {
  auto next = fedyogi_update(state, w, aggregate_mean(updates), cfg);
  return {std::move(next), std::move(state)};
}

inline std::pair<ParamVector, AdagradState> fedadagrad_step(AdagradState state, const ParamVector& w,
                                                            std::span<const RoundUpdate> updates,
                                                            const StrategyConfig& cfg) {
  auto next = fedadagrad_update(state, w, aggregate_mean(updates), cfg);
  return {std::move(next), std::move(state)};
}

struct ProxPenalty {
  double loss = 0.0;
  ParamVector gradient;
};

/// (mu/2) |w_local - w_global|^2 and its gradient mu (w_local - w_global).
inline ProxPenalty fedprox_penalty(const ParamVector& w_local, const ParamVector& w_global, double mu) {
  require_same_size(w_local, w_global, "fedprox_penalty");
  if (!(mu >= 0.0)) throw ConfigError("fedprox_penalty: mu must be non-negative");
  ProxPenalty p{0.0, ParamVector(w_local.size())};
  double sq = 0.0;
  for (std::size_t i = 0; i < w_local.size(); ++i) {
    const double d = w_local[i] - w_global[i];
    sq += d * d;
    p.gradient[i] = mu * d;
  }
  p.loss = 0.5 * mu * sq;
  return p;
}

// ---------------------------------------------------------------------------
// Client clustering for FedCluster

/// Per-client summary: standardized feature means followed by the positive
/// label rate.
struct ClientSummary {
  int client_id = 0;
  std::size_t n_samples = 0;
  std::vector<double> features;
};

struct Clustering {
  std::vector<int> assignment;  // indexed like the input summaries
  std::size_t n_clusters = 0;
  std::vector<std::string> warnings;
};

/// Lloyd's k-means with deterministic seeding: the first centre is a seeded
/// uniform pick, the rest are farthest-point picks (ties to the lowest index).
/// Distance ties go to the lowest cluster. Empty clusters are dropped and
/// clusters are renumbered by their lowest member.
inline Clustering kmeans_assign(std::span<const ClientSummary> points, std::size_t k, std::uint64_t seed) {
  const std::size_t m = points.size();
  if (m == 0) throw ConfigError("kmeans: no clients");
  if (k < 1 || k > m) throw ConfigError("kmeans: n_clusters must lie in [1, number of clients]");
  const std::size_t dim = points.front().features.size();
  auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
  };

  std::mt19937_64 rng(hash64(seed, "kmeans"));
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng() % m)};
  while (chosen.size() < k) {
    std::size_t best = m;
    double best_d = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) dmin = std::min(dmin, dist2(points[i].features, points[c].features));
      if (dmin > best_d) {
        best_d = dmin;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  std::vector<std::vector<double>> centres;
  for (std::size_t c : chosen) centres.push_back(points[c].features);

  std::vector<int> assign(m, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      int best = 0;
      double best_d = dist2(points[i].features, centres[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist2(points[i].features, centres[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> sum(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (assign[i] != static_cast<int>(c)) continue;
        for (std::size_t d = 0; d < dim; ++d) sum[d] += points[i].features[d];
        ++count;
      }
      if (count == 0) continue;
      for (double& x : sum) x /= static_cast<double>(count);
      centres[c] = std::move(sum);
    }
  }

  // Renumber by first appearance in client order; empty clusters vanish.
  Clustering out;
  std::vector<int> remap(k, -1);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    auto& r = remap[static_cast<std::size_t>(assign[i])];
    if (r < 0) r = next++;
  }
  out.n_clusters = static_cast<std::size_t>(next);
  if (out.n_clusters < k) {
    out.warnings.push_back("kmeans: " + std::to_string(k - out.n_clusters) +
                           " empty cluster(s) merged; using " + std::to_string(out.n_clusters));
  }
  out.assignment.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.assignment[i] = remap[static_cast<std::size_t>(assign[i])];
  return out;
}

// ---------------------------------------------------------------------------
// Strategy objects used by the engine

class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::string_view name() const = 0;

  /// Called once before round 1.
  virtual void initialize(const ParamVector& w0, std::span<const ClientSummary> clients) {
    (void)clients;
    global_ = w0;
  }

  /// Model broadcast to a client; differs from the global model only for
  /// FedCluster.
  virtual const ParamVector& model_for_client(int client_id) const {
    (void)client_id;
    return global_;
  }

  /// Model evaluated on the holdout set.
  const ParamVector& global_model() const { return global_; }

  /// Proximal coefficient clients add to their local objective.
  virtual double prox_mu() const { return 0.0; }

  virtual void step(std::span<const RoundUpdate> updates) = 0;

  /// Binary checkpoint of everything the next step depends on.
  virtual void save_state(std::ostream& os) const { write_params(os, global_); }
  virtual void load_state(std::istream& is) { global_ = read_params(is); }

  std::vector<std::string> take_warnings() { return std::exchange(warnings_, {}); }

 protected:
  ParamVector global_;
  std::vector<std::string> warnings_;
};

class FedAvgStrategy : public Strategy {
 public:
  std::string_view name() const override { return "fedavg"; }
  void step(std::span<const RoundUpdate> updates) override { global_ = fedavg_step(global_, updates); }
};

/// FedAvg aggregation; the proximal term acts on the client side.
class FedProxStrategy : public FedAvgStrategy {
 public:
  explicit FedProxStrategy(double mu) : mu_(mu) {
    if (!(mu >= 0.0)) throw ConfigError("prox_mu must be non-negative");
  }
  std::string_view name() const override { return "fedprox"; }
  double prox_mu() const override { return mu_; }

 private:
  double mu_;
};

class FedCvrStrategy : public Strategy {
 public:
  explicit FedCvrStrategy(StrategyConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  std::string_view name() const override { return "fedcvr"; }
  void step(std::span<const RoundUpdate> updates) override {
    global_ = fedcvr_update(state_, global_, aggregate_mean(updates), cfg_);
  }
  const MomentState& state() const { return state_; }
  void save_state(std::ostream& os) const override {
    Strategy::save_state(os);
    write_le_u64(os, state_.t);
    write_params(os, state_.m);
    write_params(os, state_.v);
  }
  void load_state(std::istream& is) override {
    Strategy::load_state(is);
    state_.t = read_le_u64(is);
    state_.m = read_params(is);
    state_.v = read_params(is);
  }

 protected:
  StrategyConfig cfg_;
  MomentState state_;
};

class FedYogiStrategy : public FedCvrStrategy {
 public:
  using FedCvrStrategy::FedCvrStrategy;
  std::string_view name() const override { return "fedyogi"; }
  void step(std::span<const RoundUpdate> updates) override {
    global_ = fedyogi_update(state_, global_, aggregate_mean(updates), cfg_);
  }
};

class FedAdagradStrategy : public Strategy {
 public:
  explicit FedAdagradStrategy(StrategyConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  std::string_view name() const override { return "fedadagrad"; }
  void step(std::span<const RoundUpdate> updates) override {
    global_ = fedadagrad_update(state_, global_, aggregate_mean(updates), cfg_);
  }
  const AdagradState& state() const { return state_; }
  void save_state(std::ostream& os) const override {
    Strategy::save_state(os);
    write_params(os, state_.v);
  }
  void load_state(std::istream& is) override {
    Strategy::load_state(is);
    state_.v = read_params(is);
  }

 private:
  StrategyConfig cfg_;
  AdagradState state_;
};

/// Static clusters fixed before round 1; FedAvg runs independently inside each
/// cluster. The global model is the sample-size weighted average of cluster
/// models.
class FedClusterStrategy : public Strategy {
 public:
  FedClusterStrategy(StrategyConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) { cfg_.validate(); }
  std::string_view name() const override { return "fedcluster"; }

  void initialize(const ParamVector& w0, std::span<const ClientSummary> clients) override {
    Strategy::initialize(w0, clients);
    auto clustering = kmeans_assign(clients, std::min(cfg_.n_clusters, clients.size()), seed_);
    for (auto& w : clustering.warnings) warnings_.push_back(std::move(w));
    client_ids_.clear();
    sizes_.clear();
    for (const auto& c : clients) {
      client_ids_.push_back(c.client_id);
      sizes_.push_back(c.n_samples);
    }
    assignment_ = std::move(clustering.assignment);
    models_.assign(clustering.n_clusters, w0);
  }

  const ParamVector& model_for_client(int client_id) const override {
    return models_.at(static_cast<std::size_t>(cluster_of(client_id)));
  }

  void step(std::span<const RoundUpdate> updates) override {
    for (std::size_t c = 0; c < models_.size(); ++c) {
      std::vector<RoundUpdate> members;
      for (const auto& u : updates) {
        if (cluster_of(u.client_id) == static_cast<int>(c)) members.push_back(u);
      }
      if (!members.empty()) models_[c] = fedavg_step(models_[c], members);
    }
    refresh_global();
  }

  const std::vector<int>& assignment() const { return assignment_; }
  std::size_t n_clusters() const { return models_.size(); }

  void save_state(std::ostream& os) const override {
    Strategy::save_state(os);
    write_le_u64(os, assignment_.size());
    for (std::size_t i = 0; i < assignment_.size(); ++i) {
      write_le_u64(os, static_cast<std::uint64_t>(client_ids_[i]));
      write_le_u64(os, static_cast<std::uint64_t>(assignment_[i]));
      write_le_u64(os, sizes_[i]);
    }
    write_le_u64(os, models_.size());
    for (const auto& m : models_) write_params(os, m);
  }
  void load_state(std::istream& is) override {
    Strategy::load_state(is);
    const auto n = read_le_u64(is);
    client_ids_.assign(n, 0);
    assignment_.assign(n, 0);
    sizes_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      client_ids_[i] = static_cast<int>(read_le_u64(is));
      assignment_[i] = static_cast<int>(read_le_u64(is));
      sizes_[i] = read_le_u64(is);
    }
    models_.resize(read_le_u64(is));
    for (auto& m : models_) m = read_params(is);
  }

 private:
  int cluster_of(int client_id) const {
    for (std::size_t i = 0; i < client_ids_.size(); ++i) {
      if (client_ids_[i] == client_id) return assignment_[i];
    }
    throw InputError("fedcluster: unknown client " + std::to_string(client_id));
  }

  void refresh_global() {
    std::vector<std::size_t> cluster_n(models_.size(), 0);
    for (std::size_t i = 0; i < assignment_.size(); ++i) cluster_n[static_cast<std::size_t>(assignment_[i])] += sizes_[i];
    std::size_t total = 0;
    for (auto n : cluster_n) total += n;
    ParamVector g(global_.size(), 0.0);
    for (std::size_t c = 0; c < models_.size(); ++c) {
      const double coef = static_cast<double>(cluster_n[c]) / static_cast<double>(total);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += coef * models_[c][i];
    }
    global_ = std::move(g);
  }

  StrategyConfig cfg_;
  std::uint64_t seed_;
  std::vector<int> client_ids_;
  std::vector<int> assignment_;
  std::vector<std::size_t> sizes_;
  std::vector<ParamVector> models_;
};

/// Builds a strategy by its config name.
inline std::unique_ptr<Strategy> make_strategy(std::string_view name, const StrategyConfig& cfg,
                                               std::uint64_t seed) {
  cfg.validate();
  if (name == "fedavg") return std::make_unique<FedAvgStrategy>();
  if (name == "fedprox") return std::make_unique<FedProxStrategy>(cfg.prox_mu);
  if (name == "fedcluster") return std::make_unique<FedClusterStrategy>(cfg, seed);
  if (name == "fedadagrad") return std::make_unique<FedAdagradStrategy>(cfg);
  if (name == "fedyogi") return std::make_unique<FedYogiStrategy>(cfg);
  if (name == "fedcvr") return std::make_unique<FedCvrStrategy>(cfg);
  std::string msg = "unknown strategy '" + std::string(name) + "'; valid strategies:";
  for (auto n : kStrategyNames) msg += " " + std::string(n);
  throw ConfigError(msg);
}

}  // namespace fedcvr

#endif  // FEDCVR_STRATEGIES_HPP_
