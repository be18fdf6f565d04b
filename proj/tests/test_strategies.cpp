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

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fedcvr/strategies.hpp"
#include "reference_values.hpp"

namespace fedcvr {
namespace {

RoundUpdate update(int id, ParamVector dw, std::size_t n, const ParamVector& w) {
  RoundUpdate u;
  u.client_id = id;
  u.pseudo_gradient = dw;
  u.local_params = ParamVector(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) u.local_params[i] = w[i] - dw[i];
  u.n_samples = n;
  return u;
}

using reference::kAdagrad5;
using reference::kCvr3;
using reference::kCvr5;
using reference::kStream;
using reference::kYogi5;

TEST(FedCvr, OneStepExample) {
  MomentState s;
  const auto w = fedcvr_update(s, ParamVector{0.0}, ParamVector{1.0}, StrategyConfig{});
  EXPECT_NEAR(s.m[0] / (1.0 - 0.9), 1.0, 1e-12);  // bias-corrected first moment
  EXPECT_NEAR(w[0], -0.1 / 1.001, 1e-9);
  EXPECT_NEAR(w[0], -0.0999001, 1e-7);
  EXPECT_EQ(s.t, 1u);
}

TEST(FedCvr, ThreeRoundSignFlips) {
  MomentState s;
  ParamVector w{0.0};
  const double g[] = {1.0, -1.0, 1.0};
  for (int t = 0; t < 3; ++t) {
    w = fedcvr_update(s, w, ParamVector{g[t]}, StrategyConfig{});
    EXPECT_NEAR(w[0], kCvr3[t], 1e-12);
  }
}

TEST(FedCvr, FiveRoundOracle) {
  MomentState s;
  ParamVector w{0.0};
  for (std::size_t t = 0; t < kStream.size(); ++t) {
    w = fedcvr_update(s, w, ParamVector{kStream[t]}, StrategyConfig{});
    EXPECT_NEAR(w[0], kCvr5[t], 1e-12);
  }
}

TEST(FedYogi, FiveRoundOracle) {
  MomentState s;
  ParamVector w{0.0};
  for (std::size_t t = 0; t < kStream.size(); ++t) {
    w = fedyogi_update(s, w, ParamVector{kStream[t]}, StrategyConfig{});
    EXPECT_NEAR(w[0], kYogi5[t], 1e-12);
  }
}

TEST(FedAdagrad, FiveRoundOracle) {
  AdagradState s;
  ParamVector w{0.0};
  for (std::size_t t = 0; t < kStream.size(); ++t) {
    w = fedadagrad_update(s, w, ParamVector{kStream[t]}, StrategyConfig{});
    EXPECT_NEAR(w[0], kAdagrad5[t], 1e-12);
  }
}

TEST(FedCvr, StepMatchesUpdateAndIsPure) {
  const ParamVector w{0.5, -0.5};
  std::vector<RoundUpdate> ups{update(1, {0.2, 0.4}, 10, w), update(0, {0.0, -0.2}, 30, w)};
  const MomentState s0;
  auto [w1, s1] = fedcvr_step(s0, w, ups, StrategyConfig{});
  EXPECT_EQ(s0.t, 0u);
  MomentState manual;
  const auto expect = fedcvr_update(manual, w, ParamVector{0.1, 0.1}, StrategyConfig{});
  EXPECT_TRUE(w1.bit_equal(expect));
  EXPECT_EQ(s1.t, 1u);
}

TEST(FedCvr, MomentumFiltersNoise) {
  // Constant signal plus unit Gaussian noise: the stationary variance of the
  // bias-corrected first moment is (1 - b1) / (1 + b1) of the noise variance.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  MomentState s;
  ParamVector w{0.0};
  std::vector<double> mh;
  for (int t = 1; t <= 40000; ++t) {
    w = fedcvr_update(s, w, ParamVector{0.3 + noise(rng)}, StrategyConfig{});
    if (t > 200) mh.push_back(s.m[0] / (1.0 - std::pow(0.9, t)));
  }
  double mean = 0.0, var = 0.0;
  for (double x : mh) mean += x;
  mean /= static_cast<double>(mh.size());
  for (double x : mh) var += (x - mean) * (x - mean);
  var /= static_cast<double>(mh.size() - 1);
  EXPECT_NEAR(var / (0.1 / 1.9), 1.0, 0.25);
  EXPECT_NEAR(mean, 0.3, 0.02);
}

TEST(Aggregate, MeanIsOrderIndependent) {
  const ParamVector w{0.0, 0.0};
  std::vector<RoundUpdate> a{update(0, {0.1, 0.7}, 1, w), update(1, {0.2, 0.3}, 1, w), update(2, {0.3, 1e-17}, 1, w)};
  std::vector<RoundUpdate> b{a[2], a[0], a[1]};
  EXPECT_TRUE(aggregate_mean(a).bit_equal(aggregate_mean(b)));
  EXPECT_THROW(aggregate_mean(std::vector<RoundUpdate>{}), AggregationError);
}

TEST(FedAvg, WeightedBySampleCount) {
  const ParamVector w{1.0};
  std::vector<RoundUpdate> ups{update(0, {1.0}, 10, w), update(1, {-1.0}, 30, w)};
  const auto out = fedavg_step(w, ups);
  EXPECT_NEAR(out[0], 0.25 * 0.0 + 0.75 * 2.0, 1e-15);
}

TEST(FedAvg, SingleClientIsExactLocalModel) {
  const ParamVector w{0.1, 0.2, 0.3};
  RoundUpdate u = update(4, {0.01, -0.02, 0.003}, 17, w);
  u.local_params = ParamVector{0.123456789, -1e-300, 7.0};
  EXPECT_TRUE(fedavg_step(w, std::vector<RoundUpdate>{u}).bit_equal(u.local_params));
}

TEST(FedAvg, Errors) {
  const ParamVector w{1.0};
  EXPECT_THROW(fedavg_step(w, std::vector<RoundUpdate>{}), AggregationError);
  EXPECT_THROW(fedavg_step(w, std::vector<RoundUpdate>{update(0, {1.0}, 0, w)}), AggregationError);
}

TEST(FedProx, Penalty) {
  const auto p = fedprox_penalty(ParamVector{1.0, 2.0}, ParamVector{0.0, 0.0}, 0.1);
  EXPECT_NEAR(p.loss, 0.5 * 0.1 * 5.0, 1e-15);
  EXPECT_NEAR(p.gradient[0], 0.1, 1e-15);
  EXPECT_NEAR(p.gradient[1], 0.2, 1e-15);
  const auto zero = fedprox_penalty(ParamVector{1.0}, ParamVector{-3.0}, 0.0);
  EXPECT_EQ(zero.loss, 0.0);
  EXPECT_THROW(fedprox_penalty(ParamVector{1.0}, ParamVector{1.0}, -1.0), ConfigError);
}

TEST(Optimizers, NonFiniteRejected) {
  MomentState s;
  EXPECT_THROW(fedcvr_update(s, ParamVector{0.0}, ParamVector{std::numeric_limits<double>::infinity()},
                             StrategyConfig{}),
               NumericError);
  EXPECT_EQ(s.t, 0u);  // state untouched on failure
  EXPECT_THROW(fedcvr_update(s, ParamVector{0.0}, ParamVector{1.0, 2.0}, StrategyConfig{}), InputError);
}

// Brute-force k-means optimum: every labelling of m points into k non-empty
// groups, minimizing the within-cluster sum of squares.
double within_ss(const std::vector<ClientSummary>& pts, const std::vector<int>& lab, int k) {
  double total = 0.0;
  const std::size_t dim = pts[0].features.size();
  for (int c = 0; c < k; ++c) {
    std::vector<double> mean(dim, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (lab[i] != c) continue;
      for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i].features[d];
      ++n;
    }
    if (n == 0) continue;
    for (double& x : mean) x /= n;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (lab[i] != c) continue;
      for (std::size_t d = 0; d < dim; ++d) total += (pts[i].features[d] - mean[d]) * (pts[i].features[d] - mean[d]);
    }
  }
  return total;
}

double brute_force_min(const std::vector<ClientSummary>& pts, int k) {
  std::vector<int> lab(pts.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == pts.size()) {
      std::vector<int> used(k, 0);
      for (int l : lab) used[l] = 1;
      for (int u : used) {
        if (!u) return;
      }
      best = std::min(best, within_ss(pts, lab, k));
      return;
    }
    for (int c = 0; c < k; ++c) {
      lab[i] = c;
      rec(i + 1);
    }
  };
  rec(0);
  return best;
}

TEST(KMeans, MatchesBruteForceOnSeparatedGroups) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + trial % 2;
    const std::size_t m = 5 + trial % 3;
    std::vector<ClientSummary> pts;
    for (std::size_t i = 0; i < m; ++i) {
      const double centre = 3.0 * static_cast<double>((i * 7 + trial) % k);
      pts.push_back({static_cast<int>(i), 100, {centre + jitter(rng), -centre + jitter(rng), jitter(rng)}});
    }
    const auto c = kmeans_assign(pts, k, rng());
    EXPECT_NEAR(within_ss(pts, c.assignment, k), brute_force_min(pts, k), 1e-9);
    EXPECT_EQ(c.assignment[0], 0);  // renumbered by first member
  }
}

TEST(KMeans, DeterministicAndCanonical) {
  std::vector<ClientSummary> pts{{0, 1, {0.0}}, {1, 1, {10.0}}, {2, 1, {0.1}}, {3, 1, {10.2}}};
  const auto a = kmeans_assign(pts, 2, 3), b = kmeans_assign(pts, 2, 3);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.assignment, (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(a.n_clusters, 2u);
}

TEST(KMeans, DuplicatePointsDropEmptyClusters) {
  std::vector<ClientSummary> pts{{0, 1, {1.0}}, {1, 1, {1.0}}, {2, 1, {1.0}}};
  const auto c = kmeans_assign(pts, 3, 1);
  EXPECT_EQ(c.n_clusters, 1u);
  EXPECT_EQ(c.assignment, (std::vector<int>{0, 0, 0}));
  EXPECT_FALSE(c.warnings.empty());
  EXPECT_THROW(kmeans_assign(pts, 4, 1), ConfigError);
}

TEST(Factory, NamesAndErrors) {
  for (auto n : kStrategyNames) EXPECT_EQ(make_strategy(n, StrategyConfig{}, 1)->name(), n);
  try {
    make_strategy("bogus", StrategyConfig{}, 1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (auto n : kStrategyNames) EXPECT_NE(msg.find(n), std::string::npos) << n;
  }
  StrategyConfig bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(make_strategy("fedcvr", bad, 1), ConfigError);
}

TEST(Strategy, FedProxOnlyDiffersClientSide) {
  auto prox = make_strategy("fedprox", StrategyConfig{}, 1);
  EXPECT_EQ(prox->prox_mu(), 0.01);
  EXPECT_EQ(make_strategy("fedavg", StrategyConfig{}, 1)->prox_mu(), 0.0);
}

TEST(Strategy, CheckpointRoundTrip) {
  for (auto n : kStrategyNames) {
    const ParamVector w0{0.1, -0.2, 0.3};
    std::vector<ClientSummary> sums{{0, 10, {0.0}}, {1, 20, {5.0}}, {2, 30, {0.1}}};
    auto a = make_strategy(n, StrategyConfig{}, 9);
    a->initialize(w0, sums);
    std::vector<RoundUpdate> ups{update(0, {0.1, 0.1, 0.1}, 10, w0), update(1, {0.2, -0.1, 0.0}, 20, w0),
                                 update(2, {0.0, 0.3, -0.3}, 30, w0)};
    a->step(ups);
    std::stringstream ss;
    a->save_state(ss);
    auto b = make_strategy(n, StrategyConfig{}, 9);
    b->initialize(ParamVector(3, 0.0), sums);
    b->load_state(ss);
    EXPECT_TRUE(a->global_model().bit_equal(b->global_model())) << n;
    for (int round = 0; round < 3; ++round) {
      std::vector<RoundUpdate> next;
      for (int c = 0; c < 3; ++c) next.push_back(update(c, {0.05 * c, 0.01, -0.02}, 10u * (c + 1), a->model_for_client(c)));
      a->step(next);
      b->step(next);
      EXPECT_TRUE(a->global_model().bit_equal(b->global_model())) << n;
    }
  }
}

TEST(Strategy, FedClusterKeepsSeparateModels) {
  FedClusterStrategy s(StrategyConfig{}, 4);
  const ParamVector w0{0.0};
  std::vector<ClientSummary> sums{{0, 10, {0.0}}, {1, 30, {9.0}}, {2, 10, {0.2}}};
  s.initialize(w0, sums);
  ASSERT_EQ(s.n_clusters(), 2u);
  EXPECT_EQ(s.assignment(), (std::vector<int>{0, 1, 0}));
  s.step(std::vector<RoundUpdate>{update(0, {-1.0}, 10, w0), update(1, {3.0}, 30, w0), update(2, {-3.0}, 10, w0)});
  EXPECT_NEAR(s.model_for_client(0)[0], 2.0, 1e-15);
  EXPECT_NEAR(s.model_for_client(1)[0], -3.0, 1e-15);
  EXPECT_NEAR(s.global_model()[0], 0.4 * 2.0 + 0.6 * -3.0, 1e-15);
}

}  // namespace
}  // namespace fedcvr
