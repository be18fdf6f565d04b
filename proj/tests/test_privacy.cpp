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
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fedcvr/privacy.hpp"

namespace fedcvr {
namespace {

PrivacyConfig dp(double sigma, double clip = 1.0, double q = 1.0) {
  PrivacyConfig c;
  c.enabled = true;
  c.noise_multiplier = sigma;
  c.clip_norm = clip;
  c.sampling_rate = q;
  return c;
}

TEST(Clip, BelowBoundUnchanged) {
  const ParamVector g{0.3, 0.4};
  EXPECT_TRUE(clip_gradient(g, 1.0).bit_equal(g));
}

TEST(Clip, AnalyticScaling) {
  const auto c = clip_gradient(ParamVector{3.0, 4.0}, 1.0);
  EXPECT_NEAR(c[0], 0.6, 1e-15);
  EXPECT_NEAR(c[1], 0.8, 1e-15);
}

TEST(Clip, BoundAndIdempotenceOnRandomInputs) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int t = 0; t < 500; ++t) {
    ParamVector g(1 + rng() % 300);
    for (double& x : g) x = n(rng);
    const double c = 2.0;
    const auto once = clip_gradient(g, c);
    EXPECT_LE(once.l2_norm(), c + 1e-12);
    EXPECT_TRUE(clip_gradient(once, c).bit_equal(once));
  }
}

TEST(Clip, Errors) {
  EXPECT_THROW(clip_gradient(ParamVector{1.0}, 0.0), ConfigError);
  EXPECT_THROW(clip_gradient(ParamVector{std::nan("")}, 1.0), NumericError);
}

TEST(Noise, ZeroSigmaIsExactClippedSum) {
  std::vector<ParamVector> grads{{3.0, 4.0}, {0.1, 0.2}, {-6.0, 8.0}};
  std::mt19937_64 rng(1);
  const auto out = noisy_batch_gradient(grads, dp(0.0), rng);
  ParamVector expect(2, 0.0);
  for (const auto& g : grads) {
    const auto c = clip_gradient(g, 1.0);
    expect[0] += c[0];
    expect[1] += c[1];
  }
  EXPECT_TRUE(out.bit_equal(expect));
  // No draws were taken from the stream.
  std::mt19937_64 fresh(1);
  EXPECT_EQ(rng(), fresh());
}

TEST(Noise, SampleStdMatchesSigmaTimesC) {
  std::vector<ParamVector> zero{ParamVector(20000, 0.0)};
  const auto out = noisy_batch_gradient(zero, dp(1.3, 0.7), 99);
  double m = 0.0, s = 0.0;
  for (double x : out) m += x;
  m /= static_cast<double>(out.size());
  for (double x : out) s += (x - m) * (x - m);
  const double sd = std::sqrt(s / static_cast<double>(out.size() - 1));
  EXPECT_NEAR(sd / (1.3 * 0.7), 1.0, 0.03);
}

TEST(Noise, Errors) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(noisy_batch_gradient(std::vector<ParamVector>{}, dp(1.0), rng), InputError);
  PrivacyConfig off = dp(1.0);
  off.enabled = false;
  EXPECT_THROW(noisy_batch_gradient(std::vector<ParamVector>{ParamVector{1.0}}, off, rng), ConfigError);
  EXPECT_THROW(noisy_batch_gradient(std::vector<ParamVector>{ParamVector{1.0}, ParamVector{1.0, 2.0}}, dp(1.0), rng),
               InputError);
}

TEST(Config, Validation) {
  EXPECT_THROW(dp(-1.0).validate(), ConfigError);
  EXPECT_THROW(dp(1.0, 0.0).validate(), ConfigError);
  EXPECT_THROW(dp(1.0, 1.0, 0.0).validate(), ConfigError);
  EXPECT_THROW(dp(1.0, 1.0, 1.5).validate(), ConfigError);
  PrivacyConfig c = dp(1.0);
  c.delta = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

// Reference values from tests/oracles/rdp_oracle.py (60-digit mpmath).
struct RdpCase {
  double q, sigma;
  int alpha;
  double value;
};
constexpr RdpCase kRdpCases[] = {
    {0.01, 1.0, 2, 0.00017181342207454793814},  {0.01, 1.0, 8, 0.00089364390760603189425},
    {0.05, 0.8, 3, 0.019761366108984083452},    {0.2, 2.0, 32, 2.3404354195333689622},
    {0.00533, 1.0, 256, 122.74506888452579494}, {0.5, 0.5, 64, 127.29585048324069048},
};

TEST(Rdp, MatchesHighPrecisionOracle) {
  for (const auto& c : kRdpCases) {
    const double got = rdp_of_step(c.q, c.sigma, c.alpha);
    EXPECT_NEAR(got / c.value, 1.0, 1e-10) << "q=" << c.q << " sigma=" << c.sigma << " alpha=" << c.alpha;
  }
}

TEST(Rdp, FullBatchIsGaussianMechanism) {
  for (double a : kRdpOrders) EXPECT_NEAR(rdp_of_step(1.0, 1.5, a), a / (2 * 1.5 * 1.5), 1e-12);
}

TEST(Rdp, ZeroSigmaIsInfinite) { EXPECT_TRUE(std::isinf(rdp_of_step(0.1, 0.0, 2.0))); }

TEST(Rdp, MonotoneInQ) {
  double prev = 0.0;
  for (double q : {0.001, 0.01, 0.1, 0.5, 1.0}) {
    const double r = rdp_of_step(q, 1.0, 8);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(Epsilon, ClosedFormForFullBatch) {
  // min over alpha of alpha/2 + ln(1e5)/(alpha - 1); mpmath reference.
  const auto e = epsilon_for(1.0, 1.0, 1, 1e-5);
  EXPECT_NEAR(e.epsilon, 5.2985259121880812076, 1e-9);
  EXPECT_NEAR(e.best_order, 5.79852591219, 1e-9);
  for (std::uint64_t t : {1u, 7u, 100u}) {
    for (double s : {0.5, 1.0, 2.0}) {
      const double l = std::log(1e5);
      const double closed = t / (2 * s * s) + std::sqrt(2 * t * l) / s;
      EXPECT_NEAR(epsilon_for(1.0, s, t, 1e-5).epsilon, closed, 1e-9 * closed);
    }
  }
}

TEST(Epsilon, MonotoneInSigmaAndSteps) {
  for (double q : {1.0, 0.05}) {
    const double e05 = epsilon_for(q, 0.5, 10, 1e-5).epsilon;
    const double e10 = epsilon_for(q, 1.0, 10, 1e-5).epsilon;
    const double e15 = epsilon_for(q, 1.5, 10, 1e-5).epsilon;
    EXPECT_GE(e05, e10);
    EXPECT_GE(e10, e15);
    const double t1 = epsilon_for(q, 1.0, 1, 1e-5).epsilon;
    const double t10 = epsilon_for(q, 1.0, 10, 1e-5).epsilon;
    const double t100 = epsilon_for(q, 1.0, 100, 1e-5).epsilon;
    EXPECT_LE(t1, t10);
    EXPECT_LE(t10, t100);
  }
}

TEST(Ledger, ComposeIsAdditive) {
  PrivacyLedger a(dp(1.1, 1.0, 0.02)), b(dp(1.1, 1.0, 0.02));
  a.compose(30);
  b.compose(10);
  b.compose(20);
  EXPECT_EQ(a.steps_taken(), 30u);
  for (std::size_t i = 0; i < kRdpOrders.size(); ++i) EXPECT_NEAR(a.rdp_totals()[i], b.rdp_totals()[i], 1e-12);
  EXPECT_NEAR(a.to_epsilon(1e-5).epsilon, b.to_epsilon(1e-5).epsilon, 1e-12);
  EXPECT_NEAR(compose(PrivacyLedger(dp(1.1, 1.0, 0.02)), 30).to_epsilon(1e-5).epsilon,
              a.to_epsilon(1e-5).epsilon, 1e-12);
}

TEST(Ledger, Errors) {
  PrivacyLedger l(dp(1.0));
  EXPECT_THROW(l.to_epsilon(1e-5), AccountingError);
  l.compose(1);
  EXPECT_THROW(l.to_epsilon(0.0), ConfigError);
  PrivacyLedger z(dp(0.0));
  z.compose(3);
  EXPECT_THROW(z.to_epsilon(1e-5), AccountingError);
}

TEST(Ledger, ReportFields) {
  PrivacyLedger l(dp(1.0, 2.0, 0.1));
  const auto empty = l.report();
  EXPECT_TRUE(empty["epsilon"].is_null());
  l.compose(5);
  const auto r = l.report();
  EXPECT_EQ(r["steps"], 5);
  EXPECT_EQ(r["sigma"], 1.0);
  EXPECT_EQ(r["clip_norm"], 2.0);
  EXPECT_EQ(r["q"], 0.1);
  EXPECT_EQ(r["delta"], 1e-5);
  EXPECT_TRUE(r["epsilon"].is_number());
  EXPECT_TRUE(r["best_alpha"].is_number());
  std::vector<std::string> keys;
  for (const auto& [k, v] : r.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"steps", "sigma", "clip_norm", "q", "delta", "epsilon", "best_alpha"}));
}

}  // namespace
}  // namespace fedcvr
