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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fedcvr/engine.hpp"

namespace fedcvr {
namespace {

RunConfig small_config(const std::string& strategy = "fedavg") {
  RunConfig c;
  c.data.n_samples = 800;
  c.training.partition_mode = "iid";
  c.training.num_clients = 3;
  c.training.rounds = 4;
  c.training.local_epochs = 1;
  c.strategy_name = strategy;
  return c;
}

const FederatedData& small_data() {
  static const FederatedData d = prepare_data(small_config());
  return d;
}

ClientDataset first_samples(std::size_t n) {
  ClientDataset d;
  d.client_id = 0;
  const auto& src = small_data().clients.at(0).samples;
  d.samples.assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n));
  return d;
}

TEST(ClientUpdate, StepCount) {
  TrainingConfig t;
  t.batch_size = 32;
  t.local_epochs = 5;
  PrivacyConfig p;
  p.enabled = true;
  const auto u = client_update(init_params(1), first_samples(64), t, p, 99);
  EXPECT_EQ(u.noise_steps, 10u);
  EXPECT_EQ(u.n_samples, 64u);

  TrainingConfig odd = t;
  odd.local_epochs = 2;
  EXPECT_EQ(client_update(init_params(1), first_samples(65), odd, p, 99).noise_steps, 6u);
  p.enabled = false;
  EXPECT_EQ(client_update(init_params(1), first_samples(64), t, p, 99).noise_steps, 0u);
}

TEST(ClientUpdate, FullBatchSingleEpochIsOneGradientStep) {
  const auto data = first_samples(50);
  TrainingConfig t;
  t.batch_size = 64;
  t.local_epochs = 1;
  t.client_lr = 0.01;
  const ParamVector w = init_params(5);
  const auto u = client_update(w, data, t, PrivacyConfig{}, 7);
  ParamVector mean(w.size());
  for (const auto& s : data.samples) {
    const auto g = per_sample_gradient(w, s);
    for (std::size_t i = 0; i < w.size(); ++i) mean[i] += g[i];
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    mean[i] /= 50.0;
    EXPECT_NEAR(u.pseudo_gradient[i] / t.client_lr, mean[i], 1e-12) << i;
    EXPECT_EQ(u.local_params[i], w[i] - u.pseudo_gradient[i]);
  }
  double loss = 0.0;
  for (const auto& s : data.samples) loss += bce_loss(forward(w, s.features), s.label);
  EXPECT_NEAR(u.local_loss, loss / 50.0, 1e-12);
}

// DP with sigma = 0 must reproduce a hand-rolled clip-sum-divide loop exactly.
TEST(ClientUpdate, ZeroNoiseEqualsClippingOnly) {
  const auto data = first_samples(70);
  TrainingConfig t;
  t.batch_size = 16;
  t.local_epochs = 2;
  t.client_lr = 0.05;
  PrivacyConfig p;
  p.enabled = true;
  p.noise_multiplier = 0.0;
  p.clip_norm = 0.05;
  const ParamVector w = init_params(8);
  const std::uint64_t seed = 1234;
  const auto u = client_update(w, data, t, p, seed);

  ParamVector wk = w;
  std::mt19937_64 shuffle(hash64(seed, "shuffle"));
  std::vector<std::size_t> order(data.n());
  for (std::size_t e = 0; e < t.local_epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < data.n(); start += t.batch_size) {
      const std::size_t b = std::min(t.batch_size, data.n() - start);
      ParamVector sum(w.size(), 0.0);
      for (std::size_t k = 0; k < b; ++k) {
        const auto c = clip_gradient(per_sample_gradient(wk, data.samples[order[start + k]]), p.clip_norm);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += c[i];
      }
      for (std::size_t i = 0; i < wk.size(); ++i) wk[i] -= t.client_lr * (sum[i] / static_cast<double>(b));
    }
  }
  EXPECT_EQ(digest_hex(u.local_params.span()), digest_hex(wk.span()));
}

TEST(ClientUpdate, NoiseStreamIsSeeded) {
  const auto data = first_samples(40);
  TrainingConfig t;
  PrivacyConfig p;
  p.enabled = true;
  const auto a = client_update(init_params(2), data, t, p, 5);
  const auto b = client_update(init_params(2), data, t, p, 5);
  const auto c = client_update(init_params(2), data, t, p, 6);
  EXPECT_EQ(digest_hex(a.local_params.span()), digest_hex(b.local_params.span()));
  EXPECT_NE(digest_hex(a.local_params.span()), digest_hex(c.local_params.span()));
}

TEST(ClientUpdate, ProximalTermPullsTowardsBroadcast) {
  const auto data = first_samples(64);
  TrainingConfig t;
  t.local_epochs = 3;
  t.client_lr = 0.1;
  const ParamVector w = init_params(3);
  const auto plain = client_update(w, data, t, PrivacyConfig{}, 1, 0.0);
  const auto prox = client_update(w, data, t, PrivacyConfig{}, 1, 5.0);
  EXPECT_LT(prox.pseudo_gradient.l2_norm(), plain.pseudo_gradient.l2_norm());
}

TEST(ClientUpdate, NonFiniteWeightsThrow) {
  TrainingConfig t;
  t.client_lr = 1e308;
  t.local_epochs = 3;
  EXPECT_THROW(client_update(init_params(1), first_samples(64), t, PrivacyConfig{}, 1), NumericError);
  EXPECT_THROW(client_update(init_params(1), ClientDataset{}, t, PrivacyConfig{}, 1), InputError);
}

TEST(Engine, AllClientsFailingIsARoundError) {
  auto cfg = small_config();
  cfg.training.client_lr = 1e308;
  cfg.training.local_epochs = 3;
  Engine e(cfg, small_data());
  EXPECT_THROW(e.run_round(), RoundError);
}

TEST(Engine, RecordsAreComplete) {
  const auto h = run_simulation(small_config(), small_data());
  ASSERT_EQ(h.records.size(), 4u);
  for (std::size_t i = 0; i < h.records.size(); ++i) {
    const auto& r = h.records[i];
    EXPECT_EQ(r.round, i + 1);
    EXPECT_EQ(r.participants, (std::vector<int>{0, 1, 2}));
    EXPECT_TRUE(r.failed.empty());
    EXPECT_EQ(r.client_loss.size(), 3u);
    EXPECT_FALSE(r.epsilon.has_value());
    EXPECT_GT(r.global_loss, 0.0);
    EXPECT_GE(r.auc, 0.0);
    EXPECT_LE(r.auc, 1.0);
    const auto back = round_record_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
  }
  EXPECT_EQ(h.final_digest, digest_hex(h.final_params.span()));
  EXPECT_EQ(h.final_scores.size(), small_data().holdout.size());
}

TEST(Engine, GlobalLossIsSizeWeighted) {
  const auto h = run_simulation(small_config(), small_data());
  const auto& r = h.records.front();
  double num = 0.0, den = 0.0;
  for (const auto& c : small_data().clients) {
    num += static_cast<double>(c.n()) * r.client_loss.at(c.client_id);
    den += static_cast<double>(c.n());
  }
  EXPECT_NEAR(r.global_loss, num / den, 1e-12);
}

TEST(Engine, JobsDoNotChangeResults) {
  for (const char* s : {"fedcvr", "fedcluster"}) {
    auto cfg = small_config(s);
    cfg.privacy.enabled = true;
    const auto a = run_simulation(cfg, small_data(), 1);
    const auto b = run_simulation(cfg, small_data(), 4);
    EXPECT_EQ(a.to_jsonl(), b.to_jsonl()) << s;
    EXPECT_EQ(a.final_digest, b.final_digest) << s;
  }
}

TEST(Engine, PartialParticipation) {
  auto cfg = small_config();
  cfg.data.n_samples = 3000;
  cfg.training.num_clients = 5;
  cfg.training.participation = 0.6;
  cfg.training.rounds = 6;
  const auto data = prepare_data(cfg);
  const auto h = run_simulation(cfg, data);
  std::set<std::vector<int>> distinct;
  for (const auto& r : h.records) {
    EXPECT_EQ(r.participants.size(), 3u);
    EXPECT_TRUE(std::is_sorted(r.participants.begin(), r.participants.end()));
    EXPECT_EQ(r.client_loss.size(), 3u);
    distinct.insert(r.participants);
  }
  EXPECT_GT(distinct.size(), 1u);
  const auto again = run_simulation(cfg, data);
  EXPECT_EQ(h.to_jsonl(), again.to_jsonl());
}

TEST(Engine, EpsilonIsNonDecreasing) {
  auto cfg = small_config("fedcvr");
  cfg.privacy.enabled = true;
  cfg.privacy.noise_multiplier = 1.0;
  const auto h = run_simulation(cfg, small_data());
  double prev = 0.0;
  for (const auto& r : h.records) {
    ASSERT_TRUE(r.epsilon.has_value());
    EXPECT_TRUE(std::isfinite(*r.epsilon));
    EXPECT_GT(*r.epsilon, prev);
    prev = *r.epsilon;
  }
  const auto rep = ledger_report(cfg, h);
  EXPECT_EQ(rep["sigma"].get<double>(), 1.0);
  EXPECT_NEAR(rep["epsilon"].get<double>(), prev, 1e-12);
  EXPECT_EQ(rep["clients"].size(), 3u);
  for (const auto& l : h.ledgers) EXPECT_EQ(l.steps_taken(), 4u * ((small_data().clients[0].n() + 31) / 32));
}

TEST(Engine, ZeroSigmaFlagsInfiniteEpsilon) {
  auto cfg = small_config();
  cfg.privacy.enabled = true;
  cfg.privacy.noise_multiplier = 0.0;
  cfg.training.rounds = 1;
  const auto h = run_simulation(cfg, small_data());
  EXPECT_FALSE(h.records[0].epsilon.has_value());
  const auto& f = h.records[0].flags;
  EXPECT_NE(std::find(f.begin(), f.end(), "epsilon_infinite"), f.end());
}

TEST(Engine, DisabledLedgerReport) {
  auto cfg = small_config();
  cfg.training.rounds = 1;
  const auto rep = ledger_report(cfg, run_simulation(cfg, small_data()));
  EXPECT_FALSE(rep["dp_enabled"].get<bool>());
  EXPECT_TRUE(rep["epsilon"].is_null());
}

TEST(Engine, ComparativeExperiment) {
  auto cfg = small_config("fedcvr");
  cfg.training.rounds = 2;
  const std::vector<double> sigmas{0.5, 1.5};
  const auto out = run_comparative_experiment(cfg, sigmas, small_data());
  ASSERT_EQ(out.size(), 3u);
  EXPECT_FALSE(out.at("baseline").records.back().epsilon.has_value());
  const double e_low = *out.at("sigma=0.5").records.back().epsilon;
  const double e_high = *out.at("sigma=1.5").records.back().epsilon;
  EXPECT_GT(e_low, e_high);
  const auto base = run_simulation(cfg, small_data());
  EXPECT_EQ(base.to_jsonl(), out.at("baseline").to_jsonl());
}

TEST(Evaluate, SingleClassHoldoutFlagsAuc) {
  std::vector<Sample> only_neg;
  for (const auto& s : small_data().holdout) {
    if (s.label == 0) only_neg.push_back(s);
  }
  const auto r = evaluate(init_params(1), only_neg);
  EXPECT_NE(std::find(r.undefined.begin(), r.undefined.end(), "auc"), r.undefined.end());
  EXPECT_THROW(evaluate(init_params(1), std::vector<Sample>{}), InputError);
}

TEST(Config, JsonRoundTrip) {
  auto cfg = small_config("fedyogi");
  cfg.privacy.enabled = true;
  cfg.privacy.noise_multiplier = 1.5;
  cfg.strategy.tau = 0.01;
  const auto j = to_json(cfg);
  EXPECT_EQ(to_json(config_from_json(j)).dump(), j.dump());
  auto bad = j;
  bad["learning_rate"] = 0.1;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  auto wrong_type = j;
  wrong_type["rounds"] = "ten";
  EXPECT_THROW(config_from_json(wrong_type), ConfigError);
  auto negative = j;
  negative["rounds"] = -3;
  EXPECT_THROW(config_from_json(negative), ConfigError);
}

TEST(Config, Validation) {
  auto cfg = small_config();
  cfg.training.partition_mode = "noniid";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.strategy_name = "bogus";
  EXPECT_THROW(Engine(cfg, small_data()), ConfigError);
  cfg = small_config();
  cfg.training.participation = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Data, PrepareIsDeterministic) {
  const auto again = prepare_data(small_config());
  EXPECT_EQ(again.manifest_digest, small_data().manifest_digest);
  std::size_t total = small_data().holdout.size();
  for (const auto& c : small_data().clients) total += c.n();
  EXPECT_EQ(total, 800u);
  auto other = small_config();
  other.data.data_seed = 7;
  EXPECT_NE(prepare_data(other).manifest_digest, small_data().manifest_digest);
}

}  // namespace
}  // namespace fedcvr
