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

// Federated round engine: client-side (DP-)SGD, server rounds, whole
// simulations and the paired DP-off / DP-on comparison.
//
// Seeding contract. Every random stream is derived from the run seed:
//   client stream  = hash64(seed, "client", {round, client_id})
//   shuffle stream = hash64(client stream, "shuffle")
//   noise stream   = hash64(client stream, "noise")
//   participation  = hash64(seed, "participation", {round})
//   model init     = init_params(seed)
// so results do not depend on how many threads run the clients.

#ifndef FEDCVR_ENGINE_HPP_
#define FEDCVR_ENGINE_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedcvr/common.hpp"
#include "fedcvr/config.hpp"
#include "fedcvr/data.hpp"
#include "fedcvr/metrics.hpp"
#include "fedcvr/model.hpp"
#include "fedcvr/privacy.hpp"
#include "fedcvr/strategies.hpp"
#include "json.hpp"

namespace fedcvr {

// ---------------------------------------------------------------------------
// Data preparation

/// Everything a simulation reads: the cohort, the global scaler, the holdout
/// split and the client shards. Immutable once built.
struct FederatedData {
  RawCohort cohort;
  ScalerParams scaler;
  HoldoutSplit split;
  Partition partition;
  std::string mode;
  std::vector<ClientDataset> clients;
  std::vector<Sample> holdout;
  std::string manifest_digest;

  nlohmann::ordered_json manifest() const { return manifest_json(mode, cohort, split, partition); }
};

namespace detail {

inline std::string string_digest(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

}  // namespace detail

/// Builds shards from a cohort and an explicit manifest (holdout + partition).
inline FederatedData assemble_data(RawCohort cohort, std::string mode, HoldoutSplit split, Partition partition) {
  FederatedData d;
  d.cohort = std::move(cohort);
  d.scaler = fit_scaler(d.cohort);
  d.mode = std::move(mode);
  d.split = std::move(split);
  d.partition = std::move(partition);
  for (std::size_t idx : d.split.holdout) d.holdout.push_back(to_sample(d.scaler, d.cohort.rows.at(idx)));
  d.clients = materialize(d.cohort, d.scaler, d.partition);
  d.manifest_digest = detail::string_digest(d.manifest().dump());
  return d;
}

/// Generate, label, fit the scaler on the whole cohort, carve the stratified
/// holdout, then partition the remaining rows.
inline FederatedData prepare_data(const DataConfig& dc, const std::string& mode, std::size_t num_clients) {
  RawCohort cohort = build_cohort(dc.n_samples, dc.data_seed, dc.generator);
  HoldoutSplit split = stratified_holdout(cohort, dc.holdout_fraction, dc.data_seed);
  Partition partition;
  if (mode == "iid") {
    partition = partition_iid_rows(split.train, num_clients, dc.data_seed);
  } else if (mode == "noniid") {
    partition = partition_noniid_rows(cohort, split.train);
  } else {
    throw ConfigError("unknown partition mode '" + mode + "'");
  }
  return assemble_data(std::move(cohort), mode, std::move(split), std::move(partition));
}

inline FederatedData prepare_data(const RunConfig& cfg) {
  return prepare_data(cfg.data, cfg.training.partition_mode, cfg.training.num_clients);
}

inline ClientSummary summarize_client(const ClientDataset& d) {
  ClientSummary s{d.client_id, d.n(), std::vector<double>(kNumFeatures + 1, 0.0)};
  for (const auto& smp : d.samples) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) s.features[f] += smp.features[f];
    s.features[kNumFeatures] += smp.label;
  }
  if (d.n() > 0) {
    for (double& x : s.features) x /= static_cast<double>(d.n());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Client update

inline std::uint64_t client_stream_seed(std::uint64_t run_seed, std::size_t round, int client_id) {
  return hash64(run_seed, "client", {round, static_cast<std::uint64_t>(client_id)});
}

/// E epochs of minibatch SGD from w. Per batch: per-sample gradients (plus the
/// proximal gradient when mu > 0), then either the plain sum or the DP sum of
/// clipped gradients plus noise, divided by the true batch size. Throws
/// NumericError when the weights become non-finite.
inline RoundUpdate client_update(const ParamVector& w, const ClientDataset& data, const TrainingConfig& tcfg,
                                 const PrivacyConfig& pcfg, std::uint64_t round_seed, double prox_mu = 0.0,
                                 const ModelConfig& mcfg = {}) {
  if (data.samples.empty()) throw InputError("client_update: empty dataset");
  const std::size_t n = data.n();
  const std::size_t dim = w.size();
  std::mt19937_64 shuffle_rng(hash64(round_seed, "shuffle"));
  std::mt19937_64 noise_rng(hash64(round_seed, "noise"));

  ParamVector wk = w;
  std::vector<std::size_t> order(n);
  std::vector<ParamVector> batch_grads(std::min(tcfg.batch_size, n), ParamVector(dim));
  ParamVector sum(dim);
  BackpropScratch scratch;
  double epoch_loss = 0.0;
  std::uint64_t steps = 0;

  for (std::size_t epoch = 0; epoch < tcfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
      const std::size_t bsize = std::min(tcfg.batch_size, n - start);
      for (std::size_t b = 0; b < bsize; ++b) {
        auto& g = batch_grads[b];
        epoch_loss += loss_and_gradient(wk.span(), data.samples[order[start + b]], g.span(), scratch, mcfg);
        if (prox_mu > 0.0) {
          for (std::size_t i = 0; i < dim; ++i) g[i] += prox_mu * (wk[i] - w[i]);
        }
      }
      if (pcfg.enabled) {
        sum = noisy_batch_gradient(std::span<const ParamVector>(batch_grads.data(), bsize), pcfg, noise_rng);
      } else {
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t b = 0; b < bsize; ++b) {
          for (std::size_t i = 0; i < dim; ++i) sum[i] += batch_grads[b][i];
        }
      }
      const double denom = static_cast<double>(bsize);
      for (std::size_t i = 0; i < dim; ++i) wk[i] -= tcfg.client_lr * (sum[i] / denom);
      ++steps;
    }
    if (!wk.all_finite()) {
      throw NumericError("client " + std::to_string(data.client_id) + ": non-finite weights in epoch " +
                         std::to_string(epoch + 1));
    }
  }

  RoundUpdate u;
  u.client_id = data.client_id;
  u.pseudo_gradient = ParamVector(dim);
  for (std::size_t i = 0; i < dim; ++i) u.pseudo_gradient[i] = w[i] - wk[i];
  u.local_params = std::move(wk);
  u.n_samples = n;
  u.local_loss = epoch_loss / static_cast<double>(n);
  u.noise_steps = pcfg.enabled ? steps : 0;
  return u;
}

// ---------------------------------------------------------------------------
// Round records

struct EvalResult {
  double loss = 0.0;
  ConfusionCounts counts;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0, auc = 0.0;
  std::vector<std::string> undefined;
  std::vector<ScoredPrediction> scored;
};

inline EvalResult evaluate(const ParamVector& w, std::span<const Sample> samples, const ModelConfig& mcfg = {}) {
  if (samples.empty()) throw InputError("evaluate: empty evaluation set");
  EvalResult r;
  r.scored.reserve(samples.size());
  double loss = 0.0;
  for (const auto& s : samples) {
    const double p = forward(w, s.features, mcfg);
    loss += bce_loss(p, s.label);
    r.scored.push_back({p, s.label});
  }
  r.loss = loss / static_cast<double>(samples.size());
  r.counts = confusion(r.scored);
  r.accuracy = accuracy(r.counts);
  r.precision = precision(r.counts);
  r.recall = recall(r.counts);
  r.f1 = f1(r.counts);
  r.undefined = undefined_metrics(r.counts);
  try {
    r.auc = auc(r.scored);
  } catch (const InputError&) {
    r.auc = 0.0;
    r.undefined.emplace_back("auc");
  }
  return r;
}

struct RoundRecord {
  std::size_t round = 0;
  double global_loss = 0.0;  // size-weighted mean of client local losses
  double eval_loss = 0.0;    // BCE of the global model on the holdout set
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0, auc = 0.0;
  std::vector<int> participants;
  std::vector<int> failed;
  std::map<int, double> client_loss;
  std::optional<double> epsilon;  // worst client so far; empty when DP is off
  std::vector<std::string> flags;
};

inline nlohmann::ordered_json to_json(const RoundRecord& r) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["round"] = r.round;
  j["global_loss"] = r.global_loss;
  j["eval_loss"] = r.eval_loss;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc"] = r.auc;
  j["participants"] = r.participants;
  j["failed"] = r.failed;
  nlohmann::ordered_json losses = nlohmann::ordered_json::object();
  for (const auto& [id, loss] : r.client_loss) losses[std::to_string(id)] = loss;
  j["client_loss"] = std::move(losses);
  if (r.epsilon) {
    j["epsilon"] = *r.epsilon;
  } else {
    j["epsilon"] = nullptr;
  }
  j["flags"] = r.flags;
  return j;
}

inline RoundRecord round_record_from_json(const nlohmann::json& j) {
  RoundRecord r;
  r.round = j.at("round").get<std::size_t>();
  r.global_loss = j.at("global_loss").get<double>();
  r.eval_loss = j.at("eval_loss").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.auc = j.at("auc").get<double>();
  r.participants = j.at("participants").get<std::vector<int>>();
  r.failed = j.at("failed").get<std::vector<int>>();
  for (const auto& [id, loss] : j.at("client_loss").items()) r.client_loss[std::stoi(id)] = loss.get<double>();
  if (!j.at("epsilon").is_null()) r.epsilon = j.at("epsilon").get<double>();
  r.flags = j.at("flags").get<std::vector<std::string>>();
  return r;
}

struct RunHistory {
  std::vector<RoundRecord> records;
  nlohmann::ordered_json config;
  std::string manifest_digest;
  ParamVector final_params;
  std::string final_digest;
  std::vector<ScoredPrediction> final_scores;
  std::vector<PrivacyLedger> ledgers;  // one per client, DP runs only
  double wall_time_s = 0.0;

  /// One JSON object per round, stable key order, LF-terminated.
  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records) {
      out += to_json(r).dump();
      out += '\n';
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Engine

class Engine {
 public:
  Engine(RunConfig cfg, const FederatedData& data, std::size_t jobs = 1)
      : cfg_(std::move(cfg)), data_(data), jobs_(std::max<std::size_t>(jobs, 1)) {
    cfg_.validate();
    if (data_.clients.empty()) throw ConfigError("engine: no clients");
    if (data_.holdout.empty()) throw ConfigError("engine: empty holdout set");
    strategy_ = make_strategy(cfg_.strategy_name, cfg_.strategy, cfg_.training.seed);
    std::vector<ClientSummary> summaries;
    for (const auto& c : data_.clients) summaries.push_back(summarize_client(c));
    strategy_->initialize(init_params(cfg_.training.seed), summaries);
    if (cfg_.privacy.enabled) {
      for (const auto& c : data_.clients) {
        PrivacyConfig p = cfg_.privacy;
        p.sampling_rate = std::min(1.0, static_cast<double>(cfg_.training.batch_size) / static_cast<double>(c.n()));
        ledgers_.emplace_back(p);
      }
    }
  }

  const Strategy& strategy() const { return *strategy_; }
  Strategy& strategy() { return *strategy_; }
  const std::vector<PrivacyLedger>& ledgers() const { return ledgers_; }
  std::size_t rounds_completed() const { return round_; }
  const EvalResult& last_eval() const { return last_eval_; }

  /// Indices (into data.clients) taking part in `round`.
  std::vector<std::size_t> select_clients(std::size_t round) const {
    const std::size_t k = data_.clients.size();
    const auto m = static_cast<std::size_t>(std::ceil(cfg_.training.participation * static_cast<double>(k) - 1e-9));
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (m < k) {
      std::mt19937_64 rng(hash64(cfg_.training.seed, "participation", {round}));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(std::max<std::size_t>(m, 1));
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  }

  RoundRecord run_round() {
    const std::size_t round = ++round_;
    const auto selected = select_clients(round);
    const double mu = strategy_->prox_mu();

    std::vector<std::optional<RoundUpdate>> results(selected.size());
    std::vector<std::string> errors(selected.size());
    parallel_for(selected.size(), jobs_, [&](std::size_t i) {
      const auto& client = data_.clients[selected[i]];
      PrivacyConfig p = cfg_.privacy;
      if (!ledgers_.empty()) p = ledgers_[selected[i]].config();
      try {
        results[i] = client_update(strategy_->model_for_client(client.client_id), client, cfg_.training, p,
                                   client_stream_seed(cfg_.training.seed, round, client.client_id), mu);
      } catch (const NumericError& e) {
        errors[i] = e.what();
      }
    });

    RoundRecord rec;
    rec.round = round;
    std::vector<RoundUpdate> updates;
    std::vector<double> losses;
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < selected.size(); ++i) {
      const int id = data_.clients[selected[i]].client_id;
      rec.participants.push_back(id);
      if (!results[i]) {
        rec.failed.push_back(id);
        rec.flags.push_back("client_failed:" + std::to_string(id));
        continue;
      }
      rec.client_loss[id] = results[i]->local_loss;
      losses.push_back(results[i]->local_loss);
      sizes.push_back(results[i]->n_samples);
      if (!ledgers_.empty()) ledgers_[selected[i]].compose(results[i]->noise_steps);
      updates.push_back(std::move(*results[i]));
    }
    if (updates.empty()) {
      std::string why = "round " + std::to_string(round) + ": every client failed";
      for (const auto& e : errors) {
        if (!e.empty()) why += "; " + e;
      }
      throw RoundError(why);
    }

    strategy_->step(updates);
    for (auto& w : strategy_->take_warnings()) rec.flags.push_back(std::move(w));

    rec.global_loss = global_loss(losses, sizes);
    last_eval_ = evaluate(strategy_->global_model(), data_.holdout);
    rec.eval_loss = last_eval_.loss;
    rec.accuracy = last_eval_.accuracy;
    rec.precision = last_eval_.precision;
    rec.recall = last_eval_.recall;
    rec.f1 = last_eval_.f1;
    rec.auc = last_eval_.auc;
    for (const auto& u : last_eval_.undefined) rec.flags.push_back("undefined:" + u);
    if (!ledgers_.empty()) rec.epsilon = worst_epsilon(rec.flags);
    return rec;
  }

 private:
  std::optional<double> worst_epsilon(std::vector<std::string>& flags) const {
    double worst = 0.0;
    bool any = false;
    for (const auto& l : ledgers_) {
      if (l.steps_taken() == 0) continue;
      if (l.config().noise_multiplier == 0.0) {
        flags.emplace_back("epsilon_infinite");
        return std::nullopt;
      }
      worst = std::max(worst, l.to_epsilon(l.config().delta).epsilon);
      any = true;
    }
    if (!any) return 0.0;
    return worst;
  }

  RunConfig cfg_;
  const FederatedData& data_;
  std::size_t jobs_;
  std::unique_ptr<Strategy> strategy_;
  std::vector<PrivacyLedger> ledgers_;
  std::size_t round_ = 0;
  EvalResult last_eval_;
};

using RoundCallback = std::function<void(const RoundRecord&, const Engine&)>;

/// Runs cfg.training.rounds rounds and collects the history.
inline RunHistory run_simulation(const RunConfig& cfg, const FederatedData& data, std::size_t jobs = 1,
                                 const RoundCallback& on_round = {}) {
  const auto start = std::chrono::steady_clock::now();
  Engine engine(cfg, data, jobs);
  RunHistory h;
  h.config = to_json(cfg);
  h.manifest_digest = data.manifest_digest;
  for (std::size_t r = 0; r < cfg.training.rounds; ++r) {
    h.records.push_back(engine.run_round());
    if (on_round) on_round(h.records.back(), engine);
  }
  h.final_params = engine.strategy().global_model();
  h.final_digest = digest_hex(h.final_params.span());
  h.final_scores = engine.last_eval().scored;
  h.ledgers = engine.ledgers();
  h.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return h;
}

/// Ledger summary for a run: the worst-case client's report plus every
/// client's. Also reports epsilon under the one-step-per-round, q = 1 reading.
inline nlohmann::ordered_json ledger_report(const RunConfig& cfg, const RunHistory& h) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["dp_enabled"] = cfg.privacy.enabled;
  if (!cfg.privacy.enabled || h.ledgers.empty()) {
    j["steps"] = 0;
    j["sigma"] = nullptr;
    j["clip_norm"] = cfg.privacy.clip_norm;
    j["q"] = nullptr;
    j["delta"] = cfg.privacy.delta;
    j["epsilon"] = nullptr;
    j["best_alpha"] = nullptr;
    j["config"] = h.config;
    return j;
  }
  std::size_t worst = 0;
  double worst_eps = -1.0;
  nlohmann::ordered_json clients = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < h.ledgers.size(); ++i) {
    auto rep = h.ledgers[i].report();
    const double eps =
        rep["epsilon"].is_null() ? std::numeric_limits<double>::infinity() : rep["epsilon"].get<double>();
    if (eps > worst_eps) {
      worst_eps = eps;
      worst = i;
    }
    clients.push_back(std::move(rep));
  }
  const auto worst_report = h.ledgers[worst].report();
  for (const auto& [k, v] : worst_report.items()) j[k] = v;
  j["accounting"] = "rdp_subsampled_gaussian_classic_conversion";
  if (cfg.privacy.noise_multiplier > 0.0) {
    j["epsilon_full_batch_per_round"] =
        epsilon_for(1.0, cfg.privacy.noise_multiplier, h.records.size(), cfg.privacy.delta).epsilon;
  } else {
    j["epsilon_full_batch_per_round"] = nullptr;
  }
  j["clients"] = std::move(clients);
  j["config"] = h.config;
  return j;
}

/// DP-off baseline first, then one DP run per sigma, all on the same shards
/// and model-init seed. Keys: "baseline", "sigma=<value>".
inline std::map<std::string, RunHistory> run_comparative_experiment(const RunConfig& base,
                                                                    std::span<const double> sigmas,
                                                                    const FederatedData& data,
                                                                    std::size_t jobs = 1) {
  std::map<std::string, RunHistory> out;
  RunConfig off = base;
  off.privacy.enabled = false;
  out.emplace("baseline", run_simulation(off, data, jobs));
  for (double s : sigmas) {
    RunConfig on = base;
    on.privacy.enabled = true;
    on.privacy.noise_multiplier = s;
    nlohmann::json key = s;
    out.emplace("sigma=" + key.dump(), run_simulation(on, data, jobs));
  }
  return out;
}

}  // namespace fedcvr

#endif  // FEDCVR_ENGINE_HPP_
