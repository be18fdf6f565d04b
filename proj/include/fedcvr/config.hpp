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

// Run configuration: one flat JSON object whose keys cover data generation,
// local training, privacy and the server strategy. Unknown keys are rejected.

#ifndef FEDCVR_CONFIG_HPP_
#define FEDCVR_CONFIG_HPP_

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include "fedcvr/common.hpp"
#include "fedcvr/data.hpp"
#include "fedcvr/privacy.hpp"
#include "fedcvr/strategies.hpp"
#include "json.hpp"

namespace fedcvr {

inline constexpr int kFormatVersion = 1;

struct DataConfig {
  std::size_t n_samples = 30000;
  std::uint64_t data_seed = 42;
  double holdout_fraction = 0.2;
  GeneratorConfig generator;
};

struct TrainingConfig {
  std::size_t num_clients = 5;
  std::size_t rounds = 100;
  std::size_t local_epochs = 5;
  double client_lr = 0.01;
  std::size_t batch_size = 32;
  double participation = 1.0;
  std::uint64_t seed = 42;
  std::string partition_mode = "noniid";
  std::size_t checkpoint_every = 0;

  void validate() const {
    if (num_clients < 1) throw ConfigError("num_clients must be at least 1");
    if (rounds < 1) throw ConfigError("rounds must be at least 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(client_lr > 0.0)) throw ConfigError("client_lr must be positive");
    if (!(participation > 0.0 && participation <= 1.0)) throw ConfigError("participation must lie in (0, 1]");
    if (partition_mode != "iid" && partition_mode != "noniid") {
      throw ConfigError("partition_mode must be 'iid' or 'noniid'");
    }
    if (partition_mode == "noniid" && num_clients != kNonIidClients.size()) {
      throw ConfigError("noniid partitioning defines exactly 5 clients");
    }
  }
};

struct RunConfig {
  DataConfig data;
  TrainingConfig training;
  PrivacyConfig privacy;
  StrategyConfig strategy;
  std::string strategy_name = "fedcvr";

  void validate() const {
    training.validate();
    strategy.validate();
    privacy.validate();
    if (!is_strategy_name(strategy_name)) make_strategy(strategy_name, strategy, 0);  // throws with the list
    if (data.n_samples < 10) throw ConfigError("n_samples must be at least 10");
    if (!(data.holdout_fraction >= 0.0 && data.holdout_fraction < 1.0)) {
      throw ConfigError("holdout_fraction must lie in [0, 1)");
    }
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  const auto& g = c.data.generator;
  nlohmann::ordered_json j;
  j["n_samples"] = c.data.n_samples;
  j["data_seed"] = c.data.data_seed;
  j["holdout_fraction"] = c.data.holdout_fraction;
  j["age_band_weights"] = g.age_band_weights;
  j["systolic_mean"] = g.systolic_mean;
  j["systolic_sd"] = g.systolic_sd;
  j["diastolic_mean"] = g.diastolic_mean;
  j["diastolic_sd"] = g.diastolic_sd;
  j["cholesterol_mean"] = g.cholesterol_mean;
  j["cholesterol_sd"] = g.cholesterol_sd;
  j["smoker_rate"] = g.smoker_rate;
  j["diabetic_rate"] = g.diabetic_rate;
  j["partition_mode"] = c.training.partition_mode;
  j["num_clients"] = c.training.num_clients;
  j["rounds"] = c.training.rounds;
  j["local_epochs"] = c.training.local_epochs;
  j["client_lr"] = c.training.client_lr;
  j["batch_size"] = c.training.batch_size;
  j["participation"] = c.training.participation;
  j["seed"] = c.training.seed;
  j["checkpoint_every"] = c.training.checkpoint_every;
  j["strategy"] = c.strategy_name;
  j["server_lr"] = c.strategy.server_lr;
  j["beta1"] = c.strategy.beta1;
  j["beta2"] = c.strategy.beta2;
  j["tau"] = c.strategy.tau;
  j["prox_mu"] = c.strategy.prox_mu;
  j["n_clusters"] = c.strategy.n_clusters;
  j["dp_enabled"] = c.privacy.enabled;
  j["clip_norm"] = c.privacy.clip_norm;
  j["noise_multiplier"] = c.privacy.noise_multiplier;
  j["delta"] = c.privacy.delta;
  return j;
}

namespace detail {

template <typename T>
void read_key(const nlohmann::ordered_json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    const auto& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(std::string(key) + ": expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(std::string(key) + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
    }
    out = v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

}  // namespace detail

/// Parses a flat config object on top of the defaults.
inline RunConfig config_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  const RunConfig defaults;
  const auto known = to_json(defaults);
  for (const auto& [key, _] : j.items()) {
    if (key == "format_version") continue;
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  RunConfig c;
  auto& g = c.data.generator;
  detail::read_key(j, "n_samples", c.data.n_samples);
  detail::read_key(j, "data_seed", c.data.data_seed);
  detail::read_key(j, "holdout_fraction", c.data.holdout_fraction);
  if (j.contains("age_band_weights")) {
    const auto& w = j.at("age_band_weights");
    if (!w.is_array() || w.size() != 3) throw ConfigError("age_band_weights: expected 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!w[i].is_number()) throw ConfigError("age_band_weights: expected 3 numbers");
      g.age_band_weights[i] = w[i].get<double>();
    }
  }
  detail::read_key(j, "systolic_mean", g.systolic_mean);
  detail::read_key(j, "systolic_sd", g.systolic_sd);
  detail::read_key(j, "diastolic_mean", g.diastolic_mean);
  detail::read_key(j, "diastolic_sd", g.diastolic_sd);
  detail::read_key(j, "cholesterol_mean", g.cholesterol_mean);
  detail::read_key(j, "cholesterol_sd", g.cholesterol_sd);
  detail::read_key(j, "smoker_rate", g.smoker_rate);
  detail::read_key(j, "diabetic_rate", g.diabetic_rate);
  detail::read_key(j, "partition_mode", c.training.partition_mode);
  detail::read_key(j, "num_clients", c.training.num_clients);
  detail::read_key(j, "rounds", c.training.rounds);
  detail::read_key(j, "local_epochs", c.training.local_epochs);
  detail::read_key(j, "client_lr", c.training.client_lr);
  detail::read_key(j, "batch_size", c.training.batch_size);
  detail::read_key(j, "participation", c.training.participation);
  detail::read_key(j, "seed", c.training.seed);
  detail::read_key(j, "checkpoint_every", c.training.checkpoint_every);
  detail::read_key(j, "strategy", c.strategy_name);
  detail::read_key(j, "server_lr", c.strategy.server_lr);
  detail::read_key(j, "beta1", c.strategy.beta1);
  detail::read_key(j, "beta2", c.strategy.beta2);
  detail::read_key(j, "tau", c.strategy.tau);
  detail::read_key(j, "prox_mu", c.strategy.prox_mu);
  detail::read_key(j, "n_clusters", c.strategy.n_clusters);
  detail::read_key(j, "dp_enabled", c.privacy.enabled);
  detail::read_key(j, "clip_norm", c.privacy.clip_norm);
  detail::read_key(j, "noise_multiplier", c.privacy.noise_multiplier);
  detail::read_key(j, "delta", c.privacy.delta);
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace fedcvr

#endif  // FEDCVR_CONFIG_HPP_
