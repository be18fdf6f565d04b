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

// fedcvr: gen-data | run | bench | report
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedcvr/bench.hpp"
#include "fedcvr/config.hpp"
#include "fedcvr/data.hpp"
#include "fedcvr/engine.hpp"
#include "json.hpp"

namespace {

using namespace fedcvr;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
};

std::string strategy_list() {
  std::string s;
  for (auto n : kStrategyNames) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

RunConfig base_config(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

/// Cohort + manifest written by gen-data, or a fresh cohort from the config.
FederatedData load_or_prepare(RunConfig& cfg, const std::string& data_dir) {
  if (data_dir.empty()) return prepare_data(cfg);
  const fs::path dir(data_dir);
  std::ifstream in(dir / "cohort.csv");
  if (!in) throw InputError("missing " + (dir / "cohort.csv").string());
  RawCohort cohort = read_cohort_csv(in);
  const auto mj = read_json(dir / ("partition_" + cfg.training.partition_mode + ".json"));
  Manifest m = parse_manifest(mj);
  cohort.seed = mj.at("seed").get<std::uint64_t>();
  cfg.data.n_samples = cohort.rows.size();
  cfg.data.data_seed = cohort.seed;
  if (m.partition.size() != cfg.training.num_clients) {
    throw ConfigError("manifest has " + std::to_string(m.partition.size()) + " clients, config asks for " +
                      std::to_string(cfg.training.num_clients));
  }
  return assemble_data(std::move(cohort), m.mode, std::move(m.split), std::move(m.partition));
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::size_t n = 30000;
  std::size_t clients = 5;
  double holdout = 0.2;
  std::string config;
};

int cmd_gen_data(const GlobalOptions& g, const GenDataArgs& a) {
  RunConfig cfg = base_config(a.config);
  cfg.data.n_samples = a.n;
  if (g.seed) cfg.data.data_seed = *g.seed;
  cfg.data.holdout_fraction = a.holdout;
  cfg.training.num_clients = 5;
  cfg.validate();
  const fs::path out = g.out.empty() ? fs::path("data") : fs::path(g.out);
  fs::create_directories(out);

  const FederatedData noniid = prepare_data(cfg.data, "noniid", kNonIidClients.size());
  const FederatedData iid = prepare_data(cfg.data, "iid", a.clients);
  {
    std::ostringstream csv;
    write_cohort_csv(csv, noniid.cohort);
    write_csv_with_meta(out / "cohort.csv", csv.str(), to_json(cfg), {{"n", noniid.cohort.rows.size()}});
  }
  write_json(out / "partition_iid.json", iid.manifest());
  write_json(out / "partition_noniid.json", noniid.manifest());

  nlohmann::ordered_json card;
  card["format_version"] = kFormatVersion;
  card["n"] = noniid.cohort.rows.size();
  card["seed"] = cfg.data.data_seed;
  card["prevalence"] = prevalence(noniid.cohort);
  card["holdout_size"] = noniid.split.holdout.size();
  auto shard_sizes = [](const FederatedData& d) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& c : d.clients) {
      j[std::to_string(c.client_id)] = {{"specialty", specialty_name(c.specialty)}, {"rows", c.n()}};
    }
    return j;
  };
  card["iid_shards"] = shard_sizes(iid);
  card["noniid_shards"] = shard_sizes(noniid);
  const auto full = partition_noniid_rows(noniid.cohort, all_rows(noniid.cohort));
  nlohmann::ordered_json whole = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < full.size(); ++i) {
    const double dev = static_cast<double>(full[i].rows.size()) / static_cast<double>(kNonIidTargetSizes[i]) - 1.0;
    whole.push_back({{"specialty", specialty_name(full[i].specialty)},
                     {"rows", full[i].rows.size()},
                     {"target", kNonIidTargetSizes[i]},
                     {"relative_deviation", dev}});
  }
  card["noniid_whole_cohort"] = std::move(whole);
  card["config"] = to_json(cfg);
  write_json(out / "datacard.json", card);
  std::fprintf(stderr, "wrote %zu rows to %s (prevalence %.4f)\n", noniid.cohort.rows.size(), out.string().c_str(),
               prevalence(noniid.cohort));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string strategy;
  std::string dp;
  std::optional<double> sigma;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> n;
  std::string data;
};

int cmd_run(const GlobalOptions& g, const RunArgs& a) {
  RunConfig cfg = base_config(a.config);
  if (!a.strategy.empty()) cfg.strategy_name = a.strategy;
  if (!a.dp.empty()) cfg.privacy.enabled = a.dp == "on";
  if (a.sigma) cfg.privacy.noise_multiplier = *a.sigma;
  if (a.rounds) cfg.training.rounds = *a.rounds;
  if (a.n) cfg.data.n_samples = *a.n;
  if (g.seed) cfg.training.seed = *g.seed;
  cfg.validate();
  const FederatedData data = load_or_prepare(cfg, a.data);
  const fs::path out = g.out.empty() ? fs::path("run") : fs::path(g.out);
  fs::create_directories(out);

  const auto every = cfg.training.checkpoint_every;
  const auto on_round = [&](const RoundRecord& r, const Engine& engine) {
    std::fprintf(stderr, "round %zu/%zu global_loss=%.6f eval_loss=%.6f f1=%.4f auc=%.4f eps=%s%s\n", r.round,
                 cfg.training.rounds, r.global_loss, r.eval_loss, r.f1, r.auc,
                 r.epsilon ? fmt_num(*r.epsilon).c_str() : "null", r.failed.empty() ? "" : " (client failures)");
    if (every > 0 && r.round % every == 0) {
      std::ofstream ck(out / ("checkpoint-round-" + std::to_string(r.round) + ".bin"), std::ios::binary);
      engine.strategy().save_state(ck);
    }
    if (r.round == cfg.training.rounds) {
      // Global model plus optimizer state.
      std::ofstream ck(out / "checkpoint.bin", std::ios::binary);
      engine.strategy().save_state(ck);
    }
  };
  const RunHistory h = run_simulation(cfg, data, g.jobs, on_round);
  write_run_artifacts(out, cfg, h);
  std::fprintf(stderr, "final digest %s, wrote %s\n", h.final_digest.c_str(), out.string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<double> sigmas;
  double compare_sigma = 1.0;
  bool paired = false;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> n;
  std::string data;
  bool summarize_only = false;
};

int cmd_bench(const GlobalOptions& g, const BenchArgs& a) {
  const fs::path out = g.out.empty() ? fs::path("bench") : fs::path(g.out);
  if (a.summarize_only) {
    summarize_bench(out);
    std::fprintf(stderr, "summaries rebuilt in %s\n", out.string().c_str());
    return kExitOk;
  }
  BenchPlan plan;
  if (a.config.empty()) {
    // Desk scale unless a config says otherwise.
    plan.base.data.n_samples = 3000;
    plan.base.training.rounds = 30;
  } else {
    plan.base = load_config(a.config);
  }
  if (a.rounds) plan.base.training.rounds = *a.rounds;
  if (a.n) plan.base.data.n_samples = *a.n;
  if (!a.strategies.empty()) plan.strategies = a.strategies;
  const std::uint64_t base_seed = g.seed.value_or(42);
  plan.seeds = a.seeds.empty() ? std::vector<std::uint64_t>{base_seed, base_seed + 1, base_seed + 2} : a.seeds;
  if (!a.sigmas.empty()) plan.sigmas = a.sigmas;
  plan.compare_sigma = a.compare_sigma;
  plan.paired = a.paired;
  plan.validate();
  const FederatedData data = load_or_prepare(plan.base, a.data);
  run_bench(out, plan, data, g.jobs, [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
  std::fprintf(stderr, "wrote %s\n", out.string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_report(const GlobalOptions& g, const std::string& bench_dir) {
  const fs::path out = g.out.empty() ? fs::path(bench_dir) / "report" : fs::path(g.out);
  write_report(bench_dir, out);
  const auto manifest = read_json(out / "report-manifest.json");
  std::fprintf(stderr, "wrote %s (%zu gaps)\n", out.string().c_str(), manifest["gaps"].size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated cardiovascular risk simulation with server-side adaptive optimization and DP-SGD"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed (data seed for gen-data, training seed for run, base seed for bench)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write cohort.csv, partition manifests and datacard.json");
  gen_cmd->add_option("--n", gen.n, "Cohort size")->capture_default_str();
  gen_cmd->add_option("--clients", gen.clients, "IID client count")->capture_default_str();
  gen_cmd->add_option("--holdout", gen.holdout, "Holdout fraction")->capture_default_str();
  gen_cmd->add_option("--config", gen.config, "Config file (generator parameters)");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  run_cmd->add_option("--config", run.config, "Config file");
  run_cmd->add_option("--strategy", run.strategy, "One of: " + strategy_list());
  run_cmd->add_option("--dp", run.dp, "on|off")->check(CLI::IsMember({"on", "off"}));
  run_cmd->add_option("--sigma", run.sigma, "Noise multiplier");
  run_cmd->add_option("--rounds", run.rounds, "Override rounds");
  run_cmd->add_option("--n", run.n, "Override cohort size");
  run_cmd->add_option("--data", run.data, "Directory written by gen-data");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Strategy comparison and privacy-utility sweep");
  bench_cmd->add_option("--config", bench.config, "Config file (default: 3000 samples, 30 rounds)");
  bench_cmd->add_option("--strategies", bench.strategies, "Comma-separated strategies")->delimiter(',');
  bench_cmd->add_option("--seeds", bench.seeds, "Comma-separated seeds (default: seed, seed+1, seed+2)")
      ->delimiter(',');
  bench_cmd->add_option("--sigmas", bench.sigmas, "Comma-separated noise multipliers; 0 means DP off")
      ->delimiter(',');
  bench_cmd->add_option("--compare-sigma", bench.compare_sigma, "Noise multiplier for the strategy comparison")
      ->capture_default_str();
  bench_cmd->add_flag("--paired", bench.paired, "Paired t-test on matched seeds instead of Welch");
  bench_cmd->add_option("--rounds", bench.rounds, "Override rounds");
  bench_cmd->add_option("--n", bench.n, "Override cohort size");
  bench_cmd->add_option("--data", bench.data, "Directory written by gen-data");
  bench_cmd->add_flag("--summarize-only", bench.summarize_only, "Rebuild summaries from stored runs");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Plot-ready CSVs from a bench directory");
  report_cmd->add_option("--bench", report_dir, "Bench directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run_cmd->parsed() && !run.strategy.empty() && !is_strategy_name(run.strategy)) {
      throw ConfigError("unknown strategy '" + run.strategy + "'; valid strategies: " + strategy_list());
    }
    if (*gen_cmd) return cmd_gen_data(g, gen);
    if (*run_cmd) return cmd_run(g, run);
    if (*bench_cmd) return cmd_bench(g, bench);
    if (*report_cmd) return cmd_report(g, report_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
