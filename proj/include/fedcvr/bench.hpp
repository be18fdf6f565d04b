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

// Benchmark harness: runs (strategy x seed) and (sigma x seed) cells, stores
// per-run artifacts, and rebuilds every summary and report CSV from disk.
//
// Layout of a bench directory:
//   bench.json                    plan (config, strategies, seeds, sigmas)
//   runs/<cell>/history.jsonl     one record per round
//   runs/<cell>/run.json          config, digests, wall time
//   runs/<cell>/ledger.json       privacy report
//   runs/<cell>/params.bin        final global parameters
//   runs/<cell>/scores.csv        final-model holdout scores
//   runs/<cell>/error.json        written instead when the cell failed
//   comparison.csv, tradeoff.csv  summaries (+ .meta.json sidecars)

#ifndef FEDCVR_BENCH_HPP_
#define FEDCVR_BENCH_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedcvr/common.hpp"
#include "fedcvr/config.hpp"
#include "fedcvr/engine.hpp"
#include "fedcvr/metrics.hpp"
#include "fedcvr/stats.hpp"
#include "json.hpp"

namespace fedcvr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Small file helpers

/// RFC-4180 field: quoted when it holds a comma, quote, CR or LF.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  out += '\n';
  return out;
}

/// Shortest round-trip decimal; NaN becomes an empty cell.
inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::ordered_json read_json(const fs::path& path) {
  try {
    return nlohmann::ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

/// CSV plus a sidecar carrying the format version and the resolved config.
inline void write_csv_with_meta(const fs::path& path, const std::string& body, const nlohmann::ordered_json& config,
                                const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  write_text(path, body);
  nlohmann::ordered_json meta;
  meta["format_version"] = kFormatVersion;
  meta["file"] = path.filename().string();
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  meta["config"] = config;
  write_json(path.string() + ".meta.json", meta);
}

// ---------------------------------------------------------------------------
// Single-run artifacts

inline std::string scores_csv(std::span<const ScoredPrediction> scored) {
  std::string out = "score,label\n";
  for (const auto& s : scored) out += fmt_num(s.score) + "," + std::to_string(s.label) + "\n";
  return out;
}

inline std::vector<ScoredPrediction> read_scores_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "score,label") throw InputError(path.string() + ": unexpected header");
  std::vector<ScoredPrediction> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError(path.string() + ": malformed line");
    out.push_back({std::strtod(line.substr(0, comma).c_str(), nullptr), std::stoi(line.substr(comma + 1))});
  }
  return out;
}

/// Writes history.jsonl, run.json, ledger.json, params.bin and scores.csv.
inline void write_run_artifacts(const fs::path& dir, const RunConfig& cfg, const RunHistory& h) {
  fs::create_directories(dir);
  write_text(dir / "history.jsonl", h.to_jsonl());
  nlohmann::ordered_json run;
  run["format_version"] = kFormatVersion;
  run["rounds"] = h.records.size();
  run["manifest_digest"] = h.manifest_digest;
  run["final_params_digest"] = h.final_digest;
  run["wall_time_s"] = h.wall_time_s;
  run["config"] = h.config;
  write_json(dir / "run.json", run);
  write_json(dir / "ledger.json", ledger_report(cfg, h));
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / "params.bin").string());
    write_params(out, h.final_params);
  }
  write_text(dir / "scores.csv", scores_csv(h.final_scores));
}

inline std::vector<RoundRecord> read_history(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<RoundRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(round_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bench plan

struct BenchCell {
  std::string strategy;
  double sigma = 0.0;  // 0 means DP off
  std::uint64_t seed = 0;

  std::string name() const { return strategy + "__sigma-" + fmt_num(sigma) + "__seed-" + std::to_string(seed); }
  friend bool operator==(const BenchCell&, const BenchCell&) = default;
};

struct BenchPlan {
  RunConfig base;
  std::vector<std::string> strategies{kStrategyNames.begin(), kStrategyNames.end()};
  std::vector<std::uint64_t> seeds{42, 43, 44};
  std::vector<double> sigmas{0.0, 1.0, 1.5};
  double compare_sigma = 1.0;
  bool paired = false;

  void validate() const {
    base.validate();
    if (strategies.empty()) throw ConfigError("bench: no strategies");
    for (const auto& s : strategies) {
      if (!is_strategy_name(s)) make_strategy(s, base.strategy, 0);
    }
    if (seeds.size() < 2) throw ConfigError("bench: at least two seeds are needed for statistics");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw ConfigError("bench: duplicate seeds");
    }
    for (double s : sigmas) {
      if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("bench: sigmas must be finite and non-negative");
    }
    if (!(compare_sigma >= 0.0) || !std::isfinite(compare_sigma)) {
      throw ConfigError("bench: comparison sigma must be finite and non-negative");
    }
  }

  /// Comparison cells at compare_sigma; trade-off cells are FedCVR per sigma.
  std::vector<BenchCell> comparison_cells() const {
    std::vector<BenchCell> out;
    for (const auto& s : strategies) {
      for (auto seed : seeds) out.push_back({s, compare_sigma, seed});
    }
    return out;
  }

  std::vector<BenchCell> tradeoff_cells() const {
    std::vector<BenchCell> out;
    for (double sigma : sigmas) {
      for (auto seed : seeds) out.push_back({"fedcvr", sigma, seed});
    }
    return out;
  }

  /// Union of both tables without duplicates, in a fixed order.
  std::vector<BenchCell> cells() const {
    std::vector<BenchCell> out = comparison_cells();
    for (auto& c : tradeoff_cells()) {
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
  }

  RunConfig config_for(const BenchCell& c) const {
    RunConfig r = base;
    r.strategy_name = c.strategy;
    r.training.seed = c.seed;
    r.privacy.enabled = c.sigma > 0.0;
    if (c.sigma > 0.0) r.privacy.noise_multiplier = c.sigma;
    return r;
  }
};

inline nlohmann::ordered_json to_json(const BenchPlan& p) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["strategies"] = p.strategies;
  j["seeds"] = p.seeds;
  j["sigmas"] = p.sigmas;
  j["compare_sigma"] = p.compare_sigma;
  j["paired"] = p.paired;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : p.cells()) cells.push_back(c.name());
  j["cells"] = std::move(cells);
  j["config"] = to_json(p.base);
  return j;
}

inline BenchPlan bench_plan_from_json(const nlohmann::ordered_json& j) {
  BenchPlan p;
  try {
    p.base = config_from_json(j.at("config"));
    p.strategies = j.at("strategies").get<std::vector<std::string>>();
    p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    p.sigmas = j.at("sigmas").get<std::vector<double>>();
    p.compare_sigma = j.at("compare_sigma").get<double>();
    p.paired = j.at("paired").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bench.json: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Running

using BenchLog = std::function<void(const std::string&)>;

/// Runs one cell and writes its artifacts. Failures are recorded in
/// error.json and reported as false.
inline bool run_bench_cell(const fs::path& bench_dir, const BenchPlan& plan, const BenchCell& cell,
                           const FederatedData& data, std::string* error = nullptr) {
  const fs::path dir = bench_dir / "runs" / cell.name();
  fs::remove_all(dir);
  const RunConfig cfg = plan.config_for(cell);
  try {
    const RunHistory h = run_simulation(cfg, data, 1);
    write_run_artifacts(dir, cfg, h);
    return true;
  } catch (const Error& e) {
    fs::remove_all(dir);
    nlohmann::ordered_json err;
    err["format_version"] = kFormatVersion;
    err["cell"] = cell.name();
    err["error"] = e.what();
    err["config"] = to_json(cfg);
    write_json(dir / "error.json", err);
    if (error) *error = e.what();
    return false;
  }
}

inline void summarize_bench(const fs::path& bench_dir);

/// Runs every cell (up to `jobs` at once), then writes the summaries.
inline void run_bench(const fs::path& bench_dir, const BenchPlan& plan, const FederatedData& data,
                      std::size_t jobs = 1, const BenchLog& log = {}) {
  plan.validate();
  fs::create_directories(bench_dir / "runs");
  auto plan_json = to_json(plan);
  plan_json["manifest_digest"] = data.manifest_digest;
  write_json(bench_dir / "bench.json", plan_json);
  const auto cells = plan.cells();
  std::mutex log_mu;
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    std::string err;
    const bool ok = run_bench_cell(bench_dir, plan, cells[i], data, &err);
    if (log) {
      std::lock_guard lock(log_mu);
      log(cells[i].name() + (ok ? " ok" : " FAILED: " + err));
    }
  });
  summarize_bench(bench_dir);
}

// ---------------------------------------------------------------------------
// Summaries

struct CellResult {
  BenchCell cell;
  std::vector<RoundRecord> history;
  std::vector<ScoredPrediction> scores;
};

/// Loads every cell of the plan that completed; missing names go to `gaps`.
inline std::vector<CellResult> load_cells(const fs::path& bench_dir, const std::vector<BenchCell>& cells,
                                          std::vector<std::string>& gaps, bool with_scores = false) {
  std::vector<CellResult> out;
  for (const auto& c : cells) {
    const fs::path dir = bench_dir / "runs" / c.name();
    if (!fs::exists(dir / "run.json") || !fs::exists(dir / "history.jsonl")) {
      gaps.push_back(c.name());
      continue;
    }
    CellResult r{c, read_history(dir / "history.jsonl"), {}};
    if (r.history.empty()) {
      gaps.push_back(c.name());
      continue;
    }
    if (with_scores && fs::exists(dir / "scores.csv")) r.scores = read_scores_csv(dir / "scores.csv");
    out.push_back(std::move(r));
  }
  return out;
}

inline constexpr std::array<std::string_view, 6> kSummaryMetrics{"accuracy", "precision", "recall",
                                                                 "f1",       "auc",       "eval_loss"};

inline double final_metric(const RoundRecord& r, std::string_view metric) {
  if (metric == "accuracy") return r.accuracy;
  if (metric == "precision") return r.precision;
  if (metric == "recall") return r.recall;
  if (metric == "f1") return r.f1;
  if (metric == "auc") return r.auc;
  if (metric == "eval_loss") return r.eval_loss;
  if (metric == "global_loss") return r.global_loss;
  throw InputError("unknown metric " + std::string(metric));
}

namespace detail {

inline std::pair<std::string, std::string> mean_std_cells(const std::vector<double>& v) {
  if (v.empty()) return {"", ""};
  if (v.size() == 1) return {fmt_num(v[0]), ""};
  const auto s = summarize(v);
  return {fmt_num(s.mean), fmt_num(s.std_dev)};
}

}  // namespace detail

/// Long-form comparison table: one row per (strategy, metric) with the
/// final-round mean, std and the two-tailed test against FedCVR.
inline std::string comparison_csv(const BenchPlan& plan, const std::vector<CellResult>& results) {
  std::map<std::string, std::map<std::uint64_t, const CellResult*>> by_strategy;
  for (const auto& r : results) by_strategy[r.cell.strategy][r.cell.seed] = &r;
  std::string out = csv_row({"strategy", "metric", "n", "mean", "std", "p_vs_fedcvr", "stars"});
  const auto& ref = by_strategy["fedcvr"];
  for (const auto& s : plan.strategies) {
    const auto& runs = by_strategy[s];
    for (auto metric : kSummaryMetrics) {
      std::vector<double> vals, ref_vals, mine_paired, ref_paired;
      for (auto seed : plan.seeds) {
        const auto it = runs.find(seed);
        const auto rt = ref.find(seed);
        if (it != runs.end()) vals.push_back(final_metric(it->second->history.back(), metric));
        if (rt != ref.end()) ref_vals.push_back(final_metric(rt->second->history.back(), metric));
        if (it != runs.end() && rt != ref.end()) {
          mine_paired.push_back(final_metric(it->second->history.back(), metric));
          ref_paired.push_back(final_metric(rt->second->history.back(), metric));
        }
      }
      auto [mean, sd] = detail::mean_std_cells(vals);
      std::string p, stars;
      if (s != "fedcvr") {
        if (plan.paired && mine_paired.size() >= 2) {
          const double pv = paired_t_test(mine_paired, ref_paired).p;
          p = fmt_num(pv);
          stars = significance_stars(pv);
        } else if (!plan.paired && vals.size() >= 2 && ref_vals.size() >= 2) {
          const double pv = welch_t_test(vals, ref_vals).p;
          p = fmt_num(pv);
          stars = significance_stars(pv);
        }
      }
      if (vals.size() < plan.seeds.size()) stars = stars.empty() ? "missing" : stars + " missing";
      out += csv_row({s, std::string(metric), std::to_string(vals.size()), mean, sd, p, stars});
    }
  }
  return out;
}

/// Privacy-utility table: one row per sigma for FedCVR.
inline std::string tradeoff_csv(const BenchPlan& plan, const std::vector<CellResult>& results) {
  std::string out = csv_row({"sigma", "dp", "epsilon", "n", "accuracy_mean", "accuracy_std", "f1_mean", "f1_std",
                             "auc_mean", "auc_std", "eval_loss_mean", "eval_loss_std"});
  for (double sigma : plan.sigmas) {
    std::vector<double> acc, f1v, aucv, loss;
    double eps = sigma > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    bool eps_known = sigma == 0.0;
    for (const auto& r : results) {
      if (r.cell.strategy != "fedcvr" || r.cell.sigma != sigma) continue;
      const auto& last = r.history.back();
      acc.push_back(last.accuracy);
      f1v.push_back(last.f1);
      aucv.push_back(last.auc);
      loss.push_back(last.eval_loss);
      if (sigma > 0.0 && last.epsilon) {
        eps = std::max(eps, *last.epsilon);
        eps_known = true;
      }
    }
    auto [am, as] = detail::mean_std_cells(acc);
    auto [fm, fs_] = detail::mean_std_cells(f1v);
    auto [um, us] = detail::mean_std_cells(aucv);
    auto [lm, ls] = detail::mean_std_cells(loss);
    out += csv_row({fmt_num(sigma), sigma > 0.0 ? "on" : "off", eps_known ? fmt_num(eps) : "",
                    std::to_string(f1v.size()), am, as, fm, fs_, um, us, lm, ls});
  }
  return out;
}

/// Rebuilds comparison.csv and tradeoff.csv from the stored runs only.
inline void summarize_bench(const fs::path& bench_dir) {
  const auto plan_json = read_json(bench_dir / "bench.json");
  const BenchPlan plan = bench_plan_from_json(plan_json);
  std::vector<std::string> gaps;
  const auto results = load_cells(bench_dir, plan.cells(), gaps);
  const auto config = to_json(plan.base);
  nlohmann::ordered_json extra;
  extra["compare_sigma"] = plan.compare_sigma;
  extra["seeds"] = plan.seeds;
  extra["test"] = plan.paired ? "paired" : "welch";
  extra["missing_cells"] = gaps;
  write_csv_with_meta(bench_dir / "comparison.csv", comparison_csv(plan, results), config, extra);
  extra.erase("test");
  extra["sigmas"] = plan.sigmas;
  write_csv_with_meta(bench_dir / "tradeoff.csv", tradeoff_csv(plan, results), config, extra);
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

struct SeriesAccumulator {
  std::vector<std::vector<double>> per_round;  // [round][seed]

  void add(std::size_t round_idx, double v) {
    if (per_round.size() <= round_idx) per_round.resize(round_idx + 1);
    per_round[round_idx].push_back(v);
  }
  double mean(std::size_t round_idx) const {
    const auto& v = per_round.at(round_idx);
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
  }
};

}  // namespace detail

/// Plot-ready CSVs from a finished bench directory: metric-evolution,
/// client-vs-global, roc-points and dp-impact, plus report-manifest.json
/// listing whatever was missing.
inline void write_report(const fs::path& bench_dir, const fs::path& out_dir) {
  const BenchPlan plan = bench_plan_from_json(read_json(bench_dir / "bench.json"));
  const auto config = to_json(plan.base);
  fs::create_directories(out_dir);
  std::vector<std::string> gaps;
  const auto cmp = load_cells(bench_dir, plan.comparison_cells(), gaps, true);
  const auto trade = load_cells(bench_dir, plan.tradeoff_cells(), gaps, false);
  std::vector<std::string> files;

  // Metric evolution and client-vs-global, averaged over seeds.
  {
    std::string evo = csv_row({"strategy", "round", "n_seeds", "global_loss", "eval_loss", "accuracy", "precision",
                               "recall", "f1", "auc"});
    std::string cvg = csv_row({"strategy", "round", "client_id", "n_seeds", "client_loss", "global_loss"});
    for (const auto& s : plan.strategies) {
      std::map<std::string, detail::SeriesAccumulator> acc;
      std::map<int, detail::SeriesAccumulator> clients;
      std::size_t rounds = 0;
      for (const auto& r : cmp) {
        if (r.cell.strategy != s) continue;
        rounds = std::max(rounds, r.history.size());
        for (std::size_t i = 0; i < r.history.size(); ++i) {
          const auto& rec = r.history[i];
          acc["global_loss"].add(i, rec.global_loss);
          for (auto m : kSummaryMetrics) acc[std::string(m)].add(i, final_metric(rec, m));
          for (const auto& [id, loss] : rec.client_loss) clients[id].add(i, loss);
        }
      }
      for (std::size_t i = 0; i < rounds; ++i) {
        const auto n = acc["global_loss"].per_round[i].size();
        evo += csv_row({s, std::to_string(i + 1), std::to_string(n), fmt_num(acc["global_loss"].mean(i)),
                        fmt_num(acc["eval_loss"].mean(i)), fmt_num(acc["accuracy"].mean(i)),
                        fmt_num(acc["precision"].mean(i)), fmt_num(acc["recall"].mean(i)), fmt_num(acc["f1"].mean(i)),
                        fmt_num(acc["auc"].mean(i))});
        for (auto& [id, series] : clients) {
          if (series.per_round.size() <= i || series.per_round[i].empty()) continue;
          cvg += csv_row({s, std::to_string(i + 1), std::to_string(id), std::to_string(series.per_round[i].size()),
                          fmt_num(series.mean(i)), fmt_num(acc["global_loss"].mean(i))});
        }
      }
    }
    write_csv_with_meta(out_dir / "metric-evolution.csv", evo, config);
    write_csv_with_meta(out_dir / "client-vs-global.csv", cvg, config);
    files.push_back("metric-evolution.csv");
    files.push_back("client-vs-global.csv");
  }

  // ROC curve per strategy from its lowest completed seed.
  {
    std::string roc = csv_row({"strategy", "seed", "fpr", "tpr"});
    for (const auto& s : plan.strategies) {
      for (const auto& r : cmp) {
        if (r.cell.strategy != s || r.scores.empty()) continue;
        try {
          for (const auto& p : roc_points(r.scores)) {
            roc += csv_row({s, std::to_string(r.cell.seed), fmt_num(p.fpr), fmt_num(p.tpr)});
          }
        } catch (const InputError&) {
          gaps.push_back(r.cell.name() + ":roc");
        }
        break;
      }
    }
    write_csv_with_meta(out_dir / "roc-points.csv", roc, config);
    files.push_back("roc-points.csv");
  }

  // DP impact: FedCVR loss per round, one series per sigma.
  {
    std::string dp = csv_row({"sigma", "round", "n_seeds", "global_loss", "eval_loss", "f1", "epsilon"});
    for (double sigma : plan.sigmas) {
      detail::SeriesAccumulator gl, el, f1s;
      std::vector<std::optional<double>> eps;
      for (const auto& r : trade) {
        if (r.cell.sigma != sigma) continue;
        for (std::size_t i = 0; i < r.history.size(); ++i) {
          gl.add(i, r.history[i].global_loss);
          el.add(i, r.history[i].eval_loss);
          f1s.add(i, r.history[i].f1);
          if (eps.size() <= i) eps.resize(i + 1);
          if (r.history[i].epsilon) eps[i] = std::max(eps[i].value_or(0.0), *r.history[i].epsilon);
        }
      }
      for (std::size_t i = 0; i < gl.per_round.size(); ++i) {
        dp += csv_row({fmt_num(sigma), std::to_string(i + 1), std::to_string(gl.per_round[i].size()),
                       fmt_num(gl.mean(i)), fmt_num(el.mean(i)), fmt_num(f1s.mean(i)),
                       eps[i] ? fmt_num(*eps[i]) : ""});
      }
    }
    write_csv_with_meta(out_dir / "dp-impact.csv", dp, config);
    files.push_back("dp-impact.csv");
  }

  std::sort(gaps.begin(), gaps.end());
  gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["bench"] = fs::absolute(bench_dir).lexically_normal().string();
  manifest["files"] = files;
  manifest["gaps"] = gaps;
  manifest["complete"] = gaps.empty();
  manifest["config"] = config;
  write_json(out_dir / "report-manifest.json", manifest);
}

}  // namespace fedcvr

#endif  // FEDCVR_BENCH_HPP_
