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

// Synthetic cardiovascular cohort: generation, rule-based risk labels, global
// standardization, holdout split and IID / specialized-hospital partitioning.

#ifndef FEDCVR_DATA_HPP_
#define FEDCVR_DATA_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedcvr/common.hpp"
#include "fedcvr/model.hpp"
#include "json.hpp"

namespace fedcvr {

struct CohortRow {
  double age = 0.0;
  double systolic_bp = 0.0;
  double diastolic_bp = 0.0;
  double cholesterol = 0.0;
  int smoker = 0;
  int diabetic = 0;
  int risk = 0;

  friend bool operator==(const CohortRow&, const CohortRow&) = default;
};

struct RawCohort {
  std::vector<CohortRow> rows;
  std::uint64_t seed = 0;

  std::size_t size() const { return rows.size(); }
};

/// Generator parameters. Age is piecewise uniform over three bands
/// [18,50) / [50,65] / (65,90]; the clinical markers are clamped normals.
struct GeneratorConfig {
  std::array<double, 3> age_band_weights{0.855, 0.103, 0.042};
  double systolic_mean = 125.0, systolic_sd = 18.0;
  double diastolic_mean = 85.0, diastolic_sd = 11.0;
  double cholesterol_mean = 225.0, cholesterol_sd = 35.0;
  double smoker_rate = 0.25;
  double diabetic_rate = 0.15;
};

inline constexpr double kAgeMin = 18.0, kAgeMax = 90.0;
inline constexpr double kSbpMin = 80.0, kSbpMax = 220.0;
inline constexpr double kDbpMin = 50.0, kDbpMax = 140.0;
inline constexpr double kCholMin = 100.0, kCholMax = 400.0;

// Risk rule: weighted factor score, positive at or above this threshold.
inline constexpr int kRiskThreshold = 4;

inline int risk_score(const CohortRow& r) {
  return 2 * (r.systolic_bp > 140.0) + (r.diastolic_bp > 90.0) + 2 * (r.cholesterol > 240.0) +
         r.smoker + 2 * r.diabetic + (r.age > 60.0);
}

inline RawCohort assign_risk_labels(RawCohort cohort) {
  for (auto& r : cohort.rows) r.risk = risk_score(r) >= kRiskThreshold ? 1 : 0;
  return cohort;
}

namespace detail {
// Values are stored at the CSV's 6-decimal precision so a cohort read back
// from disk is bit-identical to the generated one.
inline double quantize6(double x) { return std::round(x * 1e6) / 1e6; }
}  // namespace detail

/// Draws an unlabeled cohort (risk = 0 everywhere).
inline RawCohort generate_cohort(std::size_t n, std::uint64_t seed, const GeneratorConfig& g = {}) {
  if (n < 10) throw ConfigError("generate_cohort: n must be at least 10");
  const double wsum = g.age_band_weights[0] + g.age_band_weights[1] + g.age_band_weights[2];
  if (!(wsum > 0.0) || std::any_of(g.age_band_weights.begin(), g.age_band_weights.end(),
                                   [](double w) { return w < 0.0; })) {
    throw ConfigError("generate_cohort: age band weights must be non-negative with positive sum");
  }
  if (g.systolic_sd <= 0.0 || g.diastolic_sd <= 0.0 || g.cholesterol_sd <= 0.0) {
    throw ConfigError("generate_cohort: standard deviations must be positive");
  }
  if (g.smoker_rate < 0.0 || g.smoker_rate > 1.0 || g.diabetic_rate < 0.0 || g.diabetic_rate > 1.0) {
    throw ConfigError("generate_cohort: Bernoulli rates must lie in [0, 1]");
  }

  std::mt19937_64 rng(hash64(seed, "cohort"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> sbp(g.systolic_mean, g.systolic_sd);
  std::normal_distribution<double> dbp(g.diastolic_mean, g.diastolic_sd);
  std::normal_distribution<double> chol(g.cholesterol_mean, g.cholesterol_sd);
  const double c0 = g.age_band_weights[0] / wsum;
  const double c1 = c0 + g.age_band_weights[1] / wsum;

  RawCohort cohort;
  cohort.seed = seed;
  cohort.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CohortRow r;
    const double band = unit(rng);
    const double u = unit(rng);
    if (band < c0) {
      r.age = 18.0 + 32.0 * u;
    } else if (band < c1) {
      r.age = 50.0 + 15.0 * u;
    } else {
      r.age = 65.0 + 25.0 * u;
    }
    r.age = detail::quantize6(std::clamp(r.age, kAgeMin, kAgeMax));
    r.systolic_bp = detail::quantize6(std::clamp(sbp(rng), kSbpMin, kSbpMax));
    r.diastolic_bp = detail::quantize6(std::clamp(dbp(rng), kDbpMin, kDbpMax));
    r.cholesterol = detail::quantize6(std::clamp(chol(rng), kCholMin, kCholMax));
    r.smoker = unit(rng) < g.smoker_rate ? 1 : 0;
    r.diabetic = unit(rng) < g.diabetic_rate ? 1 : 0;
    cohort.rows.push_back(r);
  }
  return cohort;
}

/// Generation followed by labeling; the usual entry point.
inline RawCohort build_cohort(std::size_t n, std::uint64_t seed, const GeneratorConfig& g = {}) {
  return assign_risk_labels(generate_cohort(n, seed, g));
}

inline double prevalence(const RawCohort& c) {
  if (c.rows.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& r : c.rows) pos += static_cast<std::size_t>(r.risk);
  return static_cast<double>(pos) / static_cast<double>(c.rows.size());
}

// ---------------------------------------------------------------------------
// Standardization

struct ScalerParams {
  Features means{};
  Features std_devs{};
};

inline Features raw_features(const CohortRow& r) {
  return {r.age, r.systolic_bp, r.diastolic_bp, r.cholesterol, static_cast<double>(r.smoker),
          static_cast<double>(r.diabetic)};
}

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{
    "age", "systolic_bp", "diastolic_bp", "cholesterol", "smoker", "diabetic"};
inline constexpr std::size_t kNumContinuous = 4;

/// Population mean/std of the four continuous features. Binary columns pass
/// through (recorded as mean 0, std 1).
inline ScalerParams fit_scaler(const RawCohort& c) {
  if (c.rows.size() < 2) throw ConfigError("fit_scaler: need at least 2 rows");
  ScalerParams s;
  const double n = static_cast<double>(c.rows.size());
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (f >= kNumContinuous) {
      s.means[f] = 0.0;
      s.std_devs[f] = 1.0;
      continue;
    }
    double mean = 0.0;
    for (const auto& r : c.rows) mean += raw_features(r)[f];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : c.rows) {
      const double d = raw_features(r)[f] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw ConfigError("fit_scaler: zero variance in feature " + std::string(kFeatureNames[f]));
    s.means[f] = mean;
    s.std_devs[f] = sd;
  }
  return s;
}

inline Features transform(const ScalerParams& s, const CohortRow& r) {
  Features x = raw_features(r);
  for (std::size_t f = 0; f < kNumFeatures; ++f) x[f] = (x[f] - s.means[f]) / s.std_devs[f];
  return x;
}

inline Sample to_sample(const ScalerParams& s, const CohortRow& r) { return {transform(s, r), r.risk}; }

// ---------------------------------------------------------------------------
// Partitioning

enum class Specialty { kYoungGeneral, kCardiologyReferral, kDiabetesSmoking, kCommunity, kGeriatric, kIIDShard };

inline std::string_view specialty_name(Specialty s) {
  switch (s) {
    case Specialty::kYoungGeneral: return "YoungGeneral";
    case Specialty::kCardiologyReferral: return "CardiologyReferral";
    case Specialty::kDiabetesSmoking: return "DiabetesSmoking";
    case Specialty::kCommunity: return "Community";
    case Specialty::kGeriatric: return "Geriatric";
    case Specialty::kIIDShard: return "IIDShard";
  }
  return "?";
}

inline Specialty specialty_from_name(std::string_view name) {
  for (auto s : {Specialty::kYoungGeneral, Specialty::kCardiologyReferral, Specialty::kDiabetesSmoking,
                 Specialty::kCommunity, Specialty::kGeriatric, Specialty::kIIDShard}) {
    if (specialty_name(s) == name) return s;
  }
  throw InputError("unknown specialty: " + std::string(name));
}

/// Row indices (into the cohort) owned by one client.
struct Shard {
  int client_id = 0;
  Specialty specialty = Specialty::kIIDShard;
  std::vector<std::size_t> rows;
};

using Partition = std::vector<Shard>;

struct ClientDataset {
  int client_id = 0;
  Specialty specialty = Specialty::kIIDShard;
  std::vector<std::size_t> rows;
  std::vector<Sample> samples;

  std::size_t n() const { return samples.size(); }
};

/// Client ids for the specialized-hospital split.
inline constexpr std::array<Specialty, 5> kNonIidClients{Specialty::kYoungGeneral, Specialty::kCardiologyReferral,
                                                        Specialty::kDiabetesSmoking, Specialty::kCommunity,
                                                        Specialty::kGeriatric};
inline constexpr std::array<std::size_t, 5> kNonIidTargetSizes{13130, 4730, 9250, 1620, 1270};

/// First matching rule wins: Geriatric, Cardiology, Diabetes/Smoking, Young,
/// then Community for the remainder.
inline Specialty classify_specialty(const CohortRow& r) {
  if (r.age > 65.0) return Specialty::kGeriatric;
  if (r.systolic_bp > 135.0 && r.cholesterol > 220.0) return Specialty::kCardiologyReferral;
  if (r.diabetic == 1 || r.smoker == 1) return Specialty::kDiabetesSmoking;
  if (r.age < 50.0) return Specialty::kYoungGeneral;
  return Specialty::kCommunity;
}

inline std::vector<std::size_t> all_rows(const RawCohort& c) {
  std::vector<std::size_t> v(c.rows.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

/// Random permutation split into k shards whose sizes differ by at most one;
/// the first (n mod k) shards take the extra row.
inline Partition partition_iid_rows(std::span<const std::size_t> rows, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("partition_iid: need at least one client");
  if (k > rows.size()) throw ConfigError("partition_iid: more clients than rows");
  std::vector<std::size_t> perm(rows.begin(), rows.end());
  std::mt19937_64 rng(hash64(seed, "partition_iid"));
  std::shuffle(perm.begin(), perm.end(), rng);
  Partition out(k);
  const std::size_t base = perm.size() / k, extra = perm.size() % k;
  std::size_t at = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    out[c].client_id = static_cast<int>(c);
    out[c].specialty = Specialty::kIIDShard;
    out[c].rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(at),
                       perm.begin() + static_cast<std::ptrdiff_t>(at + len));
    std::sort(out[c].rows.begin(), out[c].rows.end());
    at += len;
  }
  return out;
}

inline Partition partition_noniid_rows(const RawCohort& c, std::span<const std::size_t> rows) {
  Partition out(kNonIidClients.size());
  for (std::size_t i = 0; i < kNonIidClients.size(); ++i) {
    out[i].client_id = static_cast<int>(i);
    out[i].specialty = kNonIidClients[i];
  }
  for (std::size_t idx : rows) {
    const Specialty s = classify_specialty(c.rows.at(idx));
    const auto slot = std::find(kNonIidClients.begin(), kNonIidClients.end(), s) - kNonIidClients.begin();
    out[static_cast<std::size_t>(slot)].rows.push_back(idx);
  }
  for (const auto& shard : out) {
    if (shard.rows.empty()) {
      throw PartitionError("partition_noniid: empty shard for " + std::string(specialty_name(shard.specialty)) +
                           " (try another seed)");
    }
  }
  return out;
}

inline std::vector<ClientDataset> materialize(const RawCohort& c, const ScalerParams& s, const Partition& p) {
  std::vector<ClientDataset> out;
  out.reserve(p.size());
  for (const auto& shard : p) {
    ClientDataset d{shard.client_id, shard.specialty, shard.rows, {}};
    d.samples.reserve(shard.rows.size());
    for (std::size_t idx : shard.rows) d.samples.push_back(to_sample(s, c.rows.at(idx)));
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<ClientDataset> partition_iid(const RawCohort& c, std::size_t k, std::uint64_t seed,
                                                const ScalerParams& s) {
  const auto rows = all_rows(c);
  return materialize(c, s, partition_iid_rows(rows, k, seed));
}

inline std::vector<ClientDataset> partition_noniid(const RawCohort& c, const ScalerParams& s) {
  const auto rows = all_rows(c);
  return materialize(c, s, partition_noniid_rows(c, rows));
}

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

/// Stratified holdout: round(fraction * count) rows of each class, chosen by a
/// seeded shuffle. Both index lists are returned sorted.
inline HoldoutSplit stratified_holdout(const RawCohort& c, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in [0, 1)");
  HoldoutSplit split;
  std::mt19937_64 rng(hash64(seed, "holdout"));
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < c.rows.size(); ++i) {
      if (c.rows[i].risk == label) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    split.holdout.insert(split.holdout.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  return split;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr std::string_view kCohortHeader = "age,systolic_bp,diastolic_bp,cholesterol,smoker,diabetic,risk";

inline void write_cohort_csv(std::ostream& os, const RawCohort& c) {
  os << kCohortHeader << '\n';
  char buf[160];
  for (const auto& r : c.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%d,%d,%d\n", r.age, r.systolic_bp, r.diastolic_bp,
                  r.cholesterol, r.smoker, r.diabetic, r.risk);
    os << buf;
  }
}

inline RawCohort read_cohort_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCohortHeader) throw InputError("cohort csv: unexpected header");
  RawCohort c;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    CohortRow r;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%d,%d,%d", &r.age, &r.systolic_bp, &r.diastolic_bp,
                    &r.cholesterol, &r.smoker, &r.diabetic, &r.risk) != 7) {
      throw InputError("cohort csv: malformed line " + std::to_string(lineno));
    }
    c.rows.push_back(r);
  }
  return c;
}

/// Partition manifest: everything needed to rebuild the client shards and the
/// evaluation set from the cohort file.
inline nlohmann::ordered_json manifest_json(std::string_view mode, const RawCohort& c, const HoldoutSplit& split,
                                            const Partition& p) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["mode"] = mode;
  j["n"] = c.rows.size();
  j["seed"] = c.seed;
  j["holdout"] = split.holdout;
  nlohmann::ordered_json clients = nlohmann::ordered_json::object();
  for (const auto& shard : p) {
    clients[std::to_string(shard.client_id)] = {{"specialty", specialty_name(shard.specialty)}, {"rows", shard.rows}};
  }
  j["clients"] = std::move(clients);
  return j;
}

struct Manifest {
  std::string mode;
  HoldoutSplit split;
  Partition partition;
};

inline Manifest parse_manifest(const nlohmann::ordered_json& j) {
  Manifest m;
  try {
    m.mode = j.at("mode").get<std::string>();
    m.split.holdout = j.at("holdout").get<std::vector<std::size_t>>();
    for (const auto& [id, entry] : j.at("clients").items()) {
      Shard s;
      s.client_id = std::stoi(id);
      s.specialty = specialty_from_name(entry.at("specialty").get<std::string>());
      s.rows = entry.at("rows").get<std::vector<std::size_t>>();
      m.split.train.insert(m.split.train.end(), s.rows.begin(), s.rows.end());
      m.partition.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  std::sort(m.partition.begin(), m.partition.end(),
            [](const Shard& a, const Shard& b) { return a.client_id < b.client_id; });
  std::sort(m.split.train.begin(), m.split.train.end());
  return m;
}

}  // namespace fedcvr

#endif  // FEDCVR_DATA_HPP_
