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

#ifndef FEDCVR_METRICS_HPP_
#define FEDCVR_METRICS_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcvr/common.hpp"

namespace fedcvr {

struct ScoredPrediction {
  double score = 0.0;
  int label = 0;
};

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Predicted positive iff score >= threshold.
inline ConfusionCounts confusion(std::span<const ScoredPrediction> scored, double threshold = 0.5) {
  if (scored.empty()) throw InputError("confusion: no predictions");
  ConfusionCounts c;
  for (const auto& s : scored) {
    const bool pred = s.score >= threshold;
    if (s.label == 1) {
      pred ? ++c.tp : ++c.fn;
    } else {
      pred ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

// Ratio metrics. A zero denominator yields 0.0; callers that need to know use
// the *_defined predicates to flag it.

inline double accuracy(const ConfusionCounts& c) {
  const auto n = c.total();
  return n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

inline double error_rate(const ConfusionCounts& c) { return 1.0 - accuracy(c); }

inline bool precision_defined(const ConfusionCounts& c) { return c.tp + c.fp > 0; }
inline bool recall_defined(const ConfusionCounts& c) { return c.tp + c.fn > 0; }

inline double precision(const ConfusionCounts& c) {
  return precision_defined(c) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
}

inline double recall(const ConfusionCounts& c) {
  return recall_defined(c) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
}

inline bool f1_defined(const ConfusionCounts& c) { return precision(c) + recall(c) > 0.0; }

inline double f1(const ConfusionCounts& c) {
  const double p = precision(c), r = recall(c);
  return p + r > 0.0 ? 2.0 * (p * r) / (p + r) : 0.0;
}

/// Names of the metrics that fell back to 0.0.
inline std::vector<std::string> undefined_metrics(const ConfusionCounts& c) {
  std::vector<std::string> out;
  if (!precision_defined(c)) out.emplace_back("precision");
  if (!recall_defined(c)) out.emplace_back("recall");
  if (!f1_defined(c)) out.emplace_back("f1");
  return out;
}

/// Mann-Whitney AUC using mid-ranks, so tied scores count one half.
inline double auc(std::span<const ScoredPrediction> scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });
  double rank_sum_pos = 0.0;
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].label == 1) {
        rank_sum_pos += mid_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw InputError("auc: need at least one positive and one negative label");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Empirical ROC curve from (0,0) to (1,1), one vertex per distinct score
/// threshold, with collinear interior vertices removed.
inline std::vector<RocPoint> roc_points(std::span<const ScoredPrediction> scored) {
  std::vector<ScoredPrediction> s(scored.begin(), scored.end());
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  std::uint64_t n_pos = 0;
  for (const auto& x : s) n_pos += (x.label == 1);
  const std::uint64_t n_neg = s.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("roc_points: need both classes");
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    for (; j < s.size() && s[j].score == s[i].score; ++j) (s[j].label == 1 ? tp : fp)++;
    RocPoint p{static_cast<double>(fp) / static_cast<double>(n_neg), static_cast<double>(tp) / static_cast<double>(n_pos)};
    if (pts.size() >= 2) {
      const auto& a = pts[pts.size() - 2];
      const auto& b = pts.back();
      const double cross = (b.fpr - a.fpr) * (p.tpr - a.tpr) - (b.tpr - a.tpr) * (p.fpr - a.fpr);
      if (cross == 0.0) pts.pop_back();
    }
    pts.push_back(p);
    i = j;
  }
  return pts;
}

/// Area under the piecewise-linear ROC curve (trapezoid rule).
inline double trapezoid_auc(std::span<const RocPoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  }
  return area;
}

/// Size-weighted mean of per-client losses.
inline double global_loss(std::span<const double> local_losses, std::span<const std::size_t> sizes) {
  if (local_losses.size() != sizes.size()) throw InputError("global_loss: length mismatch");
  std::size_t total = 0;
  for (auto n : sizes) total += n;
  if (total == 0) throw InputError("global_loss: total size is zero");
  double acc = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    acc += static_cast<double>(sizes[i]) / static_cast<double>(total) * local_losses[i];
  }
  return acc;
}

}  // namespace fedcvr

#endif  // FEDCVR_METRICS_HPP_
