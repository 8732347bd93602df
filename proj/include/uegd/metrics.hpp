// Copyright 2026 The UEGD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "uegd/error.hpp"

namespace uegd {

/// Regression and sign-classification scores for one evaluation run.
///
/// The `_nonneg` variants classify {y < 0} against {y >= 0} over every clip.
/// The `_pos` variants drop clips labelled exactly 0 and classify {y < 0}
/// against {y > 0}. Predictions are thresholded the same way as labels.
struct MetricsReport {
  double mae = 0.0;
  double corr = 0.0;
  double acc2_nonneg = 0.0;
  double acc2_pos = 0.0;
  double f1_nonneg = 0.0;
  double f1_pos = 0.0;
  std::size_t n_total = 0;
  std::size_t n_nonzero = 0;
  /// Pearson was undefined (zero variance) and reported as 0.
  bool corr_degenerate = false;
};

namespace detail {

// Binary confusion counts -> accuracy and support-weighted F1.
struct Binary {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(bool truth, bool pred) {
    if (truth && pred) ++tp;
    else if (!truth && pred) ++fp;
    else if (truth && !pred) ++fn;
    else ++tn;
  }
  std::size_t total() const { return tp + fp + fn + tn; }
  double accuracy() const {
    return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
  }
  static double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  double weighted_f1() const {
    if (!total()) return 0.0;
    const double pos_support = static_cast<double>(tp + fn);
    const double neg_support = static_cast<double>(tn + fp);
    return (pos_support * f1(tp, fp, fn) + neg_support * f1(tn, fn, fp)) /
           static_cast<double>(total());
  }
};

}  // namespace detail

/// Pearson correlation; returns 0 and sets `degenerate` when either side is constant.
inline double pearson(std::span<const double> x, std::span<const double> y, bool* degenerate = nullptr) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const bool bad = !(sxx > 0.0) || !(syy > 0.0);
  if (degenerate) *degenerate = bad;
  return bad ? 0.0 : sxy / std::sqrt(sxx * syy);
}

template <class P, class L>
MetricsReport compute_metrics(std::span<const P> preds, std::span<const L> labels) {
  if (preds.size() != labels.size()) {
    throw DataError("compute_metrics: " + std::to_string(preds.size()) + " predictions vs " +
                    std::to_string(labels.size()) + " labels");
  }
  if (preds.empty()) throw DataError("compute_metrics: no predictions");
  const std::size_t n = preds.size();
  std::vector<double> p(preds.begin(), preds.end()), y(labels.begin(), labels.end());
  MetricsReport r;
  r.n_total = n;
  double abs_sum = 0.0;
  detail::Binary nonneg, pos;
  for (std::size_t i = 0; i < n; ++i) {
    abs_sum += std::abs(p[i] - y[i]);
    nonneg.add(y[i] >= 0.0, p[i] >= 0.0);
    if (y[i] != 0.0) pos.add(y[i] > 0.0, p[i] > 0.0);
  }
  r.mae = abs_sum / static_cast<double>(n);
  r.corr = pearson(p, y, &r.corr_degenerate);
  r.n_nonzero = pos.total();
  r.acc2_nonneg = nonneg.accuracy();
  r.f1_nonneg = nonneg.weighted_f1();
  r.acc2_pos = pos.accuracy();
  r.f1_pos = pos.weighted_f1();
  return r;
}

template <class P, class L>
MetricsReport compute_metrics(const std::vector<P>& preds, const std::vector<L>& labels) {
  return compute_metrics(std::span<const P>(preds), std::span<const L>(labels));
}

/// Arithmetic mean of each metric across trials.
inline MetricsReport average_metrics(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw UsageError("average_metrics: no reports");
  MetricsReport avg;
  for (const auto& r : reports) {
    avg.mae += r.mae;
    avg.corr += r.corr;
    avg.acc2_nonneg += r.acc2_nonneg;
    avg.acc2_pos += r.acc2_pos;
    avg.f1_nonneg += r.f1_nonneg;
    avg.f1_pos += r.f1_pos;
    avg.corr_degenerate = avg.corr_degenerate || r.corr_degenerate;
  }
  const auto k = static_cast<double>(reports.size());
  avg.mae /= k;
  avg.corr /= k;
  avg.acc2_nonneg /= k;
  avg.acc2_pos /= k;
  avg.f1_nonneg /= k;
  avg.f1_pos /= k;
  avg.n_total = reports.front().n_total;
  avg.n_nonzero = reports.front().n_nonzero;
  return avg;
}

struct VarianceReport {
  std::string tag;
  double total_var = 0.0;
  double intra_var = 0.0;
};

/// Total population variance and the clip-count-weighted mean of per-video
/// population variances (the within-group term of the law of total variance).
template <class P>
VarianceReport variance_report(std::span<const P> preds, std::span<const std::string> video_ids,
                               std::string tag = {}) {
  if (preds.size() != video_ids.size()) {
    throw DataError("variance_report: " + std::to_string(preds.size()) + " predictions vs " +
                    std::to_string(video_ids.size()) + " video ids");
  }
  VarianceReport r;
  r.tag = std::move(tag);
  const std::size_t n = preds.size();
  if (n == 0) return r;
  double mean = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    mean += static_cast<double>(preds[i]);
    auto& g = groups[video_ids[i]];
    g.first += static_cast<double>(preds[i]);
    ++g.second;
  }
  mean /= static_cast<double>(n);
  for (auto& [_, g] : groups) g.first /= static_cast<double>(g.second);
  double total = 0.0, within = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = static_cast<double>(preds[i]);
    total += (p - mean) * (p - mean);
    const double gm = groups[video_ids[i]].first;
    within += (p - gm) * (p - gm);
  }
  r.total_var = total / static_cast<double>(n);
  r.intra_var = within / static_cast<double>(n);
  return r;
}

template <class P>
VarianceReport variance_report(const std::vector<P>& preds, const std::vector<std::string>& video_ids,
                               std::string tag = {}) {
  return variance_report(std::span<const P>(preds), std::span<const std::string>(video_ids),
                         std::move(tag));
}

}  // namespace uegd
