/*
 * Copyright 2026 The truncdr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/parallel.hpp"
#include "truncdr/pipeline.hpp"
#include "truncdr/random.hpp"

namespace truncdr {

enum class BootMethod { kSeNormal, kPercentile };

inline std::string_view to_string(BootMethod m) {
  return m == BootMethod::kSeNormal ? "se_normal" : "percentile";
}

inline BootMethod parse_boot_method(std::string_view s) {
  if (s == "se_normal") return BootMethod::kSeNormal;
  if (s == "percentile") return BootMethod::kPercentile;
  fail(ErrorCode::kBadArgument, "unknown bootstrap method '" + std::string(s) + "'");
}

struct BootstrapResult {
  double se = 0.0;
  Interval ci;
  std::vector<double> replicates;  // successful replicates, in replicate order
  int failures = 0;
  int requested = 0;
  BootMethod method = BootMethod::kSeNormal;
};

/// Type-7 sample quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Rows of the b-th resample; depends only on (n, seed, b).
inline std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t b) {
  CounterRng rng(derive_seed(seed, b));
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = rng.below(n);
  std::sort(rows.begin(), rows.end());
  return rows;
}

/// Nonparametric bootstrap over subjects, nuisances refitted in every
/// replicate. `point` holds the full-sample estimates the CIs are centred on.
inline std::vector<BootstrapResult> bootstrap(const Dataset& ds, const EstimatorConfig& cfg,
                                              std::span<const Functional> nus, std::span<const double> point,
                                              int B, std::uint64_t seed, BootMethod method,
                                              std::optional<unsigned> threads = std::nullopt) {
  if (B < 2) fail(ErrorCode::kBadArgument, "bootstrap needs B >= 2");
  if (point.size() != nus.size()) fail(ErrorCode::kBadArgument, "one point estimate per functional");
  const std::size_t m = nus.size();
  std::vector<std::vector<double>> est(static_cast<std::size_t>(B));
  std::vector<char> ok(static_cast<std::size_t>(B), 0);
  parallel_for(static_cast<std::size_t>(B), resolve_threads(threads), [&](std::size_t b) {
    try {
      const Dataset rs = ds.subset(bootstrap_rows(ds.size(), seed, b));
      const auto reports = run_estimator(rs, cfg, nus);
      est[b].resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        est[b][j] = reports[j].theta;
        if (!std::isfinite(est[b][j])) throw std::runtime_error("non-finite estimate");
      }
      ok[b] = 1;
    } catch (const std::exception&) {
      ok[b] = 0;
    }
  });
  int failures = 0;
  for (char c : ok) failures += c ? 0 : 1;
  if (failures * 5 > B || B - failures < 2) {
    fail(ErrorCode::kTooManyFailures,
         std::to_string(failures) + " of " + std::to_string(B) + " bootstrap replicates failed");
  }
  std::vector<BootstrapResult> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto& r = out[j];
    r.method = method;
    r.failures = failures;
    r.requested = B;
    for (std::size_t b = 0; b < est.size(); ++b) {
      if (ok[b]) r.replicates.push_back(est[b][j]);
    }
    const double k = static_cast<double>(r.replicates.size());
    double mean = 0.0;
    for (double v : r.replicates) mean += v;
    mean /= k;
    double ss = 0.0;
    for (double v : r.replicates) ss += (v - mean) * (v - mean);
    r.se = std::sqrt(ss / (k - 1.0));
    if (method == BootMethod::kSeNormal) {
      r.ci = Interval{point[j] - 1.96 * r.se, point[j] + 1.96 * r.se};
    } else {
      std::vector<double> sorted = r.replicates;
      std::sort(sorted.begin(), sorted.end());
      r.ci = Interval{sorted_quantile(sorted, 0.025), sorted_quantile(sorted, 0.975)};
    }
  }
  return out;
}

inline BootstrapResult bootstrap(const Dataset& ds, const EstimatorConfig& cfg, const Functional& nu, double point,
                                 int B, std::uint64_t seed, BootMethod method,
                                 std::optional<unsigned> threads = std::nullopt) {
  return bootstrap(ds, cfg, std::span<const Functional>(&nu, 1), std::span<const double>(&point, 1), B, seed,
                   method, threads)
      .front();
}

inline void attach(EstimateReport& r, const BootstrapResult& b) {
  r.se_boot = b.se;
  r.ci_boot = b.ci;
  r.boot_method = std::string(to_string(b.method));
  r.boot_replicates = b.requested;
  r.boot_failures = b.failures;
}

// ---------------------------------------------------------------------------
// Conditional Kendall's tau for quasi-independence of (Q, T)

struct KendallResult {
  double tau = 0.0;
  double statistic = 0.0;  // Σ sgn over comparable pairs
  double variance = 0.0;   // permutation variance of the statistic
  double z = 0.0;
  double p_value = 1.0;
  double se = 0.0;         // SE of tau_hat
  std::size_t comparable = 0;
};

/// Pair (i, j) is comparable when max(Q_i, Q_j) < min(X_i, X_j) and the
/// subject with the smaller X is uncensored (ties in X are not comparable).
/// The permutation variance sums (r_k² - 1)/3 over uncensored k, where r_k
/// counts subjects with Q_j < X_k <= X_j.
inline KendallResult kendall_tau_conditional(const Dataset& ds) {
  const std::size_t n = ds.size();
  if (n < 2) fail(ErrorCode::kBadArgument, "Kendall test needs n >= 2");
  double K = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double xi = ds.x(i), xj = ds.x(j);
      if (xi == xj) continue;
      const std::size_t lo = xi < xj ? i : j;
      if (ds.delta(lo) != 1) continue;
      if (!(std::max(ds.q(i), ds.q(j)) < std::min(xi, xj))) continue;
      ++comparable;
      const double s = (ds.q(i) - ds.q(j)) * (xi - xj);
      K += (s > 0.0) - (s < 0.0);
    }
  }
  if (comparable == 0) fail(ErrorCode::kNoComparablePairs, "no comparable pairs");
  double V = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ds.delta(k) != 1) continue;
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (ds.q(j) < ds.x(k) && ds.x(k) <= ds.x(j)) r += 1.0;
    }
    V += (r * r - 1.0) / 3.0;
  }
  KendallResult out;
  out.statistic = K;
  out.variance = V;
  out.comparable = comparable;
  out.tau = K / static_cast<double>(comparable);
  out.se = std::sqrt(V) / static_cast<double>(comparable);
  if (V > 0.0) {
    out.z = K / std::sqrt(V);
    out.p_value = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  }
  return out;
}

}  // namespace truncdr
