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
#include <map>
#include <numeric>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/step_function.hpp"

namespace truncdr {

/// Problems a product-limit fit can run into that do not stop it.
struct ProductLimitDiagnostics {
  bool no_events = false;
  bool empty_risk_set = false;           // a jump time had zero risk-set mass
  std::optional<double> empty_risk_at;
  bool premature_zero = false;           // curve hit 0 before the last event time
  std::optional<double> zero_at;
};

struct ProductLimit {
  StepFunction survival;
  ProductLimitDiagnostics diagnostics;
};

namespace detail {

struct WeightedEvents {
  std::vector<double> times;  // distinct, ascending, positive weighted mass
  std::vector<double> mass;
};

inline WeightedEvents collect_events(std::span<const double> x, std::span<const std::uint8_t> event,
                                     std::span<const double> weight) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (event[i] == 1 && weight[i] > 0.0) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  WeightedEvents out;
  for (std::size_t k = 0; k < idx.size();) {
    const double t = x[idx[k]];
    double m = 0.0;
    while (k < idx.size() && x[idx[k]] == t) m += weight[idx[k++]];
    out.times.push_back(t);
    out.mass.push_back(m);
  }
  return out;
}

/// Suffix sums Σ_{v_j >= s} w_j (or > s when strict) at ascending query times.
inline std::vector<long double> tail_mass(std::span<const double> v, std::span<const double> weight,
                                          std::span<const double> at, bool strict) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  std::vector<long double> out(at.size());
  long double acc = 0.0L;
  std::size_t p = 0;
  for (std::size_t k = at.size(); k-- > 0;) {
    while (p < idx.size() && (strict ? v[idx[p]] > at[k] : v[idx[p]] >= at[k])) acc += weight[idx[p++]];
    out[k] = acc;
  }
  return out;
}

inline ProductLimit product_limit_from(const WeightedEvents& ev, std::span<const long double> at_risk) {
  ProductLimit out;
  out.diagnostics.no_events = ev.times.empty();
  std::vector<double> times, values;
  double s = 1.0;
  for (std::size_t k = 0; k < ev.times.size(); ++k) {
    const double r = static_cast<double>(at_risk[k]);
    if (!(r > 0.0)) {
      if (!out.diagnostics.empty_risk_set) out.diagnostics.empty_risk_at = ev.times[k];
      out.diagnostics.empty_risk_set = true;
      continue;
    }
    s *= std::max(0.0, 1.0 - ev.mass[k] / r);
    times.push_back(ev.times[k]);
    values.push_back(s);
    if (s == 0.0 && k + 1 < ev.times.size() && !out.diagnostics.premature_zero) {
      out.diagnostics.premature_zero = true;
      out.diagnostics.zero_at = ev.times[k];
    }
  }
  out.survival = StepFunction(std::move(times), std::move(values), 1.0);
  return out;
}

inline void check_lengths(std::size_t n, std::size_t a, std::size_t b) {
  if (a != n || b != n) fail(ErrorCode::kBadArgument, "column lengths differ");
}

}  // namespace detail

/// Product-limit survival curve under left truncation and right censoring:
/// S(t) = Π_{s <= t} (1 - d(s)/R(s)), R(s) = Σ w 1(q <= s <= x).
inline ProductLimit product_limit_lt(std::span<const double> q, std::span<const double> x,
                                     std::span<const std::uint8_t> event,
                                     std::span<const double> weight) {
  detail::check_lengths(q.size(), x.size(), event.size());
  detail::check_lengths(q.size(), weight.size(), weight.size());
  const auto ev = detail::collect_events(x, event, weight);
  const auto entered = detail::tail_mass(x, weight, ev.times, false);
  const auto not_yet = detail::tail_mass(q, weight, ev.times, true);
  std::vector<long double> risk(ev.times.size());
  for (std::size_t k = 0; k < risk.size(); ++k) risk[k] = entered[k] - not_yet[k];
  return detail::product_limit_from(ev, risk);
}

inline ProductLimit product_limit_lt(std::span<const double> q, std::span<const double> x,
                                     std::span<const std::uint8_t> event) {
  const std::vector<double> w(q.size(), 1.0);
  return product_limit_lt(q, x, event, w);
}

/// Kaplan–Meier: the product-limit curve without entry times.
inline ProductLimit kaplan_meier(std::span<const double> x, std::span<const std::uint8_t> event,
                                 std::span<const double> weight) {
  detail::check_lengths(x.size(), event.size(), weight.size());
  const auto ev = detail::collect_events(x, event, weight);
  const auto risk = detail::tail_mass(x, weight, ev.times, false);
  return detail::product_limit_from(ev, risk);
}

inline ProductLimit kaplan_meier(std::span<const double> x, std::span<const std::uint8_t> event) {
  const std::vector<double> w(x.size(), 1.0);
  return kaplan_meier(x, event, w);
}

/// Ŝ_c for c1 data: product-limit on (q, x, 1 - delta).
inline ProductLimit fit_censoring_survival(const Dataset& ds) {
  if (ds.censoring() != Censoring::kC1) {
    fail(ErrorCode::kWrongCensoringTag, "censoring survival Sc needs tag c1");
  }
  std::vector<std::uint8_t> cens(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) cens[i] = static_cast<std::uint8_t>(1 - ds.delta(i));
  return product_limit_lt(ds.q_column(), ds.x_column(), cens, ds.weight_column());
}

/// Ŝ_D for c2 data: Kaplan–Meier of the residual censoring time.
inline ProductLimit fit_residual_censoring_survival(const Dataset& ds) {
  const auto view = residual_censoring_view(ds);
  return kaplan_meier(view.time, view.event, view.weight);
}

// ---------------------------------------------------------------------------
// Covariate-stratified product-limit learner

struct StrataSpec {
  /// Per-covariate cut points. Empty means quantile binning with
  /// `bins_per_covariate` bins, merging cells with too few events.
  std::vector<std::vector<double>> cuts;
  int bins_per_covariate = 3;
  std::size_t min_events = 5;
};

/// Conditional survival curves fitted separately within covariate cells.
class StratifiedProductLimit {
 public:
  static StratifiedProductLimit fit(const Dataset& ds, const StrataSpec& spec) {
    if (ds.dim() == 0) fail(ErrorCode::kNoCovariates, "stratified learner needs covariates");
    StratifiedProductLimit out;
    const std::size_t d = ds.dim();
    const bool explicit_cuts = !spec.cuts.empty();
    if (explicit_cuts) {
      if (spec.cuts.size() != d) fail(ErrorCode::kBadArgument, "one cut list per covariate required");
      out.cuts_ = spec.cuts;
      for (auto& c : out.cuts_) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
      }
    } else {
      if (spec.bins_per_covariate < 1) fail(ErrorCode::kBadArgument, "bins_per_covariate must be >= 1");
      out.cuts_.resize(d);
      for (std::size_t j = 0; j < d; ++j) out.cuts_[j] = quantile_cuts(ds, j, spec.bins_per_covariate);
    }
    out.radix_.resize(d);
    std::size_t cells = 1;
    for (std::size_t j = 0; j < d; ++j) {
      out.radix_[j] = out.cuts_[j].size() + 1;
      cells *= out.radix_[j];
    }

    std::vector<std::vector<std::size_t>> members(cells);
    std::vector<std::size_t> events(cells, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::size_t c = out.cell_of(ds.z(i));
      members[c].push_back(i);
      if (ds.delta(i) == 1 && ds.weight(i) > 0.0) ++events[c];
    }

    // group_[cell] -> representative cell whose curve is used.
    std::vector<std::size_t> group(cells);
    std::iota(group.begin(), group.end(), 0);
    if (explicit_cuts) {
      for (std::size_t c = 0; c < cells; ++c) {
        if (events[c] < spec.min_events) {
          fail(ErrorCode::kStratumTooSmall, "stratum " + std::to_string(c) + " has " +
                                                std::to_string(events[c]) + " events, need " +
                                                std::to_string(spec.min_events));
        }
      }
    } else {
      out.merge_small_cells(group, events, spec.min_events);
    }

    std::map<std::size_t, std::vector<std::size_t>> rows_of;
    for (std::size_t c = 0; c < cells; ++c) {
      auto& r = rows_of[group[c]];
      r.insert(r.end(), members[c].begin(), members[c].end());
    }
    out.curve_of_cell_.assign(cells, 0);
    std::map<std::size_t, std::size_t> curve_index;
    for (auto& [rep, rows] : rows_of) {
      std::sort(rows.begin(), rows.end());
      const Dataset sub = ds.subset(rows);
      curve_index[rep] = out.curves_.size();
      out.curves_.push_back(product_limit_lt(sub.q_column(), sub.x_column(), sub.delta_column(),
                                             sub.weight_column()));
    }
    for (std::size_t c = 0; c < cells; ++c) out.curve_of_cell_[c] = curve_index.at(group[c]);
    return out;
  }

  std::size_t cell_of(std::span<const double> z) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < cuts_.size(); ++j) {
      const auto& cj = cuts_[j];
      const std::size_t bin =
          static_cast<std::size_t>(std::lower_bound(cj.begin(), cj.end(), z[j]) - cj.begin());
      c = c * radix_[j] + bin;
    }
    return c;
  }

  std::size_t stratum_of(std::span<const double> z) const { return curve_of_cell_[cell_of(z)]; }
  std::size_t strata() const noexcept { return curves_.size(); }
  const ProductLimit& stratum(std::size_t s) const { return curves_.at(s); }
  const StepFunction& survival(std::span<const double> z) const { return curves_[stratum_of(z)].survival; }
  const std::vector<std::vector<double>>& cuts() const noexcept { return cuts_; }

 private:
  // Type-7 quantiles at k/bins; a value equal to a cut falls in the lower bin.
  static std::vector<double> quantile_cuts(const Dataset& ds, std::size_t j, int bins) {
    std::vector<double> v(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) v[i] = ds.z(i)[j];
    std::sort(v.begin(), v.end());
    std::vector<double> cuts;
    for (int k = 1; k < bins; ++k) {
      const double h = (static_cast<double>(v.size()) - 1.0) * k / bins;
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, v.size() - 1);
      const double c = v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
      if (c < v.back()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
  }

  std::vector<std::size_t> coords(std::size_t c) const {
    std::vector<std::size_t> out(radix_.size());
    for (std::size_t j = radix_.size(); j-- > 0;) {
      out[j] = c % radix_[j];
      c /= radix_[j];
    }
    return out;
  }

  // Greedy: the group with fewest events joins the nearest other group
  // (grid L1 distance between member cells; ties go to the larger group).
  void merge_small_cells(std::vector<std::size_t>& group, const std::vector<std::size_t>& events,
                         std::size_t min_events) const {
    const std::size_t cells = group.size();
    auto total = [&](std::size_t g) {
      std::size_t e = 0;
      for (std::size_t c = 0; c < cells; ++c) {
        if (group[c] == g) e += events[c];
      }
      return e;
    };
    for (;;) {
      std::vector<std::size_t> reps;
      for (std::size_t c = 0; c < cells; ++c) {
        if (group[c] == c) reps.push_back(c);
      }
      if (reps.size() <= 1) {
        if (total(reps.front()) < min_events) {
          fail(ErrorCode::kStratumTooSmall, "fewer than " + std::to_string(min_events) +
                                                " events in the whole sample");
        }
        return;
      }
      std::size_t worst = reps.front();
      for (auto r : reps) {
        if (total(r) < total(worst)) worst = r;
      }
      if (total(worst) >= min_events) return;
      std::size_t best = cells;
      std::size_t best_dist = 0, best_events = 0;
      for (auto r : reps) {
        if (r == worst) continue;
        std::size_t dist = std::numeric_limits<std::size_t>::max();
        for (std::size_t a = 0; a < cells; ++a) {
          if (group[a] != worst) continue;
          const auto ca = coords(a);
          for (std::size_t b = 0; b < cells; ++b) {
            if (group[b] != r) continue;
            const auto cb = coords(b);
            std::size_t l1 = 0;
            for (std::size_t j = 0; j < ca.size(); ++j) l1 += ca[j] > cb[j] ? ca[j] - cb[j] : cb[j] - ca[j];
            dist = std::min(dist, l1);
          }
        }
        const std::size_t e = total(r);
        if (best == cells || dist < best_dist || (dist == best_dist && e > best_events)) {
          best = r;
          best_dist = dist;
          best_events = e;
        }
      }
      const std::size_t into = std::min(best, worst);
      const std::size_t from = std::max(best, worst);
      for (auto& g : group) {
        if (g == from) g = into;
      }
    }
  }

  std::vector<std::vector<double>> cuts_;
  std::vector<std::size_t> radix_;
  std::vector<ProductLimit> curves_;
  std::vector<std::size_t> curve_of_cell_;
};

}  // namespace truncdr
