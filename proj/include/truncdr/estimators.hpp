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
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truncdr/cdf.hpp"
#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/functional.hpp"
#include "truncdr/nonparam.hpp"
#include "truncdr/nuisance.hpp"
#include "truncdr/score.hpp"

namespace truncdr {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EstimateReport {
  std::string estimator;
  std::string functional;
  Censoring censoring = Censoring::kNone;
  std::size_t n = 0;
  double theta = 0.0;
  std::optional<double> beta;
  std::optional<double> se_model;
  std::optional<Interval> ci_model;
  std::optional<double> se_boot;
  std::optional<Interval> ci_boot;
  std::string boot_method;
  int boot_replicates = 0;
  int boot_failures = 0;
  Json nuisance = Json::object();
  Json diagnostics = Json::object();
};

/// Censoring curves an estimator uses; both absent for uncensored data.
struct CensoringCurves {
  const StepFunction* Sc = nullptr;  // c1: survival of C
  const StepFunction* SD = nullptr;  // c2: survival of the residual censoring time
};

inline CensoringCurves censoring_curves(const NuisanceSet& ns) {
  return {ns.Sc ? &*ns.Sc : nullptr, ns.SD ? &*ns.SD : nullptr};
}

namespace detail {

inline void check_censoring(const Dataset& ds, const CensoringCurves& cc) {
  switch (ds.censoring()) {
    case Censoring::kNone: return;
    case Censoring::kC1:
      if (!cc.Sc) fail(ErrorCode::kBadArgument, "c1 data needs the censoring survival Sc");
      return;
    case Censoring::kC2:
      if (!cc.SD) fail(ErrorCode::kBadArgument, "c2 data needs the residual censoring survival SD");
      return;
  }
}

/// Per-subject multiplier outside the uncensored score: Δ for c1 (whose
/// 1/Ŝc enters through the time weight), Δ/Ŝ_D((X-Q)-) for c2, 1 otherwise.
inline double censoring_factor(const Dataset& ds, std::size_t i, const CensoringCurves& cc) {
  switch (ds.censoring()) {
    case Censoring::kNone: return 1.0;
    case Censoring::kC1: return ds.delta(i) == 1 ? 1.0 : 0.0;
    case Censoring::kC2: {
      if (ds.delta(i) != 1) return 0.0;
      const double s = cc.SD->left_limit(ds.x(i) - ds.q(i));
      if (!(s > 0.0)) {
        fail(ErrorCode::kCensoringPositivityViolation,
             "residual censoring survival is zero at " + format_number(ds.x(i) - ds.q(i)));
      }
      return 1.0 / s;
    }
  }
  return 1.0;
}

inline InverseSurvivalWeight time_weight(const Dataset& ds, const CensoringCurves& cc) {
  return ds.censoring() == Censoring::kC1 ? InverseSurvivalWeight(cc.Sc) : InverseSurvivalWeight();
}

/// ∫_{(-∞, upper]} ν w dF for one curve.
inline double integrate_functional(const Curve& F, const Functional& nu, const InverseSurvivalWeight& w,
                                   double upper) {
  return std::visit(
      [&](const auto& c) -> double {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, ConstCurve>) {
          return 0.0;
        } else if constexpr (std::is_same_v<C, AnalyticCurve>) {
          if (w.active()) fail(ErrorCode::kBadArgument, "censoring weights need a step-function CDF");
          if (nu.kind() == Functional::Kind::kRmst) {
            const double u = std::min(upper, nu.t0());
            if (!(u > 0.0)) return 0.0;
            return u * c(upper) - quad([&](double t) { return c(t); }, c.kinks(), 0.0, u);
          }
          double total = 0.0;
          double prev_t = -std::numeric_limits<double>::infinity();
          const auto& br = nu.breaks();
          for (std::size_t j = 0; j <= br.size(); ++j) {
            const double next_t = j < br.size() ? std::min(br[j], upper) : upper;
            if (next_t > prev_t) total += nu.levels()[j] * (c(next_t) - c(prev_t));
            prev_t = next_t;
            if (j < br.size() && br[j] >= upper) break;
          }
          return total;
        } else {
          double total = 0.0;
          c.for_each_jump(-std::numeric_limits<double>::infinity(), false, upper, true,
                          [&](double t, double before, double after) { total += nu(t) * w(t) * (after - before); });
          return total;
        }
      },
      F);
}

struct ScoreTerms {
  std::vector<double> a, b, inverse_g;
  std::size_t size() const { return a.size(); }
};

inline void add_score_terms(ScoreTerms& out, const Dataset& ds, std::span<const std::size_t> rows,
                            const ConditionalCdf& F, const ConditionalCdf& G, const CensoringCurves& cc,
                            const Functional& nu, double floor) {
  const auto w = time_weight(ds, cc);
  for (std::size_t i : rows) {
    const double c = censoring_factor(ds, i, cc);
    if (c == 0.0) {
      out.a.push_back(0.0);
      out.b.push_back(0.0);
      out.inverse_g.push_back(0.0);
      continue;
    }
    const auto z = ds.z(i);
    const auto s = subject_score(F.at(z), G.at(z), nu, ds.q(i), ds.x(i), w, floor);
    out.a.push_back(c * s.a);
    out.b.push_back(c * s.b);
    out.inverse_g.push_back(c * s.inverse_g);
  }
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

/// θ̂ = Σa/Σb with σ̂² = β̂²·mean(U_i(θ̂)²), β̂ = n/Σ w_i/Ĝ(X_i|Z_i).
inline void solve_linear(const ScoreTerms& t, EstimateReport& r) {
  long double sa = 0.0L, sb = 0.0L, sg = 0.0L;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sa += t.a[i];
    sb += t.b[i];
    sg += t.inverse_g[i];
  }
  if (!(sb > 0.0L)) fail(ErrorCode::kDegenerateDenominator, "estimating-equation denominator is not positive");
  const double theta = static_cast<double>(sa / sb);
  const double n = static_cast<double>(t.size());
  long double ss = 0.0L;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = t.a[i] - theta * t.b[i];
    ss += static_cast<long double>(u) * u;
  }
  r.n = t.size();
  r.theta = theta;
  if (sg > 0.0L) {
    const double beta = n / static_cast<double>(sg);
    const double sigma = beta * std::sqrt(static_cast<double>(ss) / n);
    r.beta = beta;
    r.se_model = sigma / std::sqrt(n);
    r.ci_model = Interval{theta - 1.96 * *r.se_model, theta + 1.96 * *r.se_model};
  }
}

inline std::string estimator_prefix(const Dataset& ds) {
  return ds.censoring() == Censoring::kNone ? "" : std::string(to_string(ds.censoring())) + ":";
}

/// θ = ∫ν dF for F = 1 - S, with the mass S leaves unassigned placed at ν(∞).
inline double functional_of_survival(const StepFunction& S, const Functional& nu) {
  double total = 0.0;
  for (std::size_t k = 0; k < S.size(); ++k) total += nu(S.times()[k]) * (S.value_before(k) - S.values()[k]);
  return total + nu.at_infinity() * S.last_value();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Doubly robust

inline EstimateReport estimate_dr(const Dataset& ds, const ConditionalCdf& F, const ConditionalCdf& G,
                                  const CensoringCurves& cc, const Functional& nu, double floor = 0.0) {
  detail::check_censoring(ds, cc);
  detail::ScoreTerms t;
  const auto rows = detail::all_rows(ds.size());
  detail::add_score_terms(t, ds, rows, F, G, cc, nu, floor);
  EstimateReport r;
  r.estimator = detail::estimator_prefix(ds) + "dr";
  r.functional = nu.describe();
  r.censoring = ds.censoring();
  detail::solve_linear(t, r);
  return r;
}

inline EstimateReport estimate_dr(const Dataset& ds, const NuisanceSet& ns, const Functional& nu) {
  auto r = estimate_dr(ds, ns.F, ns.G, censoring_curves(ns), nu, ns.overlap_floor());
  r.nuisance = ns.info;
  return r;
}

inline EstimateReport estimate_dr_c1(const Dataset& ds, const ConditionalCdf& Fx, const ConditionalCdf& G,
                                     const StepFunction& Sc, const Functional& nu) {
  if (ds.censoring() != Censoring::kC1) fail(ErrorCode::kWrongCensoringTag, "estimate_dr_c1 needs tag c1");
  return estimate_dr(ds, Fx, G, {&Sc, nullptr}, nu, 0.5 * std::max(Fx.clamp_eps(), G.clamp_eps()));
}

inline EstimateReport estimate_dr_c2(const Dataset& ds, const ConditionalCdf& F, const ConditionalCdf& G,
                                     const StepFunction& SD, const Functional& nu) {
  if (ds.censoring() != Censoring::kC2) fail(ErrorCode::kWrongCensoringTag, "estimate_dr_c2 needs tag c2");
  return estimate_dr(ds, F, G, {nullptr, &SD}, nu, 0.5 * std::max(F.clamp_eps(), G.clamp_eps()));
}

// ---------------------------------------------------------------------------
// Single-nuisance estimators

/// Σ w_i ν(X_i)/Ĝ(X_i|Z_i) / Σ w_i/Ĝ(X_i|Z_i) with the known-weights
/// sandwich SE; w_i is the censoring weight (1 without censoring).
inline EstimateReport estimate_ipw_q(const Dataset& ds, const ConditionalCdf& G, const Functional& nu,
                                     const CensoringCurves& cc = {}) {
  detail::check_censoring(ds, cc);
  const auto tw = detail::time_weight(ds, cc);
  const double floor = 0.5 * G.clamp_eps();
  std::vector<double> w(ds.size(), 0.0), v(ds.size(), 0.0);
  long double sw = 0.0L, swv = 0.0L;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double c = detail::censoring_factor(ds, i, cc);
    if (c == 0.0) continue;
    const double g = G(ds.x(i), ds.z(i));
    detail::require_positive(g, floor, ds.x(i), "G(X|Z)");
    w[i] = c * tw(ds.x(i)) / g;
    v[i] = nu(ds.x(i));
    sw += w[i];
    swv += w[i] * v[i];
  }
  if (!(sw > 0.0L)) fail(ErrorCode::kDegenerateDenominator, "sum of weights is not positive");
  EstimateReport r;
  r.estimator = detail::estimator_prefix(ds) + "ipw";
  r.functional = nu.describe();
  r.censoring = ds.censoring();
  r.n = ds.size();
  r.theta = static_cast<double>(swv / sw);
  long double ss = 0.0L;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double u = w[i] * (v[i] - r.theta);
    ss += static_cast<long double>(u) * u;
  }
  r.beta = static_cast<double>(ds.size()) / static_cast<double>(sw);
  r.se_model = std::sqrt(static_cast<double>(ss)) / static_cast<double>(sw);
  r.ci_model = Interval{r.theta - 1.96 * *r.se_model, r.theta + 1.96 * *r.se_model};
  return r;
}

inline EstimateReport estimate_ipw_q(const Dataset& ds, const NuisanceSet& ns, const Functional& nu) {
  auto r = estimate_ipw_q(ds, ns.G, nu, censoring_curves(ns));
  r.nuisance = ns.info;
  return r;
}

/// Regression on the event-time model only:
/// Σ c_i {ν(X_i)w(X_i) + m_w(Q_i)/(1-F̂(Q_i))} / Σ c_i {w(X_i) + M_w(Q_i)/(1-F̂(Q_i))}.
inline EstimateReport estimate_reg_t1(const Dataset& ds, const ConditionalCdf& F, const Functional& nu,
                                      const CensoringCurves& cc = {}) {
  detail::check_censoring(ds, cc);
  const auto tw = detail::time_weight(ds, cc);
  const double floor = 0.5 * F.clamp_eps();
  const Functional one = Functional::step({}, {1.0});
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double c = detail::censoring_factor(ds, i, cc);
    if (c == 0.0) continue;
    const auto curve = F.at(ds.z(i));
    const double q = ds.q(i);
    const double s = 1.0 - evaluate(curve, q);
    detail::require_positive(s, floor, q, "1-F(Q|Z)");
    const double m = detail::integrate_functional(curve, nu, tw, q);
    const double M = tw.active() ? detail::integrate_functional(curve, one, tw, q) : 1.0 - s;
    const double wx = tw(ds.x(i));
    num += c * (nu(ds.x(i)) * wx + m / s);
    den += c * (wx + M / s);
  }
  if (!(den > 0.0L)) fail(ErrorCode::kDegenerateDenominator, "denominator is not positive");
  EstimateReport r;
  r.estimator = detail::estimator_prefix(ds) + "reg1";
  r.functional = nu.describe();
  r.censoring = ds.censoring();
  r.n = ds.size();
  r.theta = static_cast<double>(num / den);
  return r;
}

inline EstimateReport estimate_reg_t1(const Dataset& ds, const NuisanceSet& ns, const Functional& nu) {
  auto r = estimate_reg_t1(ds, ns.F, nu, censoring_curves(ns));
  r.nuisance = ns.info;
  return r;
}

/// Σ c_i μ_w(Z_i)/(1-F̂(Q_i)) / Σ c_i M_w(∞)/(1-F̂(Q_i)); without time
/// weights M(∞) is 1 and the CDF mass beyond its last jump sits at ν(∞).
inline EstimateReport estimate_reg_t2(const Dataset& ds, const ConditionalCdf& F, const Functional& nu,
                                      const CensoringCurves& cc = {}) {
  detail::check_censoring(ds, cc);
  const auto tw = detail::time_weight(ds, cc);
  const double floor = 0.5 * F.clamp_eps();
  const double inf = std::numeric_limits<double>::infinity();
  const Functional one = Functional::step({}, {1.0});
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double c = detail::censoring_factor(ds, i, cc);
    if (c == 0.0) continue;
    const auto curve = F.at(ds.z(i));
    const double q = ds.q(i);
    const double s = 1.0 - evaluate(curve, q);
    detail::require_positive(s, floor, q, "1-F(Q|Z)");
    double mu, total;
    if (tw.active()) {
      mu = detail::integrate_functional(curve, nu, tw, inf);
      total = detail::integrate_functional(curve, one, tw, inf);
    } else {
      mu = detail::integrate_functional(curve, nu, tw, inf) + nu.at_infinity() * (1.0 - evaluate(curve, inf));
      total = 1.0;
    }
    num += c * mu / s;
    den += c * total / s;
  }
  if (!(den > 0.0L)) fail(ErrorCode::kDegenerateDenominator, "denominator is not positive");
  EstimateReport r;
  r.estimator = detail::estimator_prefix(ds) + "reg2";
  r.functional = nu.describe();
  r.censoring = ds.censoring();
  r.n = ds.size();
  r.theta = static_cast<double>(num / den);
  return r;
}

inline EstimateReport estimate_reg_t2(const Dataset& ds, const NuisanceSet& ns, const Functional& nu) {
  auto r = estimate_reg_t2(ds, ns.F, nu, censoring_curves(ns));
  r.nuisance = ns.info;
  return r;
}

// ---------------------------------------------------------------------------
// Covariate-free estimators

/// Product-limit estimator assuming truncation independent of T.
inline EstimateReport estimate_pl(const Dataset& ds, const Functional& nu) {
  const auto pl = product_limit_lt(ds.q_column(), ds.x_column(), ds.delta_column(), ds.weight_column());
  EstimateReport r;
  r.estimator = detail::estimator_prefix(ds) + "pl";
  r.functional = nu.describe();
  r.censoring = ds.censoring();
  r.n = ds.size();
  r.theta = detail::functional_of_survival(pl.survival, nu);
  r.diagnostics["product_limit"] = detail::describe_pl(pl.diagnostics);
  return r;
}

/// Kaplan–Meier estimator that ignores truncation.
inline EstimateReport estimate_naive(const Dataset& ds, const Functional& nu) {
  const auto km = kaplan_meier(ds.x_column(), ds.delta_column(), ds.weight_column());
  EstimateReport r;
  r.estimator = detail::estimator_prefix(ds) + "naive";
  r.functional = nu.describe();
  r.censoring = ds.censoring();
  r.n = ds.size();
  r.theta = detail::functional_of_survival(km.survival, nu);
  r.diagnostics["kaplan_meier"] = detail::describe_pl(km.diagnostics);
  return r;
}

// ---------------------------------------------------------------------------
// Cross-fitting

/// K-fold cross-fitted DR: nuisances for fold k come from the other folds
/// and score only fold k's subjects; the pooled equation is solved once.
inline std::vector<EstimateReport> estimate_cf(const Dataset& ds, const LearnerSpec& f_spec,
                                               const LearnerSpec& g_spec, int k, std::uint64_t seed,
                                               std::span<const Functional> nus, const NuisanceOptions& options = {}) {
  const auto folds = split_folds(ds.size(), k, seed);
  NuisanceOptions opt = options;
  if (!opt.tau) opt.tau = default_tau(ds);
  std::vector<detail::ScoreTerms> terms(nus.size());
  std::vector<std::size_t> order;
  Json fold_info = Json::array();
  for (int fold = 1; fold <= k; ++fold) {
    const auto test = folds.in_fold(fold);
    const auto train = folds.out_of_fold(fold);
    try {
      const NuisanceSet ns = fit_nuisances(ds.subset(train), f_spec, g_spec, opt);
      for (std::size_t j = 0; j < nus.size(); ++j) {
        detail::add_score_terms(terms[j], ds, test, ns.F, ns.G, censoring_curves(ns), nus[j], ns.overlap_floor());
      }
      fold_info.push_back(ns.info);
    } catch (const Error& e) {
      fail(e.code(), "fold " + std::to_string(fold) + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ErrorCode::kFoldFailure, "fold " + std::to_string(fold) + ": " + e.what());
    }
  }
  std::vector<EstimateReport> out;
  for (std::size_t j = 0; j < nus.size(); ++j) {
    EstimateReport r;
    r.estimator = detail::estimator_prefix(ds) + "cf";
    r.functional = nus[j].describe();
    r.censoring = ds.censoring();
    detail::solve_linear(terms[j], r);
    r.nuisance["folds"] = k;
    r.nuisance["seed"] = seed;
    r.nuisance["per_fold"] = fold_info;
    out.push_back(std::move(r));
  }
  return out;
}

inline EstimateReport estimate_cf(const Dataset& ds, const LearnerSpec& f_spec, const LearnerSpec& g_spec, int k,
                                  std::uint64_t seed, const Functional& nu, const NuisanceOptions& options = {}) {
  return estimate_cf(ds, f_spec, g_spec, k, seed, std::span<const Functional>(&nu, 1), options).front();
}

// ---------------------------------------------------------------------------
// Identification with known truncation law

struct IdentificationResult {
  double theta = 0.0;
  double se = 0.0;
};

/// Σ w ν(X)/G(X|Z) / Σ w/G(X|Z) with the true G and a known-weights
/// sandwich SE. On c1 data w = Δ/S_c(X) needs the true censoring survival.
inline IdentificationResult identification_check(const Dataset& ds, const ConditionalCdf& G_true,
                                                 const Functional& nu,
                                                 const std::function<double(double)>& censoring_survival = {}) {
  if (ds.censoring() == Censoring::kC1 && !censoring_survival) {
    fail(ErrorCode::kBadArgument, "identification on c1 data needs the true censoring survival");
  }
  long double sw = 0.0L, swv = 0.0L;
  std::vector<double> w(ds.size(), 0.0), v(ds.size(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double c = 1.0;
    if (ds.censoring() == Censoring::kC1) c = ds.delta(i) == 1 ? 1.0 / censoring_survival(ds.x(i)) : 0.0;
    if (c == 0.0) continue;
    w[i] = c / G_true(ds.x(i), ds.z(i));
    v[i] = nu(ds.x(i));
    sw += w[i];
    swv += w[i] * v[i];
  }
  IdentificationResult r;
  r.theta = static_cast<double>(swv / sw);
  long double ss = 0.0L;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double u = w[i] * (v[i] - r.theta);
    ss += static_cast<long double>(u) * u;
  }
  r.se = std::sqrt(static_cast<double>(ss)) / static_cast<double>(sw);
  return r;
}

}  // namespace truncdr
