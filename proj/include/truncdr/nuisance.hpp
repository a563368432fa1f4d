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
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "truncdr/cdf.hpp"
#include "truncdr/cox.hpp"
#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/nonparam.hpp"

namespace truncdr {

using Json = nlohmann::ordered_json;

enum class LearnerKind { kCox, kStratifiedPl, kConstant, kExternalTable, kFixed };

/// How one nuisance CDF is obtained.
struct LearnerSpec {
  LearnerKind kind = LearnerKind::kCox;
  FeatureMap features = FeatureMap::kLinear;
  StrataSpec strata;
  CoxConfig cox;
  std::optional<double> clamp_eps;
  std::shared_ptr<const ExternalTable> table;
  std::optional<ConditionalCdf> fixed;  // used as given, never refit

  static LearnerSpec cox_linear() { return {}; }
  static LearnerSpec cox_quadratic() {
    LearnerSpec s;
    s.features = FeatureMap::kQuadratic;
    return s;
  }
  static LearnerSpec stratified(StrataSpec strata = {}) {
    LearnerSpec s;
    s.kind = LearnerKind::kStratifiedPl;
    s.strata = std::move(strata);
    return s;
  }
  static LearnerSpec constant() {
    LearnerSpec s;
    s.kind = LearnerKind::kConstant;
    return s;
  }
  static LearnerSpec external(std::shared_ptr<const ExternalTable> table) {
    LearnerSpec s;
    s.kind = LearnerKind::kExternalTable;
    s.table = std::move(table);
    return s;
  }
  static LearnerSpec given(ConditionalCdf cdf) {
    LearnerSpec s;
    s.kind = LearnerKind::kFixed;
    s.fixed = std::move(cdf);
    return s;
  }

  std::string name() const {
    switch (kind) {
      case LearnerKind::kCox: return features == FeatureMap::kLinear ? "cox1" : "cox2";
      case LearnerKind::kStratifiedPl: return "spl";
      case LearnerKind::kConstant: return "const";
      case LearnerKind::kExternalTable: return "table";
      case LearnerKind::kFixed: return "fixed";
    }
    return "?";
  }

  /// Flexible learners are floored at 0.05 by default, parametric ones not at all.
  double effective_eps() const {
    if (clamp_eps) return *clamp_eps;
    return kind == LearnerKind::kStratifiedPl ? 0.05 : 0.0;
  }
};

struct NuisanceOptions {
  std::optional<double> tau;        // reversal constant; default max x + 1
  std::optional<double> clamp_eps;  // overrides both learners' eps
  std::optional<double> tau1, tau2;
};

struct NuisanceSet {
  ConditionalCdf F;
  ConditionalCdf G;
  std::optional<StepFunction> Sc;
  std::optional<StepFunction> SD;
  double tau = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  Json info = Json::object();

  /// Denominators below half the larger clamp level count as overlap failures.
  double overlap_floor() const { return 0.5 * std::max(F.clamp_eps(), G.clamp_eps()); }
};

namespace detail {

inline Json describe_cox(const CoxFit& fit) {
  Json j;
  j["psi"] = fit.psi;
  j["psi_se"] = fit.psi_se;
  j["loglik"] = fit.loglik;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["events"] = fit.events;
  return j;
}

inline Json describe_pl(const ProductLimitDiagnostics& d) {
  Json j;
  j["no_events"] = d.no_events;
  j["empty_risk_set"] = d.empty_risk_set;
  j["premature_zero"] = d.premature_zero;
  return j;
}

inline Json describe_strata(const StratifiedProductLimit& spl) {
  Json j;
  j["strata"] = spl.strata();
  j["cuts"] = spl.cuts();
  bool empty = false, zero = false;
  for (std::size_t s = 0; s < spl.strata(); ++s) {
    empty = empty || spl.stratum(s).diagnostics.empty_risk_set;
    zero = zero || spl.stratum(s).diagnostics.premature_zero;
  }
  j["empty_risk_set"] = empty;
  j["premature_zero"] = zero;
  return j;
}

inline Dataset with_all_events(const Dataset& ds) {
  std::vector<std::uint8_t> ones(ds.size(), 1);
  return Dataset({ds.q_column().begin(), ds.q_column().end()}, {ds.x_column().begin(), ds.x_column().end()},
                 std::move(ones), {ds.z_matrix().begin(), ds.z_matrix().end()}, ds.dim(),
                 {ds.weight_column().begin(), ds.weight_column().end()}, Censoring::kNone, ds.label());
}

}  // namespace detail

/// F̂ fitted forward in time. The dataset's delta column says which x are events.
inline ConditionalCdf fit_event_cdf(const Dataset& ds, const LearnerSpec& spec, Json* info = nullptr) {
  ConditionalCdf out;
  switch (spec.kind) {
    case LearnerKind::kCox: {
      const Dataset mapped = map_covariates(ds, spec.features);
      auto fit = fit_cox_lt(mapped, mapped.weight_column(), spec.cox);
      if (info) *info = detail::describe_cox(fit);
      out = cox_event_cdf(std::move(fit), spec.features);
      break;
    }
    case LearnerKind::kStratifiedPl: {
      auto spl = StratifiedProductLimit::fit(ds, spec.strata);
      if (info) *info = detail::describe_strata(spl);
      out = stratified_event_cdf(std::move(spl));
      break;
    }
    case LearnerKind::kConstant: out = degenerate(CdfKind::kConstantZero); break;
    case LearnerKind::kExternalTable:
      if (!spec.table) fail(ErrorCode::kBadArgument, "external table learner without a table");
      out = external_table_cdf(spec.table);
      break;
    case LearnerKind::kFixed: return *spec.fixed;
  }
  return out.clamped(spec.effective_eps(), CdfRole::kEventTime);
}

/// Ĝ from a fit of τ - Q left truncated by τ - X, mapped back with
/// Ĝ(q|z) = Ŝ_rev((τ - q)- | z). Weights in `ds` are used as case weights.
inline ConditionalCdf fit_G_reverse(const Dataset& ds, const LearnerSpec& spec, double tau, Json* info = nullptr) {
  ConditionalCdf out;
  switch (spec.kind) {
    case LearnerKind::kCox: {
      const Dataset rev = map_covariates(reverse_time(ds, tau), spec.features);
      auto fit = fit_cox_lt(rev, rev.weight_column(), spec.cox);
      if (info) *info = detail::describe_cox(fit);
      out = cox_truncation_cdf(std::move(fit), tau, spec.features);
      break;
    }
    case LearnerKind::kStratifiedPl: {
      auto spl = StratifiedProductLimit::fit(reverse_time(ds, tau), spec.strata);
      if (info) *info = detail::describe_strata(spl);
      out = stratified_truncation_cdf(std::move(spl), tau);
      break;
    }
    case LearnerKind::kConstant: out = degenerate(CdfKind::kConstantOne); break;
    case LearnerKind::kExternalTable:
      if (!spec.table) fail(ErrorCode::kBadArgument, "external table learner without a table");
      out = external_table_cdf(spec.table);
      break;
    case LearnerKind::kFixed: return *spec.fixed;
  }
  return out.clamped(spec.effective_eps(), CdfRole::kTruncationTime);
}

/// Which nuisances an estimator needs.
struct NuisanceNeeds {
  bool F = true;
  bool G = true;
};

/// Fits every nuisance the censoring regime calls for:
///   none: F on (Q, X, 1), G reversed on all subjects;
///   c1:   F_x on (Q, X) with every x an event, G reversed on all subjects,
///         Ŝ_c by product-limit on (Q, X, 1 - Δ);
///   c2:   F on (Q, X, Δ), Ŝ_D by Kaplan–Meier on (X - Q, 1 - Δ), G reversed
///         on the uncensored subset with case weights 1/Ŝ_D(X - Q).
inline NuisanceSet fit_nuisances(const Dataset& ds, const LearnerSpec& f_spec, const LearnerSpec& g_spec,
                                 const NuisanceOptions& options = {}, NuisanceNeeds needs = {}) {
  NuisanceSet ns;
  ns.tau = options.tau ? *options.tau : default_tau(ds);
  LearnerSpec f = f_spec, g = g_spec;
  if (options.clamp_eps) f.clamp_eps = g.clamp_eps = options.clamp_eps;
  if (!needs.F) {
    f = LearnerSpec::constant();
    f.clamp_eps = 0.0;
  }
  if (!needs.G) {
    g = LearnerSpec::constant();
    g.clamp_eps = 0.0;
  }

  Json f_info, g_info;
  switch (ds.censoring()) {
    case Censoring::kNone:
      ns.F = fit_event_cdf(ds, f, &f_info);
      ns.G = fit_G_reverse(ds, g, ns.tau, &g_info);
      break;
    case Censoring::kC1: {
      const auto sc = fit_censoring_survival(ds);
      ns.Sc = sc.survival;
      ns.info["Sc"] = detail::describe_pl(sc.diagnostics);
      ns.F = fit_event_cdf(detail::with_all_events(ds), f, &f_info);
      ns.G = fit_G_reverse(ds, g, ns.tau, &g_info);
      break;
    }
    case Censoring::kC2: {
      const auto sd = fit_residual_censoring_survival(ds);
      ns.SD = sd.survival;
      ns.info["SD"] = detail::describe_pl(sd.diagnostics);
      ns.F = fit_event_cdf(ds, f, &f_info);
      if (needs.G) {
        const auto rows = ds.uncensored_rows();
        if (rows.empty()) fail(ErrorCode::kNoEvents, "no uncensored subjects to fit G");
        const Dataset unc = ds.subset(rows);
        std::vector<double> w(unc.size());
        for (std::size_t i = 0; i < unc.size(); ++i) {
          const double s = ns.SD->left_limit(unc.x(i) - unc.q(i));
          if (!(s > 0.0)) {
            fail(ErrorCode::kCensoringPositivityViolation, "residual censoring survival is zero");
          }
          w[i] = unc.weight(i) / s;
        }
        ns.G = fit_G_reverse(unc.with_weights(std::move(w)), g, ns.tau, &g_info);
      } else {
        ns.G = degenerate(CdfKind::kConstantOne);
      }
      break;
    }
  }

  double min_event = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.delta(i) == 1) min_event = std::min(min_event, ds.x(i));
  }
  ns.tau1 = options.tau1 ? *options.tau1 : (std::isfinite(min_event) ? min_event : ds.max_x());
  ns.tau2 = options.tau2 ? *options.tau2 : ds.max_q();

  Json fj;
  fj["learner"] = f.name();
  fj["kind"] = to_string(ns.F.kind());
  fj["clamp_eps"] = ns.F.clamp_eps();
  if (!f_info.is_null()) fj["fit"] = f_info;
  Json gj;
  gj["learner"] = g.name();
  gj["kind"] = to_string(ns.G.kind());
  gj["clamp_eps"] = ns.G.clamp_eps();
  if (!g_info.is_null()) gj["fit"] = g_info;
  ns.info["F"] = fj;
  ns.info["G"] = gj;
  ns.info["tau"] = ns.tau;
  return ns;
}

// ---------------------------------------------------------------------------
// Empirical overlap

struct OverlapReport {
  std::vector<std::size_t> rows;  // uncensored subjects the values refer to
  std::vector<double> eta1, eta2, eta3;
  double min_eta1 = 1.0, min_eta2 = 1.0, min_eta3 = 1.0;
};

/// η1 = max(1 - F̂(τ2|Z), 1 - F̂(X|Z)), η2 = max(Ĝ(τ1|Z), Ĝ(Q|Z)), η3 the
/// censoring survival at the subject's own time; uncensored subjects only.
inline OverlapReport empirical_overlap_report(const NuisanceSet& ns, const Dataset& ds) {
  OverlapReport r;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.delta(i) != 1) continue;
    const auto z = ds.z(i);
    const double e1 = std::max(1.0 - ns.F(ns.tau2, z), 1.0 - ns.F(ds.x(i), z));
    const double e2 = std::max(ns.G(ns.tau1, z), ns.G(ds.q(i), z));
    double e3 = 1.0;
    if (ns.Sc) e3 = (*ns.Sc)(ds.x(i));
    if (ns.SD) e3 = (*ns.SD)(ds.x(i) - ds.q(i));
    r.rows.push_back(i);
    r.eta1.push_back(e1);
    r.eta2.push_back(e2);
    r.eta3.push_back(e3);
    r.min_eta1 = std::min(r.min_eta1, e1);
    r.min_eta2 = std::min(r.min_eta2, e2);
    r.min_eta3 = std::min(r.min_eta3, e3);
  }
  return r;
}

inline Json to_json(const OverlapReport& r) {
  auto quartiles = [](std::vector<double> v) {
    Json j = Json::array();
    if (v.empty()) return j;
    std::sort(v.begin(), v.end());
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      j.push_back(v[static_cast<std::size_t>(std::lround(p * static_cast<double>(v.size() - 1)))]);
    }
    return j;
  };
  Json j;
  j["subjects"] = r.rows.size();
  j["min_eta1"] = r.min_eta1;
  j["min_eta2"] = r.min_eta2;
  j["min_eta3"] = r.min_eta3;
  j["eta1_quantiles"] = quartiles(r.eta1);
  j["eta2_quantiles"] = quartiles(r.eta2);
  j["eta3_quantiles"] = quartiles(r.eta3);
  return j;
}

}  // namespace truncdr
