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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/estimators.hpp"
#include "truncdr/functional.hpp"
#include "truncdr/nuisance.hpp"

namespace truncdr {

enum class EstimatorKind { kDr, kCf, kIpw, kReg1, kReg2, kPl, kNaive };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kDr: return "dr";
    case EstimatorKind::kCf: return "cf";
    case EstimatorKind::kIpw: return "ipw";
    case EstimatorKind::kReg1: return "reg1";
    case EstimatorKind::kReg2: return "reg2";
    case EstimatorKind::kPl: return "pl";
    case EstimatorKind::kNaive: return "naive";
  }
  return "?";
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
  for (auto k : {EstimatorKind::kDr, EstimatorKind::kCf, EstimatorKind::kIpw, EstimatorKind::kReg1,
                 EstimatorKind::kReg2, EstimatorKind::kPl, EstimatorKind::kNaive}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorCode::kBadArgument, "unknown estimator '" + std::string(s) + "'");
}

/// Everything needed to rerun an estimator from scratch on a dataset,
/// nuisance fitting included (bootstrap replicates and simulations rely on it).
struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kDr;
  LearnerSpec f = LearnerSpec::cox_linear();
  LearnerSpec g = LearnerSpec::cox_linear();
  int folds = 10;
  std::uint64_t seed = 0;
  NuisanceOptions nuisance;
  bool overlap = false;

  bool uses_f() const {
    return kind == EstimatorKind::kDr || kind == EstimatorKind::kCf || kind == EstimatorKind::kReg1 ||
           kind == EstimatorKind::kReg2;
  }
  bool uses_g() const {
    return kind == EstimatorKind::kDr || kind == EstimatorKind::kCf || kind == EstimatorKind::kIpw;
  }

  /// "dr-cox1-cox2", "ipw-cox1", "reg1-spl", "pl", ...
  std::string id() const {
    std::string s(to_string(kind));
    if (uses_f()) s += "-" + f.name();
    if (uses_g()) s += "-" + g.name();
    return s;
  }
};

inline std::vector<EstimateReport> run_estimator(const Dataset& ds, const EstimatorConfig& cfg,
                                                 std::span<const Functional> nus) {
  std::vector<EstimateReport> out;
  const std::string prefix = detail::estimator_prefix(ds);
  switch (cfg.kind) {
    case EstimatorKind::kPl:
      for (const auto& nu : nus) out.push_back(estimate_pl(ds, nu));
      break;
    case EstimatorKind::kNaive:
      for (const auto& nu : nus) out.push_back(estimate_naive(ds, nu));
      break;
    case EstimatorKind::kCf:
      out = estimate_cf(ds, cfg.f, cfg.g, cfg.folds, cfg.seed, nus, cfg.nuisance);
      break;
    default: {
      const NuisanceSet ns = fit_nuisances(ds, cfg.f, cfg.g, cfg.nuisance, {cfg.uses_f(), cfg.uses_g()});
      for (const auto& nu : nus) {
        switch (cfg.kind) {
          case EstimatorKind::kDr: out.push_back(estimate_dr(ds, ns, nu)); break;
          case EstimatorKind::kIpw: out.push_back(estimate_ipw_q(ds, ns, nu)); break;
          case EstimatorKind::kReg1: out.push_back(estimate_reg_t1(ds, ns, nu)); break;
          default: out.push_back(estimate_reg_t2(ds, ns, nu)); break;
        }
      }
      if (cfg.overlap) {
        const Json ov = to_json(empirical_overlap_report(ns, ds));
        for (auto& r : out) r.diagnostics["overlap"] = ov;
      }
    }
  }
  for (auto& r : out) r.estimator = prefix + cfg.id();
  return out;
}

inline EstimateReport run_estimator(const Dataset& ds, const EstimatorConfig& cfg, const Functional& nu) {
  return run_estimator(ds, cfg, std::span<const Functional>(&nu, 1)).front();
}

}  // namespace truncdr
