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

#include <ostream>
#include <span>
#include <string>

#include "truncdr/data.hpp"
#include "truncdr/estimators.hpp"
#include "truncdr/inference.hpp"
#include "truncdr/nuisance.hpp"

namespace truncdr {

inline Json to_json(const Interval& ci) { return Json::array({ci.lo, ci.hi}); }

inline Json to_json(const EstimateReport& r) {
  Json j;
  j["estimator"] = r.estimator;
  j["functional"] = r.functional;
  j["censoring"] = std::string(to_string(r.censoring));
  j["n"] = r.n;
  j["theta"] = r.theta;
  j["beta"] = r.beta ? Json(*r.beta) : Json();
  j["se_model"] = r.se_model ? Json(*r.se_model) : Json();
  j["ci_model"] = r.ci_model ? to_json(*r.ci_model) : Json();
  if (r.boot_replicates > 0) {
    Json b;
    b["method"] = r.boot_method;
    b["replicates"] = r.boot_replicates;
    b["failures"] = r.boot_failures;
    b["se"] = r.se_boot ? Json(*r.se_boot) : Json();
    b["ci"] = r.ci_boot ? to_json(*r.ci_boot) : Json();
    j["bootstrap"] = std::move(b);
  }
  j["nuisance"] = r.nuisance;
  j["diagnostics"] = r.diagnostics;
  return j;
}

inline Json to_json(const KendallResult& k) {
  Json j;
  j["kendall_tau"] = k.tau;
  j["p_value"] = k.p_value;
  j["z"] = k.z;
  j["comparable_pairs"] = k.comparable;
  return j;
}

/// One row per report; the bootstrap columns stay empty when it was not run.
inline void write_report_csv(std::ostream& os, std::span<const EstimateReport> reports) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  os << "estimator,functional,censoring,n,theta,beta,se_model,ci_lo,ci_hi,se_boot,boot_lo,boot_hi\n";
  for (const auto& r : reports) {
    os << r.estimator << ',' << r.functional << ',' << to_string(r.censoring) << ',' << r.n << ','
       << format_number(r.theta) << ',' << opt(r.beta) << ',' << opt(r.se_model) << ','
       << (r.ci_model ? format_number(r.ci_model->lo) : "") << ','
       << (r.ci_model ? format_number(r.ci_model->hi) : "") << ',' << opt(r.se_boot) << ','
       << (r.ci_boot ? format_number(r.ci_boot->lo) : "") << ','
       << (r.ci_boot ? format_number(r.ci_boot->hi) : "") << '\n';
  }
}

}  // namespace truncdr
