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
// Acceptance gate. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any requested criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "property_checks.hpp"
#include "test_util.hpp"

namespace truncdr {
namespace {

constexpr int kReps = 200;
constexpr std::size_t kN = 1000;
constexpr int kBoot = 100;

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

StudyResult study(Scenario s, std::vector<std::string> ids, std::uint64_t seed, int boot = 0) {
  StudyConfig cfg;
  cfg.scenario = s;
  cfg.n = kN;
  cfg.reps = kReps;
  cfg.boot = boot;
  cfg.seed = seed;
  for (const auto& id : ids) cfg.estimators.push_back(parse_study_estimator(id));
  return replicate_study(cfg);
}

const SimResultRow& row(const StudyResult& r, std::size_t k) { return r.rows.at(k); }

void check_bias(Verdict& v, const SimResultRow& r, double target, double tol) {
  v.check(r.failures == 0 && std::abs(r.bias - target) <= tol,
          r.estimator + fmt(" bias %.4f (target %.4f +- %.3f)", r.bias, target, tol));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict criterion1() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = study(Scenario::k1, {"dr"}, 101, kBoot);
  const auto& dr = row(r, 0);
  check_bias(v, dr, 0.0, 0.006);
  v.check(dr.sd >= 0.017 && dr.sd <= 0.026, fmt("SD %.4f in [0.017, 0.026]", dr.sd));
  v.check(dr.cp_model && *dr.cp_model >= 0.91 && *dr.cp_model <= 0.98,
          fmt("CP %.3f in [0.91, 0.98]", dr.cp_model.value_or(-1)));
  const double secs = seconds_since(t0);
  v.check(secs <= 900.0, fmt("runtime %.0fs with B=%g (boot CP %.3f)", secs, kBoot, dr.cp_boot.value_or(-1)));
  return v;
}

Verdict criterion2() {
  Verdict v;
  const auto ipw = study(Scenario::k3, {"ipw"}, 102, kBoot);
  const auto dr = study(Scenario::k3, {"dr"}, 102);
  check_bias(v, row(ipw, 0), 0.0528, 0.012);
  const auto cp = row(ipw, 0).cp_boot;
  v.check(cp && *cp <= 0.35, fmt("ipw boot CP %.3f <= 0.35", cp.value_or(-1)));
  check_bias(v, row(dr, 0), 0.0, 0.008);
  return v;
}

Verdict criterion3() {
  Verdict v;
  const auto r = study(Scenario::k5, {"reg1", "dr"}, 103);
  check_bias(v, row(r, 0), -0.0288, 0.008);
  check_bias(v, row(r, 1), 0.0, 0.008);
  return v;
}

Verdict criterion4() {
  Verdict v;
  const auto r = study(Scenario::k7, {"dr"}, 104);
  check_bias(v, row(r, 0), -0.0570, 0.012);
  return v;
}

Verdict criterion5() {
  Verdict v;
  const auto r = study(Scenario::kBase62, {"dr", "pl", "naive"}, 105);
  check_bias(v, row(r, 0), 0.0, 0.006);
  check_bias(v, row(r, 1), 0.0193, 0.008);
  check_bias(v, row(r, 2), 0.1389, 0.01);
  return v;
}

Verdict criterion6() {
  Verdict v;
  const auto r = study(Scenario::kC1, {"dr"}, 106);
  check_bias(v, row(r, 0), 0.0, 0.006);
  const auto big = generate_scenario({Scenario::kC1, 100000, 1006, {}, {}});
  v.check(std::abs(big.censoring_rate - 0.165) <= 0.005, fmt("censoring rate %.4f (0.165 +- 0.005)", big.censoring_rate));
  return v;
}

Verdict criterion7() {
  Verdict v;
  const auto r = study(Scenario::kC2, {"dr"}, 107);
  check_bias(v, row(r, 0), 0.0, 0.010);
  return v;
}

Verdict criterion8() {
  Verdict v;
  const auto F0 = degenerate(CdfKind::kConstantZero);
  const auto G1 = degenerate(CdfKind::kConstantOne);
  const auto one = StepFunction::constant(1.0);
  double worst_ipw = 0.0, worst_reg = 0.0, worst_cens = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    CounterRng rng(derive_seed(108, s));
    const std::size_t n = 40 + rng.below(200);
    const auto ds = testing::random_truncated(derive_seed(1108, s), n, 1 + rng.below(3));
    const auto F = fit_event_cdf(ds, LearnerSpec::cox_linear());
    const auto G = fit_G_reverse(ds, LearnerSpec::cox_linear(), default_tau(ds));
    const double t0 = ds.min_q() + (ds.max_x() - ds.min_q()) * (0.2 + 0.6 * rng.uniform());
    for (const auto& nu : {Functional::survival(t0), Functional::rmst(t0)}) {
      worst_ipw = std::max(worst_ipw, std::abs(estimate_dr(ds, F0, G, {}, nu).theta - estimate_ipw_q(ds, G, nu).theta));
      worst_reg = std::max(worst_reg, std::abs(estimate_dr(ds, F, G1, {}, nu).theta - estimate_reg_t1(ds, F, nu).theta));
      const double plain = estimate_dr(ds, F, G, {}, nu).theta;
      worst_cens = std::max(worst_cens, std::abs(estimate_dr_c1(ds.with_censoring(Censoring::kC1), F, G, one, nu).theta - plain));
      worst_cens = std::max(worst_cens, std::abs(estimate_dr_c2(ds.with_censoring(Censoring::kC2), F, G, one, nu).theta - plain));
    }
    // whole pipelines with fitted censoring curves
    EstimatorConfig cfg;
    const auto nu = Functional::survival(t0);
    const double a = run_estimator(ds, cfg, nu).theta;
    for (auto c : {Censoring::kC1, Censoring::kC2}) {
      worst_cens = std::max(worst_cens, std::abs(run_estimator(ds.with_censoring(c), cfg, nu).theta - a));
    }
  }
  v.check(worst_ipw <= 1e-12, fmt("dr(F=0) vs ipw max diff %.2e", worst_ipw));
  v.check(worst_reg <= 1e-12, fmt("dr(G=1) vs reg1 max diff %.2e", worst_reg));
  v.check(worst_cens <= 1e-12, fmt("censored vs uncensored max diff %.2e", worst_cens));
  return v;
}

Verdict criterion9() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto ds = testing::random_truncated(derive_seed(109, s), 200, 2);
      std::vector<double> w(ds.size(), 1.0);
      CounterRng rng(derive_seed(209, s));
      const std::vector<double> psi{rng.uniform() - 0.5, rng.uniform() - 0.5};
      const auto pl = partial_loglik_and_score(ds, w, psi);
      for (std::size_t j = 0; j < 2; ++j) {
        auto up = psi, dn = psi;
        const double h = 1e-5;
        up[j] += h;
        dn[j] -= h;
        const double fd =
            (partial_loglik_and_score(ds, w, up).loglik - partial_loglik_and_score(ds, w, dn).loglik) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - pl.score[j]) / std::max(1.0, std::abs(pl.score[j])));
      }
    }
    v.check(worst <= 1e-6, fmt("score vs finite differences rel err %.1e", worst));
  }
  const std::size_t N = 100000;
  {
    const auto m = checks::martingale_mean(N, 309);
    v.check(m.within(0.0), fmt("martingale mean %.2e (se %.1e)", m.mean, m.se));
  }
  {
    const auto m = checks::score_mean(N, 310, checks::wrong_event_cdf(), true_truncation_cdf(Scenario::k1));
    v.check(m.within(0.0), fmt("DR with wrong F %.2e (se %.1e)", m.mean, m.se));
    const auto g = checks::score_mean(N, 311, true_event_cdf(Scenario::k1), checks::wrong_truncation_cdf());
    v.check(g.within(0.0), fmt("DR with wrong G %.2e (se %.1e)", g.mean, g.se));
  }
  {
    const auto c = checks::pl_influence_equivalence(100, 312);
    v.check(c.points == 100 && c.max_abs_error <= 1e-10, fmt("product-limit influence max abs err %.1e", c.max_abs_error));
  }
  const std::pair<Scenario, double> ident[] = {{Scenario::k1, 0.2370}, {Scenario::kBase62, 0.576}, {Scenario::kC1, 0.624}};
  for (const auto& [s, target] : ident) {
    const auto r = checks::identify(s, N, 313);
    v.check(std::abs(r.theta - target) <= 3.0 * r.se,
            "identification " + std::string(to_string(s)) + fmt(" %.4f (target %.4f, se %.4f)", r.theta, target, r.se));
  }
  const double secs = seconds_since(t0);
  v.check(secs <= 300.0, fmt("runtime %.0fs", secs));
  return v;
}

Verdict criterion10() {
  Verdict v;
  const auto r = study(Scenario::kBase62, {"dr", "cf", "cf-spl-spl"}, 110);
  std::vector<double> d;
  for (int k = 0; k < kReps; ++k) {
    const auto& a = r.values[0][k];
    const auto& b = r.values[1][k];
    if (a.ok && b.ok) d.push_back(b.estimate - a.estimate);
  }
  const auto m = checks::mc_mean(d);
  v.check(static_cast<int>(d.size()) == kReps && m.within(0.0),
          fmt("cf-cox minus dr %.5f (paired se %.5f, sd %.5f)", m.mean, m.se, m.se * std::sqrt(double(d.size()))));
  const auto& spl = row(r, 2);
  v.check(spl.failures == 0 && std::abs(spl.bias) <= 0.02, fmt("cf-spl-spl bias %.4f (|.| <= 0.02)", spl.bias));
  return v;
}

}  // namespace
}  // namespace truncdr

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criteria to run (default all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) {
    for (int k = 1; k <= 10; ++k) which.push_back(k);
  }
  const std::function<truncdr::Verdict()> run[] = {
      truncdr::criterion1, truncdr::criterion2, truncdr::criterion3, truncdr::criterion4,
      truncdr::criterion5, truncdr::criterion6, truncdr::criterion7, truncdr::criterion8,
      truncdr::criterion9, truncdr::criterion10};
  bool all = true;
  for (int k : which) {
    truncdr::Verdict v;
    try {
      v = run[k - 1]();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("error: ") + e.what();
    }
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", k, v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
