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
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"

namespace truncdr {
namespace {

// Direct O(n^2) evaluation: sum over events of w_i {psi'z_i - log sum_{q_j <= x_i <= x_j} w_j exp(psi'z_j)}.
double reference_loglik(const Dataset& ds, std::span<const double> w, std::span<const double> psi) {
  auto lp = [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < ds.dim(); ++j) s += psi[j] * ds.z(i)[j];
    return s;
  };
  double ll = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.delta(i) != 1) continue;
    double risk = 0.0;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (ds.q(j) <= ds.x(i) && ds.x(i) <= ds.x(j)) risk += w[j] * std::exp(lp(j));
    }
    ll += w[i] * (lp(i) - std::log(risk));
  }
  return ll;
}

std::vector<double> unit_weights(const Dataset& ds) { return std::vector<double>(ds.size(), 1.0); }

TEST(PartialLikelihood, MatchesDirectSumAndFiniteDifferences) {
  const auto ds = testing::random_truncated(21, 50, 2);
  CounterRng rng(99);
  std::vector<double> w(ds.size());
  for (auto& v : w) v = 0.5 + rng.uniform();
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<double> psi{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
    const auto pl = partial_loglik_and_score(ds, w, psi);
    EXPECT_NEAR(pl.loglik, reference_loglik(ds, w, psi), 1e-10 * std::abs(pl.loglik));
    const double h = 1e-5;
    for (std::size_t j = 0; j < 2; ++j) {
      auto up = psi, dn = psi;
      up[j] += h;
      dn[j] -= h;
      const double fd = (partial_loglik_and_score(ds, w, up).loglik - partial_loglik_and_score(ds, w, dn).loglik) /
                        (2.0 * h);
      EXPECT_LE(std::abs(fd - pl.score[j]), 1e-6 * std::max(1.0, std::abs(pl.score[j])));
    }
  }
}

TEST(PartialLikelihood, SingleSubjectIsItsOwnRiskSet) {
  const auto ds = testing::make_ds({0.5}, {2.0}, {}, {0.7}, 1);
  const std::vector<double> w{1.0}, psi{0.3};
  const auto pl = partial_loglik_and_score(ds, w, psi);
  EXPECT_NEAR(pl.loglik, 0.0, 1e-15);
  EXPECT_NEAR(pl.score[0], 0.0, 1e-15);
}

TEST(FitCox, ScoreVanishesAtOptimum) {
  const auto ds = testing::random_truncated(22, 300, 2);
  const auto fit = fit_cox_lt(ds);
  ASSERT_TRUE(fit.converged);
  const auto w = unit_weights(ds);
  const auto pl = partial_loglik_and_score(ds, w, fit.psi);
  for (double s : pl.score) EXPECT_LE(std::abs(s), 1e-9);
  // the optimum of the independent likelihood too
  const double h = 1e-4;
  for (std::size_t j = 0; j < 2; ++j) {
    auto up = fit.psi, dn = fit.psi;
    up[j] += h;
    dn[j] -= h;
    EXPECT_NEAR((reference_loglik(ds, w, up) - reference_loglik(ds, w, dn)) / (2 * h), 0.0, 1e-5);
  }
  EXPECT_NEAR(fit.loglik, reference_loglik(ds, w, fit.psi), 1e-8 * std::abs(fit.loglik));
}

TEST(FitCox, BreslowMatchesDirectFormula) {
  auto ds = testing::random_truncated(23, 120, 2, Censoring::kC2, 0.4);
  const auto fit = fit_cox_lt(ds);
  const auto& L = fit.baseline_cumhaz;
  double cum = 0.0;
  std::vector<double> times;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.delta(i) == 1) times.push_back(ds.x(i));
  }
  std::sort(times.begin(), times.end());
  ASSERT_EQ(L.size(), times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double s = times[k];
    double risk = 0.0;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (ds.q(j) <= s && s <= ds.x(j)) {
        risk += std::exp(fit.psi[0] * ds.z(j)[0] + fit.psi[1] * ds.z(j)[1]);
      }
    }
    cum += 1.0 / risk;
    EXPECT_EQ(L.times()[k], s);
    EXPECT_NEAR(L.values()[k], cum, 1e-10 * cum);
  }
}

TEST(FitCox, TiedEventsShareOneDenominator) {
  // two events at t=2; Breslow puts both over the same risk set
  const auto ds = testing::make_ds({0.0, 0.0, 0.0, 0.0}, {2.0, 2.0, 3.0, 4.0}, {}, {0.0, 1.0, 0.0, 1.0}, 1);
  const std::vector<double> w(4, 1.0), psi{0.4};
  EXPECT_NEAR(partial_loglik_and_score(ds, w, psi).loglik, reference_loglik(ds, w, psi), 1e-12);
}

TEST(FitCox, WeightScaleInvariance) {
  const auto ds = testing::random_truncated(24, 200, 2);
  const auto a = fit_cox_lt(ds);
  const std::vector<double> w2(ds.size(), 2.0);
  const auto b = fit_cox_lt(ds, w2);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a.psi[j], b.psi[j], 1e-12);
  for (std::size_t k = 0; k < a.baseline_cumhaz.size(); ++k) {
    EXPECT_NEAR(a.baseline_cumhaz.values()[k], b.baseline_cumhaz.values()[k], 1e-12);
  }
}

TEST(FitCox, Errors) {
  const auto flat = testing::make_ds({0.0, 0.5, 1.0}, {1.0, 2.0, 3.0}, {}, {1.0, 1.0, 1.0}, 1);
  EXPECT_THROW(
      {
        try {
          fit_cox_lt(flat);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kSingularHessian);
          throw;
        }
      },
      Error);
  EXPECT_THROW(fit_cox_lt(testing::make_ds({0.0}, {1.0})), Error);  // no covariates
  const auto none = testing::make_ds({0.0, 0.0}, {1.0, 2.0}, {0, 0}, {0.1, 0.2}, 1, Censoring::kC2);
  try {
    fit_cox_lt(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoEvents);
  }
}

TEST(FitCox, NonconvergenceIsReportedNotThrown) {
  const auto ds = testing::random_truncated(25, 200, 2);
  CoxConfig cfg;
  cfg.max_iter = 1;
  const auto fit = fit_cox_lt(ds, cfg);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 1);
}

TEST(ConditionalCdf, ZeroCovariateAndEarlyTimes) {
  const auto ds = testing::random_truncated(26, 150, 2);
  const auto fit = fit_cox_lt(ds);
  const std::vector<double> zero{0.0, 0.0};
  const auto F = conditional_cdf(fit, zero);
  EXPECT_EQ(F(fit.baseline_cumhaz.times()[0] * 0.5), 0.0);
  for (std::size_t k = 0; k < F.size(); ++k) {
    EXPECT_NEAR(F.values()[k], 1.0 - std::exp(-fit.baseline_cumhaz.values()[k]), 1e-12);
    EXPECT_EQ(F.times()[k], fit.baseline_cumhaz.times()[k]);
  }
}

TEST(ConditionalCdf, InvariantToShiftingCovariates) {
  const auto ds = testing::random_truncated(27, 200, 2);
  std::vector<double> shifted(ds.z_matrix().begin(), ds.z_matrix().end());
  for (std::size_t i = 0; i < ds.size(); ++i) shifted[2 * i] += 5.0;
  const auto fa = fit_cox_lt(ds);
  const auto fb = fit_cox_lt(ds.with_covariates(shifted, 2));
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const std::vector<double> za{0.2, -0.3}, zb{5.2, -0.3};
    EXPECT_NEAR(conditional_cdf(fa, za)(t), conditional_cdf(fb, zb)(t), 1e-9);
  }
}

TEST(FitCox, RecoversScenarioOneCoefficients) {
  const auto s = generate_scenario({Scenario::k1, 1000, 31, {}, {}});
  const auto fit = fit_cox_lt(s.observed);
  EXPECT_NEAR(fit.psi[0], 0.3, 3 * fit.psi_se[0]);
  EXPECT_NEAR(fit.psi[1], 0.5, 3 * fit.psi_se[1]);
  // reversed scale carries the truncation model
  const auto rev = fit_cox_lt(reverse_time(s.observed, 20.0));
  EXPECT_NEAR(rev.psi[0], 0.3, 3 * rev.psi_se[0]);
  EXPECT_NEAR(rev.psi[1], 0.5, 3 * rev.psi_se[1]);
  // averaged prediction at t=7 against the population CDF value 1 - 0.2370
  double avg = 0.0;
  const std::size_t m = s.full.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::vector<double> z{s.full.z[2 * i], s.full.z[2 * i + 1]};
    avg += conditional_cdf(fit, z)(7.0) / static_cast<double>(m);
  }
  EXPECT_NEAR(avg, 1.0 - 0.2370, 0.03);
}

TEST(FitCox, NoTruncationMatchesUntruncatedRiskSets) {
  auto ds = testing::random_truncated(28, 150, 1);
  std::vector<double> q(ds.size(), 0.0);
  const Dataset d0(q, {ds.x_column().begin(), ds.x_column().end()}, {ds.delta_column().begin(), ds.delta_column().end()},
                   {ds.z_matrix().begin(), ds.z_matrix().end()}, 1, {}, Censoring::kNone);
  const auto fit = fit_cox_lt(d0);
  // plain Cox: risk set {j : x_j >= x_i}
  const double h = 1e-4;
  auto ll = [&](double b) {
    double s = 0.0;
    for (std::size_t i = 0; i < d0.size(); ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < d0.size(); ++j) {
        if (d0.x(j) >= d0.x(i)) r += std::exp(b * d0.z(j)[0]);
      }
      s += b * d0.z(i)[0] - std::log(r);
    }
    return s;
  };
  EXPECT_NEAR((ll(fit.psi[0] + h) - ll(fit.psi[0] - h)) / (2 * h), 0.0, 1e-5);
}

}  // namespace
}  // namespace truncdr
