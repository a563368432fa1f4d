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
#include <sstream>
#include <vector>

#include "test_util.hpp"

namespace truncdr {
namespace {

void probe_monotone(const ConditionalCdf& F, std::uint64_t seed, double t_hi, std::size_t dim) {
  CounterRng rng(seed);
  for (int k = 0; k < 400; ++k) {
    std::vector<double> z(dim);
    for (auto& v : z) v = 2.0 * rng.uniform() - 1.0;
    double s = t_hi * rng.uniform(), t = t_hi * rng.uniform();
    if (s > t) std::swap(s, t);
    const double fs = F(s, z), ft = F(t, z);
    ASSERT_GE(fs, 0.0);
    ASSERT_LE(fs, ft);
    ASSERT_LE(ft, 1.0);
  }
}

TEST(ConditionalCdf, MonotoneProbesForEveryKind) {
  const auto ds = testing::random_truncated(61, 400, 2);
  const double tau = default_tau(ds);
  const double hi = tau + 1.0;
  probe_monotone(fit_event_cdf(ds, LearnerSpec::cox_linear()), 1, hi, 2);
  probe_monotone(fit_event_cdf(ds, LearnerSpec::cox_quadratic()), 2, hi, 2);
  probe_monotone(fit_G_reverse(ds, LearnerSpec::cox_linear(), tau), 3, hi, 2);
  probe_monotone(fit_event_cdf(ds, LearnerSpec::stratified()), 4, hi, 2);
  probe_monotone(fit_G_reverse(ds, LearnerSpec::stratified(), tau), 5, hi, 2);
  probe_monotone(fit_G_reverse(ds, LearnerSpec::cox_linear(), tau).clamped(0.1, CdfRole::kTruncationTime), 6, hi,
                 2);
  probe_monotone(fit_event_cdf(ds, LearnerSpec::cox_linear()).clamped(0.1, CdfRole::kEventTime), 7, hi, 2);
  probe_monotone(true_event_cdf(Scenario::k3), 8, 25.0, 2);
  probe_monotone(true_truncation_cdf(Scenario::k7), 9, 25.0, 2);
}

TEST(FitGReverse, EqualsReversedSurvivalLeftLimit) {
  const auto ds = testing::random_truncated(62, 300, 2);
  const double tau = default_tau(ds);
  const auto G = fit_G_reverse(ds, LearnerSpec::cox_linear(), tau);
  const auto rev = fit_cox_lt(reverse_time(ds, tau));
  CounterRng rng(5);
  for (std::size_t i = 0; i < ds.size(); i += 7) {
    const auto z = ds.z(i);
    const auto Frev = conditional_cdf(rev, z);
    // at the subject's own q (a reversed jump time) and at a random point
    for (double q : {ds.q(i), ds.q(i) + 0.3 * rng.uniform()}) {
      EXPECT_NEAR(G(q, z), 1.0 - Frev.left_limit(tau - q), 1e-12);
    }
  }
  const auto Gs = fit_G_reverse(ds, LearnerSpec::stratified(), tau);
  const auto spl = StratifiedProductLimit::fit(reverse_time(ds, tau), StrataSpec{});
  for (std::size_t i = 0; i < ds.size(); i += 5) {
    const auto z = ds.z(i);
    // unclamped comparison away from the floor
    const double raw = spl.survival(z).left_limit(tau - ds.q(i));
    if (raw > 0.05) {
      EXPECT_EQ(Gs(ds.q(i), z), raw);
    }
  }
}

TEST(FitGReverse, LimitsAtBothEnds) {
  const auto ds = testing::random_truncated(63, 200, 2);
  const double tau = default_tau(ds);
  const auto G = fit_G_reverse(ds, LearnerSpec::cox_linear(), tau);
  const std::vector<double> z{0.2, -0.4};
  EXPECT_EQ(G(ds.max_q(), z), 1.0);
  EXPECT_EQ(G(tau + 3.0, z), 1.0);
  StrataSpec one;
  one.bins_per_covariate = 1;
  LearnerSpec s = LearnerSpec::stratified(one);
  s.clamp_eps = 0.0;
  const auto Gs = fit_G_reverse(ds, s, tau);
  EXPECT_EQ(Gs(ds.min_q() * 0.5, z), 0.0);
  EXPECT_THROW(fit_G_reverse(ds, LearnerSpec::cox_linear(), ds.max_x()), Error);
}

TEST(Clamp, FloorsCeilingsAndBadEps) {
  const auto ds = testing::random_truncated(64, 300, 2);
  const double tau = default_tau(ds);
  const auto G = fit_G_reverse(ds, LearnerSpec::cox_linear(), tau);
  const auto G0 = clamp_overlap(G, 0.0, CdfRole::kTruncationTime);
  const auto G5 = clamp_overlap(G, 0.05, CdfRole::kTruncationTime);
  const auto F = fit_event_cdf(ds, LearnerSpec::cox_linear());
  const auto F5 = clamp_overlap(F, 0.05, CdfRole::kEventTime);
  for (double t = 0.0; t < tau; t += 0.05) {
    for (std::size_t i = 0; i < 10; ++i) {
      const auto z = ds.z(i);
      EXPECT_EQ(G0(t, z), G(t, z));
      EXPECT_GE(G5(t, z), 0.05);
      EXPECT_EQ(G5(t, z), std::max(0.05, G(t, z)));
      EXPECT_EQ(F5(t, z), std::min(0.95, F(t, z)));
    }
  }
  const auto one = degenerate(CdfKind::kConstantOne);
  const std::vector<double> z{0.0};
  EXPECT_EQ(clamp_overlap(one, 0.3, CdfRole::kTruncationTime)(2.0, z), 1.0);
  EXPECT_THROW(clamp_overlap(G, 0.5, CdfRole::kTruncationTime), Error);
  EXPECT_THROW(clamp_overlap(G, -0.1, CdfRole::kTruncationTime), Error);
}

TEST(Degenerate, Constants) {
  const auto F0 = degenerate(CdfKind::kConstantZero);
  const auto G1 = degenerate(CdfKind::kConstantOne);
  for (double t : {-1.0, 0.0, 3.0, 1e9}) {
    const std::vector<double> z{0.3, -2.0};
    EXPECT_EQ(F0(t, z), 0.0);
    EXPECT_EQ(G1(t, z), 1.0);
  }
  EXPECT_THROW(degenerate(CdfKind::kCox), Error);
}

TEST(Overlap, ReportMinima) {
  const auto s = generate_scenario({Scenario::k1, 600, 65, {}, {}});
  NuisanceOptions opt;
  opt.tau = 20.0;
  const auto ns = fit_nuisances(s.observed, LearnerSpec::cox_linear(), LearnerSpec::cox_linear(), opt);
  const auto r = empirical_overlap_report(ns, s.observed);
  EXPECT_GT(r.min_eta1, 0.0);
  EXPECT_GT(r.min_eta2, 0.0);
  EXPECT_EQ(r.min_eta3, 1.0);
  EXPECT_EQ(r.eta1.size(), s.observed.size());
  opt.clamp_eps = 0.05;
  const auto nc = fit_nuisances(s.observed, LearnerSpec::stratified(), LearnerSpec::stratified(), opt);
  const auto rc = empirical_overlap_report(nc, s.observed);
  EXPECT_GE(rc.min_eta1, 0.05);
  EXPECT_GE(rc.min_eta2, 0.05);
}

TEST(Overlap, CensoringSurvivalEntersEta3) {
  const auto ds = generate_censoring_scenario(Scenario::kC2, 800, 66);
  const auto ns = fit_nuisances(ds, LearnerSpec::cox_linear(), LearnerSpec::cox_linear());
  const auto r = empirical_overlap_report(ns, ds);
  EXPECT_LT(r.min_eta3, 1.0);
  EXPECT_GT(r.min_eta3, 0.0);
  std::size_t unc = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) unc += ds.delta(i);
  EXPECT_EQ(r.eta3.size(), unc);
}

TEST(FitNuisances, ResidualWeightsForTruncationModel) {
  const auto ds = generate_censoring_scenario(Scenario::kC2, 800, 67);
  NuisanceOptions opt;
  opt.tau = default_tau(ds);
  const auto ns = fit_nuisances(ds, LearnerSpec::cox_linear(), LearnerSpec::cox_linear(), opt);
  const auto sd = fit_residual_censoring_survival(ds).survival;
  const auto unc = ds.subset(ds.uncensored_rows());
  std::vector<double> w(unc.size());
  for (std::size_t i = 0; i < unc.size(); ++i) w[i] = 1.0 / sd.left_limit(unc.x(i) - unc.q(i));
  const auto G = fit_G_reverse(unc.with_weights(w), LearnerSpec::cox_linear(), *opt.tau);
  for (std::size_t i = 0; i < ds.size(); i += 11) {
    EXPECT_EQ(ns.G(ds.q(i), ds.z(i)), G(ds.q(i), ds.z(i)));
  }
  ASSERT_TRUE(ns.SD.has_value());
  EXPECT_EQ(*ns.SD, sd);
}

TEST(ExternalTable, StratifiedLookup) {
  std::istringstream in("stratum,time,value\n0,1,0.2\n0,2,0.7\n1,1,0.5\n1,3,1\n");
  const auto cdf = external_table_cdf(load_external_table(in, 1));
  const std::vector<double> z0{9.0, 0.0}, z1{9.0, 1.0};
  EXPECT_EQ(cdf(0.5, z0), 0.0);
  EXPECT_EQ(cdf(1.5, z0), 0.2);
  EXPECT_EQ(cdf(2.0, z0), 0.7);
  EXPECT_EQ(cdf(2.5, z1), 0.5);
  EXPECT_EQ(cdf(3.0, z1), 1.0);
  const std::vector<double> z2{0.0, 2.0};
  EXPECT_THROW(cdf(1.0, z2), Error);
  std::istringstream bad("time,value\n1,0.5\n2,0.4\n");
  EXPECT_THROW(load_external_table(bad, std::nullopt), Error);
}

}  // namespace
}  // namespace truncdr
