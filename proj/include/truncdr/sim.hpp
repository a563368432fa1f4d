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
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "truncdr/cdf.hpp"
#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/functional.hpp"
#include "truncdr/inference.hpp"
#include "truncdr/parallel.hpp"
#include "truncdr/pipeline.hpp"
#include "truncdr/random.hpp"

namespace truncdr {

enum class Scenario { k1 = 1, k2, k3, k4, k5, k6, k7, kBase62, kC1, kC2 };

inline std::string_view to_string(Scenario s) {
  static constexpr std::string_view names[] = {"1", "2", "3", "4", "5", "6", "7", "base62", "c1", "c2"};
  return names[static_cast<int>(s) - 1];
}

inline Scenario parse_scenario(std::string_view s) {
  for (int k = 1; k <= 10; ++k) {
    if (to_string(static_cast<Scenario>(k)) == s) return static_cast<Scenario>(k);
  }
  fail(ErrorCode::kUnknownScenario, "unknown scenario '" + std::string(s) + "'");
}

struct ScenarioConstants {
  double tau;   // upper bound used for the reversed time scale
  double tau1;  // lower end of T's support
  double tau2;  // upper end of Q's support
};

inline ScenarioConstants scenario_constants(Scenario s) {
  if (static_cast<int>(s) <= 7) return {20.0, 5.0, 8.0};
  return {std::numeric_limits<double>::quiet_NaN(), 1.0, 4.5};
}

/// ν used for the scenario's headline estimand: 1(T > 7) or 1(T > 3).
inline Functional default_functional(Scenario s) {
  return Functional::survival(static_cast<int>(s) <= 7 ? 7.0 : 3.0);
}

namespace sim_detail {

constexpr double kGamma5over3 = 0.902745292950934;  // Γ(5/3), mean of Weibull(1.5, 1)

inline double eta1(double z1, double z2) { return 0.3 * z1 + 0.5 * z2; }
inline double eta2(double z1, double z2) {
  return eta1(z1, z2) + 0.6 * (z1 * z1 - 1.0 / 3.0) + 0.5 * z1 * z2;
}

enum class TLaw { kCox1, kCox2, kMixture, kBase62, kC1 };
enum class QLaw { kCox1, kCox2, kMixture, kUniformHazard };

inline TLaw t_law(Scenario s) {
  switch (s) {
    case Scenario::k1: case Scenario::k2: case Scenario::k3: return TLaw::kCox1;
    case Scenario::k4: case Scenario::k6: return TLaw::kCox2;
    case Scenario::k5: case Scenario::k7: return TLaw::kMixture;
    case Scenario::kBase62: case Scenario::kC2: return TLaw::kBase62;
    case Scenario::kC1: return TLaw::kC1;
  }
  return TLaw::kCox1;
}

inline QLaw q_law(Scenario s) {
  switch (s) {
    case Scenario::k1: case Scenario::k4: case Scenario::k5: return QLaw::kCox1;
    case Scenario::k2: case Scenario::k6: return QLaw::kCox2;
    case Scenario::k3: case Scenario::k7: return QLaw::kMixture;
    default: return QLaw::kUniformHazard;
  }
}

/// Weibull(2, e^{(1-η)/2}) has cumulative hazard w² e^{η-1}.
struct WeibullPH {
  double rate;  // multiplies w²
  double survival(double w) const { return w <= 0.0 ? 1.0 : std::exp(-rate * w * w); }
  double density(double w) const { return w <= 0.0 ? 0.0 : 2.0 * rate * w * std::exp(-rate * w * w); }
  double draw(double u) const { return std::sqrt(-std::log(u) / rate); }
};

/// Law of T given z: WeibullPH shifted by τ1, or the lognormal AFT branch.
struct EventLaw {
  double shift;
  bool aft = false;
  WeibullPH ph{1.0};
  double aft_mean = 0.0;  // log(T - shift) = aft_mean + N(0, 1)

  double cdf(double t) const {
    const double w = t - shift;
    if (w <= 0.0) return 0.0;
    if (aft) return normal_cdf(std::log(w) - aft_mean);
    return 1.0 - ph.survival(w);
  }
  double density(double t) const {
    const double w = t - shift;
    if (w <= 0.0) return 0.0;
    if (aft) {
      const double e = std::log(w) - aft_mean;
      return std::exp(-0.5 * e * e) / (std::sqrt(2.0 * M_PI) * w);
    }
    return ph.density(w);
  }
  double draw(double u) const {
    if (aft) return shift + std::exp(aft_mean + normal_quantile(u));
    return shift + ph.draw(u);
  }
};

inline EventLaw event_law(Scenario s, double z1, double z2) {
  const double e1 = eta1(z1, z2), e2 = eta2(z1, z2);
  EventLaw law;
  law.shift = scenario_constants(s).tau1;
  switch (t_law(s)) {
    case TLaw::kCox1: law.ph.rate = std::exp(e1 - 1.0); break;
    case TLaw::kCox2: law.ph.rate = std::exp(e2 - 1.0); break;
    case TLaw::kMixture:
      if (e1 >= 0.0) {
        law.ph.rate = std::exp(e2 - 1.0);
      } else {
        law.aft = true;
        law.aft_mean = -1.0 + e2;
      }
      break;
    case TLaw::kBase62: law.ph.rate = std::exp(e1 - 2.0); break;
    case TLaw::kC1: law.ph.rate = std::exp(e1 - 2.0) - 1.0 / 49.0; break;
  }
  return law;
}

/// Law of Q given z through W = τ2 - Q (or directly for the uniform-hazard law).
struct TruncationLaw {
  QLaw kind;
  double tau2;
  WeibullPH ph{1.0};
  double aft_mean = 0.0;   // log W = aft_mean + (Weibull(1.5,1) - Γ(5/3))
  bool aft = false;
  double power = 1.0;      // G(q) = (q/τ2)^power for the uniform-hazard law

  double cdf(double q) const {
    if (kind == QLaw::kUniformHazard) {
      if (q <= 0.0) return 0.0;
      if (q >= tau2) return 1.0;
      return std::pow(q / tau2, power);
    }
    const double w = tau2 - q;
    if (w <= 0.0) return 1.0;
    if (aft) {
      const double u = std::log(w) - aft_mean + kGamma5over3;
      return u <= 0.0 ? 1.0 : std::exp(-std::pow(u, 1.5));
    }
    return ph.survival(w);
  }
  double density(double q) const {
    if (kind == QLaw::kUniformHazard) {
      if (q <= 0.0 || q >= tau2) return 0.0;
      return power * std::pow(q / tau2, power - 1.0) / tau2;
    }
    const double w = tau2 - q;
    if (w <= 0.0) return 0.0;
    if (aft) {
      const double u = std::log(w) - aft_mean + kGamma5over3;
      return u <= 0.0 ? 0.0 : 1.5 * std::sqrt(u) * std::exp(-std::pow(u, 1.5)) / w;
    }
    return ph.density(w);
  }
  double draw(double u) const {
    if (kind == QLaw::kUniformHazard) return tau2 * std::pow(u, 1.0 / power);
    if (aft) return tau2 - std::exp(aft_mean + std::pow(-std::log(u), 1.0 / 1.5) - kGamma5over3);
    return tau2 - ph.draw(u);
  }
  std::vector<double> kinks() const {
    if (kind == QLaw::kUniformHazard) return {0.0, tau2};
    if (aft) return {tau2 - std::exp(aft_mean - kGamma5over3), tau2};
    return {tau2};
  }
};

inline TruncationLaw truncation_law(Scenario s, double z1, double z2) {
  const double e1 = eta1(z1, z2), e2 = eta2(z1, z2);
  TruncationLaw law{q_law(s), scenario_constants(s).tau2};
  switch (law.kind) {
    case QLaw::kCox1: law.ph.rate = std::exp(e1 - 1.0); break;
    case QLaw::kCox2: law.ph.rate = std::exp(e2 - 1.0); break;
    case QLaw::kMixture:
      if (e1 < 0.0) {
        law.ph.rate = std::exp(e2 - 1.0);
      } else {
        law.aft = true;
        law.aft_mean = -1.0 + e2;
      }
      break;
    case QLaw::kUniformHazard: law.power = std::exp(e1); break;
  }
  return law;
}

}  // namespace sim_detail

/// True F(t|z) of a scenario's event time.
class ScenarioEventLaw final : public AnalyticLaw {
 public:
  explicit ScenarioEventLaw(Scenario s) : s_(s) {}
  double cdf(double t, std::span<const double> z) const override {
    return sim_detail::event_law(s_, z[0], z[1]).cdf(t);
  }
  double density(double t, std::span<const double> z) const override {
    return sim_detail::event_law(s_, z[0], z[1]).density(t);
  }
  std::vector<double> kinks(std::span<const double>) const override { return {scenario_constants(s_).tau1}; }

 private:
  Scenario s_;
};

/// True G(q|z) of a scenario's truncation time.
class ScenarioTruncationLaw final : public AnalyticLaw {
 public:
  explicit ScenarioTruncationLaw(Scenario s) : s_(s) {}
  double cdf(double q, std::span<const double> z) const override {
    return sim_detail::truncation_law(s_, z[0], z[1]).cdf(q);
  }
  double density(double q, std::span<const double> z) const override {
    return sim_detail::truncation_law(s_, z[0], z[1]).density(q);
  }
  std::vector<double> kinks(std::span<const double> z) const override {
    return sim_detail::truncation_law(s_, z[0], z[1]).kinks();
  }

 private:
  Scenario s_;
};

inline ConditionalCdf true_event_cdf(Scenario s) {
  return analytic_cdf(std::make_shared<ScenarioEventLaw>(s));
}

inline ConditionalCdf true_truncation_cdf(Scenario s) {
  return analytic_cdf(std::make_shared<ScenarioTruncationLaw>(s));
}

// ---------------------------------------------------------------------------
// Generators

struct ScenarioConfig {
  Scenario scenario = Scenario::k1;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  /// c1: scale of the Weibull(2, ·) law of C - 1 (7 by default; +∞ disables censoring).
  std::optional<double> censoring_scale;
  /// c2: scale of the Weibull(2, ·) residual censoring time (4 by default).
  std::optional<double> residual_scale;
};

/// Every subject drawn, observed or not.
struct FullData {
  std::vector<double> q, t, c;  // c is +∞ without censoring (for c2, Q + D)
  std::vector<double> z;        // row-major, two covariates
  std::size_t size() const { return t.size(); }
};

struct SimSample {
  FullData full;
  Dataset observed;
  double truncation_rate = 0.0;
  double censoring_rate = 0.0;
};

namespace sim_detail {

struct SubjectDraw {
  double z1, z2, t, q, c;
};

/// Draw order per subject: Z1, Z2, T uniform, Q uniform, censoring uniform.
inline SubjectDraw draw_subject(const ScenarioConfig& cfg, std::uint64_t index) {
  CounterRng rng(derive_seed(cfg.seed, index));
  SubjectDraw d;
  d.z1 = 2.0 * rng.uniform() - 1.0;
  d.z2 = (rng.uniform() < 0.5 ? 1.0 : 0.0) - 0.5;
  const double ut = rng.uniform(), uq = rng.uniform(), uc = rng.uniform();
  d.t = event_law(cfg.scenario, d.z1, d.z2).draw(ut);
  d.q = truncation_law(cfg.scenario, d.z1, d.z2).draw(uq);
  d.c = std::numeric_limits<double>::infinity();
  if (cfg.scenario == Scenario::kC1) {
    const double scale = cfg.censoring_scale.value_or(7.0);
    if (std::isfinite(scale)) d.c = 1.0 + weibull_from_uniform(uc, 2.0, scale);
  } else if (cfg.scenario == Scenario::kC2) {
    const double scale = cfg.residual_scale.value_or(4.0);
    if (std::isfinite(scale)) d.c = d.q + weibull_from_uniform(uc, 2.0, scale);
  }
  return d;
}

}  // namespace sim_detail

/// Draws subjects until n are observed. Uncensored scenarios observe
/// Q < T; c1 observes Q < min(T, C); c2 observes Q < T and then censors at Q + D.
inline SimSample generate_scenario(const ScenarioConfig& cfg) {
  if (cfg.n < 1) fail(ErrorCode::kBadArgument, "n must be >= 1");
  SimSample out;
  std::vector<double> q, x, z;
  std::vector<std::uint8_t> delta;
  for (std::uint64_t i = 0; q.size() < cfg.n; ++i) {
    const auto d = sim_detail::draw_subject(cfg, i);
    out.full.q.push_back(d.q);
    out.full.t.push_back(d.t);
    out.full.c.push_back(d.c);
    out.full.z.push_back(d.z1);
    out.full.z.push_back(d.z2);
    double xi = d.t;
    std::uint8_t di = 1;
    bool observed = d.q < d.t;
    if (cfg.scenario == Scenario::kC1) {
      xi = std::min(d.t, d.c);
      di = d.t < d.c ? 1 : 0;
      observed = d.q < xi;
    } else if (cfg.scenario == Scenario::kC2 && observed) {
      xi = std::min(d.t, d.c);
      di = d.t <= d.c ? 1 : 0;
    }
    if (!observed) continue;
    q.push_back(d.q);
    x.push_back(xi);
    delta.push_back(di);
    z.push_back(d.z1);
    z.push_back(d.z2);
  }
  const std::size_t n = q.size();
  std::size_t censored = 0;
  for (auto d : delta) censored += d == 0;
  const Censoring tag = cfg.scenario == Scenario::kC1   ? Censoring::kC1
                        : cfg.scenario == Scenario::kC2 ? Censoring::kC2
                                                        : Censoring::kNone;
  out.truncation_rate = 1.0 - static_cast<double>(n) / static_cast<double>(out.full.size());
  out.censoring_rate = static_cast<double>(censored) / static_cast<double>(n);
  out.observed = Dataset(std::move(q), std::move(x), std::move(delta), std::move(z), 2,
                         std::vector<double>(n, 1.0), tag, "scenario " + std::string(to_string(cfg.scenario)));
  return out;
}

inline Dataset generate_censoring_scenario(Scenario which, std::size_t n, std::uint64_t seed,
                                           std::optional<double> censoring_scale = std::nullopt) {
  if (which != Scenario::kC1 && which != Scenario::kC2) {
    fail(ErrorCode::kUnknownScenario, "censoring scenarios are c1 and c2");
  }
  ScenarioConfig cfg{which, n, seed, {}, {}};
  if (which == Scenario::kC1) cfg.censoring_scale = censoring_scale;
  else cfg.residual_scale = censoring_scale;
  return generate_scenario(cfg).observed;
}

// ---------------------------------------------------------------------------
// Truth

struct MonteCarloValue {
  double value = 0.0;
  double se = 0.0;
};

/// Mean of ν(T) over N full-data draws.
inline MonteCarloValue truth_monte_carlo(Scenario s, const Functional& nu, std::size_t N, std::uint64_t seed = 2024,
                                         std::optional<unsigned> threads = std::nullopt) {
  if (N < 10000) fail(ErrorCode::kBadArgument, "truth_monte_carlo needs N >= 1e4");
  const std::size_t chunks = 64;
  std::vector<double> sum(chunks, 0.0), sum2(chunks, 0.0);
  const ScenarioConfig cfg{s, 1, seed, {}, {}};
  parallel_for(chunks, resolve_threads(threads), [&](std::size_t c) {
    const std::size_t lo = N * c / chunks, hi = N * (c + 1) / chunks;
    double a = 0.0, b = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double v = nu(sim_detail::draw_subject(cfg, i).t);
      a += v;
      b += v * v;
    }
    sum[c] = a;
    sum2[c] = b;
  });
  double a = 0.0, b = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    a += sum[c];
    b += sum2[c];
  }
  const double n = static_cast<double>(N);
  const double mean = a / n;
  return {mean, std::sqrt(std::max(0.0, b / n - mean * mean) / (n - 1.0))};
}

/// E*{ν(T)} by quadrature over the covariate law.
inline double analytic_truth(Scenario s, const Functional& nu) {
  using boost::math::quadrature::gauss_kronrod;
  auto conditional = [&](double z1, double z2) {
    const auto law = sim_detail::event_law(s, z1, z2);
    if (nu.kind() == Functional::Kind::kRmst) {
      // E min(T, t0) = ∫_0^{t0} S(t) dt
      const double t0 = nu.t0();
      const double shift = std::min(law.shift, t0);
      double v = shift;
      if (t0 > shift) {
        v += gauss_kronrod<double, 61>::integrate([&](double t) { return 1.0 - law.cdf(t); }, shift, t0, 15, 1e-13);
      }
      return v;
    }
    double total = 0.0, prev = 0.0;
    const auto& br = nu.breaks();
    for (std::size_t j = 0; j <= br.size(); ++j) {
      const double next = j < br.size() ? law.cdf(br[j]) : 1.0;
      total += nu.levels()[j] * (next - prev);
      prev = next;
    }
    return total;
  };
  double total = 0.0;
  for (double z2 : {-0.5, 0.5}) {
    // mixtures switch branch where η1 = 0, i.e. z1 = -5 z2 / 3
    const double split = -5.0 * z2 / 3.0;
    std::vector<double> cuts{-1.0};
    if (split > -1.0 && split < 1.0) cuts.push_back(split);
    cuts.push_back(1.0);
    for (std::size_t k = 1; k < cuts.size(); ++k) {
      total += 0.5 * 0.5 *
               gauss_kronrod<double, 61>::integrate([&](double z1) { return conditional(z1, z2); }, cuts[k - 1],
                                                    cuts[k], 15, 1e-13);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Replication harness

/// One estimator column of a study; "full" is the oracle mean over full data.
struct StudyEstimator {
  std::string id;
  EstimatorConfig config;
  bool full_data = false;
};

inline LearnerSpec parse_learner_token(std::string_view t) {
  if (t == "cox1" || t == "cox") return LearnerSpec::cox_linear();
  if (t == "cox2") return LearnerSpec::cox_quadratic();
  if (t == "spl") return LearnerSpec::stratified();
  if (t == "const" || t == "constant") return LearnerSpec::constant();
  fail(ErrorCode::kBadArgument, "unknown learner '" + std::string(t) + "'");
}

/// Parses "dr", "dr-cox1-cox2", "ipw-cox2", "reg1-spl", "cf-spl-spl", "pl", "naive", "full".
inline StudyEstimator parse_study_estimator(std::string_view id) {
  std::vector<std::string> tok;
  std::size_t start = 0;
  while (true) {
    const auto dash = id.find('-', start);
    tok.emplace_back(id.substr(start, dash == std::string_view::npos ? std::string_view::npos : dash - start));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  StudyEstimator e;
  if (tok[0] == "full") {
    if (tok.size() != 1) fail(ErrorCode::kBadArgument, "'full' takes no learners");
    e.full_data = true;
    e.id = "full";
    return e;
  }
  e.config.kind = parse_estimator_kind(tok[0] == "ipw.q" ? "ipw" : tok[0]);
  std::size_t next = 1;
  auto take = [&]() -> std::optional<LearnerSpec> {
    if (next < tok.size()) return parse_learner_token(tok[next++]);
    return std::nullopt;
  };
  if (e.config.uses_f()) e.config.f = take().value_or(LearnerSpec::cox_linear());
  if (e.config.uses_g()) e.config.g = take().value_or(LearnerSpec::cox_linear());
  if (next != tok.size()) fail(ErrorCode::kBadArgument, "too many learners in '" + std::string(id) + "'");
  e.id = e.config.id();
  return e;
}

struct StudyConfig {
  Scenario scenario = Scenario::k1;
  std::size_t n = 1000;
  int reps = 200;
  int boot = 0;
  BootMethod boot_method = BootMethod::kSeNormal;
  std::uint64_t seed = 1;
  std::vector<StudyEstimator> estimators;
  std::optional<Functional> functional;  // default: the scenario's headline estimand
  std::optional<double> theta0;          // default: analytic truth
  std::optional<unsigned> threads;
};

struct ReplicateValue {
  bool ok = false;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> se_model;
  std::optional<double> se_boot;
  std::string error;
};

struct SimResultRow {
  std::string estimator;
  double theta0 = 0.0;
  double bias = 0.0;
  double pct_bias = 0.0;
  double sd = 0.0;
  std::optional<double> se_model_mean;
  std::optional<double> se_boot_mean;
  std::optional<double> cp_model;
  std::optional<double> cp_boot;
  int n_replicates = 0;
  int failures = 0;
};

struct StudyResult {
  double theta0 = 0.0;
  std::vector<SimResultRow> rows;
  std::vector<std::vector<ReplicateValue>> values;  // [estimator][replicate]
  double mean_truncation_rate = 0.0;
  double mean_censoring_rate = 0.0;
};

inline SimResultRow summarize(const std::string& id, double theta0, std::span<const ReplicateValue> v) {
  SimResultRow row;
  row.estimator = id;
  row.theta0 = theta0;
  std::vector<double> est;
  double se_m = 0.0, se_b = 0.0, cov_m = 0.0, cov_b = 0.0;
  int n_m = 0, n_b = 0;
  for (const auto& r : v) {
    if (!r.ok) {
      ++row.failures;
      continue;
    }
    est.push_back(r.estimate);
    if (r.se_model) {
      se_m += *r.se_model;
      cov_m += std::abs(r.estimate - theta0) <= 1.96 * *r.se_model;
      ++n_m;
    }
    if (r.se_boot) {
      se_b += *r.se_boot;
      cov_b += std::abs(r.estimate - theta0) <= 1.96 * *r.se_boot;
      ++n_b;
    }
  }
  row.n_replicates = static_cast<int>(est.size());
  if (est.empty()) {
    row.bias = row.pct_bias = row.sd = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  double mean = 0.0;
  for (double e : est) mean += e;
  mean /= static_cast<double>(est.size());
  double ss = 0.0;
  for (double e : est) ss += (e - mean) * (e - mean);
  row.bias = mean - theta0;
  row.pct_bias = 100.0 * row.bias / theta0;
  row.sd = est.size() > 1 ? std::sqrt(ss / static_cast<double>(est.size() - 1)) : 0.0;
  if (n_m > 0) {
    row.se_model_mean = se_m / n_m;
    row.cp_model = cov_m / n_m;
  }
  if (n_b > 0) {
    row.se_boot_mean = se_b / n_b;
    row.cp_boot = cov_b / n_b;
  }
  return row;
}

/// Runs every estimator on `reps` independent datasets. Replicate r uses
/// data seed derive_seed(seed, r) and bootstrap seed derive_seed(seed, r + 2^32).
inline StudyResult replicate_study(const StudyConfig& cfg) {
  if (cfg.reps < 1) fail(ErrorCode::kBadArgument, "reps must be >= 1");
  if (cfg.estimators.empty()) fail(ErrorCode::kBadArgument, "no estimators requested");
  const Functional nu = cfg.functional.value_or(default_functional(cfg.scenario));
  StudyResult out;
  out.theta0 = cfg.theta0 ? *cfg.theta0 : analytic_truth(cfg.scenario, nu);
  const std::size_t E = cfg.estimators.size();
  const auto R = static_cast<std::size_t>(cfg.reps);
  out.values.assign(E, std::vector<ReplicateValue>(R));
  std::vector<double> trunc(R), cens(R);
  const ScenarioConstants k = scenario_constants(cfg.scenario);

  parallel_for(R, resolve_threads(cfg.threads), [&](std::size_t r) {
    ScenarioConfig sc{cfg.scenario, cfg.n, derive_seed(cfg.seed, r), {}, {}};
    const SimSample sample = generate_scenario(sc);
    trunc[r] = sample.truncation_rate;
    cens[r] = sample.censoring_rate;
    for (std::size_t e = 0; e < E; ++e) {
      auto& slot = out.values[e][r];
      const auto& est = cfg.estimators[e];
      try {
        if (est.full_data) {
          double a = 0.0, b = 0.0;
          for (double t : sample.full.t) {
            const double v = nu(t);
            a += v;
            b += v * v;
          }
          const double m = static_cast<double>(sample.full.size());
          slot.estimate = a / m;
          slot.se_model = std::sqrt(std::max(0.0, b / m - slot.estimate * slot.estimate) / m);
        } else {
          EstimatorConfig ec = est.config;
          // the scenario's τ is only an upper bound; reversed-time fits are
          // shift invariant, so lifting it past a rare long event changes nothing
          if (std::isfinite(k.tau)) ec.nuisance.tau = std::max(k.tau, default_tau(sample.observed));
          ec.seed = derive_seed(cfg.seed ^ 0x63665f666f6c6473ULL, r);
          const auto rep = run_estimator(sample.observed, ec, nu);
          slot.estimate = rep.theta;
          slot.se_model = rep.se_model;
          if (cfg.boot > 0) {
            const auto b = bootstrap(sample.observed, ec, nu, rep.theta, cfg.boot,
                                     derive_seed(cfg.seed, r + (std::uint64_t{1} << 32)), cfg.boot_method, 1u);
            slot.se_boot = b.se;
          }
        }
        slot.ok = std::isfinite(slot.estimate);
      } catch (const std::exception& ex) {
        slot.ok = false;
        slot.error = ex.what();
      }
    }
  });

  for (std::size_t e = 0; e < E; ++e) out.rows.push_back(summarize(cfg.estimators[e].id, out.theta0, out.values[e]));
  for (std::size_t r = 0; r < R; ++r) {
    out.mean_truncation_rate += trunc[r] / static_cast<double>(R);
    out.mean_censoring_rate += cens[r] / static_cast<double>(R);
  }
  return out;
}

inline void write_study_csv(std::ostream& os, const StudyResult& s) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  os << "estimator,theta0,bias,pct_bias,sd,se_model_mean,se_boot_mean,cp_model,cp_boot,n_replicates,failures\n";
  for (const auto& r : s.rows) {
    os << r.estimator << ',' << format_number(r.theta0) << ',' << format_number(r.bias) << ','
       << format_number(r.pct_bias) << ',' << format_number(r.sd) << ',' << opt(r.se_model_mean) << ','
       << opt(r.se_boot_mean) << ',' << opt(r.cp_model) << ',' << opt(r.cp_boot) << ',' << r.n_replicates << ','
       << r.failures << '\n';
  }
}

}  // namespace truncdr
