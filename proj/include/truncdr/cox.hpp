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
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/step_function.hpp"

namespace truncdr {

struct CoxConfig {
  double tol = 1e-9;  // sup-norm of the score
  int max_iter = 100;
  int max_halvings = 20;
};

/// Proportional hazards fit with entry-adjusted risk sets.
struct CoxFit {
  std::vector<double> psi;
  std::vector<double> psi_se;       // sqrt(diag(I^{-1}))
  StepFunction baseline_cumhaz;     // Breslow Λ̂ at z = 0
  StepFunction centered_cumhaz;     // Λ̂ at z = center
  std::vector<double> center;       // weighted covariate means
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t events = 0;

  double linear_predictor(std::span<const double> z) const {
    double eta = 0.0;
    for (std::size_t j = 0; j < psi.size(); ++j) eta += psi[j] * (z[j] - center[j]);
    return eta;
  }

  /// exp{ψ'(z - center)}: multiplies centered_cumhaz.
  double relative_risk(std::span<const double> z) const { return std::exp(linear_predictor(z)); }
};

namespace detail {

/// Risk-set machinery shared by the likelihood, the score and Breslow.
///
/// Subject j is at risk at time s when q_j <= s <= x_j. Since q_j < x_j,
/// {q_j > s} is a subset of {x_j >= s}, so risk-set sums are suffix sums over
/// x minus suffix sums over q.
class CoxRiskSets {
 public:
  CoxRiskSets(const Dataset& ds, std::span<const double> weights, std::span<const double> center)
      : n_(ds.size()), d_(ds.dim()), w_(weights.begin(), weights.end()) {
    zc_.resize(n_ * d_);
    for (std::size_t i = 0; i < n_; ++i) {
      auto zi = ds.z(i);
      for (std::size_t j = 0; j < d_; ++j) zc_[i * d_ + j] = zi[j] - center[j];
    }
    by_x_.resize(n_);
    by_q_.resize(n_);
    std::iota(by_x_.begin(), by_x_.end(), 0);
    std::iota(by_q_.begin(), by_q_.end(), 0);
    std::sort(by_x_.begin(), by_x_.end(), [&](auto a, auto b) { return ds.x(a) > ds.x(b); });
    std::sort(by_q_.begin(), by_q_.end(), [&](auto a, auto b) { return ds.q(a) > ds.q(b); });
    x_.resize(n_);
    q_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      x_[i] = ds.x(i);
      q_[i] = ds.q(i);
    }

    std::vector<std::size_t> ev;
    for (std::size_t i = 0; i < n_; ++i) {
      if (ds.delta(i) == 1 && w_[i] > 0.0) ev.push_back(i);
    }
    std::sort(ev.begin(), ev.end(), [&](auto a, auto b) { return ds.x(a) < ds.x(b); });
    for (std::size_t k = 0; k < ev.size();) {
      const double t = ds.x(ev[k]);
      EventTime et;
      et.time = t;
      et.zsum.assign(d_, 0.0);
      while (k < ev.size() && ds.x(ev[k]) == t) {
        const std::size_t i = ev[k];
        et.dw += w_[i];
        for (std::size_t j = 0; j < d_; ++j) et.zsum[j] += w_[i] * zc_[i * d_ + j];
        ++k;
      }
      events_.push_back(std::move(et));
    }
  }

  struct EventTime {
    double time = 0.0;
    double dw = 0.0;               // weighted event count
    std::vector<double> zsum;      // Σ w z over events at this time
  };

  struct Evaluation {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd information;
    std::vector<double> s0;  // risk-set Σ w exp(η) per event time
  };

  const std::vector<EventTime>& events() const noexcept { return events_; }
  std::size_t dim() const noexcept { return d_; }

  Evaluation evaluate(std::span<const double> psi, bool want_information) const {
    const std::size_t d = d_;
    std::vector<double> r(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < d; ++j) eta += psi[j] * zc_[i * d + j];
      r[i] = w_[i] * std::exp(eta);
    }
    // Accumulators for Σ_{x >= s} and Σ_{q > s}; long double limits the
    // cancellation in A - B.
    const std::size_t m = 1 + d + d * d;
    std::vector<long double> a(m, 0.0L), b(m, 0.0L);
    auto add = [&](std::vector<long double>& acc, std::size_t i) {
      acc[0] += r[i];
      for (std::size_t j = 0; j < d; ++j) {
        const double zj = zc_[i * d + j];
        acc[1 + j] += r[i] * zj;
        if (want_information) {
          for (std::size_t l = 0; l < d; ++l) acc[1 + d + j * d + l] += r[i] * zj * zc_[i * d + l];
        }
      }
    };

    Evaluation out;
    out.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    out.information = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    out.s0.assign(events_.size(), 0.0);
    std::size_t px = 0, pq = 0;
    long double ll = 0.0L;
    for (std::size_t k = events_.size(); k-- > 0;) {
      const auto& et = events_[k];
      while (px < n_ && x_[by_x_[px]] >= et.time) add(a, by_x_[px++]);
      while (pq < n_ && q_[by_q_[pq]] > et.time) add(b, by_q_[pq++]);
      const double s0 = static_cast<double>(a[0] - b[0]);
      out.s0[k] = s0;
      double lin = 0.0;
      for (std::size_t j = 0; j < d; ++j) lin += psi[j] * et.zsum[j];
      ll += lin - et.dw * std::log(s0);
      for (std::size_t j = 0; j < d; ++j) {
        const double zbar = static_cast<double>(a[1 + j] - b[1 + j]) / s0;
        out.score(static_cast<Eigen::Index>(j)) += et.zsum[j] - et.dw * zbar;
        if (want_information) {
          for (std::size_t l = 0; l < d; ++l) {
            const double zbar_l = static_cast<double>(a[1 + l] - b[1 + l]) / s0;
            const double s2 = static_cast<double>(a[1 + d + j * d + l] - b[1 + d + j * d + l]) / s0;
            out.information(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) +=
                et.dw * (s2 - zbar * zbar_l);
          }
        }
      }
    }
    out.loglik = static_cast<double>(ll);
    return out;
  }

 private:
  std::size_t n_, d_;
  std::vector<double> w_;
  std::vector<double> zc_;
  std::vector<double> x_, q_;
  std::vector<std::size_t> by_x_, by_q_;
  std::vector<EventTime> events_;
};

inline std::vector<double> weighted_center(const Dataset& ds, std::span<const double> weights) {
  std::vector<double> c(ds.dim(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    total += weights[i];
    auto zi = ds.z(i);
    for (std::size_t j = 0; j < ds.dim(); ++j) c[j] += weights[i] * zi[j];
  }
  if (total > 0.0) {
    for (double& v : c) v /= total;
  }
  return c;
}

inline void check_weights(const Dataset& ds, std::span<const double> weights) {
  if (weights.size() != ds.size()) fail(ErrorCode::kBadArgument, "weights length mismatch");
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::kBadArgument, "weights must be finite and >= 0");
  }
}

}  // namespace detail

struct PartialLikelihood {
  double loglik = 0.0;
  std::vector<double> score;
};

/// Breslow-tied partial log-likelihood with entry-adjusted risk sets and
/// its analytic gradient, evaluated at raw (uncentered) ψ.
inline PartialLikelihood partial_loglik_and_score(const Dataset& ds, std::span<const double> weights,
                                                  std::span<const double> psi) {
  detail::check_weights(ds, weights);
  if (psi.size() != ds.dim()) fail(ErrorCode::kBadArgument, "psi dimension mismatch");
  const std::vector<double> zero(ds.dim(), 0.0);
  const detail::CoxRiskSets rs(ds, weights, zero);
  const auto ev = rs.evaluate(psi, false);
  return {ev.loglik, {ev.score.data(), ev.score.data() + ev.score.size()}};
}

inline CoxFit fit_cox_lt(const Dataset& ds, std::span<const double> weights, const CoxConfig& config = {}) {
  detail::check_weights(ds, weights);
  const std::size_t d = ds.dim();
  if (d == 0) fail(ErrorCode::kNoCovariates, "Cox model needs at least one covariate");

  CoxFit fit;
  fit.center = detail::weighted_center(ds, weights);
  const detail::CoxRiskSets rs(ds, weights, fit.center);
  if (rs.events().empty()) fail(ErrorCode::kNoEvents, "no events with positive weight");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.delta(i) == 1 && weights[i] > 0.0) ++fit.events;
  }

  Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  auto span_of = [](const Eigen::VectorXd& v) { return std::span<const double>(v.data(), static_cast<std::size_t>(v.size())); };
  auto ev = rs.evaluate(span_of(psi), true);

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ev.information, Eigen::EigenvaluesOnly);
    const double top = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() <= 1e-10 * top) {
      fail(ErrorCode::kSingularHessian, "information matrix is singular (collinear or constant covariates)");
    }
  }

  int iter = 0;
  for (; iter < config.max_iter; ++iter) {
    if (ev.score.cwiseAbs().maxCoeff() <= config.tol) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(ev.score);
    double scale = 1.0;
    auto trial = rs.evaluate(span_of(Eigen::VectorXd(psi + step)), true);
    int halvings = 0;
    while (!(trial.loglik >= ev.loglik - 1e-12 * std::abs(ev.loglik)) && halvings < config.max_halvings) {
      scale *= 0.5;
      ++halvings;
      trial = rs.evaluate(span_of(Eigen::VectorXd(psi + scale * step)), true);
    }
    psi += scale * step;
    ev = std::move(trial);
  }
  if (!fit.converged && ev.score.cwiseAbs().maxCoeff() <= config.tol) fit.converged = true;
  fit.iterations = iter;

  fit.psi.assign(psi.data(), psi.data() + d);
  fit.loglik = ev.loglik;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ev.information);
  fit.psi_se.assign(d, std::numeric_limits<double>::quiet_NaN());
  if (lu.isInvertible()) {
    const Eigen::MatrixXd inv = lu.inverse();
    for (std::size_t j = 0; j < d; ++j) {
      const double v = inv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      fit.psi_se[j] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
  }

  // Breslow at ψ̂.
  std::vector<double> times, cum_c, cum_0;
  const double offset = std::exp(-std::inner_product(fit.psi.begin(), fit.psi.end(), fit.center.begin(), 0.0));
  double lam = 0.0;
  for (std::size_t k = 0; k < rs.events().size(); ++k) {
    lam += rs.events()[k].dw / ev.s0[k];
    times.push_back(rs.events()[k].time);
    cum_c.push_back(lam);
    cum_0.push_back(lam * offset);
  }
  fit.centered_cumhaz = StepFunction(times, std::move(cum_c), 0.0);
  fit.baseline_cumhaz = StepFunction(std::move(times), std::move(cum_0), 0.0);
  return fit;
}

inline CoxFit fit_cox_lt(const Dataset& ds, const CoxConfig& config = {}) {
  return fit_cox_lt(ds, ds.weight_column(), config);
}

/// F̂(t|z) = 1 - exp{-Λ̂(t) exp(ψ̂'z)} as a step function of t.
inline StepFunction conditional_cdf(const CoxFit& fit, std::span<const double> z) {
  const double rr = fit.relative_risk(z);
  auto times = fit.centered_cumhaz.times();
  auto cum = fit.centered_cumhaz.values();
  std::vector<double> values(cum.size());
  for (std::size_t k = 0; k < cum.size(); ++k) values[k] = -std::expm1(-cum[k] * rr);
  return StepFunction({times.begin(), times.end()}, std::move(values), 0.0);
}

}  // namespace truncdr
