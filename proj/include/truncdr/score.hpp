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
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "truncdr/cdf.hpp"
#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/functional.hpp"
#include "truncdr/step_function.hpp"

namespace truncdr {

/// w(t) = 1/S(t-) for a censoring survival curve S; absent means w ≡ 1.
class InverseSurvivalWeight {
 public:
  InverseSurvivalWeight() = default;
  explicit InverseSurvivalWeight(const StepFunction* survival) : survival_(survival) {}

  bool active() const noexcept { return survival_ != nullptr; }

  double operator()(double t) const {
    if (!survival_) return 1.0;
    const double s = survival_->left_limit(t);
    if (!(s > 0.0)) {
      fail(ErrorCode::kCensoringPositivityViolation,
           "censoring survival is zero before t=" + format_number(t));
    }
    return 1.0 / s;
  }

 private:
  const StepFunction* survival_ = nullptr;
};

/// One subject's linear estimating function U_i(θ) = a - θ·b, plus its
/// inverse-probability weight w(X)/Ĝ(X|Z) (the β̂ denominator term).
struct SubjectScore {
  double a = 0.0;
  double b = 0.0;
  double inverse_g = 0.0;
};

namespace detail {

inline void require_positive(double value, double floor, double at, const char* what) {
  if (!(value > 0.0) || value < floor) {
    fail(ErrorCode::kOverlapViolation,
         std::string(what) + " = " + format_number(value) + " at t=" + format_number(at));
  }
}

template <class C>
constexpr bool is_analytic_v = std::is_same_v<C, AnalyticCurve>;

template <class C>
constexpr bool has_jumps_v = std::is_same_v<C, ForwardStep> || std::is_same_v<C, ReflectedStep>;

template <class Fn>
double quad(Fn&& fn, std::vector<double> cuts, double lo, double hi) {
  if (!(lo < hi)) return 0.0;
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double a = std::max(lo, cuts[k - 1]);
    const double b = std::min(hi, cuts[k]);
    if (a < b) {
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fn, a, b, 10, 1e-10);
    }
  }
  return total;
}

/// m_w(v) = ∫_{(-∞, v]} ν w dF and M_w(v) = ∫_{(-∞, v]} w dF for one F curve.
template <class FC>
class MeasureIntegral {
 public:
  MeasureIntegral(const FC& F, const Functional& nu, const InverseSurvivalWeight& w)
      : F_(F), nu_(nu), w_(w) {
    closed_ = nu.piecewise_constant() && !w.active();
    if constexpr (is_analytic_v<FC>) {
      if (w.active()) {
        fail(ErrorCode::kBadArgument, "censoring weights need a step-function event-time CDF");
      }
    }
    if (closed_) {
      const auto& br = nu.breaks();
      const auto& lv = nu.levels();
      fb_.resize(br.size() + 1);
      fb_[0] = F(-std::numeric_limits<double>::infinity());
      for (std::size_t j = 0; j < br.size(); ++j) fb_[j + 1] = F(br[j]);
      cum_.assign(br.size() + 1, 0.0);
      for (std::size_t j = 0; j < br.size(); ++j) cum_[j + 1] = cum_[j] + lv[j] * (fb_[j + 1] - fb_[j]);
    }
  }

  /// m_w(v); `Fv` must be F(v).
  double m(double v, double Fv) {
    if (closed_) {
      const auto& br = nu_.breaks();
      const auto J = static_cast<std::size_t>(std::lower_bound(br.begin(), br.end(), v) - br.begin());
      return cum_[J] + nu_.levels()[J] * (Fv - fb_[J]);
    }
    if constexpr (is_analytic_v<FC>) {
      // rmst by parts: min(v,t0) F(v) - ∫_0^{min(v,t0)} F
      const double u = std::min(v, nu_.t0());
      if (!(u > 0.0)) return 0.0;
      auto kinks = F_.kinks();
      return u * Fv - quad([&](double t) { return F_(t); }, kinks, 0.0, u);
    } else {
      advance(v);
      return m_;
    }
  }

  /// M_w(v); equals F(v) - F(-∞) without weights.
  double M(double v, double Fv) {
    if (!w_.active()) return Fv;
    if constexpr (!is_analytic_v<FC>) {
      advance(v);
      return M_;
    }
    return Fv;
  }

 private:
  void advance(double v) {
    if constexpr (has_jumps_v<FC>) {
      if (v < last_) {
        last_ = -std::numeric_limits<double>::infinity();
        m_ = M_ = 0.0;
      }
      if (v == last_) return;
      F_.for_each_jump(last_, false, v, true, [&](double t, double before, double after) {
        const double dF = (after - before) * w_(t);
        m_ += nu_(t) * dF;
        M_ += dF;
      });
      last_ = v;
    }
  }

  const FC& F_;
  const Functional& nu_;
  const InverseSurvivalWeight& w_;
  bool closed_ = false;
  std::vector<double> fb_, cum_;
  double last_ = -std::numeric_limits<double>::infinity();
  double m_ = 0.0, M_ = 0.0;
};

template <class FC, class GC>
SubjectScore score_core(const FC& F, const GC& G, const Functional& nu, double q, double x,
                        const InverseSurvivalWeight& w, double floor) {
  MeasureIntegral<FC> mi(F, nu, w);
  SubjectScore out;

  const double gx = G(x);
  require_positive(gx, floor, x, "G(X|Z)");
  const double wx = w(x);
  out.a = nu(x) * wx / gx;
  out.b = wx / gx;
  out.inverse_g = wx / gx;

  // h_a(v) = m_w(v) / {G(v)(1-F(v))}, h_b(v) = M_w(v) / {G(v)(1-F(v))}
  auto h = [&](double v, double gv, double& ha, double& hb) {
    const double fv = F(v);
    const double sv = 1.0 - fv;
    require_positive(gv, floor, v, "G(v|Z)");
    require_positive(sv, floor, v, "1-F(v|Z)");
    const double den = gv * sv;
    ha = mi.m(v, fv) / den;
    hb = mi.M(v, fv) / den;
  };

  double ha = 0.0, hb = 0.0;
  h(q, G(q), ha, hb);
  double aug_a = ha, aug_b = hb;

  if constexpr (has_jumps_v<GC>) {
    G.for_each_jump(q, true, x, false, [&](double v, double before, double after) {
      const double dG = after - before;
      if (dG == 0.0) return;
      double ja = 0.0, jb = 0.0;
      h(v, after, ja, jb);
      aug_a -= ja * dG / after;
      aug_b -= jb * dG / after;
    });
  } else if constexpr (is_analytic_v<GC>) {
    std::vector<double> cuts = G.kinks();
    if constexpr (is_analytic_v<FC>) {
      const auto fk = F.kinks();
      cuts.insert(cuts.end(), fk.begin(), fk.end());
    } else if constexpr (has_jumps_v<FC>) {
      F.for_each_jump(q, false, x, false, [&](double t, double, double) { cuts.push_back(t); });
    }
    if (nu.kind() == Functional::Kind::kRmst) cuts.push_back(nu.t0());
    for (double b : nu.breaks()) cuts.push_back(b);
    auto integrand = [&](double v, bool numerator) {
      const double gv = G(v);
      const double dens = G.density(v);
      if (dens == 0.0) return 0.0;
      double ia = 0.0, ib = 0.0;
      h(v, gv, ia, ib);
      return (numerator ? ia : ib) * dens / gv;
    };
    aug_a -= quad([&](double v) { return integrand(v, true); }, cuts, q, x);
    aug_b -= quad([&](double v) { return integrand(v, false); }, cuts, q, x);
  }

  out.a += aug_a;
  out.b += aug_b;
  return out;
}

}  // namespace detail

/// U_i components for one subject with any pair of curves.
inline SubjectScore subject_score(const Curve& F, const Curve& G, const Functional& nu, double q, double x,
                                  const InverseSurvivalWeight& w = {}, double floor = 0.0) {
  return std::visit(
      [&](const auto& f, const auto& g) { return detail::score_core(f, g, nu, q, x, w, floor); }, F, G);
}

/// -∫ h dM̄_Q in closed form. The numerator role uses h = (m - θF)/{G(1-F)},
/// the denominator role h = F/{G(1-F)}.
enum class AugmentationRole { kNumerator, kDenominator };

inline double augmentation_integral(const Observation& obs, const ConditionalCdf& F, const ConditionalCdf& G,
                                    const Functional& nu, double theta, AugmentationRole role) {
  const auto fc = F.at(obs.z);
  const auto gc = G.at(obs.z);
  const auto s = subject_score(fc, gc, nu, obs.q, obs.x, {}, 0.5 * std::max(F.clamp_eps(), G.clamp_eps()));
  const double gx = evaluate(gc, obs.x);
  const double aug_a = s.a - nu(obs.x) / gx;
  const double aug_b = s.b - 1.0 / gx;
  return role == AugmentationRole::kNumerator ? aug_a - theta * aug_b : aug_b;
}

/// φ(O) = β·U(O; θ, F, G).
inline double eic_value(const Observation& obs, double theta, const ConditionalCdf& F, const ConditionalCdf& G,
                        double beta, const Functional& nu) {
  const auto s = subject_score(F.at(obs.z), G.at(obs.z), nu, obs.q, obs.x, {},
                               0.5 * std::max(F.clamp_eps(), G.clamp_eps()));
  return beta * (s.a - theta * s.b);
}

}  // namespace truncdr
