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
#include <map>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "truncdr/cox.hpp"
#include "truncdr/error.hpp"
#include "truncdr/nonparam.hpp"
#include "truncdr/step_function.hpp"

namespace truncdr {

/// Clamping applied on top of any curve: value -> min(max(value, lo), hi).
struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
  double operator()(double v) const noexcept { return std::min(std::max(v, lo), hi); }
  bool active(double raw) const noexcept { return raw > lo && raw < hi; }
};

/// How stored numbers turn into CDF values.
enum class ValueMap { kIdentity, kOneMinus, kExpNeg, kOneMinusExpNeg };

inline double apply_map(ValueMap map, double base, double rate) noexcept {
  switch (map) {
    case ValueMap::kIdentity: return base;
    case ValueMap::kOneMinus: return 1.0 - base;
    case ValueMap::kExpNeg: return std::exp(-base * rate);
    case ValueMap::kOneMinusExpNeg: return -std::expm1(-base * rate);
  }
  return base;
}

struct ConstCurve {
  double value = 0.0;
  double operator()(double) const noexcept { return value; }
  double left(double) const noexcept { return value; }
};

/// Right-continuous step curve on the natural time axis.
struct ForwardStep {
  std::span<const double> times;
  std::span<const double> base;
  double base_before = 0.0;
  ValueMap map = ValueMap::kIdentity;
  double rate = 1.0;
  Bounds bounds;

  double level(std::size_t count) const noexcept {
    return bounds(apply_map(map, count == 0 ? base_before : base[count - 1], rate));
  }
  double operator()(double t) const noexcept {
    return level(static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()));
  }
  double left(double t) const noexcept {
    return level(static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin()));
  }

  /// Calls fn(t, value_before, value_after) for jumps with lo < t <= hi
  /// (lo <= t when lo_closed; t < hi when !hi_closed), ascending in t.
  template <class Fn>
  void for_each_jump(double lo, bool lo_closed, double hi, bool hi_closed, Fn&& fn) const {
    auto first = lo_closed ? std::lower_bound(times.begin(), times.end(), lo)
                           : std::upper_bound(times.begin(), times.end(), lo);
    auto last = hi_closed ? std::upper_bound(times.begin(), times.end(), hi)
                          : std::lower_bound(times.begin(), times.end(), hi);
    for (auto it = first; it < last; ++it) {
      const auto k = static_cast<std::size_t>(it - times.begin());
      fn(*it, level(k), level(k + 1));
    }
  }
};

/// Step curve fitted on the reflected axis s = τ - t and mapped back:
/// value(t) = map(base(s-)) with s = τ - t. A right-continuous survival
/// curve of τ - Q becomes a right-continuous CDF of Q.
struct ReflectedStep {
  std::span<const double> rtimes;  // ascending on the reflected axis
  std::span<const double> base;
  double base_before = 0.0;
  ValueMap map = ValueMap::kIdentity;
  double rate = 1.0;
  double tau = 0.0;
  Bounds bounds;

  double level(std::size_t count) const noexcept {
    return bounds(apply_map(map, count == 0 ? base_before : base[count - 1], rate));
  }
  double operator()(double t) const noexcept {
    const double s = tau - t;
    return level(static_cast<std::size_t>(std::lower_bound(rtimes.begin(), rtimes.end(), s) - rtimes.begin()));
  }
  double left(double t) const noexcept {
    const double s = tau - t;
    return level(static_cast<std::size_t>(std::upper_bound(rtimes.begin(), rtimes.end(), s) - rtimes.begin()));
  }

  template <class Fn>
  void for_each_jump(double lo, bool lo_closed, double hi, bool hi_closed, Fn&& fn) const {
    // t >= lo  <=>  s <= τ - lo ;  t < hi  <=>  s > τ - hi
    const double s_hi = tau - lo;
    const double s_lo = tau - hi;
    auto end = lo_closed ? std::upper_bound(rtimes.begin(), rtimes.end(), s_hi)
                         : std::lower_bound(rtimes.begin(), rtimes.end(), s_hi);
    auto begin = hi_closed ? std::lower_bound(rtimes.begin(), rtimes.end(), s_lo)
                           : std::upper_bound(rtimes.begin(), rtimes.end(), s_lo);
    for (auto it = end; it > begin;) {
      --it;
      const auto k = static_cast<std::size_t>(it - rtimes.begin());
      fn(tau - *it, level(k + 1), level(k));
    }
  }
};

/// Smooth conditional law supplied in closed form.
class AnalyticLaw {
 public:
  virtual ~AnalyticLaw() = default;
  virtual double cdf(double t, std::span<const double> z) const = 0;
  virtual double density(double t, std::span<const double> z) const = 0;
  /// Points where the density may be non-smooth.
  virtual std::vector<double> kinks(std::span<const double> z) const { (void)z; return {}; }
};

struct AnalyticCurve {
  const AnalyticLaw* law = nullptr;
  std::vector<double> z;
  Bounds bounds;

  double raw(double t) const { return law->cdf(t, z); }
  double operator()(double t) const { return bounds(raw(t)); }
  double left(double t) const { return (*this)(t); }
  double density(double t) const { return bounds.active(raw(t)) ? law->density(t, z) : 0.0; }
  std::vector<double> kinks() const { return law->kinks(z); }
};

using Curve = std::variant<ConstCurve, ForwardStep, ReflectedStep, AnalyticCurve>;

inline double evaluate(const Curve& c, double t) {
  return std::visit([t](const auto& curve) { return curve(t); }, c);
}

// ---------------------------------------------------------------------------
// Covariate maps

enum class FeatureMap { kLinear, kQuadratic };

/// Linear: z as is. Quadratic: (z1², z1·z2), the misspecification-probing
/// basis used with two covariates.
inline std::vector<double> apply_features(FeatureMap map, std::span<const double> z) {
  if (map == FeatureMap::kLinear) return {z.begin(), z.end()};
  if (z.size() < 2) fail(ErrorCode::kBadArgument, "quadratic feature map needs two covariates");
  return {z[0] * z[0], z[0] * z[1]};
}

inline Dataset map_covariates(const Dataset& ds, FeatureMap map) {
  if (map == FeatureMap::kLinear) return ds;
  std::vector<double> z;
  z.reserve(ds.size() * 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto f = apply_features(map, ds.z(i));
    z.insert(z.end(), f.begin(), f.end());
  }
  return ds.with_covariates(std::move(z), 2);
}

// ---------------------------------------------------------------------------
// Conditional CDF handle

enum class CdfKind { kCox, kStratifiedPl, kConstantZero, kConstantOne, kExternalTable, kAnalytic };

inline std::string_view to_string(CdfKind k) {
  switch (k) {
    case CdfKind::kCox: return "cox";
    case CdfKind::kStratifiedPl: return "stratified_pl";
    case CdfKind::kConstantZero: return "constant_zero";
    case CdfKind::kConstantOne: return "constant_one";
    case CdfKind::kExternalTable: return "external_table";
    case CdfKind::kAnalytic: return "analytic";
  }
  return "?";
}

/// Which tail gets clamped: G is floored, F is capped below one.
enum class CdfRole { kEventTime, kTruncationTime };

class CdfSource {
 public:
  virtual ~CdfSource() = default;
  virtual Curve curve(std::span<const double> z, Bounds bounds) const = 0;
};

class ConditionalCdf {
 public:
  ConditionalCdf() : ConditionalCdf(CdfKind::kConstantZero, nullptr) {}
  ConditionalCdf(CdfKind kind, std::shared_ptr<const CdfSource> source)
      : kind_(kind), source_(std::move(source)) {}

  CdfKind kind() const noexcept { return kind_; }
  double clamp_eps() const noexcept { return eps_; }
  const Bounds& bounds() const noexcept { return bounds_; }

  /// The curve for one covariate vector. Step curves view storage owned by
  /// this handle, so the handle must outlive the curve.
  Curve at(std::span<const double> z) const {
    switch (kind_) {
      case CdfKind::kConstantZero: return ConstCurve{bounds_(0.0)};
      case CdfKind::kConstantOne: return ConstCurve{bounds_(1.0)};
      default: return source_->curve(z, bounds_);
    }
  }

  double operator()(double t, std::span<const double> z) const { return evaluate(at(z), t); }

  ConditionalCdf clamped(double eps, CdfRole role) const {
    if (!(eps >= 0.0 && eps < 0.5)) {
      fail(ErrorCode::kBadEps, "clamp eps must satisfy 0 <= eps < 0.5");
    }
    ConditionalCdf out = *this;
    out.eps_ = eps;
    out.bounds_ = role == CdfRole::kTruncationTime ? Bounds{eps, 1.0} : Bounds{0.0, 1.0 - eps};
    return out;
  }

 private:
  CdfKind kind_;
  std::shared_ptr<const CdfSource> source_;
  Bounds bounds_;
  double eps_ = 0.0;
};

inline ConditionalCdf clamp_overlap(const ConditionalCdf& cdf, double eps, CdfRole role) {
  return cdf.clamped(eps, role);
}

inline ConditionalCdf degenerate(CdfKind kind) {
  if (kind != CdfKind::kConstantZero && kind != CdfKind::kConstantOne) {
    fail(ErrorCode::kBadArgument, "degenerate() takes constant_zero or constant_one");
  }
  return ConditionalCdf(kind, nullptr);
}

namespace detail {

class CoxSource final : public CdfSource {
 public:
  CoxSource(CoxFit fit, FeatureMap map, bool reflected, double tau)
      : fit_(std::move(fit)), map_(map), reflected_(reflected), tau_(tau) {
    times_.assign(fit_.centered_cumhaz.times().begin(), fit_.centered_cumhaz.times().end());
    cum_.assign(fit_.centered_cumhaz.values().begin(), fit_.centered_cumhaz.values().end());
  }
  Curve curve(std::span<const double> z, Bounds bounds) const override {
    const double r = map_ == FeatureMap::kLinear ? fit_.relative_risk(z)
                                                  : fit_.relative_risk(apply_features(map_, z));
    if (reflected_) return ReflectedStep{times_, cum_, 0.0, ValueMap::kExpNeg, r, tau_, bounds};
    return ForwardStep{times_, cum_, 0.0, ValueMap::kOneMinusExpNeg, r, bounds};
  }
  const CoxFit& fit() const noexcept { return fit_; }

 private:
  CoxFit fit_;
  FeatureMap map_;
  bool reflected_;
  double tau_;
  std::vector<double> times_, cum_;
};

class StratifiedSource final : public CdfSource {
 public:
  StratifiedSource(StratifiedProductLimit spl, bool reflected, double tau)
      : spl_(std::move(spl)), reflected_(reflected), tau_(tau) {
    for (std::size_t s = 0; s < spl_.strata(); ++s) {
      const auto& S = spl_.stratum(s).survival;
      times_.emplace_back(S.times().begin(), S.times().end());
      surv_.emplace_back(S.values().begin(), S.values().end());
    }
  }
  Curve curve(std::span<const double> z, Bounds bounds) const override {
    const std::size_t s = spl_.stratum_of(z);
    if (reflected_) return ReflectedStep{times_[s], surv_[s], 1.0, ValueMap::kIdentity, 1.0, tau_, bounds};
    return ForwardStep{times_[s], surv_[s], 1.0, ValueMap::kOneMinus, 1.0, bounds};
  }
  const StratifiedProductLimit& model() const noexcept { return spl_; }

 private:
  StratifiedProductLimit spl_;
  bool reflected_;
  double tau_;
  std::vector<std::vector<double>> times_, surv_;
};

class AnalyticSource final : public CdfSource {
 public:
  explicit AnalyticSource(std::shared_ptr<const AnalyticLaw> law) : law_(std::move(law)) {}
  Curve curve(std::span<const double> z, Bounds bounds) const override {
    return AnalyticCurve{law_.get(), {z.begin(), z.end()}, bounds};
  }

 private:
  std::shared_ptr<const AnalyticLaw> law_;
};

}  // namespace detail

/// F̂(t|z) from a Cox fit (features computed from z by `map`).
inline ConditionalCdf cox_event_cdf(CoxFit fit, FeatureMap map = FeatureMap::kLinear) {
  return ConditionalCdf(CdfKind::kCox, std::make_shared<detail::CoxSource>(std::move(fit), map, false, 0.0));
}

/// Ĝ(q|z) = Ŝ_rev((τ - q)- | z) from a Cox fit on reversed time.
inline ConditionalCdf cox_truncation_cdf(CoxFit reversed_fit, double tau, FeatureMap map = FeatureMap::kLinear) {
  return ConditionalCdf(CdfKind::kCox,
                        std::make_shared<detail::CoxSource>(std::move(reversed_fit), map, true, tau));
}

inline ConditionalCdf stratified_event_cdf(StratifiedProductLimit spl) {
  return ConditionalCdf(CdfKind::kStratifiedPl,
                        std::make_shared<detail::StratifiedSource>(std::move(spl), false, 0.0));
}

inline ConditionalCdf stratified_truncation_cdf(StratifiedProductLimit reversed, double tau) {
  return ConditionalCdf(CdfKind::kStratifiedPl,
                        std::make_shared<detail::StratifiedSource>(std::move(reversed), true, tau));
}

inline ConditionalCdf analytic_cdf(std::shared_ptr<const AnalyticLaw> law) {
  return ConditionalCdf(CdfKind::kAnalytic, std::make_shared<detail::AnalyticSource>(std::move(law)));
}

// ---------------------------------------------------------------------------
// Externally supplied tables

/// CDF tables keyed by an integer stratum read from one covariate column;
/// without a stratum column the single table applies to everyone.
class ExternalTable final : public CdfSource {
 public:
  ExternalTable() = default;

  void add(long stratum, std::vector<double> times, std::vector<double> cdf_values) {
    for (double v : cdf_values) {
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::kBadArgument, "table CDF values must lie in [0, 1]");
    }
    for (std::size_t k = 1; k < cdf_values.size(); ++k) {
      if (cdf_values[k] < cdf_values[k - 1]) fail(ErrorCode::kBadArgument, "table CDF must be nondecreasing");
    }
    tables_[stratum] = Table{std::move(times), std::move(cdf_values)};
  }

  void set_stratum_covariate(std::optional<std::size_t> column) { column_ = column; }

  Curve curve(std::span<const double> z, Bounds bounds) const override {
    long key = 0;
    if (column_) {
      if (*column_ >= z.size()) fail(ErrorCode::kBadArgument, "stratum covariate index out of range");
      key = std::lround(z[*column_]);
    } else if (tables_.size() == 1) {
      key = tables_.begin()->first;
    }
    auto it = tables_.find(key);
    if (it == tables_.end()) fail(ErrorCode::kBadArgument, "no table for stratum " + std::to_string(key));
    return ForwardStep{it->second.times, it->second.values, 0.0, ValueMap::kIdentity, 1.0, bounds};
  }

 private:
  struct Table {
    std::vector<double> times, values;
  };
  std::map<long, Table> tables_;
  std::optional<std::size_t> column_;
};

/// Reads "stratum,time,value" (stratum optional) rows.
inline std::shared_ptr<ExternalTable> load_external_table(std::istream& in,
                                                          std::optional<std::size_t> stratum_covariate) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kMissingColumn, "empty table file");
  const auto header = detail::split_csv_line(line);
  auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    return std::nullopt;
  };
  const auto tcol = find("time"), vcol = find("value"), scol = find("stratum");
  if (!tcol) fail(ErrorCode::kMissingColumn, "table column 'time' not found");
  if (!vcol) fail(ErrorCode::kMissingColumn, "table column 'value' not found");
  std::map<long, std::vector<std::pair<double, double>>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    auto cell = [&](std::size_t j, const char* name) {
      if (j >= cells.size()) fail(ErrorCode::kMissingColumn, std::string("table row missing ") + name);
      auto v = detail::parse_double(cells[j]);
      if (!v) {
        fail(ErrorCode::kNonNumericCell,
             "table row " + std::to_string(row) + " column " + name + ": '" + cells[j] + "'");
      }
      return *v;
    };
    const long s = scol ? std::lround(cell(*scol, "stratum")) : 0;
    rows[s].emplace_back(cell(*tcol, "time"), cell(*vcol, "value"));
  }
  auto table = std::make_shared<ExternalTable>();
  for (auto& [s, pts] : rows) {
    std::sort(pts.begin(), pts.end());
    std::vector<double> t, v;
    for (const auto& [ti, vi] : pts) {
      if (!t.empty() && t.back() == ti) fail(ErrorCode::kBadArgument, "duplicate time in table");
      t.push_back(ti);
      v.push_back(vi);
    }
    table->add(s, std::move(t), std::move(v));
  }
  table->set_stratum_covariate(stratum_covariate);
  return table;
}

inline ConditionalCdf external_table_cdf(std::shared_ptr<const ExternalTable> table) {
  return ConditionalCdf(CdfKind::kExternalTable, std::move(table));
}

}  // namespace truncdr
