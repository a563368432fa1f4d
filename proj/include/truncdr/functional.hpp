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
#include <limits>
#include <string>
#include <vector>

#include "truncdr/data.hpp"
#include "truncdr/error.hpp"

namespace truncdr {

/// The transformation ν whose mean E*{ν(T)} is estimated.
///
/// Piecewise-constant kinds store break points b_1 < ... < b_k and levels
/// v_0..v_k with ν(t) = v_j on (b_j, b_{j+1}] (b_0 = -∞, b_{k+1} = +∞).
class Functional {
 public:
  enum class Kind { kSurvival, kRmst, kStep };

  /// ν(t) = 1(t > t0).
  static Functional survival(double t0) {
    check_finite(t0);
    Functional f(Kind::kSurvival, t0);
    f.breaks_ = {t0};
    f.levels_ = {0.0, 1.0};
    return f;
  }

  /// ν(t) = min(t, t0).
  static Functional rmst(double t0) {
    check_finite(t0);
    if (!(t0 > 0.0)) fail(ErrorCode::kBadArgument, "rmst horizon must be positive");
    return Functional(Kind::kRmst, t0);
  }

  /// Left-continuous tabulated ν.
  static Functional step(std::vector<double> breaks, std::vector<double> levels) {
    if (levels.size() != breaks.size() + 1) {
      fail(ErrorCode::kBadArgument, "tabulated functional needs one more level than break points");
    }
    for (std::size_t k = 0; k < breaks.size(); ++k) {
      check_finite(breaks[k]);
      if (k > 0 && !(breaks[k - 1] < breaks[k])) {
        fail(ErrorCode::kBadArgument, "break points must be strictly increasing");
      }
    }
    for (double v : levels) check_finite(v);
    Functional f(Kind::kStep, breaks.empty() ? 0.0 : breaks.front());
    f.breaks_ = std::move(breaks);
    f.levels_ = std::move(levels);
    return f;
  }

  Kind kind() const noexcept { return kind_; }
  double t0() const noexcept { return t0_; }
  bool piecewise_constant() const noexcept { return kind_ != Kind::kRmst; }
  const std::vector<double>& breaks() const noexcept { return breaks_; }
  const std::vector<double>& levels() const noexcept { return levels_; }

  double operator()(double t) const {
    if (kind_ == Kind::kRmst) return std::min(t, t0_);
    const auto j = std::lower_bound(breaks_.begin(), breaks_.end(), t) - breaks_.begin();
    return levels_[static_cast<std::size_t>(j)];
  }

  /// lim ν(t) as t → ∞; where mass a CDF leaves unassigned is placed.
  double at_infinity() const { return kind_ == Kind::kRmst ? t0_ : levels_.back(); }

  std::string describe() const {
    switch (kind_) {
      case Kind::kSurvival: return "survival(t0=" + format_number(t0_) + ")";
      case Kind::kRmst: return "rmst(t0=" + format_number(t0_) + ")";
      case Kind::kStep: return "step(" + std::to_string(breaks_.size()) + " breaks)";
    }
    return "?";
  }

 private:
  Functional(Kind kind, double t0) : kind_(kind), t0_(t0) {}

  static void check_finite(double v) {
    if (!std::isfinite(v)) fail(ErrorCode::kBadArgument, "functional parameters must be finite");
  }

  Kind kind_;
  double t0_;
  std::vector<double> breaks_;
  std::vector<double> levels_;
};

}  // namespace truncdr
