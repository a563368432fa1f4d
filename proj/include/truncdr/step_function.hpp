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
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "truncdr/error.hpp"

namespace truncdr {

/// Right-continuous piecewise-constant function of time.
///
/// f(t) = value_before_first for t < times[0], and values[k] on
/// [times[k], times[k+1]). Every estimated curve in the library (survival
/// curves, cumulative hazards, conditional CDFs for a fixed covariate) is
/// one of these.
class StepFunction {
 public:
  StepFunction() = default;

  StepFunction(std::vector<double> times, std::vector<double> values,
               double value_before_first)
      : times_(std::move(times)),
        values_(std::move(values)),
        before_(value_before_first) {
    if (times_.size() != values_.size()) {
      fail(ErrorCode::kBadArgument, "step function: times/values length mismatch");
    }
    for (std::size_t k = 1; k < times_.size(); ++k) {
      if (!(times_[k - 1] < times_[k])) {
        fail(ErrorCode::kBadArgument, "step function: times must be strictly increasing");
      }
    }
  }

  static StepFunction constant(double value) { return StepFunction({}, {}, value); }

  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> values() const noexcept { return values_; }
  double value_before_first() const noexcept { return before_; }
  double last_value() const noexcept { return times_.empty() ? before_ : values_.back(); }

  /// Number of jump times <= t.
  std::size_t count_le(double t) const noexcept {
    return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) -
                                    times_.begin());
  }

  /// Number of jump times < t.
  std::size_t count_lt(double t) const noexcept {
    return static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), t) -
                                    times_.begin());
  }

  double operator()(double t) const noexcept {
    const std::size_t k = count_le(t);
    return k == 0 ? before_ : values_[k - 1];
  }

  /// lim_{s -> t-} f(s).
  double left_limit(double t) const noexcept {
    const std::size_t k = count_lt(t);
    return k == 0 ? before_ : values_[k - 1];
  }

  /// Value just before the k-th jump.
  double value_before(std::size_t k) const noexcept { return k == 0 ? before_ : values_[k - 1]; }

  /// ∫_a^b f(t) dt for a <= b.
  double integral(double a, double b) const noexcept {
    if (!(a < b)) return 0.0;
    double total = 0.0;
    double cursor = a;
    double level = (*this)(a);
    for (std::size_t k = count_le(a); k < times_.size() && times_[k] < b; ++k) {
      total += level * (times_[k] - cursor);
      cursor = times_[k];
      level = values_[k];
    }
    return total + level * (b - cursor);
  }

  friend bool operator==(const StepFunction&, const StepFunction&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double before_ = 0.0;
};

}  // namespace truncdr
