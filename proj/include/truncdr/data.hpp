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
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "truncdr/error.hpp"
#include "truncdr/random.hpp"

namespace truncdr {

/// How (if at all) the event time is right censored.
///   kNone: every observed subject has its event time observed.
///   kC1:   censoring may precede entry; a subject is sampled when Q < X.
///   kC2:   censoring happens after entry on the residual scale; sampled when Q < T.
enum class Censoring { kNone, kC1, kC2 };

inline std::string_view to_string(Censoring c) {
  switch (c) {
    case Censoring::kNone: return "none";
    case Censoring::kC1: return "c1";
    case Censoring::kC2: return "c2";
  }
  return "none";
}

inline Censoring parse_censoring(std::string_view s) {
  if (s == "none") return Censoring::kNone;
  if (s == "c1") return Censoring::kC1;
  if (s == "c2") return Censoring::kC2;
  fail(ErrorCode::kBadArgument, "unknown censoring tag '" + std::string(s) + "'");
}

struct Observation {
  double q = 0.0;      // entry (truncation) time
  double x = 0.0;      // observed event or censoring time
  int delta = 1;       // 1 = event observed
  std::vector<double> z;
  double weight = 1.0;
};

/// Immutable, column-major collection of observations.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<double> q, std::vector<double> x, std::vector<std::uint8_t> delta,
          std::vector<double> z, std::size_t dim, std::vector<double> weight,
          Censoring censoring, std::string label = {})
      : q_(std::move(q)),
        x_(std::move(x)),
        delta_(std::move(delta)),
        z_(std::move(z)),
        weight_(std::move(weight)),
        dim_(dim),
        censoring_(censoring),
        label_(std::move(label)) {
    if (weight_.empty()) weight_.assign(q_.size(), 1.0);
    validate();
  }

  static Dataset from_observations(const std::vector<Observation>& obs, std::size_t dim,
                                   Censoring censoring, std::string label = {}) {
    std::vector<double> q, x, z, w;
    std::vector<std::uint8_t> delta;
    q.reserve(obs.size());
    x.reserve(obs.size());
    w.reserve(obs.size());
    delta.reserve(obs.size());
    z.reserve(obs.size() * dim);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& o = obs[i];
      if (o.z.size() != dim) {
        fail(ErrorCode::kInvariantViolation,
             "row " + std::to_string(i + 1) + ": covariate dimension mismatch");
      }
      if (o.delta != 0 && o.delta != 1) {
        fail(ErrorCode::kInvariantViolation, "row " + std::to_string(i + 1) + ": bad delta");
      }
      q.push_back(o.q);
      x.push_back(o.x);
      delta.push_back(static_cast<std::uint8_t>(o.delta));
      w.push_back(o.weight);
      z.insert(z.end(), o.z.begin(), o.z.end());
    }
    return Dataset(std::move(q), std::move(x), std::move(delta), std::move(z), dim,
                   std::move(w), censoring, std::move(label));
  }

  std::size_t size() const noexcept { return q_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  Censoring censoring() const noexcept { return censoring_; }
  const std::string& label() const noexcept { return label_; }

  double q(std::size_t i) const { return q_[i]; }
  double x(std::size_t i) const { return x_[i]; }
  int delta(std::size_t i) const { return delta_[i]; }
  double weight(std::size_t i) const { return weight_[i]; }
  std::span<const double> z(std::size_t i) const { return {z_.data() + i * dim_, dim_}; }

  std::span<const double> q_column() const noexcept { return q_; }
  std::span<const double> x_column() const noexcept { return x_; }
  std::span<const std::uint8_t> delta_column() const noexcept { return delta_; }
  std::span<const double> weight_column() const noexcept { return weight_; }
  std::span<const double> z_matrix() const noexcept { return z_; }

  Observation observation(std::size_t i) const {
    auto zi = z(i);
    return {q_[i], x_[i], delta_[i], {zi.begin(), zi.end()}, weight_[i]};
  }

  double max_x() const { return *std::max_element(x_.begin(), x_.end()); }
  double min_q() const { return *std::min_element(q_.begin(), q_.end()); }
  double max_q() const { return *std::max_element(q_.begin(), q_.end()); }

  std::size_t event_count() const {
    return static_cast<std::size_t>(std::count(delta_.begin(), delta_.end(), 1));
  }

  /// Rows in the given order (repeats allowed, as in bootstrap resamples).
  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<double> q, x, zs, w;
    std::vector<std::uint8_t> d;
    q.reserve(rows.size());
    x.reserve(rows.size());
    w.reserve(rows.size());
    d.reserve(rows.size());
    zs.reserve(rows.size() * dim_);
    for (std::size_t i : rows) {
      q.push_back(q_[i]);
      x.push_back(x_[i]);
      d.push_back(delta_[i]);
      w.push_back(weight_[i]);
      auto zi = z(i);
      zs.insert(zs.end(), zi.begin(), zi.end());
    }
    return Dataset(std::move(q), std::move(x), std::move(d), std::move(zs), dim_, std::move(w),
                   censoring_, label_);
  }

  Dataset with_weights(std::vector<double> weights) const {
    Dataset out = *this;
    out.weight_ = std::move(weights);
    out.validate();
    return out;
  }

  Dataset with_censoring(Censoring c) const {
    Dataset out = *this;
    out.censoring_ = c;
    out.validate();
    return out;
  }

  /// Replaces the covariates, e.g. by a feature map.
  Dataset with_covariates(std::vector<double> z, std::size_t dim) const {
    Dataset out = *this;
    out.z_ = std::move(z);
    out.dim_ = dim;
    out.validate();
    return out;
  }

  std::vector<std::size_t> uncensored_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i) {
      if (delta_[i] == 1) rows.push_back(i);
    }
    return rows;
  }

 private:
  void validate() const {
    const std::size_t n = q_.size();
    if (n == 0) fail(ErrorCode::kInvariantViolation, "dataset is empty");
    if (x_.size() != n || delta_.size() != n || weight_.size() != n || z_.size() != n * dim_) {
      fail(ErrorCode::kInvariantViolation, "column lengths disagree");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::string row = "row " + std::to_string(i + 1) + ": ";
      if (!std::isfinite(q_[i]) || !std::isfinite(x_[i])) {
        fail(ErrorCode::kInvariantViolation, row + "non-finite time");
      }
      if (!(x_[i] > 0.0)) fail(ErrorCode::kInvariantViolation, row + "x <= 0");
      if (!(q_[i] < x_[i])) fail(ErrorCode::kInvariantViolation, row + "q >= x");
      if (delta_[i] > 1) fail(ErrorCode::kInvariantViolation, row + "bad delta");
      if (censoring_ == Censoring::kNone && delta_[i] != 1) {
        fail(ErrorCode::kInvariantViolation, row + "bad delta (censoring tag is none)");
      }
      if (!std::isfinite(weight_[i]) || weight_[i] < 0.0) {
        fail(ErrorCode::kInvariantViolation, row + "negative weight");
      }
      for (std::size_t j = 0; j < dim_; ++j) {
        if (!std::isfinite(z_[i * dim_ + j])) {
          fail(ErrorCode::kInvariantViolation, row + "non-finite covariate");
        }
      }
    }
  }

  std::vector<double> q_, x_;
  std::vector<std::uint8_t> delta_;
  std::vector<double> z_;  // row-major n x dim
  std::vector<double> weight_;
  std::size_t dim_ = 0;
  Censoring censoring_ = Censoring::kNone;
  std::string label_;
};

// ---------------------------------------------------------------------------
// CSV

struct CsvSchema {
  std::string q_col = "q";
  std::string x_col = "x";
  std::string delta_col = "delta";
  /// Explicit covariate columns; when empty, columns named <z_prefix><digits>
  /// are picked up in numeric order.
  std::vector<std::string> z_cols;
  std::string z_prefix = "z";
  /// Optional; a column named "weight" is used when present and this is unset.
  std::optional<std::string> weight_col;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Decimal text with 12 significant digits (ties to even on the binary value).
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline Dataset load_dataset(std::istream& in, const CsvSchema& schema, Censoring censoring,
                            std::string label = {}) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kMissingColumn, "no header row");
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  auto require = [&](const std::string& name) {
    auto c = column(name);
    if (!c) fail(ErrorCode::kMissingColumn, "column '" + name + "' not found");
    return *c;
  };
  const std::size_t qc = require(schema.q_col);
  const std::size_t xc = require(schema.x_col);
  const std::size_t dc = require(schema.delta_col);

  std::vector<std::size_t> zc;
  if (!schema.z_cols.empty()) {
    for (const auto& name : schema.z_cols) zc.push_back(require(name));
  } else {
    std::vector<std::pair<long, std::size_t>> found;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const auto& h = header[c];
      if (h.size() > schema.z_prefix.size() && h.compare(0, schema.z_prefix.size(), schema.z_prefix) == 0 &&
          std::all_of(h.begin() + static_cast<long>(schema.z_prefix.size()), h.end(),
                      [](unsigned char ch) { return std::isdigit(ch); })) {
        found.emplace_back(std::stol(h.substr(schema.z_prefix.size())), c);
      }
    }
    std::sort(found.begin(), found.end());
    for (auto& [_, c] : found) zc.push_back(c);
  }
  std::optional<std::size_t> wc;
  if (schema.weight_col) {
    wc = require(*schema.weight_col);
  } else {
    wc = column("weight");
  }

  std::vector<double> q, x, z, w;
  std::vector<std::uint8_t> delta;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    auto num = [&](std::size_t c) {
      if (c >= cells.size()) {
        fail(ErrorCode::kNonNumericCell,
             "row " + std::to_string(row) + ", column '" + header[c] + "': missing cell");
      }
      auto v = detail::parse_double(cells[c]);
      if (!v) {
        fail(ErrorCode::kNonNumericCell, "row " + std::to_string(row) + ", column '" +
                                             header[c] + "': '" + cells[c] + "'");
      }
      return *v;
    };
    const double qi = num(qc), xi = num(xc), di = num(dc);
    if (!(qi < xi)) fail(ErrorCode::kInvariantViolation, "row " + std::to_string(row) + ": q >= x");
    if (di != 0.0 && di != 1.0) {
      fail(ErrorCode::kInvariantViolation, "row " + std::to_string(row) + ": bad delta");
    }
    const double wi = wc ? num(*wc) : 1.0;
    if (wi < 0.0) fail(ErrorCode::kInvariantViolation, "row " + std::to_string(row) + ": negative weight");
    q.push_back(qi);
    x.push_back(xi);
    delta.push_back(static_cast<std::uint8_t>(di));
    w.push_back(wi);
    for (std::size_t c : zc) z.push_back(num(c));
  }
  return Dataset(std::move(q), std::move(x), std::move(delta), std::move(z), zc.size(),
                 std::move(w), censoring, std::move(label));
}

inline Dataset load_dataset(std::string_view csv_text, const CsvSchema& schema,
                            Censoring censoring) {
  std::istringstream in{std::string(csv_text)};
  return load_dataset(in, schema, censoring);
}

/// Writes q,x,delta,z1..zd,weight. Inverse of load_dataset under the default schema.
inline void write_dataset(std::ostream& out, const Dataset& ds) {
  out << "q,x,delta";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",z" << (j + 1);
  out << ",weight\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << format_number(ds.q(i)) << ',' << format_number(ds.x(i)) << ',' << ds.delta(i);
    for (double v : ds.z(i)) out << ',' << format_number(v);
    out << ',' << format_number(ds.weight(i)) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Views

/// τ used for time reversal when none is given: max observed x plus one unit.
inline double default_tau(const Dataset& ds) { return ds.max_x() + 1.0; }

/// Maps (q, x) to (τ - x, τ - q). On the reversed scale the entry time is the
/// "event" and it is always observed, so every output row has delta = 1.
inline Dataset reverse_time(const Dataset& ds, double tau) {
  if (!(tau > ds.max_x())) {
    fail(ErrorCode::kTauTooSmall, "tau must exceed the largest observed time");
  }
  if (ds.censoring() == Censoring::kC2 && ds.event_count() != ds.size()) {
    fail(ErrorCode::kInvariantViolation,
         "reverse_time under c2 censoring takes the uncensored subset only");
  }
  const std::size_t n = ds.size();
  std::vector<double> q(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = tau - ds.x(i);
    x[i] = tau - ds.q(i);
  }
  return Dataset(std::move(q), std::move(x), std::vector<std::uint8_t>(n, 1),
                 {ds.z_matrix().begin(), ds.z_matrix().end()}, ds.dim(),
                 {ds.weight_column().begin(), ds.weight_column().end()}, Censoring::kNone,
                 ds.label());
}

/// Right-censored sample without truncation.
struct RightCensoredSample {
  std::vector<double> time;
  std::vector<std::uint8_t> event;
  std::vector<double> weight;
};

/// Residual-time view (x - q, 1 - delta) of a c2 dataset: the residual
/// censoring time D is the "event", right censored by T - Q.
inline RightCensoredSample residual_censoring_view(const Dataset& ds) {
  if (ds.censoring() != Censoring::kC2) {
    fail(ErrorCode::kWrongCensoringTag, "residual view requires censoring tag c2");
  }
  RightCensoredSample out;
  out.time.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.time.push_back(ds.x(i) - ds.q(i));
    out.event.push_back(static_cast<std::uint8_t>(1 - ds.delta(i)));
    out.weight.push_back(ds.weight(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
  std::vector<int> fold_of;  // 1..K
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> in_fold(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) rows.push_back(i);
    }
    return rows;
  }

  std::vector<std::size_t> out_of_fold(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != fold) rows.push_back(i);
    }
    return rows;
  }
};

/// Random permutation dealt round-robin into K folds.
inline FoldAssignment split_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    fail(ErrorCode::kBadK, "need 2 <= K <= n, got K=" + std::to_string(k));
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  CounterRng rng(derive_seed(seed, 0x666f6c6473ULL));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  FoldAssignment out;
  out.fold_of.assign(n, 0);
  out.k = k;
  out.seed = seed;
  for (std::size_t p = 0; p < n; ++p) {
    out.fold_of[perm[p]] = static_cast<int>(p % static_cast<std::size_t>(k)) + 1;
  }
  return out;
}

}  // namespace truncdr
