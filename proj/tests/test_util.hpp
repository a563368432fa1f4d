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

#include <cmath>
#include <cstdint>
#include <vector>

#include "truncdr/truncdr.hpp"

namespace truncdr::testing {

inline Dataset make_ds(std::vector<double> q, std::vector<double> x, std::vector<std::uint8_t> delta = {},
                       std::vector<double> z = {}, std::size_t dim = 0, Censoring c = Censoring::kNone) {
  if (delta.empty()) delta.assign(q.size(), 1);
  return Dataset(std::move(q), std::move(x), std::move(delta), std::move(z), dim, {}, c);
}

// Left-truncated sample with exponential-ish T depending on z and uniform Q.
// Times are continuous so ties have probability zero.
inline Dataset random_truncated(std::uint64_t seed, std::size_t n, std::size_t dim,
                                Censoring c = Censoring::kNone, double censor_rate = 0.0) {
  CounterRng rng(seed);
  std::vector<double> q, x, z;
  std::vector<std::uint8_t> delta;
  while (q.size() < n) {
    std::vector<double> zi(dim);
    double eta = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      zi[j] = 2.0 * rng.uniform() - 1.0;
      eta += (j % 2 == 0 ? 0.6 : -0.4) * zi[j];
    }
    const double t = 0.2 + -std::log(rng.uniform()) * 2.0 * std::exp(-eta);
    const double qi = 3.0 * rng.uniform() * std::exp(0.3 * eta);
    const double cens = censor_rate > 0.0 ? -std::log(rng.uniform()) / censor_rate : INFINITY;
    double xi = t;
    std::uint8_t d = 1;
    if (c == Censoring::kC1) {
      const double ci = 0.1 + cens;
      if (ci < t) xi = ci, d = 0;
      if (!(qi < xi)) continue;
    } else {
      if (!(qi < t)) continue;
      if (c == Censoring::kC2 && qi + cens < t) xi = qi + cens, d = 0;
    }
    q.push_back(qi);
    x.push_back(xi);
    delta.push_back(d);
    z.insert(z.end(), zi.begin(), zi.end());
  }
  return Dataset(std::move(q), std::move(x), std::move(delta), std::move(z), dim, {}, c);
}

}  // namespace truncdr::testing
