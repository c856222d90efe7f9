// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "flsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace flsim::rng {

Stream::Stream(std::uint64_t seed, std::string_view label, std::uint64_t a,
               std::uint64_t b) {
  std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  k = mix64(k ^ label_hash(label));
  k = mix64(k ^ (a + 0x3c6ef372fe94f82bULL));
  k = mix64(k ^ (b + 0xa54ff53a5f1d36f1ULL));
  key_ = k;
}

std::uint64_t Stream::below(std::uint64_t n) {
  // Lemire-style rejection on the low threshold keeps the draw unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Stream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Stream::gamma(double shape) {
  if (shape < 1.0) {
    const double u = 1.0 - uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> dirichlet(Stream& stream, double alpha, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (auto& x : p) {
    x = stream.gamma(alpha);
    sum += x;
  }
  if (!(sum > 0.0)) {
    // All gamma draws underflowed; only reachable for tiny alpha.
    for (auto& x : p) x = 1.0 / n;
    return p;
  }
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace flsim::rng
