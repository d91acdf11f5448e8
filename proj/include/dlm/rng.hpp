// Copyright 2026 The dlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DLM_RNG_HPP
#define DLM_RNG_HPP

#include <cstdint>
#include <span>
#include <utility>

namespace dlm {

// xoshiro256** seeded through splitmix64. All sampling helpers are
// implemented here rather than through <random> distributions, whose output
// is implementation defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed);

  // Derive an independent stream, e.g. one per training phase.
  Rng fork(std::uint64_t salt) const;

  std::uint64_t next_u64();

  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; caches the second variate.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4] = {0, 0, 0, 0};
  std::uint64_t seed_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

// Stable 64-bit mix of two values; used to derive per-purpose seeds.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace dlm

#endif  // DLM_RNG_HPP
