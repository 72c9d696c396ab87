// Copyright 2026 The longdoc Authors
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

#ifndef LONGDOC_RNG_HPP_
#define LONGDOC_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "longdoc/real.hpp"

namespace longdoc::inline LONGDOC_ABI {

// Derives an independent 64-bit seed from a base seed and a stream tag
// (splitmix64 finalizer). Used to give every consumer its own stream so that
// adding a consumer never perturbs the others.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

// Bit-reproducible random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distribution transforms below are
// written out here because the standard library's are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();
  // Normal(mean, stddev) resampled until within mean +/- 2 stddev.
  double truncated_normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_RNG_HPP_
