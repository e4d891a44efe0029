// Copyright 2026 The picekit authors
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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace picekit {

/// Counter-based pseudo-random generator (Philox 4x32, 10 rounds).
///
/// Every output block is a pure function of (key, counter), so a stream can be
/// addressed at random and two streams with different counters never collide.
/// This is what makes Monte Carlo runs reproducible independently of how
/// trajectories are scheduled across threads: the stream for trajectory i is
/// keyed by (seed, i) and nothing else.
namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
  const std::array<std::uint32_t, 4> next = {
      static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
      static_cast<std::uint32_t>(p1),
      static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
      static_cast<std::uint32_t>(p0),
  };
  ctr = next;
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

inline std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t stream,
                                          std::uint64_t counter) {
  std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter),
      static_cast<std::uint32_t>(counter >> 32),
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(stream >> 32),
  };
  std::array<std::uint32_t, 2> k = {
      static_cast<std::uint32_t>(key),
      static_cast<std::uint32_t>(key >> 32),
  };
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, k);
  }
  return ctr;
}

}  // namespace philox

/// Stafford mix; spreads low-entropy user seeds over the whole key space.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Deterministic per-iteration seed schedule for adaptive sampling loops.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t iteration) {
  return mix_seed(base_seed ^ mix_seed(iteration + 1));
}

/// One random stream, addressed by (seed, stream index).
///
/// Draw order within a stream is part of the reproducibility contract: a
/// trajectory consumes its initial-state draws first, then one vector of
/// Gaussian increments per time step.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream)
      : key_(mix_seed(seed)), stream_(stream) {}

  /// Uniform double in the open interval (0, 1).
  double next_u01() {
    const auto b = philox::block(key_, stream_, counter_++);
    const std::uint64_t hi = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    return (static_cast<double>(hi >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

  /// Standard normal variate (Box-Muller, pairs cached).
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const auto b = philox::block(key_, stream_, counter_++);
    const std::uint64_t hi = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    const std::uint64_t lo = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
    const double u1 = (static_cast<double>(hi >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(lo >> 11) + 0.5) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace picekit
