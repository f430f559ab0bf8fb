// include/bxv/rng.h

// Copyright 2026  The bxv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>

namespace bxv {

/// Seeded random stream: xoshiro256++ uniforms (splitmix64-expanded seed)
/// with Box-Muller for normals.  The generator and the transform are fixed
/// so that a seed fully determines the draw sequence; Box-Muller uses no
/// rejection, so every normal consumes exactly one or zero uniform pairs.
/// Streams are single-owner; use fork() to derive independent child streams.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform in (0, 1], 53-bit resolution.  Never returns 0.
  double next_unit();

  /// Uniform integer in [0, n), n >= 1.  Fixed multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t n);

  /// Standard normal via Box-Muller; the paired variate is cached.
  double next_gaussian();

  /// Child stream derived from (original seed, tag).  Independent of how
  /// many draws were made on the parent, so fork(k) is reproducible.
  RngStream fork(std::uint64_t tag) const;

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bxv
