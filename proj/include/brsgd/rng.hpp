/*
 * Copyright 2026 The BrSGD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace brsgd {

using Engine = std::mt19937_64;

// Stream tags keep the purposes that share a global seed apart.
enum class Stream : std::uint64_t {
  kByzantineSelection = 1,
  kAttack = 2,
  kWorkerData = 3,
  kTaskInstance = 4,
  kMinibatch = 5,
  kLemmaTrials = 6,
  kBench = 7,
};

namespace detail {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Seed of an independent stream keyed by (seed, stream, keys...), e.g.
// (global seed, kAttack, worker, round).
inline std::uint64_t DeriveSeed(std::uint64_t seed, Stream stream,
                                std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = detail::SplitMix64(seed ^ detail::SplitMix64(
                                                  static_cast<std::uint64_t>(stream)));
  for (std::uint64_t k : keys) h = detail::SplitMix64(h ^ detail::SplitMix64(k + 1));
  return h;
}

inline Engine MakeEngine(std::uint64_t seed, Stream stream,
                         std::initializer_list<std::uint64_t> keys = {}) {
  return Engine(DeriveSeed(seed, stream, keys));
}

}  // namespace brsgd
