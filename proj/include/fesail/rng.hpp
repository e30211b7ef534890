// Copyright 2026 The FeSAIL Authors.
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

#ifndef FESAIL_RNG_HPP_
#define FESAIL_RNG_HPP_

#include <cstdint>
#include <random>

namespace fesail {

// Stream tags for fanning one run seed out to independent generators.
enum class SeedStream : std::uint64_t {
  kData = 1,
  kInit = 2,
  kShuffle = 3,
  kRandomSample = 4,
  kEmbeddingRow = 5,
};

// splitmix64 finalizer.
constexpr std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t DeriveSeed(std::uint64_t root, SeedStream stream,
                                   std::uint64_t index = 0) {
  return MixSeed(MixSeed(root ^ MixSeed(static_cast<std::uint64_t>(stream))) +
                 index);
}

using Rng = std::mt19937_64;

inline Rng MakeRng(std::uint64_t root, SeedStream stream,
                   std::uint64_t index = 0) {
  return Rng(DeriveSeed(root, stream, index));
}

}  // namespace fesail

#endif  // FESAIL_RNG_HPP_
