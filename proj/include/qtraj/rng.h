// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRAJ_RNG_H
#define QTRAJ_RNG_H

#include <cstdint>
#include <random>

namespace qtraj {

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for (seed, stream_id). Used per shot so that generation
/// order does not affect results. Seeding through std::seed_seq with
/// consecutive ids gave visibly correlated first draws, hence the hash.
inline std::mt19937_64 shot_rng(std::uint64_t seed, std::uint64_t stream_id) {
    return std::mt19937_64(mix64(mix64(seed) ^ stream_id));
}

}  // namespace qtraj

#endif
