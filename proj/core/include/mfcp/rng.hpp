#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mfcp {

using Engine = std::mt19937_64;

/// Derives an independent sub-seed from a master seed, a stream name and an
/// index. Streams with different (name, index) never share state, so adding
/// a consumer does not shift the draws seen by any other consumer.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index = 0);

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

inline Engine make_engine(std::uint64_t master, std::string_view stream,
                          std::uint64_t index = 0) {
  return Engine(derive_seed(master, stream, index));
}

}  // namespace mfcp
