#include "mfcp/rng.hpp"

#include <vector>

namespace mfcp {

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index) {
  std::vector<std::uint32_t> words;
  words.reserve(stream.size() + 5);
  words.push_back(static_cast<std::uint32_t>(master));
  words.push_back(static_cast<std::uint32_t>(master >> 32));
  words.push_back(static_cast<std::uint32_t>(index));
  words.push_back(static_cast<std::uint32_t>(index >> 32));
  words.push_back(static_cast<std::uint32_t>(stream.size()));
  for (char c : stream) words.push_back(static_cast<unsigned char>(c));

  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace mfcp
