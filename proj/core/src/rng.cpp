#include "vqg/rng.hpp"

#include <limits>

#include "vqg/error.hpp"

namespace vqg {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::derive(std::uint64_t seed, std::string_view key) {
  return Rng(splitmix64(splitmix64(seed) ^ fnv1a64(key)));
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t key) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(~key)));
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_index: empty range");
  // Reject the top partial bucket (2^64 mod n values) so every residue is
  // equally likely.
  const std::uint64_t partial =
      (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
  std::uint64_t x = engine_();
  if (partial != 0) {
    const std::uint64_t limit = 0 - partial;
    while (x >= limit) x = engine_();
  }
  return x % n;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ValidationError("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
  if (span == std::numeric_limits<std::uint64_t>::max()) {
    return static_cast<std::int64_t>(engine_());
  }
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) +
                                   uniform_index(span + 1));
}

}  // namespace vqg
