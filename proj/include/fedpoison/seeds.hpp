#pragma once

#include <cstdint>
#include <string_view>

namespace fedpoison {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a of a purpose name; distinct names give distinct tags.
constexpr std::uint64_t purpose_tag(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed for (purpose, ids...) under a master seed: each word is folded in
/// with a golden-ratio increment and a SplitMix64 finalization.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t id0 = 0, std::uint64_t id1 = 0);

/// Every seed one experiment consumes.
struct SeedMap {
  std::uint64_t master;
  std::uint64_t init;
  std::uint64_t split;
  std::uint64_t partition;
  std::uint64_t attack;
  std::uint64_t synthetic;

  std::uint64_t local_holdout(std::uint32_t client) const;
  std::uint64_t training(std::uint32_t client, std::uint32_t round) const;
  std::uint64_t dp(std::uint32_t client, std::uint32_t round) const;
};

SeedMap derive_seeds(std::uint64_t master_seed);

}  // namespace fedpoison
