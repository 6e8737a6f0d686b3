#include "fedpoison/seeds.hpp"

namespace fedpoison {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t id0, std::uint64_t id1) {
  std::uint64_t h = mix64(master + kGolden);
  for (std::uint64_t word : {tag, id0, id1}) h = mix64(h ^ (word + kGolden));
  return h;
}

SeedMap derive_seeds(std::uint64_t master_seed) {
  return SeedMap{master_seed,
                 derive_seed(master_seed, purpose_tag("init")),
                 derive_seed(master_seed, purpose_tag("split")),
                 derive_seed(master_seed, purpose_tag("partition")),
                 derive_seed(master_seed, purpose_tag("attack")),
                 derive_seed(master_seed, purpose_tag("synthetic"))};
}

std::uint64_t SeedMap::local_holdout(std::uint32_t client) const {
  return derive_seed(master, purpose_tag("holdout"), client);
}

std::uint64_t SeedMap::training(std::uint32_t client, std::uint32_t round) const {
  return derive_seed(master, purpose_tag("train"), client, round);
}

std::uint64_t SeedMap::dp(std::uint32_t client, std::uint32_t round) const {
  return derive_seed(master, purpose_tag("dp"), client, round);
}

}  // namespace fedpoison
