#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lces/core.h"

namespace lces {

struct EssayPair {
  std::string i;
  std::string j;

  bool operator==(const EssayPair&) const = default;
};

// M unordered pairs, each stored in a randomly chosen orientation.
struct PairPlan {
  std::vector<EssayPair> pairs;
  std::uint64_t seed = 0;
  std::size_t m = 0;
};

// N (N - 1) / 2.
std::size_t PairCapacity(std::size_t n);

// Draws `m` distinct unordered pairs uniformly without replacement, then
// orients each with a fair coin. Deterministic in (set order, m, seed).
// Throws DomainError for m == 0 and CapacityError when m > PairCapacity(N).
PairPlan SamplePairs(const EssaySet& set, std::size_t m, std::uint64_t seed);

std::string FormatPairPlanJsonl(const PairPlan& plan);
void SavePairPlan(const PairPlan& plan, const std::filesystem::path& path);

}  // namespace lces
