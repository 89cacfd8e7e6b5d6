#include "lces/pairing.h"

#include <json.hpp>
#include <unordered_set>
#include <utility>

#include "lces/error.h"
#include "lces/io.h"
#include "lces/random.h"

namespace lces {

std::size_t PairCapacity(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

PairPlan SamplePairs(const EssaySet& set, std::size_t m, std::uint64_t seed) {
  const std::size_t n = set.size();
  if (m == 0) throw DomainError("number of pairs must be at least 1");
  const std::size_t capacity = PairCapacity(n);
  if (m > capacity) throw CapacityError(m, capacity);

  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  chosen.reserve(m);

  if (m <= capacity / 2) {
    // Rejection sampling: a uniform ordered draw with a != b, folded to
    // a < b, is uniform over unordered pairs.
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2 * m);
    while (chosen.size() < m) {
      std::size_t a = rng.UniformInt(n);
      std::size_t b = rng.UniformInt(n - 1);
      if (b >= a) ++b;
      if (a > b) std::swap(a, b);
      if (seen.insert(static_cast<std::uint64_t>(a) * n + b).second) {
        chosen.emplace_back(a, b);
      }
    }
  } else {
    std::vector<std::pair<std::size_t, std::size_t>> all;
    all.reserve(capacity);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) all.emplace_back(a, b);
    }
    // Partial Fisher-Yates: the first m slots are a uniform m-subset.
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t pick = k + rng.UniformInt(capacity - k);
      std::swap(all[k], all[pick]);
    }
    chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
  }

  PairPlan plan;
  plan.seed = seed;
  plan.m = m;
  plan.pairs.reserve(m);
  for (auto [a, b] : chosen) {
    if (rng.Bernoulli(0.5)) std::swap(a, b);
    plan.pairs.push_back({set[a].id, set[b].id});
  }
  return plan;
}

std::string FormatPairPlanJsonl(const PairPlan& plan) {
  std::string out;
  for (const auto& pair : plan.pairs) {
    out += nlohmann::json{{"i", pair.i}, {"j", pair.j}}.dump();
    out += '\n';
  }
  return out;
}

void SavePairPlan(const PairPlan& plan, const std::filesystem::path& path) {
  WriteFileAtomic(path, FormatPairPlanJsonl(plan));
}

}  // namespace lces
