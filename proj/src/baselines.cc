#include "lces/baselines.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <unordered_map>

#include "lces/error.h"
#include "lces/random.h"

namespace lces {

namespace {

struct IndexedRecord {
  std::size_t i;
  std::size_t j;
  double outcome;
};

std::vector<IndexedRecord> IndexRecords(const std::vector<PairwiseRecord>& records,
                                        const std::vector<std::string>& essay_ids,
                                        TargetLabel label) {
  if (records.empty()) throw DomainError("no comparisons to fit");
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(essay_ids.size());
  for (std::size_t k = 0; k < essay_ids.size(); ++k) {
    if (!index.emplace(essay_ids[k], k).second) {
      throw DomainError("duplicate essay id: " + essay_ids[k]);
    }
  }
  std::vector<IndexedRecord> out;
  out.reserve(records.size());
  for (const auto& record : records) {
    auto i = index.find(record.i);
    auto j = index.find(record.j);
    if (i == index.end() || j == index.end()) {
      throw DomainError("comparison refers to unknown essay " +
                        (i == index.end() ? record.i : record.j));
    }
    out.push_back({i->second, j->second, TargetOf(record, label)});
  }
  return out;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void BtConfig::Validate() const {
  if (iterations <= 0) throw DomainError("BT iterations must be positive");
  if (!(learning_rate > 0.0)) throw DomainError("BT learning_rate must be positive");
  if (!(tolerance > 0.0)) throw DomainError("BT tolerance must be positive");
}

void EloConfig::Validate() const {
  if (!(k_factor > 0.0)) throw DomainError("Elo k_factor must be positive");
  if (!std::isfinite(initial_rating)) throw DomainError("Elo initial_rating must be finite");
  if (passes <= 0) throw DomainError("Elo passes must be positive");
}

ScoreTable BtFit(const std::vector<PairwiseRecord>& records,
                 const std::vector<std::string>& essay_ids, const BtConfig& cfg,
                 TargetLabel label) {
  cfg.Validate();
  const auto indexed = IndexRecords(records, essay_ids, label);
  const std::size_t n = essay_ids.size();

  std::vector<bool> seen(n, false);
  for (const auto& r : indexed) seen[r.i] = seen[r.j] = true;
  const double seen_count = static_cast<double>(std::count(seen.begin(), seen.end(), true));

  std::vector<double> scores(n, 0.0);
  std::vector<double> grad(n);
  std::vector<double> next(n);
  const double inv_m = 1.0 / static_cast<double>(indexed.size());
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& r : indexed) {
      const double g = (r.outcome - Sigmoid(scores[r.i] - scores[r.j])) * inv_m;
      grad[r.i] += g;
      grad[r.j] -= g;
    }
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      next[k] = scores[k] + cfg.learning_rate * grad[k];
      if (seen[k]) mean += next[k];
    }
    mean /= seen_count;
    double max_step = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!seen[k]) continue;
      next[k] -= mean;
      max_step = std::max(max_step, std::abs(next[k] - scores[k]));
    }
    scores.swap(next);
    if (max_step < cfg.tolerance) break;
  }
  return ScoreTable(ScoreMethod::kBradleyTerry, essay_ids, std::move(scores));
}

double EloExpected(double r_i, double r_j) {
  return 1.0 / (1.0 + std::pow(10.0, (r_j - r_i) / 400.0));
}

ScoreTable EloRun(const std::vector<PairwiseRecord>& records,
                  const std::vector<std::string>& essay_ids, const EloConfig& cfg,
                  TargetLabel label) {
  cfg.Validate();
  const auto indexed = IndexRecords(records, essay_ids, label);
  std::vector<double> ratings(essay_ids.size(), cfg.initial_rating);
  std::vector<std::size_t> order(indexed.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  for (int pass = 0; pass < cfg.passes; ++pass) {
    rng.Shuffle(std::span<std::size_t>(order));
    for (std::size_t k : order) {
      const auto& r = indexed[k];
      // The loser's change is the exact negation, so the sum is conserved.
      const double delta =
          cfg.k_factor * (r.outcome - EloExpected(ratings[r.i], ratings[r.j]));
      ratings[r.i] += delta;
      ratings[r.j] -= delta;
    }
  }
  return ScoreTable(ScoreMethod::kElo, essay_ids, std::move(ratings));
}

}  // namespace lces
