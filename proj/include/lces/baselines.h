#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lces/core.h"

namespace lces {

struct BtConfig {
  int iterations = 2000;
  double learning_rate = 0.05;
  double tolerance = 1e-8;

  void Validate() const;
};

struct EloConfig {
  double k_factor = 32.0;
  double initial_rating = 1500.0;
  int passes = 1;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Bradley-Terry scores by gradient ascent on the mean log-likelihood, with
// scores re-centred to mean zero after every step. Essays without records
// score 0.
ScoreTable BtFit(const std::vector<PairwiseRecord>& records,
                 const std::vector<std::string>& essay_ids, const BtConfig& cfg,
                 TargetLabel label = TargetLabel::kDebiased);

// Elo probability that a player rated `r_i` beats one rated `r_j`.
double EloExpected(double r_i, double r_j);

// Sequential Elo updates over `passes` seeded shuffles of the records. Ties
// (0.5) are used directly as the outcome.
ScoreTable EloRun(const std::vector<PairwiseRecord>& records,
                  const std::vector<std::string>& essay_ids, const EloConfig& cfg,
                  TargetLabel label = TargetLabel::kDebiased);

}  // namespace lces
