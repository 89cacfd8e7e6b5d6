#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lces/core.h"

namespace lces {

// Maps latent scores linearly onto [y_min, y_max] using the table's own
// min / max. All-equal scores map to the scale midpoint. Result is aligned
// with table.ids().
std::vector<double> ToScale(const ScoreTable& table, const RubricSpec& rubric);

// Same, but with an externally fixed latent range (e.g. the training essays
// when scoring unseen ones); values outside it are clamped to the scale.
std::vector<double> ToScale(const ScoreTable& table, const RubricSpec& rubric,
                            std::pair<double, double> latent_range);

// Nearest level; an exact midpoint goes to the higher level.
double RoundToLevels(double y, std::span<const double> levels);

// Index of the category containing y: y < t[0] -> 0, t[k-1] <= y < t[k] -> k.
std::size_t CategoryIndex(double y, std::span<const double> thresholds);
const std::string& ToCategory(double y, std::span<const double> thresholds,
                              std::span<const std::string> names);

// Rank 1 for the highest score; equal scores ordered by ascending id.
// Aligned with table.ids().
std::vector<int> ToRanking(const ScoreTable& table);

struct ConvertedScores {
  std::vector<std::string> ids;
  std::vector<double> latent;
  std::vector<double> scaled;
  std::optional<std::vector<double>> levels;
  std::optional<std::vector<std::string>> categories;
  std::vector<int> ranks;
};

ConvertedScores Convert(
    const ScoreTable& table, const RubricSpec& rubric,
    std::optional<std::pair<double, double>> latent_range = std::nullopt);

// CSV with header id,latent,score,level,category,rank. Absent level or
// category columns are left empty.
std::string FormatConvertedCsv(const ConvertedScores& converted);

}  // namespace lces
