#include "lces/convert.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lces/error.h"
#include "lces/io.h"

namespace lces {

namespace {

std::vector<double> MapRange(const ScoreTable& table, const RubricSpec& rubric,
                             double s_min, double s_max) {
  rubric.Validate();
  if (table.size() == 0) throw DomainError("no scores to convert");
  std::vector<double> out;
  out.reserve(table.size());
  const double span = rubric.y_max - rubric.y_min;
  for (double s : table.scores()) {
    if (!std::isfinite(s)) throw DomainError("non-finite latent score");
    if (s_max == s_min) {
      out.push_back(0.5 * (rubric.y_min + rubric.y_max));
      continue;
    }
    if (s >= s_max) {
      out.push_back(rubric.y_max);
      continue;
    }
    double y = (s - s_min) / (s_max - s_min) * span + rubric.y_min;
    out.push_back(std::clamp(y, rubric.y_min, rubric.y_max));
  }
  return out;
}

std::string CsvField(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<double> ToScale(const ScoreTable& table, const RubricSpec& rubric) {
  if (table.size() == 0) throw DomainError("no scores to convert");
  auto [lo, hi] = std::minmax_element(table.scores().begin(), table.scores().end());
  return MapRange(table, rubric, *lo, *hi);
}

std::vector<double> ToScale(const ScoreTable& table, const RubricSpec& rubric,
                            std::pair<double, double> latent_range) {
  if (!std::isfinite(latent_range.first) || !std::isfinite(latent_range.second) ||
      latent_range.first > latent_range.second) {
    throw DomainError("invalid latent range");
  }
  return MapRange(table, rubric, latent_range.first, latent_range.second);
}

double RoundToLevels(double y, std::span<const double> levels) {
  if (levels.empty()) throw DomainError("no levels to round to");
  double best = levels.front();
  double best_dist = std::abs(y - best);
  for (double level : levels.subspan(1)) {
    const double dist = std::abs(y - level);
    // Ascending levels: an equal distance means a midpoint, take the higher.
    if (dist <= best_dist) {
      best = level;
      best_dist = dist;
    }
  }
  return best;
}

std::size_t CategoryIndex(double y, std::span<const double> thresholds) {
  return static_cast<std::size_t>(
      std::upper_bound(thresholds.begin(), thresholds.end(), y) - thresholds.begin());
}

const std::string& ToCategory(double y, std::span<const double> thresholds,
                              std::span<const std::string> names) {
  if (names.size() != thresholds.size() + 1) {
    throw DomainError("need one more category name than thresholds");
  }
  return names[CategoryIndex(y, thresholds)];
}

std::vector<int> ToRanking(const ScoreTable& table) {
  if (table.size() == 0) throw DomainError("no scores to rank");
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& scores = table.scores();
  const auto& ids = table.ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::vector<int> ranks(table.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r + 1);
  return ranks;
}

ConvertedScores Convert(const ScoreTable& table, const RubricSpec& rubric,
                        std::optional<std::pair<double, double>> latent_range) {
  ConvertedScores out;
  out.ids = table.ids();
  out.latent = table.scores();
  out.scaled = latent_range ? ToScale(table, rubric, *latent_range) : ToScale(table, rubric);
  if (rubric.levels) {
    std::vector<double> levels;
    levels.reserve(out.scaled.size());
    for (double y : out.scaled) levels.push_back(RoundToLevels(y, *rubric.levels));
    out.levels = std::move(levels);
  }
  if (rubric.has_categories()) {
    std::vector<std::string> categories;
    categories.reserve(out.scaled.size());
    for (double y : out.scaled) {
      categories.push_back(ToCategory(y, rubric.category_thresholds, rubric.category_names));
    }
    out.categories = std::move(categories);
  }
  out.ranks = ToRanking(table);
  return out;
}

std::string FormatConvertedCsv(const ConvertedScores& converted) {
  std::string out = "id,latent,score,level,category,rank\n";
  for (std::size_t k = 0; k < converted.ids.size(); ++k) {
    out += CsvField(converted.ids[k]);
    out += ',' + FormatDouble(converted.latent[k]);
    out += ',' + FormatDouble(converted.scaled[k]);
    out += ',';
    if (converted.levels) out += FormatDouble((*converted.levels)[k]);
    out += ',';
    if (converted.categories) out += CsvField((*converted.categories)[k]);
    out += ',' + std::to_string(converted.ranks[k]);
    out += '\n';
  }
  return out;
}

}  // namespace lces
