#include "lces/metrics.h"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <numeric>

#include "lces/error.h"
#include "lces/io.h"

namespace lces {

namespace {

std::size_t LevelIndex(double value, std::span<const double> level_set) {
  auto it = std::lower_bound(level_set.begin(), level_set.end(), value);
  if (it == level_set.end() || *it != value) {
    throw DomainError("value " + FormatDouble(value) + " is not in the level set");
  }
  return static_cast<std::size_t>(it - level_set.begin());
}

void CheckLengths(std::size_t a, std::size_t b) {
  if (a != b) throw DomainError("metric inputs differ in length");
  if (a < 2) throw DomainError("metrics need at least two items");
}

double GoldLabel(double gold_i, double gold_j) {
  if (gold_i > gold_j) return 1.0;
  if (gold_i < gold_j) return 0.0;
  return 0.5;
}

}  // namespace

double Qwk(std::span<const double> pred, std::span<const double> gold,
           std::span<const double> level_set) {
  CheckLengths(pred.size(), gold.size());
  for (std::size_t k = 1; k < level_set.size(); ++k) {
    if (!(level_set[k - 1] < level_set[k])) {
      throw DomainError("level set must be strictly ascending");
    }
  }
  const std::size_t levels = level_set.size();
  if (levels < 2) throw UndefinedMetricError("QWK needs at least two levels");

  std::vector<double> observed(levels * levels, 0.0);
  std::vector<double> pred_marginal(levels, 0.0);
  std::vector<double> gold_marginal(levels, 0.0);
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const std::size_t u = LevelIndex(pred[k], level_set);
    const std::size_t v = LevelIndex(gold[k], level_set);
    observed[u * levels + v] += inv_n;
    pred_marginal[u] += inv_n;
    gold_marginal[v] += inv_n;
  }
  const double denom_w = static_cast<double>((levels - 1) * (levels - 1));
  double weighted_observed = 0.0;
  double weighted_expected = 0.0;
  for (std::size_t u = 0; u < levels; ++u) {
    for (std::size_t v = 0; v < levels; ++v) {
      const double d = static_cast<double>(u) - static_cast<double>(v);
      const double w = d * d / denom_w;
      weighted_observed += w * observed[u * levels + v];
      weighted_expected += w * pred_marginal[u] * gold_marginal[v];
    }
  }
  if (weighted_expected == 0.0) {
    throw UndefinedMetricError("QWK undefined: both ratings concentrated on one level");
  }
  return 1.0 - weighted_observed / weighted_expected;
}

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    // Positions start..end-1 hold 1-based ranks start+1..end.
    const double average = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = average;
    start = end;
  }
  return ranks;
}

double Spearman(std::span<const double> pred, std::span<const double> gold) {
  CheckLengths(pred.size(), gold.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (!std::isfinite(pred[k]) || !std::isfinite(gold[k])) {
      throw DomainError("Spearman inputs must be finite");
    }
  }
  const auto rp = AverageRanks(pred);
  const auto rg = AverageRanks(gold);
  const double n = static_cast<double>(rp.size());
  const double mean = (n + 1.0) / 2.0;  // average ranks always sum to n(n+1)/2
  double cov = 0.0, var_p = 0.0, var_g = 0.0;
  for (std::size_t k = 0; k < rp.size(); ++k) {
    const double a = rp[k] - mean;
    const double b = rg[k] - mean;
    cov += a * b;
    var_p += a * a;
    var_g += b * b;
  }
  if (var_p == 0.0 || var_g == 0.0) {
    throw UndefinedMetricError("Spearman undefined: constant input");
  }
  return cov / std::sqrt(var_p * var_g);
}

double InconsistencyRate(std::span<const PairwiseRecord> records) {
  if (records.empty()) throw DomainError("no comparisons");
  std::size_t inconsistent = 0;
  for (const auto& r : records) {
    if (r.c_ij != 1.0 - r.c_ji) ++inconsistent;
  }
  return static_cast<double>(inconsistent) / static_cast<double>(records.size());
}

AgreementReport AgreementRate(std::span<const PairwiseRecord> records,
                              const EssaySet& gold_source) {
  if (records.empty()) throw DomainError("no comparisons");
  std::size_t all = 0, raw_all = 0, decisive = 0, decisive_hit = 0, raw_decisive_hit = 0;
  for (const auto& r : records) {
    const auto& a = gold_source.At(r.i);
    const auto& b = gold_source.At(r.j);
    if (!a.gold_score || !b.gold_score) {
      throw DomainError("agreement needs gold scores for " + r.i + " and " + r.j);
    }
    const double label = GoldLabel(*a.gold_score, *b.gold_score);
    const bool hit = r.c_tilde == label;
    const bool raw_hit = r.c_ij == label;
    all += hit;
    raw_all += raw_hit;
    if (label != 0.5) {
      ++decisive;
      decisive_hit += hit;
      raw_decisive_hit += raw_hit;
    }
  }
  const double n = static_cast<double>(records.size());
  AgreementReport report;
  report.debiased.all = static_cast<double>(all) / n;
  report.raw.all = static_cast<double>(raw_all) / n;
  if (decisive > 0) {
    report.debiased.excl_ties =
        static_cast<double>(decisive_hit) / static_cast<double>(decisive);
    report.raw.excl_ties =
        static_cast<double>(raw_decisive_hit) / static_cast<double>(decisive);
  }
  return report;
}

EvalReport Evaluate(const ConvertedScores& converted, const EssaySet& gold_source,
                    const RubricSpec& rubric) {
  EvalReport report;
  report.n = converted.ids.size();
  std::vector<double> gold;
  gold.reserve(report.n);
  for (const auto& id : converted.ids) {
    const auto& essay = gold_source.At(id);
    if (!essay.gold_score) throw DomainError("essay " + id + " has no gold score");
    gold.push_back(*essay.gold_score);
  }

  try {
    if (rubric.levels && converted.levels) {
      report.qwk = Qwk(*converted.levels, gold, *rubric.levels);
    } else if (rubric.has_categories()) {
      std::vector<double> pred_cat, gold_cat, level_set;
      for (std::size_t k = 0; k <= rubric.category_thresholds.size(); ++k) {
        level_set.push_back(static_cast<double>(k));
      }
      for (std::size_t k = 0; k < report.n; ++k) {
        pred_cat.push_back(
            static_cast<double>(CategoryIndex(converted.scaled[k], rubric.category_thresholds)));
        gold_cat.push_back(
            static_cast<double>(CategoryIndex(gold[k], rubric.category_thresholds)));
      }
      report.qwk = Qwk(pred_cat, gold_cat, level_set);
    } else {
      report.notes.push_back("qwk skipped: rubric has no discrete levels or categories");
    }
  } catch (const UndefinedMetricError& e) {
    report.notes.push_back(std::string("qwk undefined: ") + e.what());
  }

  try {
    report.spearman = Spearman(converted.latent, gold);
  } catch (const UndefinedMetricError& e) {
    report.notes.push_back(std::string("spearman undefined: ") + e.what());
  }
  return report;
}

void AddComparisonStats(EvalReport& report, std::span<const PairwiseRecord> records,
                        const EssaySet& gold_source) {
  if (records.empty()) return;
  report.inconsistency_rate = InconsistencyRate(records);
  AgreementReport agreement = AgreementRate(records, gold_source);
  report.agreement_all = agreement.debiased.all;
  report.agreement_excl_ties = agreement.debiased.excl_ties;
  report.raw_agreement_all = agreement.raw.all;
  report.raw_agreement_excl_ties = agreement.raw.excl_ties;
  if (!agreement.debiased.excl_ties) {
    report.notes.push_back("agreement_excl_ties undefined: every pair is a gold tie");
  }
}

std::string FormatEvalReportJson(const EvalReport& report) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json obj = {
      {"n", report.n},
      {"qwk", opt(report.qwk)},
      {"spearman", opt(report.spearman)},
      {"inconsistency_rate", opt(report.inconsistency_rate)},
      {"agreement_all", opt(report.agreement_all)},
      {"agreement_excl_ties", opt(report.agreement_excl_ties)},
      {"raw_agreement_all", opt(report.raw_agreement_all)},
      {"raw_agreement_excl_ties", opt(report.raw_agreement_excl_ties)},
      {"notes", report.notes},
  };
  return obj.dump(2) + "\n";
}

std::string FormatEvalReportTable(const EvalReport& report) {
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{:>10.4f}", *v) : fmt::format("{:>10}", "-");
  };
  std::string out;
  out += fmt::format("{:<24}{:>10}\n", "metric", "value");
  out += fmt::format("{:<24}{:>10}\n", "n", report.n);
  out += fmt::format("{:<24}{}\n", "qwk", cell(report.qwk));
  out += fmt::format("{:<24}{}\n", "spearman", cell(report.spearman));
  out += fmt::format("{:<24}{}\n", "inconsistency_rate", cell(report.inconsistency_rate));
  out += fmt::format("{:<24}{}\n", "agreement_all", cell(report.agreement_all));
  out += fmt::format("{:<24}{}\n", "agreement_excl_ties", cell(report.agreement_excl_ties));
  out += fmt::format("{:<24}{}\n", "raw_agreement_all", cell(report.raw_agreement_all));
  out += fmt::format("{:<24}{}\n", "raw_agreement_excl_ties",
                     cell(report.raw_agreement_excl_ties));
  for (const auto& note : report.notes) out += "note: " + note + "\n";
  return out;
}

}  // namespace lces
