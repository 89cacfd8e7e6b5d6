#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lces/convert.h"
#include "lces/core.h"

namespace lces {

// Quadratic weighted kappa over the declared level set. Every value must be a
// member of `level_set`. Throws UndefinedMetricError when the expected
// weighted disagreement is zero.
double Qwk(std::span<const double> pred, std::span<const double> gold,
           std::span<const double> level_set);

// 1-based ranks with ties sharing their average rank.
std::vector<double> AverageRanks(std::span<const double> values);

// Pearson correlation of average ranks. Throws UndefinedMetricError when
// either side is constant.
double Spearman(std::span<const double> pred, std::span<const double> gold);

// Fraction of records whose two presentation orders disagree.
double InconsistencyRate(std::span<const PairwiseRecord> records);

struct AgreementRates {
  double all = 0.0;
  std::optional<double> excl_ties;  // undefined when every pair is a gold tie
};

struct AgreementReport {
  AgreementRates debiased;  // c_tilde vs gold
  AgreementRates raw;       // c_ij vs gold
};

// Gold label per pair is 1 / 0 / 0.5 by comparing gold scores.
AgreementReport AgreementRate(std::span<const PairwiseRecord> records,
                              const EssaySet& gold_source);

struct EvalReport {
  std::size_t n = 0;
  std::optional<double> qwk;
  std::optional<double> spearman;
  std::optional<double> inconsistency_rate;
  std::optional<double> agreement_all;
  std::optional<double> agreement_excl_ties;
  std::optional<double> raw_agreement_all;
  std::optional<double> raw_agreement_excl_ties;
  std::vector<std::string> notes;
};

// QWK on discrete outputs against gold under `rubric`: levels when the rubric
// has them, else categories (gold mapped through the same thresholds); no
// QWK for a purely continuous rubric. Spearman on the scaled scores.
// Undefined metrics are left empty and explained in `notes`.
EvalReport Evaluate(const ConvertedScores& converted, const EssaySet& gold_source,
                    const RubricSpec& rubric);

// Adds inconsistency and agreement rates from the comparison records.
void AddComparisonStats(EvalReport& report,
                        std::span<const PairwiseRecord> records,
                        const EssaySet& gold_source);

std::string FormatEvalReportJson(const EvalReport& report);
std::string FormatEvalReportTable(const EvalReport& report);

}  // namespace lces
