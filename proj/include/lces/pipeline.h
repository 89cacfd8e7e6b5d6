#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lces/baselines.h"
#include "lces/convert.h"
#include "lces/core.h"
#include "lces/judge.h"
#include "lces/metrics.h"
#include "lces/ranknet.h"

namespace lces {

struct JudgeSettings {
  enum class Kind { kSimulated, kRemote };
  Kind kind = Kind::kSimulated;
  SimJudgeConfig sim;
  RemoteJudgeConfig remote;
  // Named template pair under template_dir, or explicit files. The simulated
  // judge runs without a template when none is configured.
  std::optional<std::filesystem::path> template_dir;
  std::optional<std::string> template_name;
  std::optional<std::filesystem::path> system_template;
  std::optional<std::filesystem::path> user_template;
  CompareOptions compare;
};

struct GenerateConfig {
  std::filesystem::path essays;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> prompt_file;
  std::optional<std::filesystem::path> rubric_file;
  JudgeSettings judge;
  std::size_t pairs = 5000;
  std::uint64_t seed = 0;
  double max_skip_rate = 0.1;
};

struct GenerateSummary {
  std::string judge_id;
  std::string config_hash;
  std::size_t requested = 0;
  std::size_t produced = 0;
  std::size_t skipped = 0;
  std::optional<double> inconsistency_rate;
  bool skip_limit_exceeded = false;
};

// Samples pairs, queries the judge and writes comparisons.jsonl, pairs.jsonl
// and generate_manifest.json into out_dir. Throws TemplateError before any
// judge call when a remote judge has no usable template.
GenerateSummary CmdGenerate(const GenerateConfig& cfg);

struct FitSettings {
  TrainConfig train;
  BtConfig bt;
  EloConfig elo;
  TargetLabel label = TargetLabel::kDebiased;
};

// Fits one scoring method on `records`. For RankNet the trained model is
// written to `model_out` when given.
ScoreTable FitScores(ScoreMethod method, const EssaySet& set,
                     const std::vector<PairwiseRecord>& records,
                     const FitSettings& fit, RankNetModel* model_out = nullptr);

struct EssaySplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

// Seeded random split; heldout gets round(n * heldout_fraction) essays.
EssaySplit SplitEssays(std::size_t n, double heldout_fraction, std::uint64_t seed);

// Records whose two essays are both in `set`.
std::vector<PairwiseRecord> RestrictRecords(const std::vector<PairwiseRecord>& records,
                                            const EssaySet& set);

struct ScoreConfig {
  std::filesystem::path essays;
  std::filesystem::path comparisons;
  std::filesystem::path out_dir;
  ScoreMethod method = ScoreMethod::kRankNet;
  FitSettings fit;
  RubricSpec rubric;
  // Fraction of essays held out of training and scored inductively.
  std::optional<double> inductive_split;
  std::uint64_t split_seed = 0;
};

struct ScoreSummary {
  ScoreTable scores;
  ConvertedScores converted;
  std::optional<EvalReport> report;
  std::optional<EvalReport> heldout_report;
  std::string config_hash;
};

// Fits, converts and (with gold available) evaluates. Writes scores.json,
// converted.csv, eval.json, model.json (RankNet) and score_manifest.json.
// Rejects comparisons whose manifest names a different essay set.
ScoreSummary CmdScore(const ScoreConfig& cfg);

struct SweepConfig {
  std::vector<std::size_t> m_values;
  int repeats = 5;
  std::uint64_t base_seed = 0;
  SimJudgeConfig judge;
  FitSettings fit;
  RubricSpec rubric;
  std::vector<ScoreMethod> methods = {ScoreMethod::kRankNet,
                                      ScoreMethod::kBradleyTerry,
                                      ScoreMethod::kElo};
};

struct SweepRow {
  std::size_t m = 0;
  ScoreMethod method = ScoreMethod::kRankNet;
  std::uint64_t seed = 0;
  std::optional<double> qwk;
  std::optional<double> spearman;
};

// For each M and repeat seed: sample, judge with the simulator, fit every
// method on the same comparisons and evaluate against gold.
std::vector<SweepRow> RunSweep(const EssaySet& set, const SweepConfig& cfg);

// M,method,seed,qwk,spearman; undefined metrics are written as "undefined".
std::string FormatSweepCsv(const std::vector<SweepRow>& rows);

// Stable digest of essay ids, texts and gold scores. Embeddings are excluded
// so embedding an essay file keeps its identity.
std::string EssaySetDigest(const EssaySet& set);

}  // namespace lces
