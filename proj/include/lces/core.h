#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lces {

struct Essay {
  std::string id;
  std::string prompt_id;
  std::string text;
  std::optional<double> gold_score;
  std::optional<std::vector<double>> embedding;

  bool operator==(const Essay&) const = default;
};

// Output scale of a rubric: a continuous range, optional discrete levels and
// optional named categories separated by thresholds.
struct RubricSpec {
  double y_min = 0.0;
  double y_max = 1.0;
  std::optional<std::vector<double>> levels;
  // k ascending thresholds split the scale into k + 1 named categories.
  std::vector<double> category_thresholds;
  std::vector<std::string> category_names;

  bool has_categories() const { return !category_thresholds.empty(); }
  void Validate() const;

  // Integer levels lo, lo+1, ..., hi.
  static RubricSpec IntegerLevels(int lo, int hi);
  // [1, 5] scale with low/medium/high split at 2.25 and 3.75.
  static RubricSpec LowMediumHigh();

  bool operator==(const RubricSpec&) const = default;
};

// Immutable collection of essays for one essay prompt. Ids are opaque and
// receive dense indices in input order.
class EssaySet {
 public:
  explicit EssaySet(std::vector<Essay> essays, std::string prompt_text = {},
                    std::string rubric_text = {}, RubricSpec rubric_spec = {});

  std::size_t size() const { return essays_.size(); }
  const std::vector<Essay>& essays() const { return essays_; }
  const Essay& operator[](std::size_t index) const { return essays_[index]; }
  const Essay& At(std::string_view id) const;
  std::optional<std::size_t> IndexOf(std::string_view id) const;
  bool Contains(std::string_view id) const { return IndexOf(id).has_value(); }

  const std::string& prompt_text() const { return prompt_text_; }
  const std::string& rubric_text() const { return rubric_text_; }
  const RubricSpec& rubric_spec() const { return rubric_spec_; }
  std::optional<std::size_t> embedding_dim() const { return embedding_dim_; }

  std::vector<std::string> MissingEmbeddingIds() const;
  // Throws MissingEmbeddingError listing every essay without an embedding.
  void RequireEmbeddings() const;
  // Throws DomainError listing essays without gold scores.
  void RequireGold() const;
  std::vector<double> GoldScores() const;

  EssaySet WithContext(std::string prompt_text, std::string rubric_text,
                       RubricSpec rubric_spec) const;
  // `embeddings` is aligned with essays().
  EssaySet WithEmbeddings(std::vector<std::vector<double>> embeddings) const;
  EssaySet Subset(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<Essay> essays_;
  std::string prompt_text_;
  std::string rubric_text_;
  RubricSpec rubric_spec_;
  std::optional<std::size_t> embedding_dim_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class EssayFormat { kCsv, kJsonl };

// Picks the format from the file extension (.csv or .jsonl/.json).
EssayFormat EssayFormatFromPath(const std::filesystem::path& path);

EssaySet LoadEssays(const std::filesystem::path& path, EssayFormat format);
EssaySet ParseEssaysCsv(std::string_view contents);
EssaySet ParseEssaysJsonl(std::string_view contents);
std::string FormatEssaysJsonl(const EssaySet& set);
void SaveEssaysJsonl(const EssaySet& set, const std::filesystem::path& path);

// One debiased comparison of essays i and j. c_ij comes from presenting
// (i, j), c_ji from presenting (j, i).
struct PairwiseRecord {
  std::string i;
  std::string j;
  double c_ij = 0.5;
  double c_ji = 0.5;
  double c_tilde = 0.5;
  std::string judge_id;
  std::optional<std::string> reasoning_fwd;
  std::optional<std::string> reasoning_rev;

  // Throws DomainError if ids coincide, a label is not in {0, 0.5, 1}, or
  // c_tilde disagrees with Debias(c_ij, c_ji).
  void Validate() const;

  bool operator==(const PairwiseRecord&) const = default;
};

std::string FormatComparisonsJsonl(const std::vector<PairwiseRecord>& records);
std::vector<PairwiseRecord> ParseComparisonsJsonl(std::string_view contents);
void SaveComparisons(const std::vector<PairwiseRecord>& records,
                     const std::filesystem::path& path);
std::vector<PairwiseRecord> LoadComparisons(const std::filesystem::path& path);

enum class ScoreMethod { kRankNet, kBradleyTerry, kElo };

std::string_view ScoreMethodName(ScoreMethod method);
// Accepts "ranknet", "bradley_terry" / "bt", "elo".
ScoreMethod ParseScoreMethod(std::string_view name);

// Latent scores keyed by essay id, in insertion order.
class ScoreTable {
 public:
  ScoreTable(ScoreMethod method, std::vector<std::string> ids,
             std::vector<double> scores);

  ScoreMethod method() const { return method_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& scores() const { return scores_; }
  double At(std::string_view id) const;

  // Throws DomainError if some id is not in `set`.
  void ValidateAgainst(const EssaySet& set) const;

  bool operator==(const ScoreTable&) const = default;

 private:
  ScoreMethod method_;
  std::vector<std::string> ids_;
  std::vector<double> scores_;
};

std::string FormatScoreTableJson(const ScoreTable& table);
ScoreTable ParseScoreTableJson(std::string_view contents);

}  // namespace lces

namespace lces {

// Which label of a record a scorer trains on. kForward uses the single
// first-order query c_ij and exists for the debiasing ablation.
enum class TargetLabel { kDebiased, kForward };

inline double TargetOf(const PairwiseRecord& record, TargetLabel label) {
  return label == TargetLabel::kDebiased ? record.c_tilde : record.c_ij;
}

}  // namespace lces
