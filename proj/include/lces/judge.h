#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lces/core.h"
#include "lces/labels.h"
#include "lces/pairing.h"
#include "lces/random.h"

namespace lces {

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// System message plus a user message containing each of <prompt>, <rubric>,
// <essay1> and <essay2> exactly once.
class PromptTemplate {
 public:
  // Throws TemplateError if a placeholder is missing or repeated.
  static PromptTemplate Create(std::string system_text, std::string user_text);
  static PromptTemplate Load(const std::filesystem::path& system_path,
                             const std::filesystem::path& user_path);
  // Loads "<dir>/<name>_system.txt" and "<dir>/<name>_user.txt".
  static PromptTemplate LoadNamed(const std::filesystem::path& dir,
                                  std::string_view name);

  const std::string& system_text() const { return system_text_; }
  const std::string& user_text() const { return user_text_; }

  // Substitutes in a single pass, so placeholder-like text inside an essay is
  // left alone.
  RenderedPrompt Render(std::string_view prompt, std::string_view rubric,
                        const Essay& first, const Essay& second) const;

 private:
  PromptTemplate(std::string system_text, std::string user_text);

  std::string system_text_;
  std::string user_text_;
};

struct Verdict {
  VerdictLabel label = VerdictLabel::kTie;
  std::string reasoning;
  std::string raw;
};

// Extracts the first well-formed JSON object carrying a "preference" key and
// maps "essay1" / "essay2" / "tie" (any case). Throws VerdictParseError.
Verdict ParseVerdict(std::string_view raw);

struct JudgeQuery {
  const RenderedPrompt& prompt;
  const Essay& first;
  const Essay& second;
};

// Produces the raw response text for one presentation order. Implementations
// must be safe to call concurrently.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string id() const = 0;
  virtual std::string Complete(const JudgeQuery& query) const = 0;
};

struct SimJudgeConfig {
  double tie_margin = 0.0;     // tau, gold-score units
  double flip_prob = 0.0;      // epsilon
  double position_bias = 0.0;  // beta, probability of picking slot 1 outright
  std::uint64_t seed = 0;

  void Validate() const;
};

// With probability position_bias returns kEssay1. Otherwise a gold gap within
// tie_margin is a tie, and the higher-gold slot wins unless flipped with
// probability flip_prob. Draws one uniform for the bias check and, when the
// gap exceeds the margin, one more for the flip.
VerdictLabel SimulateVerdict(double gold_first, double gold_second,
                             const SimJudgeConfig& cfg, Rng& rng);

// Deterministic judge driven by gold scores. Each query's randomness derives
// from (seed, first id, second id) so results do not depend on call order.
class SimulatedJudge : public Judge {
 public:
  explicit SimulatedJudge(SimJudgeConfig cfg);
  std::string id() const override;
  std::string Complete(const JudgeQuery& query) const override;
  const SimJudgeConfig& config() const { return cfg_; }

 private:
  SimJudgeConfig cfg_;
};

struct RemoteJudgeConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.1;
  int timeout_seconds = 120;
};

// OpenAI-compatible chat-completion client (POST <base_url>/chat/completions).
class RemoteJudge : public Judge {
 public:
  explicit RemoteJudge(RemoteJudgeConfig cfg);
  std::string id() const override;
  std::string Complete(const JudgeQuery& query) const override;

 private:
  RemoteJudgeConfig cfg_;
};

struct CompareOptions {
  int max_attempts = 3;
  std::size_t max_in_flight = 1;
};

// Queries the judge as (i, j) and then as (j, i), retrying each query on
// parse or transport failure. Throws Error once attempts are exhausted.
PairwiseRecord ComparePair(const Judge& judge, const EssaySet& set,
                           const PromptTemplate& tmpl, const EssayPair& pair,
                           int max_attempts = 3);

struct SkippedPair {
  EssayPair pair;
  std::string reason;
};

struct ComparisonRun {
  std::vector<PairwiseRecord> records;  // in plan order, skips removed
  std::vector<SkippedPair> skipped;
  std::size_t requested = 0;

  double skip_rate() const {
    return requested == 0 ? 0.0
                          : static_cast<double>(skipped.size()) /
                                static_cast<double>(requested);
  }
};

// Runs ComparePair over the plan with at most `max_in_flight` concurrent
// pairs. Failed pairs are logged and skipped.
ComparisonRun GenerateComparisons(const Judge& judge, const EssaySet& set,
                                  const PromptTemplate& tmpl,
                                  const PairPlan& plan,
                                  const CompareOptions& options = {});

}  // namespace lces
