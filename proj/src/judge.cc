#include "lces/judge.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <json.hpp>
#include <optional>
#include <spdlog/spdlog.h>
#include <thread>

#include "http_client.h"
#include "lces/error.h"
#include "lces/io.h"

namespace lces {

using json = nlohmann::json;

namespace {

enum class Slot { kPrompt, kRubric, kEssay1, kEssay2 };

struct Placeholder {
  std::string_view token;
  Slot slot;
};

constexpr std::array<Placeholder, 4> kPlaceholders = {{
    {"<prompt>", Slot::kPrompt},
    {"<rubric>", Slot::kRubric},
    {"<essay1>", Slot::kEssay1},
    {"<essay2>", Slot::kEssay2},
}};

std::size_t CountOccurrences(std::string_view text, std::string_view token) {
  std::size_t count = 0;
  for (auto pos = text.find(token); pos != std::string_view::npos;
       pos = text.find(token, pos + token.size())) {
    ++count;
  }
  return count;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string system_text, std::string user_text)
    : system_text_(std::move(system_text)), user_text_(std::move(user_text)) {}

PromptTemplate PromptTemplate::Create(std::string system_text, std::string user_text) {
  for (const auto& placeholder : kPlaceholders) {
    std::size_t count = CountOccurrences(user_text, placeholder.token);
    if (count != 1) {
      throw TemplateError("user template must contain " +
                          std::string(placeholder.token) + " exactly once, found " +
                          std::to_string(count));
    }
  }
  return PromptTemplate(std::move(system_text), std::move(user_text));
}

PromptTemplate PromptTemplate::Load(const std::filesystem::path& system_path,
                                    const std::filesystem::path& user_path) {
  for (const auto& path : {system_path, user_path}) {
    if (!std::filesystem::is_regular_file(path)) {
      throw TemplateError("template file not found: " + path.string());
    }
  }
  try {
    return Create(ReadFile(system_path), ReadFile(user_path));
  } catch (const TemplateError& e) {
    throw TemplateError(user_path.string() + ": " + e.what());
  }
}

PromptTemplate PromptTemplate::LoadNamed(const std::filesystem::path& dir,
                                         std::string_view name) {
  const std::string base(name);
  return Load(dir / (base + "_system.txt"), dir / (base + "_user.txt"));
}

RenderedPrompt PromptTemplate::Render(std::string_view prompt, std::string_view rubric,
                                      const Essay& first, const Essay& second) const {
  RenderedPrompt out;
  out.system = system_text_;
  out.user.reserve(user_text_.size() + prompt.size() + rubric.size() +
                   first.text.size() + second.text.size());
  std::string_view text = user_text_;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find('<', pos);
    if (next == std::string_view::npos) {
      out.user.append(text.substr(pos));
      break;
    }
    out.user.append(text.substr(pos, next - pos));
    bool matched = false;
    for (const auto& placeholder : kPlaceholders) {
      if (text.substr(next, placeholder.token.size()) == placeholder.token) {
        switch (placeholder.slot) {
          case Slot::kPrompt:
            out.user.append(prompt);
            break;
          case Slot::kRubric:
            out.user.append(rubric);
            break;
          case Slot::kEssay1:
            out.user.append(first.text);
            break;
          case Slot::kEssay2:
            out.user.append(second.text);
            break;
        }
        pos = next + placeholder.token.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.user.push_back('<');
      pos = next + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verdict parsing

namespace {

// End (exclusive) of the brace-balanced span starting at `open`, honouring
// JSON string escapes; npos if unbalanced.
std::size_t MatchBrace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t k = open; k < text.size(); ++k) {
    char c = text[k];
    if (in_string) {
      if (c == '\\') {
        ++k;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return k + 1;
    }
  }
  return std::string_view::npos;
}

std::string Normalize(std::string value) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  value.erase(value.begin(), std::find_if(value.begin(), value.end(), not_space));
  value.erase(std::find_if(value.rbegin(), value.rend(), not_space).base(), value.end());
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return value;
}

}  // namespace

Verdict ParseVerdict(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos;
       open = raw.find('{', open + 1)) {
    std::size_t end = MatchBrace(raw, open);
    if (end == std::string_view::npos) continue;
    json obj = json::parse(raw.substr(open, end - open), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    auto it = obj.find("preference");
    if (it == obj.end()) continue;
    if (!it->is_string()) {
      throw VerdictParseError("preference is not a string", std::string(raw));
    }
    std::string preference = Normalize(it->get<std::string>());
    Verdict verdict;
    verdict.raw = std::string(raw);
    if (auto r = obj.find("reasoning"); r != obj.end() && r->is_string()) {
      verdict.reasoning = r->get<std::string>();
    }
    if (preference == "essay1") {
      verdict.label = VerdictLabel::kEssay1;
    } else if (preference == "essay2") {
      verdict.label = VerdictLabel::kEssay2;
    } else if (preference == "tie") {
      verdict.label = VerdictLabel::kTie;
    } else {
      throw VerdictParseError("unknown preference '" + it->get<std::string>() + "'",
                              std::string(raw));
    }
    return verdict;
  }
  throw VerdictParseError("no JSON object with a preference field", std::string(raw));
}

// ---------------------------------------------------------------------------
// Simulated judge

void SimJudgeConfig::Validate() const {
  if (!(tie_margin >= 0.0) || !std::isfinite(tie_margin)) {
    throw DomainError("tie_margin must be a finite non-negative number");
  }
  if (!(flip_prob >= 0.0 && flip_prob < 1.0)) {
    throw DomainError("flip_prob must lie in [0, 1)");
  }
  if (!(position_bias >= 0.0 && position_bias <= 1.0)) {
    throw DomainError("position_bias must lie in [0, 1]");
  }
}

VerdictLabel SimulateVerdict(double gold_first, double gold_second,
                             const SimJudgeConfig& cfg, Rng& rng) {
  if (rng.Uniform() < cfg.position_bias) return VerdictLabel::kEssay1;
  if (std::abs(gold_first - gold_second) <= cfg.tie_margin) return VerdictLabel::kTie;
  const bool first_better = gold_first > gold_second;
  const bool flipped = rng.Uniform() < cfg.flip_prob;
  return first_better != flipped ? VerdictLabel::kEssay1 : VerdictLabel::kEssay2;
}

SimulatedJudge::SimulatedJudge(SimJudgeConfig cfg) : cfg_(cfg) { cfg_.Validate(); }

std::string SimulatedJudge::id() const {
  return "sim(tau=" + FormatDouble(cfg_.tie_margin) + ",eps=" + FormatDouble(cfg_.flip_prob) +
         ",beta=" + FormatDouble(cfg_.position_bias) + ",seed=" + std::to_string(cfg_.seed) +
         ")";
}

std::string SimulatedJudge::Complete(const JudgeQuery& query) const {
  if (!query.first.gold_score || !query.second.gold_score) {
    throw DomainError("simulated judge needs gold scores for " + query.first.id + " and " +
                      query.second.id);
  }
  Rng rng(MixSeed(cfg_.seed,
                  MixSeed(Fnv1a64(query.first.id), Fnv1a64(query.second.id))));
  VerdictLabel label =
      SimulateVerdict(*query.first.gold_score, *query.second.gold_score, cfg_, rng);
  json response = {{"reasoning", "simulated judgement"},
                   {"preference", VerdictLabelName(label)}};
  return response.dump();
}

// ---------------------------------------------------------------------------
// Remote judge

RemoteJudge::RemoteJudge(RemoteJudgeConfig cfg) : cfg_(std::move(cfg)) {}

std::string RemoteJudge::id() const { return "remote:" + cfg_.model; }

std::string RemoteJudge::Complete(const JudgeQuery& query) const {
  json request = {
      {"model", cfg_.model},
      {"temperature", cfg_.temperature},
      {"messages",
       json::array({{{"role", "system"}, {"content", query.prompt.system}},
                    {{"role", "user"}, {"content", query.prompt.user}}})},
  };
  std::string body = internal::PostJson(cfg_.base_url, "/chat/completions", request.dump(),
                                        cfg_.api_key_env, cfg_.timeout_seconds);
  json response = json::parse(body, nullptr, false);
  if (response.is_discarded()) throw RemoteError("chat completion response is not JSON");
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw RemoteError(std::string("unexpected chat completion response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

Verdict QueryWithRetries(const Judge& judge, const JudgeQuery& query, int max_attempts,
                         const EssayPair& pair) {
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      return ParseVerdict(judge.Complete(query));
    } catch (const VerdictParseError& e) {
      last_error = e.what();
    } catch (const RemoteError& e) {
      last_error = e.what();
    }
    spdlog::debug("judge attempt {}/{} for ({}, {}) failed: {}", attempt, max_attempts,
                  pair.i, pair.j, last_error);
  }
  throw JudgeError("pair (" + pair.i + ", " + pair.j + ") failed after " +
                   std::to_string(max_attempts) + " attempts: " + last_error);
}

}  // namespace

PairwiseRecord ComparePair(const Judge& judge, const EssaySet& set,
                           const PromptTemplate& tmpl, const EssayPair& pair,
                           int max_attempts) {
  if (max_attempts < 1) throw DomainError("max_attempts must be positive");
  const Essay& a = set.At(pair.i);
  const Essay& b = set.At(pair.j);
  if (a.id == b.id) throw DomainError("cannot compare essay " + a.id + " with itself");

  RenderedPrompt forward = tmpl.Render(set.prompt_text(), set.rubric_text(), a, b);
  Verdict fwd = QueryWithRetries(judge, {forward, a, b}, max_attempts, pair);
  RenderedPrompt reverse = tmpl.Render(set.prompt_text(), set.rubric_text(), b, a);
  Verdict rev = QueryWithRetries(judge, {reverse, b, a}, max_attempts, pair);

  PairwiseRecord record;
  record.i = a.id;
  record.j = b.id;
  record.c_ij = LabelToNumeric(fwd.label);
  record.c_ji = LabelToNumeric(rev.label);
  record.c_tilde = Debias(record.c_ij, record.c_ji);
  record.judge_id = judge.id();
  record.reasoning_fwd = fwd.reasoning;
  record.reasoning_rev = rev.reasoning;
  return record;
}

ComparisonRun GenerateComparisons(const Judge& judge, const EssaySet& set,
                                  const PromptTemplate& tmpl, const PairPlan& plan,
                                  const CompareOptions& options) {
  const std::size_t total = plan.pairs.size();
  std::vector<std::optional<PairwiseRecord>> results(total);
  std::vector<std::string> failures(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    while (!abort.load()) {
      std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      try {
        results[k] = ComparePair(judge, set, tmpl, plan.pairs[k], options.max_attempts);
      } catch (const JudgeError& e) {
        failures[k] = e.what();
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
      }
    }
  };

  const std::size_t threads =
      std::max<std::size_t>(1, std::min(options.max_in_flight, total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  ComparisonRun run;
  run.requested = total;
  for (std::size_t k = 0; k < total; ++k) {
    if (results[k]) {
      run.records.push_back(std::move(*results[k]));
    } else {
      spdlog::warn("skipping pair ({}, {}): {}", plan.pairs[k].i, plan.pairs[k].j,
                   failures[k]);
      run.skipped.push_back({plan.pairs[k], failures[k]});
    }
  }
  return run;
}

}  // namespace lces
