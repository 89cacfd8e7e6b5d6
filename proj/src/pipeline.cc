#include "lces/pipeline.h"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <spdlog/spdlog.h>
#include <unordered_set>

#include "lces/error.h"
#include "lces/io.h"
#include "lces/pairing.h"
#include "lces/random.h"

namespace lces {

using json = nlohmann::json;

namespace {

constexpr char kGenerateManifest[] = "generate_manifest.json";
constexpr char kComparisonsFile[] = "comparisons.jsonl";

PromptTemplate PlainTemplate() {
  return PromptTemplate::Create("", "<prompt>\n\n<rubric>\n\n<essay1>\n\n<essay2>\n");
}

std::optional<PromptTemplate> ResolveTemplate(const JudgeSettings& judge) {
  if (judge.system_template || judge.user_template) {
    if (!judge.system_template || !judge.user_template) {
      throw TemplateError("both system and user template files are required");
    }
    return PromptTemplate::Load(*judge.system_template, *judge.user_template);
  }
  if (judge.template_name) {
    if (!judge.template_dir) throw TemplateError("template directory not configured");
    return PromptTemplate::LoadNamed(*judge.template_dir, *judge.template_name);
  }
  return std::nullopt;
}

json RubricJson(const RubricSpec& rubric) {
  return {{"y_min", rubric.y_min},
          {"y_max", rubric.y_max},
          {"levels", rubric.levels ? json(*rubric.levels) : json(nullptr)},
          {"category_thresholds", rubric.category_thresholds},
          {"category_names", rubric.category_names}};
}

json TrainJson(const TrainConfig& c) {
  return {{"epochs", c.epochs},           {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},   {"hidden_units", c.hidden_units},
          {"dropout_rate", c.dropout_rate}, {"weight_decay", c.weight_decay},
          {"seed", c.seed}};
}

json FitJson(const FitSettings& fit) {
  return {{"train", TrainJson(fit.train)},
          {"bt",
           {{"iterations", fit.bt.iterations},
            {"learning_rate", fit.bt.learning_rate},
            {"tolerance", fit.bt.tolerance}}},
          {"elo",
           {{"k_factor", fit.elo.k_factor},
            {"initial_rating", fit.elo.initial_rating},
            {"passes", fit.elo.passes},
            {"seed", fit.elo.seed}}},
          {"label", fit.label == TargetLabel::kDebiased ? "debiased" : "forward"}};
}

std::string ReadOptional(const std::optional<std::filesystem::path>& path) {
  return path ? ReadFile(*path) : std::string();
}

void WriteArtifact(const std::filesystem::path& dir, const std::string& name,
                   const std::string& contents, json& artifacts) {
  WriteFileAtomic(dir / name, contents);
  artifacts[name] = Sha256Hex(contents);
}

// Rejects comparisons produced for a different essay set, or altered after
// their manifest was written.
void CheckProvenance(const std::filesystem::path& comparisons_path,
                     const std::string& comparisons_sha, const std::string& essay_digest) {
  const auto manifest_path = comparisons_path.parent_path() / kGenerateManifest;
  if (!std::filesystem::is_regular_file(manifest_path)) {
    spdlog::warn("no {} next to {}; provenance not checked", kGenerateManifest,
                 comparisons_path.string());
    return;
  }
  json manifest = json::parse(ReadFile(manifest_path), nullptr, false);
  if (manifest.is_discarded()) throw ParseError(manifest_path.string() + ": invalid JSON");
  const auto name = comparisons_path.filename().string();
  const auto& artifacts = manifest.value("artifacts", json::object());
  if (!artifacts.contains(name)) {
    spdlog::warn("{} does not list {}; provenance not checked", manifest_path.string(), name);
    return;
  }
  if (artifacts.at(name).get<std::string>() != comparisons_sha) {
    throw DomainError("mixed provenance: " + comparisons_path.string() +
                      " does not match the checksum in " + manifest_path.string());
  }
  if (manifest.value("essay_set_digest", std::string()) != essay_digest) {
    throw DomainError("mixed provenance: comparisons were generated for a different essay set");
  }
}

bool AllGold(const EssaySet& set) {
  return std::all_of(set.essays().begin(), set.essays().end(),
                     [](const Essay& e) { return e.gold_score.has_value(); });
}

ConvertedScores FilterConverted(const ConvertedScores& all, const EssaySet& keep) {
  ConvertedScores out;
  if (all.levels) out.levels.emplace();
  if (all.categories) out.categories.emplace();
  for (std::size_t k = 0; k < all.ids.size(); ++k) {
    if (!keep.Contains(all.ids[k])) continue;
    out.ids.push_back(all.ids[k]);
    out.latent.push_back(all.latent[k]);
    out.scaled.push_back(all.scaled[k]);
    if (all.levels) out.levels->push_back((*all.levels)[k]);
    if (all.categories) out.categories->push_back((*all.categories)[k]);
    out.ranks.push_back(all.ranks[k]);
  }
  return out;
}

std::vector<std::string> Ids(const EssaySet& set) {
  std::vector<std::string> ids;
  ids.reserve(set.size());
  for (const auto& essay : set.essays()) ids.push_back(essay.id);
  return ids;
}

}  // namespace

std::string EssaySetDigest(const EssaySet& set) {
  json items = json::array();
  for (const auto& essay : set.essays()) {
    items.push_back({essay.id, essay.prompt_id, essay.text,
                     essay.gold_score ? json(*essay.gold_score) : json(nullptr)});
  }
  return Sha256Hex(items.dump());
}

GenerateSummary CmdGenerate(const GenerateConfig& cfg) {
  EssaySet loaded = LoadEssays(cfg.essays, EssayFormatFromPath(cfg.essays));
  EssaySet set = loaded.WithContext(ReadOptional(cfg.prompt_file),
                                    ReadOptional(cfg.rubric_file), loaded.rubric_spec());

  std::optional<PromptTemplate> tmpl = ResolveTemplate(cfg.judge);
  std::unique_ptr<Judge> judge;
  if (cfg.judge.kind == JudgeSettings::Kind::kRemote) {
    if (!tmpl) throw TemplateError("remote judge requires a prompt template");
    judge = std::make_unique<RemoteJudge>(cfg.judge.remote);
  } else {
    judge = std::make_unique<SimulatedJudge>(cfg.judge.sim);
    if (!tmpl) tmpl = PlainTemplate();
  }
  if (!(cfg.max_skip_rate >= 0.0 && cfg.max_skip_rate <= 1.0)) {
    throw DomainError("max_skip_rate must lie in [0, 1]");
  }

  const std::string digest = EssaySetDigest(set);
  json config = {{"essay_set_digest", digest},
                 {"pairs", cfg.pairs},
                 {"seed", cfg.seed},
                 {"judge_id", judge->id()},
                 {"template_sha256", Sha256Hex(tmpl->system_text() + '\0' + tmpl->user_text())},
                 {"prompt_sha256", Sha256Hex(set.prompt_text())},
                 {"rubric_sha256", Sha256Hex(set.rubric_text())},
                 {"max_attempts", cfg.judge.compare.max_attempts}};
  if (cfg.judge.kind == JudgeSettings::Kind::kRemote) {
    config["temperature"] = cfg.judge.remote.temperature;
    config["base_url"] = cfg.judge.remote.base_url;
  }
  const std::string config_hash = Sha256Hex(config.dump());

  PairPlan plan = SamplePairs(set, cfg.pairs, cfg.seed);
  ComparisonRun run = GenerateComparisons(*judge, set, *tmpl, plan, cfg.judge.compare);

  GenerateSummary summary;
  summary.judge_id = judge->id();
  summary.config_hash = config_hash;
  summary.requested = run.requested;
  summary.produced = run.records.size();
  summary.skipped = run.skipped.size();
  if (!run.records.empty()) summary.inconsistency_rate = InconsistencyRate(run.records);
  summary.skip_limit_exceeded = run.skip_rate() > cfg.max_skip_rate;

  json artifacts = json::object();
  WriteArtifact(cfg.out_dir, kComparisonsFile, FormatComparisonsJsonl(run.records), artifacts);
  WriteArtifact(cfg.out_dir, "pairs.jsonl", FormatPairPlanJsonl(plan), artifacts);
  json skipped = json::array();
  for (const auto& s : run.skipped) {
    skipped.push_back({{"i", s.pair.i}, {"j", s.pair.j}, {"reason", s.reason}});
  }
  json manifest = {
      {"config_hash", config_hash},
      {"config", config},
      {"essay_set_digest", digest},
      {"judge_id", summary.judge_id},
      {"seed", cfg.seed},
      {"pairs_requested", summary.requested},
      {"pairs_produced", summary.produced},
      {"skip_count", summary.skipped},
      {"skipped", skipped},
      {"inconsistency_rate",
       summary.inconsistency_rate ? json(*summary.inconsistency_rate) : json(nullptr)},
      {"artifacts", artifacts},
  };
  WriteFileAtomic(cfg.out_dir / kGenerateManifest, manifest.dump(2) + "\n");
  return summary;
}

ScoreTable FitScores(ScoreMethod method, const EssaySet& set,
                     const std::vector<PairwiseRecord>& records, const FitSettings& fit,
                     RankNetModel* model_out) {
  switch (method) {
    case ScoreMethod::kRankNet: {
      TrainReport report = Train(set, records, fit.train, fit.label);
      ScoreTable table = ScoreAll(report.model, set);
      if (model_out) *model_out = std::move(report.model);
      return table;
    }
    case ScoreMethod::kBradleyTerry:
      return BtFit(records, Ids(set), fit.bt, fit.label);
    case ScoreMethod::kElo:
      return EloRun(records, Ids(set), fit.elo, fit.label);
  }
  throw DomainError("unknown scoring method");
}

EssaySplit SplitEssays(std::size_t n, double heldout_fraction, std::uint64_t seed) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw DomainError("held-out fraction must lie in (0, 1)");
  }
  const auto heldout = static_cast<std::size_t>(std::llround(static_cast<double>(n) *
                                                             heldout_fraction));
  if (heldout == 0 || heldout >= n) {
    throw DomainError("split leaves an empty training or held-out part");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(std::span<std::size_t>(order));
  EssaySplit split;
  split.heldout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(heldout));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(heldout), order.end());
  std::sort(split.heldout.begin(), split.heldout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::vector<PairwiseRecord> RestrictRecords(const std::vector<PairwiseRecord>& records,
                                            const EssaySet& set) {
  std::vector<PairwiseRecord> out;
  for (const auto& r : records) {
    if (set.Contains(r.i) && set.Contains(r.j)) out.push_back(r);
  }
  return out;
}

ScoreSummary CmdScore(const ScoreConfig& cfg) {
  cfg.rubric.Validate();
  EssaySet set = LoadEssays(cfg.essays, EssayFormatFromPath(cfg.essays));
  const std::string comparisons_text = ReadFile(cfg.comparisons);
  const std::string comparisons_sha = Sha256Hex(comparisons_text);
  const std::string digest = EssaySetDigest(set);
  CheckProvenance(cfg.comparisons, comparisons_sha, digest);
  std::vector<PairwiseRecord> records = ParseComparisonsJsonl(comparisons_text);
  for (const auto& r : records) {
    if (!set.Contains(r.i) || !set.Contains(r.j)) {
      throw DomainError("comparison (" + r.i + ", " + r.j + ") refers to an unknown essay");
    }
  }

  json config = {{"essay_set_digest", digest},
                 {"comparisons_sha256", comparisons_sha},
                 {"method", ScoreMethodName(cfg.method)},
                 {"fit", FitJson(cfg.fit)},
                 {"rubric", RubricJson(cfg.rubric)},
                 {"inductive_split",
                  cfg.inductive_split ? json(*cfg.inductive_split) : json(nullptr)},
                 {"split_seed", cfg.split_seed}};
  const std::string config_hash = Sha256Hex(config.dump());

  std::optional<EssaySet> train_set;
  std::optional<EssaySet> heldout_set;
  if (cfg.inductive_split) {
    if (cfg.method != ScoreMethod::kRankNet) {
      throw DomainError("inductive scoring needs the ranknet method; " +
                        std::string(ScoreMethodName(cfg.method)) +
                        " cannot score essays without comparisons");
    }
    EssaySplit split = SplitEssays(set.size(), *cfg.inductive_split, cfg.split_seed);
    train_set = set.Subset(split.train);
    heldout_set = set.Subset(split.heldout);
    records = RestrictRecords(records, *train_set);
    spdlog::info("inductive split: {} training essays, {} held out, {} comparisons kept",
                 train_set->size(), heldout_set->size(), records.size());
  }

  RankNetModel model;
  std::optional<std::pair<double, double>> latent_range;
  ScoreTable scores = [&] {
    if (!train_set) return FitScores(cfg.method, set, records, cfg.fit, &model);
    TrainReport report = Train(*train_set, records, cfg.fit.train, cfg.fit.label);
    model = report.model;
    ScoreTable train_scores = ScoreAll(model, *train_set);
    auto [lo, hi] =
        std::minmax_element(train_scores.scores().begin(), train_scores.scores().end());
    latent_range = std::make_pair(*lo, *hi);
    return ScoreAll(model, set);
  }();
  ConvertedScores converted = Convert(scores, cfg.rubric, latent_range);

  ScoreSummary summary{scores, converted, std::nullopt, std::nullopt, config_hash};
  json artifacts = json::object();
  WriteArtifact(cfg.out_dir, "scores.json", FormatScoreTableJson(scores), artifacts);
  WriteArtifact(cfg.out_dir, "converted.csv", FormatConvertedCsv(converted), artifacts);
  if (cfg.method == ScoreMethod::kRankNet) {
    WriteArtifact(cfg.out_dir, "model.json", FormatModelJson(model), artifacts);
  }
  if (AllGold(set)) {
    EvalReport report = Evaluate(converted, set, cfg.rubric);
    AddComparisonStats(report, records, set);
    WriteArtifact(cfg.out_dir, "eval.json", FormatEvalReportJson(report), artifacts);
    summary.report = report;
    if (heldout_set) {
      EvalReport heldout = Evaluate(FilterConverted(converted, *heldout_set), set, cfg.rubric);
      WriteArtifact(cfg.out_dir, "eval_heldout.json", FormatEvalReportJson(heldout), artifacts);
      summary.heldout_report = heldout;
    }
  } else {
    spdlog::warn("gold scores missing for some essays; evaluation skipped");
  }
  json manifest = {{"config_hash", config_hash},
                   {"config", config},
                   {"essay_set_digest", digest},
                   {"comparisons_used", records.size()},
                   {"artifacts", artifacts}};
  WriteFileAtomic(cfg.out_dir / "score_manifest.json", manifest.dump(2) + "\n");
  return summary;
}

std::vector<SweepRow> RunSweep(const EssaySet& set, const SweepConfig& cfg) {
  if (cfg.m_values.empty()) throw DomainError("sweep needs at least one M value");
  if (cfg.repeats < 2) throw DomainError("sweep needs at least two repeats");
  for (std::size_t k = 0; k < cfg.m_values.size(); ++k) {
    if (k > 0 && !(cfg.m_values[k - 1] < cfg.m_values[k])) {
      throw DomainError("sweep M values must be strictly ascending");
    }
    if (cfg.m_values[k] > PairCapacity(set.size())) {
      throw CapacityError(cfg.m_values[k], PairCapacity(set.size()));
    }
  }
  set.RequireGold();
  if (std::find(cfg.methods.begin(), cfg.methods.end(), ScoreMethod::kRankNet) !=
      cfg.methods.end()) {
    set.RequireEmbeddings();
  }
  cfg.rubric.Validate();
  const PromptTemplate tmpl = PlainTemplate();

  std::vector<SweepRow> rows;
  for (std::size_t m : cfg.m_values) {
    for (int r = 0; r < cfg.repeats; ++r) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
      SimJudgeConfig judge_cfg = cfg.judge;
      judge_cfg.seed = seed;
      SimulatedJudge judge(judge_cfg);
      PairPlan plan = SamplePairs(set, m, seed);
      ComparisonRun run = GenerateComparisons(judge, set, tmpl, plan);
      FitSettings fit = cfg.fit;
      fit.train.seed = seed;
      fit.elo.seed = seed;
      for (ScoreMethod method : cfg.methods) {
        SweepRow row{m, method, seed, std::nullopt, std::nullopt};
        ScoreTable scores = FitScores(method, set, run.records, fit);
        EvalReport report = Evaluate(Convert(scores, cfg.rubric), set, cfg.rubric);
        row.qwk = report.qwk;
        row.spearman = report.spearman;
        spdlog::debug("sweep M={} method={} seed={} done", m, ScoreMethodName(method), seed);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string FormatSweepCsv(const std::vector<SweepRow>& rows) {
  auto cell = [](const std::optional<double>& v) {
    return v ? FormatDouble(*v) : std::string("undefined");
  };
  std::string out = "M,method,seed,qwk,spearman\n";
  for (const auto& row : rows) {
    out += std::to_string(row.m) + ',' + std::string(ScoreMethodName(row.method)) + ',' +
           std::to_string(row.seed) + ',' + cell(row.qwk) + ',' + cell(row.spearman) + '\n';
  }
  return out;
}

}  // namespace lces
