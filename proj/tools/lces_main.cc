// lces: pairwise-comparison essay scoring pipeline.
//
//   lces synth    --n 200 --out data/essays.jsonl
//   lces generate --essays data/essays.jsonl --out runs/a --pairs 2000
//   lces score    --essays data/essays.jsonl --comparisons runs/a/comparisons.jsonl --out runs/a
//   lces sweep    --essays data/essays.jsonl --sweep 50,500,5000 --out sweep.csv

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "lces/core.h"
#include "lces/embeddings.h"
#include "lces/error.h"
#include "lces/io.h"
#include "lces/metrics.h"
#include "lces/pipeline.h"

#ifndef LCES_TEMPLATE_DIR
#define LCES_TEMPLATE_DIR "templates"
#endif

namespace {

constexpr int kExitSkipLimit = 2;

struct RubricFlags {
  std::optional<double> scale_min;
  std::optional<double> scale_max;
  std::vector<double> levels;
  std::vector<double> thresholds;
  std::vector<std::string> categories;

  void Register(CLI::App* cmd) {
    cmd->add_option("--scale-min", scale_min, "Lowest score on the rubric scale");
    cmd->add_option("--scale-max", scale_max, "Highest score on the rubric scale");
    cmd->add_option("--levels", levels, "Discrete score levels, ascending")->delimiter(',');
    cmd->add_option("--thresholds", thresholds, "Category thresholds, ascending")
        ->delimiter(',');
    cmd->add_option("--categories", categories, "Category names (one more than thresholds)")
        ->delimiter(',');
  }

  bool empty() const {
    return !scale_min && !scale_max && levels.empty() && thresholds.empty();
  }

  // Without explicit flags an all-integer gold set implies integer levels
  // spanning the observed gold range.
  lces::RubricSpec Resolve(const lces::EssaySet* gold_source) const {
    lces::RubricSpec spec;
    if (empty() && gold_source) {
      auto gold = GoldOrEmpty(*gold_source);
      if (!gold.empty() && std::all_of(gold.begin(), gold.end(),
                                       [](double g) { return g == std::floor(g); })) {
        auto [lo, hi] = std::minmax_element(gold.begin(), gold.end());
        if (*lo < *hi) {
          spdlog::info("no rubric flags; using integer levels {}..{} from gold scores", *lo, *hi);
          return lces::RubricSpec::IntegerLevels(static_cast<int>(*lo), static_cast<int>(*hi));
        }
      }
    }
    if (!levels.empty()) {
      spec.levels = levels;
      spec.y_min = levels.front();
      spec.y_max = levels.back();
    }
    if (scale_min) spec.y_min = *scale_min;
    if (scale_max) spec.y_max = *scale_max;
    spec.category_thresholds = thresholds;
    spec.category_names = categories;
    if (!thresholds.empty() && categories.empty()) {
      for (std::size_t k = 0; k <= thresholds.size(); ++k) {
        spec.category_names.push_back("c" + std::to_string(k));
      }
    }
    spec.Validate();
    return spec;
  }

  static std::vector<double> GoldOrEmpty(const lces::EssaySet& set) {
    std::vector<double> gold;
    for (const auto& essay : set.essays()) {
      if (!essay.gold_score) return {};
      gold.push_back(*essay.gold_score);
    }
    return gold;
  }
};

struct SimFlags {
  lces::SimJudgeConfig cfg;
  std::optional<std::uint64_t> seed;

  void Register(CLI::App* cmd) {
    cmd->add_option("--tie-margin", cfg.tie_margin, "Simulator tie margin (gold units)");
    cmd->add_option("--flip-prob", cfg.flip_prob, "Simulator label flip probability");
    cmd->add_option("--position-bias", cfg.position_bias,
                    "Simulator probability of answering essay1 regardless of content");
    cmd->add_option("--judge-seed", seed, "Simulator seed (defaults to --seed)");
  }
};

struct FitFlags {
  lces::FitSettings fit;
  std::string labels = "debiased";

  void Register(CLI::App* cmd) {
    auto& t = fit.train;
    cmd->add_option("--epochs", t.epochs, "RankNet training epochs")->capture_default_str();
    cmd->add_option("--lr", t.learning_rate, "RankNet learning rate")->capture_default_str();
    cmd->add_option("--batch-size", t.batch_size, "RankNet batch size")->capture_default_str();
    cmd->add_option("--hidden", t.hidden_units, "RankNet hidden units")->capture_default_str();
    cmd->add_option("--dropout", t.dropout_rate, "RankNet dropout rate")->capture_default_str();
    cmd->add_option("--weight-decay", t.weight_decay, "RankNet L2 weight decay")
        ->capture_default_str();
    cmd->add_option("--bt-iterations", fit.bt.iterations, "Bradley-Terry iterations")
        ->capture_default_str();
    cmd->add_option("--bt-lr", fit.bt.learning_rate, "Bradley-Terry step size")
        ->capture_default_str();
    cmd->add_option("--elo-k", fit.elo.k_factor, "Elo K factor")->capture_default_str();
    cmd->add_option("--elo-passes", fit.elo.passes, "Elo passes over the comparisons")
        ->capture_default_str();
    cmd->add_option("--labels", labels, "Training labels: debiased or raw")
        ->check(CLI::IsMember({"debiased", "raw"}))
        ->capture_default_str();
  }

  lces::FitSettings Resolve(std::uint64_t seed) const {
    lces::FitSettings out = fit;
    out.train.seed = seed;
    out.elo.seed = seed;
    out.label = labels == "raw" ? lces::TargetLabel::kForward : lces::TargetLabel::kDebiased;
    return out;
  }
};

lces::ScoreMethod MethodFromFlag(const std::string& name) { return lces::ParseScoreMethod(name); }

void PrintGenerateSummary(const lces::GenerateSummary& s) {
  std::printf("judge:              %s\n", s.judge_id.c_str());
  std::printf("config hash:        %s\n", s.config_hash.c_str());
  std::printf("pairs requested:    %zu\n", s.requested);
  std::printf("records produced:   %zu\n", s.produced);
  std::printf("pairs skipped:      %zu\n", s.skipped);
  if (s.inconsistency_rate) {
    std::printf("inconsistency rate: %.4f\n", *s.inconsistency_rate);
  } else {
    std::printf("inconsistency rate: undefined\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise-comparison essay scoring: judge, fit latent scores, convert, evaluate"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; explicit flags take precedence");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a synthetic essay set with embeddings");
  std::size_t synth_n = 200;
  std::string synth_out;
  lces::SyntheticSpec synth_spec;
  RubricFlags synth_rubric;
  synth->add_option("--n", synth_n, "Number of essays")->capture_default_str();
  synth->add_option("--out", synth_out, "Output JSONL path")->required();
  synth->add_option("--dim", synth_spec.dim, "Embedding dimension")->capture_default_str();
  synth->add_option("--signal", synth_spec.signal_strength, "Gold signal strength")
      ->capture_default_str();
  synth->add_option("--noise", synth_spec.noise_std, "Embedding noise std")
      ->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "Seed")->capture_default_str();
  synth_rubric.Register(synth);

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Judge sampled pairs and write comparisons");
  lces::GenerateConfig gen_cfg;
  std::string gen_judge = "sim";
  SimFlags gen_sim;
  std::string gen_template;
  std::string template_dir = LCES_TEMPLATE_DIR;
  gen->add_option("--essays", gen_cfg.essays, "Essay file (.csv or .jsonl)")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", gen_cfg.out_dir, "Output directory")->required();
  gen->add_option("--judge", gen_judge, "Judge: sim or remote")
      ->check(CLI::IsMember({"sim", "remote"}))
      ->capture_default_str();
  gen->add_option("--pairs", gen_cfg.pairs, "Number of pairs M")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--seed", gen_cfg.seed, "Pair sampling seed")->capture_default_str();
  gen->add_option("--prompt-file", gen_cfg.prompt_file, "Essay prompt text")
      ->check(CLI::ExistingFile);
  gen->add_option("--rubric-file", gen_cfg.rubric_file, "Rubric text")
      ->check(CLI::ExistingFile);
  gen->add_option("--template", gen_template, "Named template (e.g. asap, toefl11)");
  gen->add_option("--template-dir", template_dir, "Directory of named templates")
      ->capture_default_str();
  gen->add_option("--system-template", gen_cfg.judge.system_template, "System template file");
  gen->add_option("--user-template", gen_cfg.judge.user_template, "User template file");
  gen->add_option("--model", gen_cfg.judge.remote.model, "Remote model")
      ->capture_default_str();
  gen->add_option("--base-url", gen_cfg.judge.remote.base_url, "Remote API base URL")
      ->capture_default_str();
  gen->add_option("--api-key-env", gen_cfg.judge.remote.api_key_env,
                  "Environment variable holding the API key")
      ->capture_default_str();
  gen->add_option("--temperature", gen_cfg.judge.remote.temperature, "Sampling temperature")
      ->capture_default_str();
  gen->add_option("--max-attempts", gen_cfg.judge.compare.max_attempts,
                  "Attempts per query before skipping a pair")
      ->capture_default_str();
  gen->add_option("--jobs", gen_cfg.judge.compare.max_in_flight, "Concurrent judge queries")
      ->capture_default_str();
  gen->add_option("--max-skip-rate", gen_cfg.max_skip_rate,
                  "Exit nonzero when more pairs than this fraction are skipped")
      ->capture_default_str();
  gen_sim.Register(gen);

  // embed ------------------------------------------------------------------
  auto* embed = app.add_subcommand("embed", "Attach embeddings from a remote provider");
  std::string embed_in;
  std::string embed_out;
  lces::HttpEmbeddingConfig embed_cfg;
  lces::EmbedOptions embed_opts;
  embed->add_option("--essays", embed_in, "Essay file (.csv or .jsonl)")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--out", embed_out, "Output JSONL path")->required();
  embed->add_option("--model", embed_cfg.model, "Embedding model")->capture_default_str();
  embed->add_option("--base-url", embed_cfg.base_url, "API base URL")->capture_default_str();
  embed->add_option("--api-key-env", embed_cfg.api_key_env,
                    "Environment variable holding the API key")
      ->capture_default_str();
  embed->add_option("--cache", embed_opts.cache_dir, "Embedding cache directory");
  embed->add_option("--jobs", embed_opts.max_in_flight, "Concurrent requests")
      ->capture_default_str();

  // score ------------------------------------------------------------------
  auto* score = app.add_subcommand("score", "Fit latent scores, convert and evaluate");
  lces::ScoreConfig score_cfg;
  std::string score_method = "ranknet";
  std::uint64_t score_seed = 0;
  std::optional<std::uint64_t> split_seed;
  FitFlags score_fit;
  RubricFlags score_rubric;
  score->add_option("--essays", score_cfg.essays, "Essay file with embeddings")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--comparisons", score_cfg.comparisons, "comparisons.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--out", score_cfg.out_dir, "Output directory")->required();
  score->add_option("--method", score_method, "ranknet, bt or elo")
      ->check(CLI::IsMember({"ranknet", "bt", "bradley_terry", "elo"}))
      ->capture_default_str();
  score->add_option("--seed", score_seed, "Training seed")->capture_default_str();
  score->add_option("--inductive-split", score_cfg.inductive_split,
                    "Hold out this fraction of essays from training (ranknet only)");
  score->add_option("--split-seed", split_seed, "Split seed (defaults to --seed)");
  score_fit.Register(score);
  score_rubric.Register(score);

  // sweep ------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Accuracy versus number of comparisons");
  lces::SweepConfig sweep_cfg;
  std::optional<std::string> sweep_essays;
  std::string sweep_out;
  std::vector<std::string> sweep_methods;
  std::size_t sweep_n = 200;
  lces::SyntheticSpec sweep_spec;
  SimFlags sweep_sim;
  FitFlags sweep_fit;
  RubricFlags sweep_rubric;
  sweep->add_option("--sweep", sweep_cfg.m_values, "Ascending M values, comma separated")
      ->delimiter(',')
      ->required();
  sweep->add_option("--repeats", sweep_cfg.repeats, "Seeds per M")->capture_default_str();
  sweep->add_option("--seed", sweep_cfg.base_seed, "First seed")->capture_default_str();
  sweep->add_option("--essays", sweep_essays,
                    "Essay file with gold and embeddings (default: synthetic set)")
      ->check(CLI::ExistingFile);
  sweep->add_option("--n", sweep_n, "Synthetic essay count when --essays is absent")
      ->capture_default_str();
  sweep->add_option("--noise", sweep_spec.noise_std, "Synthetic embedding noise std")
      ->capture_default_str();
  sweep->add_option("--dim", sweep_spec.dim, "Synthetic embedding dimension")
      ->capture_default_str();
  sweep->add_option("--methods", sweep_methods, "Subset of ranknet,bt,elo")->delimiter(',');
  sweep->add_option("--out", sweep_out, "Output CSV path")->required();
  sweep_sim.Register(sweep);
  sweep_fit.Register(sweep);
  sweep_rubric.Register(sweep);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*synth) {
      lces::RubricSpec rubric =
          synth_rubric.empty() ? lces::RubricSpec::IntegerLevels(1, 5) : synth_rubric.Resolve(nullptr);
      lces::EssaySet set = lces::MakeSyntheticEssaySet(synth_n, rubric, synth_spec);
      lces::SaveEssaysJsonl(set, synth_out);
      std::printf("wrote %zu essays to %s\n", set.size(), synth_out.c_str());
      return 0;
    }

    if (*gen) {
      gen_cfg.judge.kind = gen_judge == "remote" ? lces::JudgeSettings::Kind::kRemote
                                                 : lces::JudgeSettings::Kind::kSimulated;
      gen_cfg.judge.sim = gen_sim.cfg;
      gen_cfg.judge.sim.seed = gen_sim.seed.value_or(gen_cfg.seed);
      if (!gen_template.empty()) {
        gen_cfg.judge.template_name = gen_template;
        gen_cfg.judge.template_dir = template_dir;
      }
      lces::GenerateSummary summary = lces::CmdGenerate(gen_cfg);
      PrintGenerateSummary(summary);
      if (summary.skip_limit_exceeded) {
        spdlog::error("{} of {} pairs skipped, above the allowed rate {}", summary.skipped,
                      summary.requested, gen_cfg.max_skip_rate);
        return kExitSkipLimit;
      }
      return 0;
    }

    if (*embed) {
      lces::EssaySet set = lces::LoadEssays(embed_in, lces::EssayFormatFromPath(embed_in));
      lces::HttpEmbeddingProvider provider(embed_cfg);
      lces::EmbedStats stats;
      lces::EssaySet out = lces::EmbedRemote(set, provider, embed_opts, &stats);
      lces::SaveEssaysJsonl(out, embed_out);
      std::printf("embedded %zu essays (%zu remote calls, %zu cache hits)\n", out.size(),
                  stats.remote_calls, stats.cache_hits);
      return 0;
    }

    if (*score) {
      lces::EssaySet set =
          lces::LoadEssays(score_cfg.essays, lces::EssayFormatFromPath(score_cfg.essays));
      score_cfg.method = MethodFromFlag(score_method);
      score_cfg.fit = score_fit.Resolve(score_seed);
      score_cfg.rubric = score_rubric.Resolve(&set);
      score_cfg.split_seed = split_seed.value_or(score_seed);
      lces::ScoreSummary summary = lces::CmdScore(score_cfg);
      if (summary.report) {
        std::printf("%s", lces::FormatEvalReportTable(*summary.report).c_str());
      }
      if (summary.heldout_report) {
        std::printf("\nheld-out essays:\n%s",
                    lces::FormatEvalReportTable(*summary.heldout_report).c_str());
      }
      std::printf("artifacts written to %s\n", score_cfg.out_dir.string().c_str());
      return 0;
    }

    if (*sweep) {
      lces::EssaySet set = [&] {
        if (sweep_essays) {
          return lces::LoadEssays(*sweep_essays, lces::EssayFormatFromPath(*sweep_essays));
        }
        sweep_spec.seed = sweep_cfg.base_seed;
        lces::RubricSpec rubric = sweep_rubric.empty() ? lces::RubricSpec::IntegerLevels(1, 5)
                                                       : sweep_rubric.Resolve(nullptr);
        return lces::MakeSyntheticEssaySet(sweep_n, rubric, sweep_spec);
      }();
      sweep_cfg.rubric = sweep_rubric.Resolve(&set);
      sweep_cfg.judge = sweep_sim.cfg;
      sweep_cfg.fit = sweep_fit.Resolve(sweep_cfg.base_seed);
      if (!sweep_methods.empty()) {
        sweep_cfg.methods.clear();
        for (const auto& m : sweep_methods) sweep_cfg.methods.push_back(MethodFromFlag(m));
      }
      auto rows = lces::RunSweep(set, sweep_cfg);
      lces::WriteFileAtomic(sweep_out, lces::FormatSweepCsv(rows));
      std::printf("wrote %zu sweep rows to %s\n", rows.size(), sweep_out.c_str());
      return 0;
    }
  } catch (const lces::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
  return 0;
}
