// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and budgets
// are pinned below; the process exits nonzero if any criterion fails.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lces/baselines.h"
#include "lces/convert.h"
#include "lces/embeddings.h"
#include "lces/io.h"
#include "lces/judge.h"
#include "lces/labels.h"
#include "lces/metrics.h"
#include "lces/pairing.h"
#include "lces/pipeline.h"
#include "lces/random.h"
#include "lces/ranknet.h"

namespace {

using namespace lces;
namespace fs = std::filesystem;

constexpr int kSeeds = 5;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdDenomFloor = 1e-6;
constexpr double kBtTol = 1e-3;
constexpr double kEloDriftTol = 1e-6;
constexpr double kMetricTol = 1e-12;
constexpr double kNoisySpearmanMin = 0.9;
constexpr double kInductiveGap = 0.1;
constexpr double kSyntheticNoise = 0.5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 = no runtime budget
  std::function<Outcome()> run;
};

PromptTemplate PlainTemplate() {
  return PromptTemplate::Create("", "<prompt>\n<rubric>\n<essay1>\n<essay2>\n");
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string Join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + fmt::format("{:.3f}", x);
  return out;
}

std::vector<PairwiseRecord> Judge(const EssaySet& set, std::size_t m, std::uint64_t seed,
                                  SimJudgeConfig sim) {
  sim.seed = seed;
  SimulatedJudge judge(sim);
  return GenerateComparisons(judge, set, PlainTemplate(), SamplePairs(set, m, seed)).records;
}

double SpearmanVsGold(const ScoreTable& scores, const EssaySet& set) {
  std::vector<double> s, g;
  for (const auto& essay : set.essays()) {
    s.push_back(scores.At(essay.id));
    g.push_back(*essay.gold_score);
  }
  return Spearman(s, g);
}

EssaySet SyntheticSet(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.noise_std = kSyntheticNoise;
  spec.seed = seed;
  return MakeSyntheticEssaySet(n, RubricSpec::IntegerLevels(1, 5), spec);
}

// --- criterion 1 ----------------------------------------------------------

Outcome DebiasTruthTable() {
  // Expected outputs written out by hand, rows c_ij, columns c_ji.
  const double v[3] = {0.0, 0.5, 1.0};
  const double expected[3][3] = {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.5}, {1.0, 0.5, 0.5}};
  int matched = 0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) matched += Debias(v[a], v[b]) == expected[a][b];
  }
  return {matched == 9, fmt::format("{}/9 combinations match", matched)};
}

// --- criterion 2 ----------------------------------------------------------

double Objective(const RankNetParams& p, const std::vector<std::vector<double>>& h,
                 const std::vector<IndexedPair>& batch, double wd) {
  double loss = 0;
  for (const auto& pair : batch) {
    double c = PredictPref(Score(p, h[pair.i]), Score(p, h[pair.j]));
    loss -= pair.target * std::log(c) + (1 - pair.target) * std::log(1 - c);
  }
  loss /= static_cast<double>(batch.size());
  double sq = 0;
  for (double w : p.w1) sq += w * w;
  for (double w : p.w2) sq += w * w;
  return loss + 0.5 * wd * sq;
}

Outcome GradientCheck() {
  Rng rng(20240601);
  const int instances = 20;
  double worst = 0;
  std::size_t components = 0;
  for (int trial = 0; trial < instances; ++trial) {
    const std::size_t d = 1 + rng.UniformInt(8), hidden = 1 + rng.UniformInt(8);
    RankNetParams p = RankNetParams::Init(d, hidden, rng);
    for (double& b : p.b1) b = rng.Uniform(-0.5, 0.5);
    p.b2 = rng.Uniform(-1, 1);
    const std::size_t rows = 4 + rng.UniformInt(5);
    std::vector<std::vector<double>> h(rows, std::vector<double>(d));
    for (auto& row : h) {
      for (double& x : row) x = rng.Normal();
    }
    std::vector<IndexedPair> batch;
    const std::size_t pairs = 1 + rng.UniformInt(12);
    for (std::size_t k = 0; k < pairs; ++k) {
      batch.push_back({rng.UniformInt(rows), rng.UniformInt(rows),
                       0.5 * static_cast<double>(rng.UniformInt(3))});
    }
    const double wd = trial % 2 ? 0.01 : 0.0;
    ParamGradients g = ComputeGradients(p, h, batch, wd);
    auto check = [&](double analytic, double& param) {
      const double saved = param;
      param = saved + kFdStep;
      const double up = Objective(p, h, batch, wd);
      param = saved - kFdStep;
      const double down = Objective(p, h, batch, wd);
      param = saved;
      const double numeric = (up - down) / (2 * kFdStep);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kFdDenomFloor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
      ++components;
    };
    for (std::size_t k = 0; k < p.w1.size(); ++k) check(g.w1[k], p.w1[k]);
    for (std::size_t k = 0; k < p.b1.size(); ++k) check(g.b1[k], p.b1[k]);
    for (std::size_t k = 0; k < p.w2.size(); ++k) check(g.w2[k], p.w2[k]);
    check(g.b2, p.b2);
  }
  return {worst <= kFdRelTol, fmt::format("{} instances, {} components, worst relative error {:.2e}",
                                          instances, components, worst)};
}

// --- criterion 3 ----------------------------------------------------------

Outcome NoiselessRecovery() {
  const std::size_t n = 20;
  std::vector<double> gold;
  for (std::size_t k = 0; k < n; ++k) gold.push_back(static_cast<double>((k * 7) % n + 1));
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  spec.seed = 3;
  auto embeddings = EmbedSynthetic(gold, spec);
  std::vector<Essay> essays;
  for (std::size_t k = 0; k < n; ++k) {
    Essay e;
    e.id = fmt::format("n{:02}", k);
    e.prompt_id = "p";
    e.text = "essay " + e.id;
    e.gold_score = gold[k];
    e.embedding = embeddings[k];
    essays.push_back(std::move(e));
  }
  EssaySet set(std::move(essays));
  auto records = Judge(set, PairCapacity(n), 1, SimJudgeConfig{});

  FitSettings fit;
  fit.elo.passes = 5;
  double rn = SpearmanVsGold(FitScores(ScoreMethod::kRankNet, set, records, fit), set);
  double bt = SpearmanVsGold(FitScores(ScoreMethod::kBradleyTerry, set, records, fit), set);
  double elo = SpearmanVsGold(FitScores(ScoreMethod::kElo, set, records, fit), set);
  return {rn == 1.0 && bt == 1.0 && elo == 1.0,
          fmt::format("spearman ranknet={} bt={} elo={}", rn, bt, elo)};
}

// --- criterion 4 ----------------------------------------------------------

Outcome TwoItemBt() {
  auto rec = [](const char* i, const char* j, double c) {
    PairwiseRecord r;
    r.i = i;
    r.j = j;
    r.c_ij = c;
    r.c_ji = 1 - c;
    r.c_tilde = Debias(r.c_ij, r.c_ji);
    r.judge_id = "fixed";
    return r;
  };
  std::vector<PairwiseRecord> records{rec("a", "b", 1), rec("b", "a", 0), rec("a", "b", 1),
                                      rec("a", "b", 0)};
  ScoreTable t = BtFit(records, {"a", "b"}, BtConfig{});
  const double gap = t.At("a") - t.At("b");
  const double err = std::abs(gap - std::log(3.0));
  return {err <= kBtTol, fmt::format("s_a - s_b = {:.6f}, ln 3 = {:.6f}, error {:.2e}", gap,
                                     std::log(3.0), err)};
}

// --- criterion 5 ----------------------------------------------------------

Outcome EloChecks() {
  PairwiseRecord one;
  one.i = "a";
  one.j = "b";
  one.c_ij = 1;
  one.c_ji = 0;
  one.c_tilde = 1;
  one.judge_id = "fixed";
  ScoreTable single = EloRun({one}, {"a", "b"}, EloConfig{});
  const bool hand = single.At("a") == 1516.0 && single.At("b") == 1484.0;

  Rng rng(55);
  const std::size_t players = 64;
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < players; ++k) ids.push_back("p" + std::to_string(k));
  const double labels[3] = {0.0, 0.5, 1.0};
  std::vector<PairwiseRecord> records;
  for (int k = 0; k < 100000; ++k) {
    PairwiseRecord r;
    std::size_t i = rng.UniformInt(players);
    std::size_t j = (i + 1 + rng.UniformInt(players - 1)) % players;
    r.i = ids[i];
    r.j = ids[j];
    r.c_ij = labels[rng.UniformInt(3)];
    r.c_ji = labels[rng.UniformInt(3)];
    r.c_tilde = Debias(r.c_ij, r.c_ji);
    r.judge_id = "random";
    records.push_back(r);
  }
  ScoreTable t = EloRun(records, ids, EloConfig{});
  double sum = 0;
  for (double s : t.scores()) sum += s;
  const double drift = std::abs(sum - 1500.0 * static_cast<double>(players));
  return {hand && drift < kEloDriftTol,
          fmt::format("single game -> ({}, {}); drift after 1e5 updates {:.2e}", single.At("a"),
                      single.At("b"), drift)};
}

// --- criterion 6 ----------------------------------------------------------

double BruteQwk(const std::vector<double>& a, const std::vector<double>& b,
                const std::vector<double>& levels) {
  const std::size_t k = levels.size(), n = a.size();
  auto idx = [&](double v) {
    return static_cast<std::size_t>(std::find(levels.begin(), levels.end(), v) - levels.begin());
  };
  std::vector<std::vector<double>> observed(k, std::vector<double>(k, 0.0));
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    observed[idx(a[t])][idx(b[t])] += 1;
    row[idx(a[t])] += 1;
    col[idx(b[t])] += 1;
  }
  double num = 0, den = 0;
  for (std::size_t u = 0; u < k; ++u) {
    for (std::size_t v = 0; v < k; ++v) {
      const double diff = static_cast<double>(u) - static_cast<double>(v);
      const double w = diff * diff / static_cast<double>((k - 1) * (k - 1));
      num += w * observed[u][v] / static_cast<double>(n);
      den += w * row[u] * col[v] / (static_cast<double>(n) * static_cast<double>(n));
    }
  }
  return 1.0 - num / den;
}

double BruteSpearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double less = 0, equal = 0;
      for (double y : x) {
        less += y < x[i];
        equal += y == x[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  auto ra = ranks(a), rb = ranks(b);
  const double ma = Mean(ra), mb = Mean(rb);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Outcome MetricOracles() {
  Rng rng(6006);
  double qwk_err = 0, rho_err = 0;
  int qwk_n = 0, rho_n = 0;
  while (qwk_n < 100) {
    const std::size_t k = 2 + rng.UniformInt(9), n = 2 + rng.UniformInt(80);
    std::vector<double> levels;
    double v = rng.Uniform(-3, 3);
    for (std::size_t t = 0; t < k; ++t) levels.push_back(v += rng.Uniform(0.25, 2));
    std::vector<double> a(n), b(n);
    for (std::size_t t = 0; t < n; ++t) {
      a[t] = levels[rng.UniformInt(k)];
      b[t] = rng.Bernoulli(0.6) ? a[t] : levels[rng.UniformInt(k)];
    }
    const double brute = BruteQwk(a, b, levels);
    if (!std::isfinite(brute)) continue;
    qwk_err = std::max(qwk_err, std::abs(Qwk(a, b, levels) - brute));
    ++qwk_n;
  }
  while (rho_n < 100) {
    const std::size_t n = 2 + rng.UniformInt(80);
    std::vector<double> a(n), b(n);
    for (std::size_t t = 0; t < n; ++t) {
      a[t] = static_cast<double>(rng.UniformInt(6));
      b[t] = rng.Bernoulli(0.3) ? static_cast<double>(rng.UniformInt(4)) : rng.Normal();
    }
    const double brute = BruteSpearman(a, b);
    if (!std::isfinite(brute)) continue;
    rho_err = std::max(rho_err, std::abs(Spearman(a, b) - brute));
    ++rho_n;
  }
  std::vector<double> gold{1, 3, 2, 5, 4, 1, 2}, levels{1, 2, 3, 4, 5};
  std::vector<double> reversed(gold.rbegin(), gold.rend());
  std::vector<double> ordered{1, 2, 3, 4, 5}, backwards{5, 4, 3, 2, 1};
  const double self_qwk = Qwk(gold, gold, levels);
  const double rev_rho = Spearman(ordered, backwards);
  return {qwk_err <= kMetricTol && rho_err <= kMetricTol && self_qwk == 1.0 && rev_rho == -1.0,
          fmt::format("max |qwk - oracle| {:.1e}, max |rho - oracle| {:.1e}, qwk(self)={}, "
                      "rho(reversed)={}",
                      qwk_err, rho_err, self_qwk, rev_rho)};
}

// --- criterion 7 ----------------------------------------------------------

Outcome NoisyRecovery() {
  std::vector<double> rhos;
  SimJudgeConfig sim;
  sim.flip_prob = 0.1;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(s);
    EssaySet set = SyntheticSet(200, seed);
    auto records = Judge(set, 2000, seed, sim);
    FitSettings fit;
    fit.train.seed = seed;
    rhos.push_back(SpearmanVsGold(FitScores(ScoreMethod::kRankNet, set, records, fit), set));
  }
  const double mean = Mean(rhos);
  return {mean >= kNoisySpearmanMin,
          fmt::format("mean spearman {:.4f} (per seed {}), threshold {}", mean, Join(rhos),
                      kNoisySpearmanMin)};
}

// --- criterion 8 ----------------------------------------------------------

Outcome SweepTrend() {
  SweepConfig cfg;
  cfg.m_values = {50, 500, 5000};
  cfg.repeats = kSeeds;
  cfg.base_seed = 200;
  cfg.rubric = RubricSpec::IntegerLevels(1, 5);
  cfg.judge.flip_prob = 0.1;
  auto rows = RunSweep(SyntheticSet(200, 200), cfg);

  std::map<std::pair<ScoreMethod, std::size_t>, std::vector<double>> qwk;
  int undefined = 0;
  for (const auto& row : rows) {
    if (row.qwk) {
      qwk[{row.method, row.m}].push_back(*row.qwk);
    } else {
      ++undefined;
    }
  }
  bool pass = undefined == 0;
  std::string detail;
  std::map<std::pair<ScoreMethod, std::size_t>, double> mean;
  for (ScoreMethod method : cfg.methods) {
    detail += fmt::format("{}:", ScoreMethodName(method));
    for (std::size_t k = 0; k < cfg.m_values.size(); ++k) {
      const auto key = std::make_pair(method, cfg.m_values[k]);
      mean[key] = qwk[key].empty() ? std::nan("") : Mean(qwk[key]);
      detail += fmt::format(" {:.3f}", mean[key]);
      if (k > 0 && !(mean[key] >= mean[{method, cfg.m_values[k - 1]}])) pass = false;
    }
    detail += "; ";
  }
  const double rn = mean[{ScoreMethod::kRankNet, 50}];
  pass = pass && rn >= mean[{ScoreMethod::kBradleyTerry, 50}] && rn >= mean[{ScoreMethod::kElo, 50}];
  detail += fmt::format("mean QWK at M=50,500,5000; undefined rows {}", undefined);
  return {pass, detail};
}

// --- criterion 9 ----------------------------------------------------------

Outcome DebiasEfficacy() {
  SimJudgeConfig sim;
  sim.position_bias = 0.3;
  const RubricSpec rubric = RubricSpec::IntegerLevels(1, 5);
  std::vector<double> debiased, raw;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 300 + static_cast<std::uint64_t>(s);
    EssaySet set = SyntheticSet(200, seed);
    auto records = Judge(set, 2000, seed, sim);
    FitSettings fit;
    fit.train.seed = seed;
    for (TargetLabel label : {TargetLabel::kDebiased, TargetLabel::kForward}) {
      fit.label = label;
      ScoreTable scores = FitScores(ScoreMethod::kRankNet, set, records, fit);
      EvalReport report = Evaluate(Convert(scores, rubric), set, rubric);
      (label == TargetLabel::kDebiased ? debiased : raw).push_back(report.qwk.value_or(std::nan("")));
    }
  }
  const double d = Mean(debiased), r = Mean(raw);
  return {d >= r, fmt::format("mean QWK debiased {:.4f} (per seed {}) vs raw {:.4f} (per seed {})",
                              d, Join(debiased), r, Join(raw))};
}

// --- criterion 10 ---------------------------------------------------------

Outcome InductiveCloseness() {
  SimJudgeConfig sim;
  sim.flip_prob = 0.1;
  std::vector<double> inductive, transductive;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 400 + static_cast<std::uint64_t>(s);
    EssaySet set = SyntheticSet(200, seed);
    auto records = Judge(set, 2000, seed, sim);
    EssaySplit split = SplitEssays(set.size(), 0.1, seed);
    EssaySet train = set.Subset(split.train);
    EssaySet heldout = set.Subset(split.heldout);
    FitSettings fit;
    fit.train.seed = seed;
    // Transductive: the held-out essays' comparisons are part of training.
    ScoreTable all = FitScores(ScoreMethod::kRankNet, set, records, fit);
    transductive.push_back(SpearmanVsGold(all, heldout));
    // Inductive: trained without any comparison touching a held-out essay.
    RankNetModel model;
    FitScores(ScoreMethod::kRankNet, train, RestrictRecords(records, train), fit, &model);
    inductive.push_back(SpearmanVsGold(ScoreAll(model, heldout), heldout));
  }
  const double gap = std::abs(Mean(inductive) - Mean(transductive));
  return {gap <= kInductiveGap,
          fmt::format("held-out spearman inductive {:.4f} (per seed {}) vs transductive {:.4f} "
                      "(per seed {}), gap {:.4f}",
                      Mean(inductive), Join(inductive), Mean(transductive), Join(transductive),
                      gap)};
}

// --- criterion 11 ---------------------------------------------------------

Outcome Determinism() {
  std::random_device rd;
  const fs::path root =
      fs::temp_directory_path() / fmt::format("lces_acceptance_{:x}{:x}", rd(), rd());
  fs::create_directories(root);
  const fs::path essays = root / "essays.jsonl";
  SaveEssaysJsonl(SyntheticSet(80, 11), essays);

  for (const char* run : {"one", "two"}) {
    GenerateConfig gen;
    gen.essays = essays;
    gen.out_dir = root / run;
    gen.pairs = 400;
    gen.seed = 11;
    gen.judge.sim = {0.0, 0.1, 0.2, 11};
    gen.judge.compare.max_in_flight = 4;
    CmdGenerate(gen);
    for (ScoreMethod method :
         {ScoreMethod::kRankNet, ScoreMethod::kBradleyTerry, ScoreMethod::kElo}) {
      ScoreConfig score;
      score.essays = essays;
      score.comparisons = root / run / "comparisons.jsonl";
      score.out_dir = root / run / std::string(ScoreMethodName(method));
      score.method = method;
      score.rubric = RubricSpec::IntegerLevels(1, 5);
      score.fit.train.epochs = 40;
      CmdScore(score);
    }
  }
  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "one")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path twin = root / "two" / fs::relative(entry.path(), root / "one");
    identical += fs::exists(twin) && ReadFile(entry.path()) == ReadFile(twin);
  }
  fs::remove_all(root);
  return {files > 0 && identical == files,
          fmt::format("{}/{} artifacts byte-identical", identical, files)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {1, "debias truth table", 1, DebiasTruthTable},
      {2, "ranknet gradient check", 10, GradientCheck},
      {3, "noiseless recovery (ranknet, bt, elo)", 30, NoiselessRecovery},
      {4, "two-item bradley-terry mle", 5, TwoItemBt},
      {5, "elo hand check and conservation", 0, EloChecks},
      {6, "qwk and spearman oracles", 0, MetricOracles},
      {7, "noisy recovery", 0, NoisyRecovery},
      {8, "accuracy vs comparisons trend", 600, SweepTrend},
      {9, "debiasing under position bias", 0, DebiasEfficacy},
      {10, "inductive close to transductive", 0, InductiveCloseness},
      {11, "end-to-end determinism", 0, Determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = c.budget_seconds == 0 || seconds < c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    failures += !pass;
    std::string budget =
        c.budget_seconds == 0 ? "" : fmt::format(", budget {:.0f}s", c.budget_seconds);
    std::printf("%s criterion %2d: %s (%.2fs%s) -- %s\n", pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), seconds, budget.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
