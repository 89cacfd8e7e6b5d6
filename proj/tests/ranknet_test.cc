#include <doctest.h>

#include <cmath>
#include <vector>

#include "lces/embeddings.h"
#include "lces/error.h"
#include "lces/metrics.h"
#include "lces/pairing.h"
#include "lces/ranknet.h"
#include "test_util.h"

using namespace lces;
using lces::testing::MakeEssay;
using lces::testing::MakeRecord;

namespace {

// Loss of the full objective evaluated directly, for finite differences.
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

TrainConfig Small(int epochs = 100) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.hidden_units = 16;
  cfg.learning_rate = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("score examples") {
  RankNetParams zero = RankNetParams::Zeros(3, 4);
  std::vector<double> h{1, -2, 3};
  CHECK(Score(zero, h) == 0.0);

  RankNetParams p = RankNetParams::Zeros(2, 2);
  p.w1 = {1, 0, 0, 1};
  p.w2 = {1, 1};
  CHECK(Score(p, std::vector<double>{1, -2}) == 1.0);
  CHECK(Score(p, std::vector<double>{1, -2}) == Score(p, std::vector<double>{1, -2}));
  std::vector<double> keep_second{0, 2};
  CHECK(Score(p, std::vector<double>{1, 3}, keep_second) == 6.0);
  try {
    Score(p, std::vector<double>{1, 2, 3});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("expected D=2") != std::string::npos);
  }
}

TEST_CASE("preference probability") {
  CHECK(PredictPref(0.3, 0.3) == 0.5);
  CHECK(PredictPref(std::log(3.0), 0) == doctest::Approx(0.75).epsilon(1e-15));
  for (double d : {-800.0, -5.0, 0.1, 3.0, 900.0}) {
    double p = PredictPref(d, 0);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p + PredictPref(0, d) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("binary cross-entropy examples") {
  std::vector<double> half{0.5}, one{1.0};
  CHECK(BceLoss(half, half) == doctest::Approx(std::log(2.0)));
  CHECK(BceLoss(half, one) == doctest::Approx(std::log(2.0)));
  std::vector<double> preds{0.9, 0.1}, targets{1, 0};
  CHECK(BceLoss(preds, targets) == doctest::Approx(-std::log(0.9)));
  std::vector<double> saturated{0.0}, zero_target{1.0};
  CHECK(BceLoss(saturated, zero_target) == doctest::Approx(-std::log(kProbClamp)));
  CHECK(std::isfinite(BceLoss(saturated, zero_target)));
}

TEST_CASE("balanced pairs give zero bias gradient") {
  Rng rng(1);
  RankNetParams p = RankNetParams::Init(3, 5, rng);
  std::vector<std::vector<double>> h{{1, 2, 3}, {-1, 0, 2}};
  std::vector<IndexedPair> batch{{0, 0, 0.5}, {1, 1, 0.5}};
  ParamGradients g = ComputeGradients(p, h, batch, 0.0);
  CHECK(g.b2 == 0.0);
  for (double v : g.w1) CHECK(v == 0.0);
  CHECK(g.loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("duplicated pair doubles its normalized contribution") {
  Rng rng(2);
  RankNetParams p = RankNetParams::Init(2, 3, rng);
  std::vector<std::vector<double>> h{{1, 0.5}, {-0.3, 2}, {0.2, 0.2}};
  IndexedPair a{0, 1, 1.0}, b{2, 1, 0.0};
  std::vector<IndexedPair> single{a, b}, doubled{a, a, b, b};
  ParamGradients g1 = ComputeGradients(p, h, single, 0.0);
  ParamGradients g2 = ComputeGradients(p, h, doubled, 0.0);
  for (std::size_t k = 0; k < g1.w1.size(); ++k) CHECK(g2.w1[k] == doctest::Approx(g1.w1[k]));
  for (std::size_t k = 0; k < g1.w2.size(); ++k) CHECK(g2.w2[k] == doctest::Approx(g1.w2[k]));

  std::vector<IndexedPair> only_a{a}, a_twice_b{a, a, b};
  ParamGradients ga = ComputeGradients(p, h, only_a, 0.0);
  ParamGradients gb = ComputeGradients(p, h, std::vector<IndexedPair>{b}, 0.0);
  ParamGradients g3 = ComputeGradients(p, h, a_twice_b, 0.0);
  for (std::size_t k = 0; k < g3.w2.size(); ++k) {
    CHECK(g3.w2[k] == doctest::Approx((2 * ga.w2[k] + gb.w2[k]) / 3));
  }
}

TEST_CASE("analytic gradients match finite differences including weight decay") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t d = 1 + rng.UniformInt(8), hdim = 1 + rng.UniformInt(8);
    RankNetParams p = RankNetParams::Init(d, hdim, rng);
    for (double& b : p.b1) b = rng.Uniform(-0.5, 0.5);
    std::vector<std::vector<double>> h(6, std::vector<double>(d));
    for (auto& row : h) for (double& v : row) v = rng.Normal();
    std::vector<IndexedPair> batch;
    for (int k = 0; k < 9; ++k) {
      batch.push_back({rng.UniformInt(6), rng.UniformInt(6), 0.5 * static_cast<double>(rng.UniformInt(3))});
    }
    const double wd = 0.01 * static_cast<double>(trial % 2);
    ParamGradients g = ComputeGradients(p, h, batch, wd);
    auto fd = [&](double& x) {
      const double step = 1e-5, saved = x;
      x = saved + step;
      double up = Objective(p, h, batch, wd);
      x = saved - step;
      double down = Objective(p, h, batch, wd);
      x = saved;
      return (up - down) / (2 * step);
    };
    auto close = [](double a, double n) {
      return std::abs(a - n) <= 1e-4 * std::max({std::abs(a), std::abs(n), 1e-6});
    };
    for (std::size_t k = 0; k < p.w1.size(); ++k) CHECK(close(g.w1[k], fd(p.w1[k])));
    for (std::size_t k = 0; k < p.b1.size(); ++k) CHECK(close(g.b1[k], fd(p.b1[k])));
    for (std::size_t k = 0; k < p.w2.size(); ++k) CHECK(close(g.w2[k], fd(p.w2[k])));
    CHECK(std::abs(g.b2 - fd(p.b2)) < 1e-9);
  }
}

TEST_CASE("shifting the output bias changes no preference or ranking") {
  Rng rng(4);
  RankNetParams p = RankNetParams::Init(3, 6, rng);
  RankNetParams shifted = p;
  shifted.b2 += 12.5;
  std::vector<double> a{0.3, -1, 2}, b{1, 1, -0.5};
  CHECK(PredictPref(Score(p, a), Score(p, b)) ==
        doctest::Approx(PredictPref(Score(shifted, a), Score(shifted, b))).epsilon(1e-12));
}

TEST_CASE("standardizer") {
  std::vector<std::vector<double>> rows{{1, 5}, {3, 5}};
  Standardizer s = Standardizer::Fit(rows);
  CHECK(s.mean == std::vector<double>{2, 5});
  CHECK(s.scale[1] == 1.0);
  std::vector<double> z = s.Apply(rows[0]);
  CHECK(z[0] == doctest::Approx(-1.0));
  CHECK(z[1] == 0.0);
}

TEST_CASE("two essays one comparison orders the winner first") {
  EssaySet set({MakeEssay("a", 2.0, std::vector<double>{1, 0}),
                MakeEssay("b", 1.0, std::vector<double>{0, 1})});
  TrainReport report = Train(set, {MakeRecord("a", "b", 1, 0)}, Small());
  ScoreTable scores = ScoreAll(report.model, set);
  CHECK(scores.At("a") > scores.At("b"));
  CHECK(report.epoch_losses.size() == 100);
  CHECK(report.epoch_losses.back() < report.epoch_losses.front());
  CHECK(report.pair_count == 1);
}

TEST_CASE("all-tie targets settle at ln 2") {
  EssaySet set = MakeSyntheticEssaySet(20, RubricSpec::IntegerLevels(1, 5), {});
  std::vector<PairwiseRecord> ties;
  for (const auto& p : SamplePairs(set, 100, 1).pairs) ties.push_back(MakeRecord(p.i, p.j, 0.5, 0.5));
  TrainConfig cfg = Small(300);
  cfg.dropout_rate = 0.0;
  TrainReport report = Train(set, ties, cfg);
  CHECK(report.epoch_losses.back() == doctest::Approx(std::log(2.0)).epsilon(1e-4));
  for (double l : report.epoch_losses) CHECK(l >= std::log(2.0) - 1e-12);
}

TEST_CASE("training is bit-identical for the same seed") {
  EssaySet set = MakeSyntheticEssaySet(30, RubricSpec::IntegerLevels(1, 5), {8, 1, 0.5, 3});
  std::vector<PairwiseRecord> records;
  for (const auto& p : SamplePairs(set, 120, 2).pairs) {
    double c = *set.At(p.i).gold_score > *set.At(p.j).gold_score ? 1.0 : 0.0;
    records.push_back(MakeRecord(p.i, p.j, c, 1 - c));
  }
  TrainConfig cfg = Small(20);
  cfg.batch_size = 32;
  CHECK(Train(set, records, cfg) == Train(set, records, cfg));
  TrainConfig other = cfg;
  other.seed = 1;
  CHECK_FALSE(Train(set, records, cfg) == Train(set, records, other));
}

TEST_CASE("zero weights give ln 2 loss in the first epoch") {
  EssaySet set({MakeEssay("a", 2.0, std::vector<double>{1, 0}),
                MakeEssay("b", 1.0, std::vector<double>{0, 1})});
  RankNetParams zeros = RankNetParams::Zeros(2, 4);
  std::vector<std::vector<double>> h{{1, 0}, {0, 1}};
  std::vector<IndexedPair> batch{{0, 1, 1.0}};
  CHECK(ComputeGradients(zeros, h, batch, 0.0).loss == std::log(2.0));
}

TEST_CASE("training requires embeddings and known ids") {
  EssaySet set({MakeEssay("a", 1.0, std::vector<double>{1}), MakeEssay("b", 2.0)});
  try {
    Train(set, {MakeRecord("a", "b", 0, 1)}, Small(1));
    FAIL("expected MissingEmbeddingError");
  } catch (const MissingEmbeddingError& e) {
    CHECK(e.ids() == std::vector<std::string>{"b"});
  }
  EssaySet full({MakeEssay("a", 1.0, std::vector<double>{1}),
                 MakeEssay("b", 2.0, std::vector<double>{2})});
  CHECK_THROWS_AS(Train(full, {MakeRecord("a", "z", 0, 1)}, Small(1)), DomainError);
  CHECK_THROWS_AS(Train(full, {}, Small(1)), DomainError);
  TrainConfig bad = Small(1);
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.Validate(), DomainError);
}

TEST_CASE("divergent training reports the failing epoch") {
  EssaySet set({MakeEssay("a", 1.0, std::vector<double>{1, 2}),
                MakeEssay("b", 2.0, std::vector<double>{2, 1})});
  TrainConfig cfg = Small(5);
  cfg.learning_rate = 1e300;
  cfg.weight_decay = 1e300;
  try {
    Train(set, {MakeRecord("a", "b", 0, 1)}, cfg);
    FAIL("expected NonFiniteLossError");
  } catch (const NonFiniteLossError& e) {
    CHECK(e.epoch() >= 1);
  }
}

TEST_CASE("unseen essay with a training embedding gets the same score") {
  EssaySet set = MakeSyntheticEssaySet(12, RubricSpec::IntegerLevels(1, 5), {4, 1, 0.3, 6});
  std::vector<PairwiseRecord> records;
  for (const auto& p : SamplePairs(set, 40, 2).pairs) records.push_back(MakeRecord(p.i, p.j, 1, 0));
  RankNetModel model = Train(set, records, Small(5)).model;
  Essay twin = set[3];
  twin.id = "twin";
  EssaySet unseen({twin});
  CHECK(ScoreAll(model, unseen).At("twin") == ScoreAll(model, set).At(set[3].id));
}

TEST_CASE("model json round trip is exact") {
  EssaySet set = MakeSyntheticEssaySet(10, RubricSpec::IntegerLevels(1, 5), {5, 1, 0.5, 1});
  std::vector<PairwiseRecord> records;
  for (const auto& p : SamplePairs(set, 30, 2).pairs) records.push_back(MakeRecord(p.i, p.j, 0, 1));
  RankNetModel model = Train(set, records, Small(3)).model;
  CHECK(ParseModelJson(FormatModelJson(model)) == model);
  lces::testing::TempDir dir;
  SaveModel(model, dir.path() / "m.json");
  CHECK(LoadModel(dir.path() / "m.json") == model);
  CHECK_THROWS_AS(ParseModelJson(R"({"format":"other"})"), ParseError);
}
