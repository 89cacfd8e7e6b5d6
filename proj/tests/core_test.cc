#include <doctest.h>

#include <cmath>
#include <limits>

#include "lces/core.h"
#include "lces/error.h"
#include "lces/io.h"
#include "lces/random.h"
#include "test_util.h"

using namespace lces;
using lces::testing::MakeEssay;
using lces::testing::MakeRecord;

TEST_CASE("csv with three essays parses in order") {
  EssaySet set = ParseEssaysCsv(
      "id,prompt_id,text,gold_score\n"
      "a,p,first essay,3\n"
      "b,p,\"second, with comma\",\n"
      "c,p,\"multi\nline \"\"quoted\"\"\",4.5\n");
  REQUIRE(set.size() == 3);
  CHECK(set[0].id == "a");
  CHECK(set[0].gold_score == 3.0);
  CHECK(set[1].text == "second, with comma");
  CHECK_FALSE(set[1].gold_score.has_value());
  CHECK(set[2].text == "multi\nline \"quoted\"");
  CHECK(set[2].gold_score == 4.5);
  CHECK(set.IndexOf("c") == 2u);
}

TEST_CASE("csv duplicate id is rejected by name") {
  try {
    ParseEssaysCsv("id,prompt_id,text,gold_score\na,p,x,1\na,p,y,2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("duplicate essay id: a") != std::string::npos);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("empty essay file reports no essays") {
  CHECK_THROWS_WITH_AS(ParseEssaysCsv(""), "no essays", ParseError);
  CHECK_THROWS_WITH_AS(ParseEssaysCsv("id,prompt_id,text,gold_score\n"), "no essays", ParseError);
  CHECK_THROWS_WITH_AS(ParseEssaysJsonl("\n\n"), "no essays", ParseError);
}

TEST_CASE("malformed csv rows carry their line number") {
  try {
    ParseEssaysCsv("id,prompt_id,text,gold_score\na,p,x,1\nb,p,x\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    ParseEssaysCsv("id,prompt_id,text,gold_score\na,p,x,abc\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(ParseEssaysCsv("id,text\na,x\n"), ParseError);
}

TEST_CASE("jsonl essays with embeddings") {
  EssaySet set = ParseEssaysJsonl(
      R"({"id":"a","prompt_id":"p","text":"x","gold_score":2,"embedding":[1,2]})"
      "\n"
      R"({"id":"b","prompt_id":"p","text":"y","embedding":[3,4.25]})"
      "\n");
  REQUIRE(set.size() == 2);
  CHECK(set.embedding_dim() == 2u);
  CHECK(set[1].embedding->at(1) == 4.25);
  CHECK_THROWS_AS(ParseEssaysJsonl(R"({"id":"a","prompt_id":"p","text":"x","embedding":[1]})"
                                   "\n"
                                   R"({"id":"b","prompt_id":"p","text":"y","embedding":[1,2]})"),
                  DomainError);
}

TEST_CASE("essay set invariants") {
  CHECK_THROWS_WITH_AS(EssaySet({}), "no essays", DomainError);
  CHECK_THROWS_AS(EssaySet({MakeEssay("a"), MakeEssay("a")}), DomainError);
  Essay blank = MakeEssay("b");
  blank.text.clear();
  CHECK_THROWS_AS(EssaySet({MakeEssay("a"), blank}), DomainError);
  CHECK_THROWS_AS(EssaySet({MakeEssay("", 1.0)}), DomainError);
  CHECK_THROWS_AS(EssaySet({MakeEssay("a", std::numeric_limits<double>::quiet_NaN())}),
                  DomainError);
}

TEST_CASE("missing embeddings are listed") {
  EssaySet set({MakeEssay("a", 1.0, std::vector<double>{1.0}), MakeEssay("b"), MakeEssay("c")});
  CHECK(set.MissingEmbeddingIds() == std::vector<std::string>{"b", "c"});
  try {
    set.RequireEmbeddings();
    FAIL("expected MissingEmbeddingError");
  } catch (const MissingEmbeddingError& e) {
    CHECK(e.ids() == std::vector<std::string>{"b", "c"});
  }
  CHECK_THROWS_AS(set.RequireGold(), DomainError);
}

TEST_CASE("essay jsonl round trip keeps every field") {
  Rng rng(11);
  std::vector<Essay> essays;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> emb;
    for (int d = 0; d < 3; ++d) emb.push_back(rng.Normal() * 1e-3);
    Essay e = MakeEssay("id" + std::to_string(k), k % 3 ? std::optional<double>(rng.Uniform())
                                                        : std::nullopt,
                        emb);
    e.text = "line one\nline \"two\" \xc3\xa9";
    essays.push_back(e);
  }
  EssaySet set(essays);
  EssaySet back = ParseEssaysJsonl(FormatEssaysJsonl(set));
  REQUIRE(back.size() == set.size());
  for (std::size_t k = 0; k < set.size(); ++k) CHECK(back[k] == set[k]);
}

TEST_CASE("comparison round trip is field-for-field") {
  Rng rng(5);
  const double labels[] = {0.0, 0.5, 1.0};
  std::vector<PairwiseRecord> records;
  for (int k = 0; k < 100; ++k) {
    auto r = MakeRecord("a" + std::to_string(k), "b" + std::to_string(k),
                        labels[rng.UniformInt(3)], labels[rng.UniformInt(3)]);
    if (k % 2) r.reasoning_fwd = "because \"quoted\"\n";
    if (k % 3) r.reasoning_rev = "";
    records.push_back(r);
  }
  CHECK(ParseComparisonsJsonl(FormatComparisonsJsonl(records)) == records);

  lces::testing::TempDir dir;
  SaveComparisons(records, dir.path() / "c.jsonl");
  CHECK(LoadComparisons(dir.path() / "c.jsonl") == records);
}

TEST_CASE("empty comparison sequence round trips") {
  CHECK(FormatComparisonsJsonl({}).empty());
  CHECK(ParseComparisonsJsonl("").empty());
}

TEST_CASE("record inconsistent with debiasing is rejected with its index") {
  std::string text =
      R"({"i":"a","j":"b","c_ij":1,"c_ji":0,"c_tilde":1,"judge_id":"x"})"
      "\n"
      R"({"i":"a","j":"c","c_ij":1,"c_ji":0,"c_tilde":0.5,"judge_id":"x"})"
      "\n";
  try {
    ParseComparisonsJsonl(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).rfind("record 1:", 0) == 0);
  }
  PairwiseRecord self = MakeRecord("a", "b", 1, 0);
  self.j = "a";
  CHECK_THROWS_AS(self.Validate(), DomainError);
}

TEST_CASE("score table validation and json round trip") {
  ScoreTable table(ScoreMethod::kElo, {"a", "b"}, {1500.5, 1499.5});
  CHECK(table.At("b") == 1499.5);
  CHECK_THROWS_AS(table.At("z"), DomainError);
  CHECK(ParseScoreTableJson(FormatScoreTableJson(table)) == table);
  CHECK_THROWS_AS(ScoreTable(ScoreMethod::kElo, {"a", "a"}, {1, 2}), DomainError);
  CHECK_THROWS_AS(ScoreTable(ScoreMethod::kElo, {"a"}, {std::nan("")}), DomainError);
  EssaySet set({MakeEssay("a")});
  CHECK_THROWS_AS(table.ValidateAgainst(set), DomainError);
}

TEST_CASE("score method names") {
  CHECK(ParseScoreMethod("bt") == ScoreMethod::kBradleyTerry);
  CHECK(ParseScoreMethod("bradley_terry") == ScoreMethod::kBradleyTerry);
  CHECK(ScoreMethodName(ScoreMethod::kRankNet) == "ranknet");
  CHECK_THROWS_AS(ParseScoreMethod("glicko"), DomainError);
}

TEST_CASE("rubric validation") {
  RubricSpec r = RubricSpec::LowMediumHigh();
  CHECK_NOTHROW(r.Validate());
  r.category_thresholds = {3.75, 2.25};
  CHECK_THROWS_AS(r.Validate(), DomainError);
  r.category_thresholds = {1.0, 3.0};
  CHECK_THROWS_AS(r.Validate(), DomainError);
  RubricSpec bad;
  bad.y_min = 2;
  bad.y_max = 2;
  CHECK_THROWS_AS(bad.Validate(), DomainError);
  RubricSpec levels = RubricSpec::IntegerLevels(2, 12);
  levels.levels->push_back(13);
  CHECK_THROWS_AS(levels.Validate(), DomainError);
}

TEST_CASE("format double round trips") {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    double v = rng.Normal() * std::pow(10.0, static_cast<double>(rng.UniformInt(40)) - 20);
    CHECK(std::stod(FormatDouble(v)) == v);
  }
}

TEST_CASE("sha256 known vector") {
  CHECK(Sha256Hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
