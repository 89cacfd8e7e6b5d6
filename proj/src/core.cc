#include "lces/core.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <unordered_set>

#include "lces/error.h"
#include "lces/io.h"
#include "lces/labels.h"

namespace lces {

using json = nlohmann::json;

MissingEmbeddingError::MissingEmbeddingError(std::vector<std::string> ids)
    : Error([&] {
        std::string msg = "missing embeddings for " + std::to_string(ids.size()) +
                          " essay(s):";
        for (const auto& id : ids) msg += " " + id;
        return msg;
      }()),
      ids_(std::move(ids)) {}

// ---------------------------------------------------------------------------
// RubricSpec

void RubricSpec::Validate() const {
  if (!std::isfinite(y_min) || !std::isfinite(y_max) || !(y_min < y_max)) {
    throw DomainError("rubric scale requires finite y_min < y_max");
  }
  if (levels) {
    if (levels->empty()) throw DomainError("rubric levels must be non-empty");
    for (std::size_t k = 0; k < levels->size(); ++k) {
      double level = (*levels)[k];
      if (level < y_min || level > y_max) {
        throw DomainError("rubric level " + FormatDouble(level) +
                          " outside the scale");
      }
      if (k > 0 && !((*levels)[k - 1] < level)) {
        throw DomainError("rubric levels must be strictly ascending");
      }
    }
  }
  if (!category_thresholds.empty() &&
      category_names.size() != category_thresholds.size() + 1) {
    throw DomainError("need one more category name than thresholds");
  }
  for (std::size_t k = 0; k < category_thresholds.size(); ++k) {
    double t = category_thresholds[k];
    if (!(t > y_min && t < y_max)) {
      throw DomainError("category threshold " + FormatDouble(t) +
                        " must lie strictly inside the scale");
    }
    if (k > 0 && !(category_thresholds[k - 1] < t)) {
      throw DomainError("category thresholds must be strictly ascending");
    }
  }
}

RubricSpec RubricSpec::IntegerLevels(int lo, int hi) {
  RubricSpec spec;
  spec.y_min = lo;
  spec.y_max = hi;
  std::vector<double> levels;
  for (int v = lo; v <= hi; ++v) levels.push_back(v);
  spec.levels = std::move(levels);
  spec.Validate();
  return spec;
}

RubricSpec RubricSpec::LowMediumHigh() {
  RubricSpec spec;
  spec.y_min = 1.0;
  spec.y_max = 5.0;
  spec.category_thresholds = {2.25, 3.75};
  spec.category_names = {"low", "medium", "high"};
  return spec;
}

// ---------------------------------------------------------------------------
// EssaySet

EssaySet::EssaySet(std::vector<Essay> essays, std::string prompt_text,
                   std::string rubric_text, RubricSpec rubric_spec)
    : essays_(std::move(essays)),
      prompt_text_(std::move(prompt_text)),
      rubric_text_(std::move(rubric_text)),
      rubric_spec_(std::move(rubric_spec)) {
  if (essays_.empty()) throw DomainError("no essays");
  rubric_spec_.Validate();
  index_.reserve(essays_.size());
  for (std::size_t k = 0; k < essays_.size(); ++k) {
    const Essay& essay = essays_[k];
    if (essay.id.empty()) {
      throw DomainError("essay #" + std::to_string(k + 1) + " has an empty id");
    }
    if (essay.text.empty()) throw DomainError("essay " + essay.id + " has empty text");
    if (essay.gold_score && !std::isfinite(*essay.gold_score)) {
      throw DomainError("essay " + essay.id + " has a non-finite gold score");
    }
    if (!index_.emplace(essay.id, k).second) {
      throw DomainError("duplicate essay id: " + essay.id);
    }
    if (essay.embedding) {
      if (essay.embedding->empty()) {
        throw DomainError("essay " + essay.id + " has an empty embedding");
      }
      if (!embedding_dim_) {
        embedding_dim_ = essay.embedding->size();
      } else if (*embedding_dim_ != essay.embedding->size()) {
        throw DomainError("essay " + essay.id + " has embedding dimension " +
                          std::to_string(essay.embedding->size()) + ", expected " +
                          std::to_string(*embedding_dim_));
      }
      for (double v : *essay.embedding) {
        if (!std::isfinite(v)) {
          throw DomainError("essay " + essay.id + " has a non-finite embedding value");
        }
      }
    }
  }
}

std::optional<std::size_t> EssaySet::IndexOf(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Essay& EssaySet::At(std::string_view id) const {
  auto index = IndexOf(id);
  if (!index) throw DomainError("unknown essay id: " + std::string(id));
  return essays_[*index];
}

std::vector<std::string> EssaySet::MissingEmbeddingIds() const {
  std::vector<std::string> ids;
  for (const auto& essay : essays_) {
    if (!essay.embedding) ids.push_back(essay.id);
  }
  return ids;
}

void EssaySet::RequireEmbeddings() const {
  auto missing = MissingEmbeddingIds();
  if (!missing.empty()) throw MissingEmbeddingError(std::move(missing));
}

void EssaySet::RequireGold() const {
  std::string missing;
  for (const auto& essay : essays_) {
    if (!essay.gold_score) missing += " " + essay.id;
  }
  if (!missing.empty()) throw DomainError("missing gold scores for:" + missing);
}

std::vector<double> EssaySet::GoldScores() const {
  RequireGold();
  std::vector<double> gold;
  gold.reserve(essays_.size());
  for (const auto& essay : essays_) gold.push_back(*essay.gold_score);
  return gold;
}

EssaySet EssaySet::WithContext(std::string prompt_text, std::string rubric_text,
                               RubricSpec rubric_spec) const {
  return EssaySet(essays_, std::move(prompt_text), std::move(rubric_text),
                  std::move(rubric_spec));
}

EssaySet EssaySet::WithEmbeddings(std::vector<std::vector<double>> embeddings) const {
  if (embeddings.size() != essays_.size()) {
    throw DomainError("embedding count does not match essay count");
  }
  std::vector<Essay> essays = essays_;
  for (std::size_t k = 0; k < essays.size(); ++k) {
    essays[k].embedding = std::move(embeddings[k]);
  }
  return EssaySet(std::move(essays), prompt_text_, rubric_text_, rubric_spec_);
}

EssaySet EssaySet::Subset(const std::vector<std::size_t>& indices) const {
  std::vector<Essay> essays;
  essays.reserve(indices.size());
  for (std::size_t index : indices) essays.push_back(essays_.at(index));
  return EssaySet(std::move(essays), prompt_text_, rubric_text_, rubric_spec_);
}

// ---------------------------------------------------------------------------
// Essay files

namespace {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180 reader: quoted fields may contain commas, quotes ("") and newlines.
std::vector<CsvRecord> ReadCsv(std::string_view text) {
  std::vector<CsvRecord> records;
  std::size_t pos = 0;
  std::size_t line = 1;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos < text.size()) {
    CsvRecord record;
    record.line = line;
    std::string field;
    bool done = false;
    bool any = false;
    while (!done) {
      if (pos < text.size() && text[pos] == '"') {
        ++pos;
        while (true) {
          if (pos >= text.size()) {
            throw ParseError("unterminated quoted field", record.line);
          }
          char c = text[pos++];
          if (c == '"') {
            if (pos < text.size() && text[pos] == '"') {
              field.push_back('"');
              ++pos;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (pos < text.size() && text[pos] != ',' && text[pos] != '\n' &&
            text[pos] != '\r') {
          throw ParseError("unexpected character after closing quote", line);
        }
      } else {
        while (pos < text.size() && text[pos] != ',' && text[pos] != '\n' &&
               text[pos] != '\r') {
          if (text[pos] == '"') throw ParseError("stray quote in field", line);
          field.push_back(text[pos++]);
        }
      }
      any = any || !field.empty();
      record.fields.push_back(std::move(field));
      field.clear();
      if (pos < text.size() && text[pos] == ',') {
        ++pos;
        any = true;
        continue;
      }
      if (pos < text.size() && text[pos] == '\r') ++pos;
      if (pos < text.size() && text[pos] == '\n') {
        ++pos;
        ++line;
      }
      done = true;
    }
    if (any) records.push_back(std::move(record));
  }
  return records;
}

std::optional<double> ParseOptionalNumber(const std::string& text, std::size_t line) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError("invalid gold_score '" + text + "'", line);
  }
  return value;
}

// Rejects duplicate ids with the offending line before EssaySet sees them.
void CheckDuplicate(std::unordered_set<std::string>& seen, const std::string& id,
                    std::size_t line) {
  if (!seen.insert(id).second) {
    throw ParseError("duplicate essay id: " + id, line);
  }
}

}  // namespace

EssayFormat EssayFormatFromPath(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".csv") return EssayFormat::kCsv;
  if (ext == ".jsonl" || ext == ".json") return EssayFormat::kJsonl;
  throw Error("cannot infer essay format from " + path.string());
}

EssaySet ParseEssaysCsv(std::string_view contents) {
  auto records = ReadCsv(contents);
  if (records.empty()) throw ParseError("no essays");
  const std::vector<std::string> kHeader = {"id", "prompt_id", "text", "gold_score"};
  if (records.front().fields != kHeader) {
    throw ParseError("expected header id,prompt_id,text,gold_score", records.front().line);
  }
  std::vector<Essay> essays;
  std::unordered_set<std::string> seen;
  for (std::size_t k = 1; k < records.size(); ++k) {
    const auto& record = records[k];
    if (record.fields.size() != 4) {
      throw ParseError("expected 4 fields, found " + std::to_string(record.fields.size()),
                       record.line);
    }
    Essay essay;
    essay.id = record.fields[0];
    essay.prompt_id = record.fields[1];
    essay.text = record.fields[2];
    essay.gold_score = ParseOptionalNumber(record.fields[3], record.line);
    if (essay.id.empty()) throw ParseError("empty id", record.line);
    if (essay.text.empty()) throw ParseError("empty text", record.line);
    CheckDuplicate(seen, essay.id, record.line);
    essays.push_back(std::move(essay));
  }
  if (essays.empty()) throw ParseError("no essays");
  return EssaySet(std::move(essays));
}

EssaySet ParseEssaysJsonl(std::string_view contents) {
  std::vector<Essay> essays;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == contents.size()) break;
      continue;
    }
    try {
      json obj = json::parse(line);
      if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
      Essay essay;
      essay.id = obj.at("id").get<std::string>();
      essay.prompt_id = obj.value("prompt_id", std::string());
      essay.text = obj.at("text").get<std::string>();
      if (auto it = obj.find("gold_score"); it != obj.end() && !it->is_null()) {
        essay.gold_score = it->get<double>();
      }
      if (auto it = obj.find("embedding"); it != obj.end() && !it->is_null()) {
        essay.embedding = it->get<std::vector<double>>();
      }
      if (essay.id.empty()) throw ParseError("empty id", line_no);
      if (essay.text.empty()) throw ParseError("empty text", line_no);
      CheckDuplicate(seen, essay.id, line_no);
      essays.push_back(std::move(essay));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (end == contents.size()) break;
  }
  if (essays.empty()) throw ParseError("no essays");
  return EssaySet(std::move(essays));
}

EssaySet LoadEssays(const std::filesystem::path& path, EssayFormat format) {
  std::string contents = ReadFile(path);
  try {
    return format == EssayFormat::kCsv ? ParseEssaysCsv(contents)
                                       : ParseEssaysJsonl(contents);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string FormatEssaysJsonl(const EssaySet& set) {
  std::string out;
  for (const auto& essay : set.essays()) {
    json obj = {{"id", essay.id}, {"prompt_id", essay.prompt_id}, {"text", essay.text}};
    if (essay.gold_score) obj["gold_score"] = *essay.gold_score;
    if (essay.embedding) obj["embedding"] = *essay.embedding;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void SaveEssaysJsonl(const EssaySet& set, const std::filesystem::path& path) {
  WriteFileAtomic(path, FormatEssaysJsonl(set));
}

// ---------------------------------------------------------------------------
// Comparisons

void PairwiseRecord::Validate() const {
  if (i.empty() || j.empty()) throw DomainError("comparison with empty essay id");
  if (i == j) throw DomainError("comparison of essay " + i + " with itself");
  double expected = Debias(c_ij, c_ji);
  if (!IsPairLabel(c_tilde) || c_tilde != expected) {
    throw DomainError("c_tilde " + FormatDouble(c_tilde) + " inconsistent with (c_ij, c_ji) = (" +
                      FormatDouble(c_ij) + ", " + FormatDouble(c_ji) + "), expected " +
                      FormatDouble(expected));
  }
}

std::string FormatComparisonsJsonl(const std::vector<PairwiseRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json obj = {{"i", r.i},         {"j", r.j},         {"c_ij", r.c_ij},
                {"c_ji", r.c_ji},   {"c_tilde", r.c_tilde}, {"judge_id", r.judge_id}};
    if (r.reasoning_fwd) obj["reasoning_fwd"] = *r.reasoning_fwd;
    if (r.reasoning_rev) obj["reasoning_rev"] = *r.reasoning_rev;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<PairwiseRecord> ParseComparisonsJsonl(std::string_view contents) {
  std::vector<PairwiseRecord> records;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::size_t index = records.size();
    PairwiseRecord r;
    try {
      json obj = json::parse(line);
      r.i = obj.at("i").get<std::string>();
      r.j = obj.at("j").get<std::string>();
      r.c_ij = obj.at("c_ij").get<double>();
      r.c_ji = obj.at("c_ji").get<double>();
      r.c_tilde = obj.at("c_tilde").get<double>();
      r.judge_id = obj.at("judge_id").get<std::string>();
      if (auto it = obj.find("reasoning_fwd"); it != obj.end() && !it->is_null()) {
        r.reasoning_fwd = it->get<std::string>();
      }
      if (auto it = obj.find("reasoning_rev"); it != obj.end() && !it->is_null()) {
        r.reasoning_rev = it->get<std::string>();
      }
      r.Validate();
    } catch (const json::exception& e) {
      throw ParseError("record " + std::to_string(index) + ": " + e.what());
    } catch (const DomainError& e) {
      throw ParseError("record " + std::to_string(index) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

void SaveComparisons(const std::vector<PairwiseRecord>& records,
                     const std::filesystem::path& path) {
  for (const auto& r : records) r.Validate();
  WriteFileAtomic(path, FormatComparisonsJsonl(records));
}

std::vector<PairwiseRecord> LoadComparisons(const std::filesystem::path& path) {
  return ParseComparisonsJsonl(ReadFile(path));
}

// ---------------------------------------------------------------------------
// Scores

std::string_view ScoreMethodName(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::kRankNet:
      return "ranknet";
    case ScoreMethod::kBradleyTerry:
      return "bradley_terry";
    case ScoreMethod::kElo:
      return "elo";
  }
  return "ranknet";
}

ScoreMethod ParseScoreMethod(std::string_view name) {
  if (name == "ranknet") return ScoreMethod::kRankNet;
  if (name == "bradley_terry" || name == "bt") return ScoreMethod::kBradleyTerry;
  if (name == "elo") return ScoreMethod::kElo;
  throw DomainError("unknown scoring method: " + std::string(name));
}

ScoreTable::ScoreTable(ScoreMethod method, std::vector<std::string> ids,
                       std::vector<double> scores)
    : method_(method), ids_(std::move(ids)), scores_(std::move(scores)) {
  if (ids_.size() != scores_.size()) {
    throw DomainError("score table ids and scores differ in length");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t k = 0; k < ids_.size(); ++k) {
    if (!seen.insert(ids_[k]).second) {
      throw DomainError("duplicate id in score table: " + ids_[k]);
    }
    if (!std::isfinite(scores_[k])) {
      throw DomainError("non-finite score for essay " + ids_[k]);
    }
  }
}

double ScoreTable::At(std::string_view id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw DomainError("no score for essay " + std::string(id));
  return scores_[static_cast<std::size_t>(it - ids_.begin())];
}

void ScoreTable::ValidateAgainst(const EssaySet& set) const {
  for (const auto& id : ids_) {
    if (!set.Contains(id)) throw DomainError("scored essay " + id + " not in essay set");
  }
}

std::string FormatScoreTableJson(const ScoreTable& table) {
  json scores = json::array();
  for (std::size_t k = 0; k < table.size(); ++k) {
    scores.push_back({{"id", table.ids()[k]}, {"latent", table.scores()[k]}});
  }
  json obj = {{"method", ScoreMethodName(table.method())}, {"scores", scores}};
  return obj.dump(2) + "\n";
}

ScoreTable ParseScoreTableJson(std::string_view contents) {
  try {
    json obj = json::parse(contents);
    std::vector<std::string> ids;
    std::vector<double> scores;
    for (const auto& entry : obj.at("scores")) {
      ids.push_back(entry.at("id").get<std::string>());
      scores.push_back(entry.at("latent").get<double>());
    }
    return ScoreTable(ParseScoreMethod(obj.at("method").get<std::string>()),
                      std::move(ids), std::move(scores));
  } catch (const json::exception& e) {
    throw ParseError(std::string("score table: ") + e.what());
  }
}

}  // namespace lces
