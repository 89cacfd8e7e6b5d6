#include "lces/ranknet.h"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "lces/error.h"
#include "lces/io.h"

namespace lces {

using json = nlohmann::json;

namespace {

void CheckDim(std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    throw DomainError("embedding dimension mismatch: expected D=" + std::to_string(expected) +
                      ", got " + std::to_string(actual));
  }
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ClampedBce(double pred, double target) {
  const double p = std::clamp(pred, kProbClamp, 1.0 - kProbClamp);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

void CheckFinite(const std::vector<double>& values, const char* name) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite value in ") + name);
  }
}

}  // namespace

RankNetParams RankNetParams::Zeros(std::size_t input_dim, std::size_t hidden) {
  if (input_dim == 0 || hidden == 0) throw DomainError("RankNet dimensions must be positive");
  RankNetParams params;
  params.input_dim = input_dim;
  params.hidden = hidden;
  params.w1.assign(hidden * input_dim, 0.0);
  params.b1.assign(hidden, 0.0);
  params.w2.assign(hidden, 0.0);
  return params;
}

RankNetParams RankNetParams::Init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  RankNetParams params = Zeros(input_dim, hidden);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& w : params.w1) w = rng.Uniform(-bound1, bound1);
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : params.w2) w = rng.Uniform(-bound2, bound2);
  return params;
}

void RankNetParams::Validate() const {
  if (input_dim == 0 || hidden == 0) throw DomainError("RankNet dimensions must be positive");
  if (w1.size() != hidden * input_dim || b1.size() != hidden || w2.size() != hidden) {
    throw DomainError("RankNet parameter shapes do not match dimensions");
  }
  CheckFinite(w1, "w1");
  CheckFinite(b1, "b1");
  CheckFinite(w2, "w2");
  if (!std::isfinite(b2)) throw DomainError("non-finite value in b2");
}

void TrainConfig::Validate() const {
  if (epochs <= 0) throw DomainError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
  if (batch_size == 0) throw DomainError("batch_size must be positive");
  if (hidden_units == 0) throw DomainError("hidden_units must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw DomainError("dropout_rate must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be non-negative");
}

double Score(const RankNetParams& params, std::span<const double> h) {
  CheckDim(params.input_dim, h.size());
  double s = params.b2;
  for (std::size_t k = 0; k < params.hidden; ++k) {
    const double* row = params.w1.data() + k * params.input_dim;
    double pre = params.b1[k];
    for (std::size_t d = 0; d < params.input_dim; ++d) pre += row[d] * h[d];
    if (pre > 0.0) s += params.w2[k] * pre;
  }
  return s;
}

double Score(const RankNetParams& params, std::span<const double> h,
             std::span<const double> dropout_scale) {
  CheckDim(params.input_dim, h.size());
  if (dropout_scale.size() != params.hidden) {
    throw DomainError("dropout scale must have one entry per hidden unit");
  }
  double s = params.b2;
  for (std::size_t k = 0; k < params.hidden; ++k) {
    const double* row = params.w1.data() + k * params.input_dim;
    double pre = params.b1[k];
    for (std::size_t d = 0; d < params.input_dim; ++d) pre += row[d] * h[d];
    if (pre > 0.0) s += params.w2[k] * dropout_scale[k] * pre;
  }
  return s;
}

double PredictPref(double s_i, double s_j) { return Sigmoid(s_i - s_j); }

double BceLoss(std::span<const double> preds, std::span<const double> targets) {
  if (preds.empty() || preds.size() != targets.size()) {
    throw DomainError("BCE needs equal, non-zero numbers of predictions and targets");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) total += ClampedBce(preds[k], targets[k]);
  return total / static_cast<double>(preds.size());
}

ParamGradients ComputeGradients(const RankNetParams& params,
                                std::span<const std::vector<double>> embeddings,
                                std::span<const IndexedPair> batch, double weight_decay,
                                std::span<const std::vector<double>> dropout_scales) {
  if (batch.empty()) throw DomainError("gradient batch is empty");
  if (!dropout_scales.empty() && dropout_scales.size() != batch.size()) {
    throw DomainError("need one dropout scale vector per pair");
  }
  const std::size_t dim = params.input_dim;
  const std::size_t hidden = params.hidden;

  // Hidden activations depend only on the essay, so each essay in the batch
  // is forwarded once; dropout acts per pair on the cached activations.
  std::vector<std::ptrdiff_t> slot(embeddings.size(), -1);
  std::vector<std::size_t> essays;
  for (const auto& pair : batch) {
    for (std::size_t e : {pair.i, pair.j}) {
      if (e >= embeddings.size()) throw DomainError("pair refers to a missing embedding row");
      if (slot[e] < 0) {
        CheckDim(dim, embeddings[e].size());
        slot[e] = static_cast<std::ptrdiff_t>(essays.size());
        essays.push_back(e);
      }
    }
  }
  std::vector<double> pre(essays.size() * hidden);
  for (std::size_t u = 0; u < essays.size(); ++u) {
    const auto& h = embeddings[essays[u]];
    for (std::size_t k = 0; k < hidden; ++k) {
      const double* row = params.w1.data() + k * dim;
      double acc = params.b1[k];
      for (std::size_t d = 0; d < dim; ++d) acc += row[d] * h[d];
      pre[u * hidden + k] = acc;
    }
  }

  ParamGradients grad;
  grad.w1.assign(hidden * dim, 0.0);
  grad.b1.assign(hidden, 0.0);
  grad.w2.assign(hidden, 0.0);
  std::vector<double> d_act(essays.size() * hidden, 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  double loss = 0.0;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const IndexedPair& pair = batch[p];
    const double* act_i = pre.data() + static_cast<std::size_t>(slot[pair.i]) * hidden;
    const double* act_j = pre.data() + static_cast<std::size_t>(slot[pair.j]) * hidden;
    const double* scale = dropout_scales.empty() ? nullptr : dropout_scales[p].data();
    if (scale && dropout_scales[p].size() != hidden) {
      throw DomainError("dropout scale must have one entry per hidden unit");
    }
    // b2 cancels in the difference.
    double diff = 0.0;
    for (std::size_t k = 0; k < hidden; ++k) {
      const double m = scale ? scale[k] : 1.0;
      diff += params.w2[k] * m * (std::max(act_i[k], 0.0) - std::max(act_j[k], 0.0));
    }
    const double pred = Sigmoid(diff);
    loss += ClampedBce(pred, pair.target);
    const double g = (pred - pair.target) * inv_batch;
    double* d_i = d_act.data() + static_cast<std::size_t>(slot[pair.i]) * hidden;
    double* d_j = d_act.data() + static_cast<std::size_t>(slot[pair.j]) * hidden;
    for (std::size_t k = 0; k < hidden; ++k) {
      const double m = scale ? scale[k] : 1.0;
      grad.w2[k] += g * m * (std::max(act_i[k], 0.0) - std::max(act_j[k], 0.0));
      const double back = g * params.w2[k] * m;
      d_i[k] += back;
      d_j[k] -= back;
    }
  }
  grad.loss = loss * inv_batch;

  for (std::size_t u = 0; u < essays.size(); ++u) {
    const auto& h = embeddings[essays[u]];
    for (std::size_t k = 0; k < hidden; ++k) {
      if (pre[u * hidden + k] <= 0.0) continue;
      const double d = d_act[u * hidden + k];
      if (d == 0.0) continue;
      grad.b1[k] += d;
      double* row = grad.w1.data() + k * dim;
      for (std::size_t c = 0; c < dim; ++c) row[c] += d * h[c];
    }
  }

  if (weight_decay != 0.0) {
    for (std::size_t k = 0; k < grad.w1.size(); ++k) grad.w1[k] += weight_decay * params.w1[k];
    for (std::size_t k = 0; k < hidden; ++k) grad.w2[k] += weight_decay * params.w2[k];
  }
  return grad;
}

Standardizer Standardizer::Fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw DomainError("cannot standardize zero embeddings");
  const std::size_t dim = rows.front().size();
  Standardizer out;
  out.mean.assign(dim, 0.0);
  out.scale.assign(dim, 1.0);
  for (const auto& row : rows) {
    CheckDim(dim, row.size());
    for (std::size_t d = 0; d < dim; ++d) out.mean[d] += row[d];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : out.mean) m /= n;
  std::vector<double> var(dim, 0.0);
  for (const auto& row : rows) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double c = row[d] - out.mean[d];
      var[d] += c * c;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double sd = std::sqrt(var[d] / n);
    out.scale[d] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return out;
}

std::vector<double> Standardizer::Apply(std::span<const double> h) const {
  CheckDim(mean.size(), h.size());
  std::vector<double> out(h.size());
  for (std::size_t d = 0; d < h.size(); ++d) out[d] = (h[d] - mean[d]) * scale[d];
  return out;
}

namespace {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void Step(std::vector<double>& w, const std::vector<double>& g, double lr,
            double bias1, double bias2) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
    }
  }
};

}  // namespace

TrainReport Train(const EssaySet& set, const std::vector<PairwiseRecord>& records,
                  const TrainConfig& cfg, TargetLabel label) {
  cfg.Validate();
  if (records.empty()) throw DomainError("training needs at least one comparison");

  std::vector<IndexedPair> pairs;
  pairs.reserve(records.size());
  std::vector<std::string> missing;
  std::vector<bool> reported(set.size(), false);
  for (const auto& record : records) {
    auto i = set.IndexOf(record.i);
    auto j = set.IndexOf(record.j);
    if (!i || !j) {
      throw DomainError("comparison refers to unknown essay " + (i ? record.j : record.i));
    }
    for (std::size_t e : {*i, *j}) {
      if (!set[e].embedding && !reported[e]) {
        reported[e] = true;
        missing.push_back(set[e].id);
      }
    }
    pairs.push_back({*i, *j, TargetOf(record, label)});
  }
  if (!missing.empty()) throw MissingEmbeddingError(std::move(missing));

  std::vector<std::vector<double>> raw;
  for (const auto& essay : set.essays()) {
    if (essay.embedding) raw.push_back(*essay.embedding);
  }
  Standardizer standardizer = Standardizer::Fit(raw);
  std::vector<std::vector<double>> embeddings(set.size());
  for (std::size_t e = 0; e < set.size(); ++e) {
    if (set[e].embedding) embeddings[e] = standardizer.Apply(*set[e].embedding);
  }

  const std::size_t dim = *set.embedding_dim();
  Rng rng(cfg.seed);
  RankNetParams params = RankNetParams::Init(dim, cfg.hidden_units, rng);
  AdamState adam_w1(params.w1.size()), adam_b1(params.b1.size()), adam_w2(params.w2.size()),
      adam_b2(1);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<IndexedPair> batch;
  std::vector<std::vector<double>> scales;
  const double keep = 1.0 - cfg.dropout_rate;
  const double kept_scale = 1.0 / keep;

  TrainReport report;
  report.pair_count = pairs.size();
  report.epoch_losses.reserve(static_cast<std::size_t>(cfg.epochs));
  double bias1 = 1.0;
  double bias2 = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(pairs[order[k]]);
      if (cfg.dropout_rate > 0.0) {
        scales.resize(batch.size());
        for (auto& scale : scales) {
          scale.resize(params.hidden);
          for (double& s : scale) s = rng.Uniform() < keep ? kept_scale : 0.0;
        }
      }
      ParamGradients grad = ComputeGradients(
          params, embeddings, batch, cfg.weight_decay,
          cfg.dropout_rate > 0.0 ? std::span<const std::vector<double>>(scales)
                                 : std::span<const std::vector<double>>());
      if (!std::isfinite(grad.loss)) throw NonFiniteLossError(epoch, batch_index);
      epoch_loss += grad.loss * static_cast<double>(batch.size());

      bias1 *= 0.9;
      bias2 *= 0.999;
      adam_w1.Step(params.w1, grad.w1, cfg.learning_rate, 1.0 - bias1, 1.0 - bias2);
      adam_b1.Step(params.b1, grad.b1, cfg.learning_rate, 1.0 - bias1, 1.0 - bias2);
      adam_w2.Step(params.w2, grad.w2, cfg.learning_rate, 1.0 - bias1, 1.0 - bias2);
      std::vector<double> b2{params.b2};
      adam_b2.Step(b2, {grad.b2}, cfg.learning_rate, 1.0 - bias1, 1.0 - bias2);
      params.b2 = b2[0];
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }

  report.model = RankNetModel{std::move(params), std::move(standardizer), cfg};
  return report;
}

ScoreTable ScoreAll(const RankNetModel& model, const EssaySet& set) {
  set.RequireEmbeddings();
  std::vector<std::string> ids;
  std::vector<double> scores;
  ids.reserve(set.size());
  scores.reserve(set.size());
  for (const auto& essay : set.essays()) {
    ids.push_back(essay.id);
    scores.push_back(Score(model.params, model.standardizer.Apply(*essay.embedding)));
  }
  return ScoreTable(ScoreMethod::kRankNet, std::move(ids), std::move(scores));
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr std::string_view kModelFormat = "lces-ranknet";
constexpr int kModelVersion = 1;

}  // namespace

std::string FormatModelJson(const RankNetModel& model) {
  const auto& p = model.params;
  const auto& c = model.config;
  json obj = {
      {"format", kModelFormat},
      {"version", kModelVersion},
      {"input_dim", p.input_dim},
      {"hidden", p.hidden},
      {"w1", p.w1},
      {"b1", p.b1},
      {"w2", p.w2},
      {"b2", p.b2},
      {"standardizer", {{"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}}},
      {"train_config",
       {{"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"hidden_units", c.hidden_units},
        {"dropout_rate", c.dropout_rate},
        {"weight_decay", c.weight_decay},
        {"seed", c.seed}}},
  };
  return obj.dump() + "\n";
}

RankNetModel ParseModelJson(std::string_view contents) {
  try {
    json obj = json::parse(contents);
    if (obj.at("format").get<std::string>() != kModelFormat) {
      throw ParseError("not a RankNet model file");
    }
    if (obj.at("version").get<int>() != kModelVersion) {
      throw ParseError("unsupported model version " + obj.at("version").dump());
    }
    RankNetModel model;
    auto& p = model.params;
    p.input_dim = obj.at("input_dim").get<std::size_t>();
    p.hidden = obj.at("hidden").get<std::size_t>();
    p.w1 = obj.at("w1").get<std::vector<double>>();
    p.b1 = obj.at("b1").get<std::vector<double>>();
    p.w2 = obj.at("w2").get<std::vector<double>>();
    p.b2 = obj.at("b2").get<double>();
    p.Validate();
    model.standardizer.mean = obj.at("standardizer").at("mean").get<std::vector<double>>();
    model.standardizer.scale = obj.at("standardizer").at("scale").get<std::vector<double>>();
    if (model.standardizer.mean.size() != p.input_dim ||
        model.standardizer.scale.size() != p.input_dim) {
      throw ParseError("standardizer dimension does not match the model");
    }
    const json& c = obj.at("train_config");
    model.config.epochs = c.at("epochs").get<int>();
    model.config.learning_rate = c.at("learning_rate").get<double>();
    model.config.batch_size = c.at("batch_size").get<std::size_t>();
    model.config.hidden_units = c.at("hidden_units").get<std::size_t>();
    model.config.dropout_rate = c.at("dropout_rate").get<double>();
    model.config.weight_decay = c.at("weight_decay").get<double>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

void SaveModel(const RankNetModel& model, const std::filesystem::path& path) {
  WriteFileAtomic(path, FormatModelJson(model));
}

RankNetModel LoadModel(const std::filesystem::path& path) {
  return ParseModelJson(ReadFile(path));
}

}  // namespace lces
