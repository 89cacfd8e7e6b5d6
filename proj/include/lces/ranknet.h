#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lces/core.h"
#include "lces/random.h"

namespace lces {

// Scoring MLP f(h) = w2 . relu(W1 h + b1) + b2, shared by both sides of a
// pair. w1 is hidden x input, row-major.
struct RankNetParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static RankNetParams Zeros(std::size_t input_dim, std::size_t hidden);
  // Weights uniform in +-1/sqrt(fan_in), biases zero.
  static RankNetParams Init(std::size_t input_dim, std::size_t hidden, Rng& rng);

  void Validate() const;
  bool operator==(const RankNetParams&) const = default;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.001;
  std::size_t batch_size = 4096;
  std::size_t hidden_units = 256;
  double dropout_rate = 0.3;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;

  void Validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Eval-mode score. Throws DomainError on a dimension mismatch.
double Score(const RankNetParams& params, std::span<const double> h);

// Train-mode score: the post-ReLU hidden vector is multiplied elementwise by
// `dropout_scale` (0 for dropped units, 1 / (1 - rate) for kept ones).
double Score(const RankNetParams& params, std::span<const double> h,
             std::span<const double> dropout_scale);

// sigma(s_i - s_j).
double PredictPref(double s_i, double s_j);

inline constexpr double kProbClamp = 1e-12;

// Mean binary cross-entropy; predictions are clamped to
// [kProbClamp, 1 - kProbClamp] before taking logs.
double BceLoss(std::span<const double> preds, std::span<const double> targets);

// A training pair referring to rows of an embedding matrix.
struct IndexedPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double target = 0.5;
};

struct ParamGradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
  // Mean BCE over the batch (without the weight penalty).
  double loss = 0.0;
};

// Gradient of mean BCE + (weight_decay / 2) * (|W1|^2 + |w2|^2).
// `dropout_scales` is either empty (no dropout) or holds one hidden-sized
// scale vector per pair, applied to both branches of that pair.
ParamGradients ComputeGradients(
    const RankNetParams& params,
    std::span<const std::vector<double>> embeddings,
    std::span<const IndexedPair> batch, double weight_decay,
    std::span<const std::vector<double>> dropout_scales = {});

// Per-dimension z-scoring fitted on the training essays.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 / stddev, 1 for constant dimensions

  static Standardizer Fit(std::span<const std::vector<double>> rows);
  std::vector<double> Apply(std::span<const double> h) const;
  bool operator==(const Standardizer&) const = default;
};

struct RankNetModel {
  RankNetParams params;
  Standardizer standardizer;
  TrainConfig config;

  bool operator==(const RankNetModel&) const = default;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  RankNetModel model;
  std::size_t pair_count = 0;

  bool operator==(const TrainReport&) const = default;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over seeded shuffled minibatches.
// Deterministic given its inputs.
TrainReport Train(const EssaySet& set, const std::vector<PairwiseRecord>& records,
                  const TrainConfig& cfg,
                  TargetLabel label = TargetLabel::kDebiased);

// Eval-mode scores for every essay in `set`, which need not be the training set.
ScoreTable ScoreAll(const RankNetModel& model, const EssaySet& set);

std::string FormatModelJson(const RankNetModel& model);
RankNetModel ParseModelJson(std::string_view contents);
void SaveModel(const RankNetModel& model, const std::filesystem::path& path);
RankNetModel LoadModel(const std::filesystem::path& path);

}  // namespace lces
