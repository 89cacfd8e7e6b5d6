#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lces/core.h"

namespace lces {

struct SyntheticSpec {
  std::size_t dim = 16;
  double signal_strength = 1.0;
  double noise_std = 0.5;
  std::uint64_t seed = 0;

  void Validate() const;
};

// h_i = signal_strength * gold_i * u + noise_std * z_i, where u is a seeded
// unit direction and z_i standard normal noise.
std::vector<std::vector<double>> EmbedSynthetic(std::span<const double> gold,
                                                const SyntheticSpec& spec);

// Synthetic essay set with gold drawn uniformly from the rubric's levels and
// synthetic embeddings of those golds.
EssaySet MakeSyntheticEssaySet(std::size_t n, const RubricSpec& rubric,
                               const SyntheticSpec& spec);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string provider() const = 0;
  virtual std::string model() const = 0;
  // Must be safe to call concurrently.
  virtual std::vector<double> Embed(std::string_view text) const = 0;
};

struct HttpEmbeddingConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "text-embedding-3-large";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 60;
};

// OpenAI-compatible embeddings endpoint (POST <base_url>/embeddings).
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig cfg);
  std::string provider() const override;
  std::string model() const override { return cfg_.model; }
  std::vector<double> Embed(std::string_view text) const override;

 private:
  HttpEmbeddingConfig cfg_;
};

// One JSON file per (provider, model, essay id). An entry is only a hit when
// the stored text digest matches the essay's current text.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  std::optional<std::vector<double>> Get(const EmbeddingProvider& provider,
                                         const Essay& essay) const;
  void Put(const EmbeddingProvider& provider, const Essay& essay,
           std::span<const double> embedding) const;
  std::filesystem::path PathFor(const EmbeddingProvider& provider,
                                std::string_view essay_id) const;

 private:
  std::filesystem::path dir_;
};

struct EmbedOptions {
  int max_attempts = 3;
  std::size_t max_in_flight = 4;
  std::optional<std::filesystem::path> cache_dir;
};

struct EmbedStats {
  std::size_t remote_calls = 0;
  std::size_t cache_hits = 0;
};

// Embeds every essay, consulting the cache first. Throws RemoteError listing
// essays that failed after all attempts, and DomainError naming the first
// essay whose vector dimension disagrees with the others.
EssaySet EmbedRemote(const EssaySet& set, const EmbeddingProvider& provider,
                     const EmbedOptions& options, EmbedStats* stats = nullptr);

}  // namespace lces
