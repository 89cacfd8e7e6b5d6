#include "lces/embeddings.h"

#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <thread>

#include "http_client.h"
#include "lces/error.h"
#include "lces/io.h"
#include "lces/random.h"

namespace lces {

using json = nlohmann::json;

void SyntheticSpec::Validate() const {
  if (dim == 0) throw DomainError("synthetic embedding dimension must be positive");
  if (!(signal_strength >= 0.0) || !(noise_std >= 0.0)) {
    throw DomainError("signal_strength and noise_std must be non-negative");
  }
}

std::vector<std::vector<double>> EmbedSynthetic(std::span<const double> gold,
                                                const SyntheticSpec& spec) {
  spec.Validate();
  Rng rng(spec.seed);
  std::vector<double> direction(spec.dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& u : direction) {
      u = rng.Normal();
      norm += u * u;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& u : direction) u /= norm;

  std::vector<std::vector<double>> out;
  out.reserve(gold.size());
  for (double g : gold) {
    if (!std::isfinite(g)) throw DomainError("synthetic embeddings need finite gold scores");
    std::vector<double> h(spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      h[d] = spec.signal_strength * g * direction[d] + spec.noise_std * rng.Normal();
    }
    out.push_back(std::move(h));
  }
  return out;
}

EssaySet MakeSyntheticEssaySet(std::size_t n, const RubricSpec& rubric,
                               const SyntheticSpec& spec) {
  rubric.Validate();
  if (!rubric.levels) throw DomainError("synthetic essays need a rubric with levels");
  if (n == 0) throw DomainError("synthetic essay count must be positive");
  const auto& levels = *rubric.levels;
  Rng rng(MixSeed(spec.seed, 0x5eed));
  const int width = static_cast<int>(std::to_string(n).size());
  std::vector<Essay> essays;
  std::vector<double> gold;
  essays.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Essay essay;
    essay.id = fmt::format("e{:0{}}", k + 1, width);
    essay.prompt_id = "synthetic";
    essay.gold_score = levels[rng.UniformInt(levels.size())];
    essay.text = fmt::format("Synthetic essay {} with latent quality {}.", k + 1,
                             FormatDouble(*essay.gold_score));
    gold.push_back(*essay.gold_score);
    essays.push_back(std::move(essay));
  }
  EssaySet set(std::move(essays), "Synthetic essay prompt.", "Synthetic rubric.", rubric);
  return set.WithEmbeddings(EmbedSynthetic(gold, spec));
}

// ---------------------------------------------------------------------------
// Remote provider

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpEmbeddingProvider::provider() const { return "http:" + cfg_.base_url; }

std::vector<double> HttpEmbeddingProvider::Embed(std::string_view text) const {
  json request = {{"model", cfg_.model}, {"input", std::string(text)}};
  std::string body = internal::PostJson(cfg_.base_url, "/embeddings", request.dump(),
                                        cfg_.api_key_env, cfg_.timeout_seconds);
  json response = json::parse(body, nullptr, false);
  if (response.is_discarded()) throw RemoteError("embedding response is not JSON");
  try {
    return response.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw RemoteError(std::string("unexpected embedding response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Cache

namespace {

std::string SafeName(std::string_view raw) {
  std::string out;
  for (char c : raw.substr(0, 48)) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return fmt::format("{}-{:016x}", out, Fnv1a64(raw));
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path EmbeddingCache::PathFor(const EmbeddingProvider& provider,
                                              std::string_view essay_id) const {
  return dir_ / SafeName(provider.provider()) / SafeName(provider.model()) /
         (SafeName(essay_id) + ".json");
}

std::optional<std::vector<double>> EmbeddingCache::Get(const EmbeddingProvider& provider,
                                                       const Essay& essay) const {
  const auto path = PathFor(provider, essay.id);
  if (!std::filesystem::is_regular_file(path)) return std::nullopt;
  json entry = json::parse(ReadFile(path), nullptr, false);
  if (entry.is_discarded() || !entry.is_object()) return std::nullopt;
  if (entry.value("id", std::string()) != essay.id ||
      entry.value("text_sha256", std::string()) != Sha256Hex(essay.text)) {
    return std::nullopt;
  }
  try {
    return entry.at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void EmbeddingCache::Put(const EmbeddingProvider& provider, const Essay& essay,
                         std::span<const double> embedding) const {
  json entry = {{"id", essay.id},
                {"text_sha256", Sha256Hex(essay.text)},
                {"embedding", std::vector<double>(embedding.begin(), embedding.end())}};
  WriteFileAtomic(PathFor(provider, essay.id), entry.dump() + "\n");
}

// ---------------------------------------------------------------------------
// Batch embedding

EssaySet EmbedRemote(const EssaySet& set, const EmbeddingProvider& provider,
                     const EmbedOptions& options, EmbedStats* stats) {
  if (options.max_attempts < 1) throw DomainError("max_attempts must be positive");
  std::optional<EmbeddingCache> cache;
  if (options.cache_dir) cache.emplace(*options.cache_dir);

  const std::size_t n = set.size();
  std::vector<std::optional<std::vector<double>>> vectors(n);
  std::vector<bool> from_cache(n, false);
  std::vector<std::size_t> pending;
  EmbedStats local;
  for (std::size_t k = 0; k < n; ++k) {
    if (cache) {
      if (auto hit = cache->Get(provider, set[k])) {
        vectors[k] = std::move(*hit);
        from_cache[k] = true;
        ++local.cache_hits;
        continue;
      }
    }
    pending.push_back(k);
  }

  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const std::size_t k = pending[slot];
      for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
        ++calls;
        try {
          vectors[k] = provider.Embed(set[k].text);
          break;
        } catch (const RemoteError& e) {
          errors[k] = e.what();
          spdlog::debug("embedding attempt {}/{} for {} failed: {}", attempt,
                        options.max_attempts, set[k].id, e.what());
        }
      }
    }
  };
  const std::size_t threads =
      std::max<std::size_t>(1, std::min(options.max_in_flight, pending.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  local.remote_calls = calls.load();
  if (stats) *stats = local;

  // Validate dimensions in essay order and cache every fetched vector that
  // passes, so an aborted run does not pay for them again.
  std::optional<std::size_t> dim;
  std::string failed;
  std::optional<std::string> mismatch;
  for (std::size_t k = 0; k < n; ++k) {
    if (!vectors[k]) {
      failed += " " + set[k].id;
      continue;
    }
    const std::size_t d = vectors[k]->size();
    if (d == 0) {
      if (!mismatch) mismatch = "empty embedding for essay " + set[k].id;
      continue;
    }
    if (!dim) dim = d;
    if (d != *dim) {
      if (!mismatch) {
        mismatch = "embedding dimension " + std::to_string(d) + " for essay " + set[k].id +
                   " differs from " + std::to_string(*dim);
      }
      continue;
    }
    if (cache && !from_cache[k]) cache->Put(provider, set[k], *vectors[k]);
  }
  if (mismatch) throw DomainError(*mismatch);
  if (!failed.empty()) throw RemoteError("embedding failed for:" + failed);

  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(n);
  for (auto& v : vectors) embeddings.push_back(std::move(*v));
  return set.WithEmbeddings(std::move(embeddings));
}

}  // namespace lces
