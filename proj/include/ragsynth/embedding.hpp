#pragma once

// Embedding vectors, vector arithmetic, and the pluggable provider contract
// (local hashing embedder, remote HTTP embedder, on-disk cache wrapper).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/corpus.hpp"
#include "ragsynth/detail/concurrency.hpp"
#include "ragsynth/detail/hash.hpp"
#include "ragsynth/detail/http.hpp"
#include "ragsynth/detail/io.hpp"
#include "ragsynth/detail/utf8.hpp"
#include "ragsynth/error.hpp"

namespace ragsynth {

/// Fixed-length vector of finite reals.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidArgument("embedding vector must have dim >= 1");
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("embedding vector has a non-finite entry");
    }
  }
  EmbeddingVector(std::initializer_list<double> values)
      : EmbeddingVector(std::vector<double>(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

struct EmbeddedChunk {
  Chunk chunk;
  EmbeddingVector vector;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

inline EmbeddingVector normalize(const EmbeddingVector& v) {
  const double n = norm(v.values());
  if (!(n > 0.0)) throw DegenerateEmbedding();
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x /= n;
  return EmbeddingVector(std::move(out));
}

/// dot(a,b) / (|a||b|), clamped to [-1, 1].
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  const double na = norm(a.values());
  const double nb = norm(b.values());
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateEmbedding();
  return std::clamp(dot(a.values(), b.values()) / (na * nb), -1.0, 1.0);
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  /// One vector per text, in input order, each of exactly dim() entries.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

/// Deterministic offline embedder: counts of lowercased character trigrams
/// (text padded with one space on each side) hashed into `dim` buckets,
/// then L2-normalized. Texts shorter than a trigram hash as a single gram.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim_ < 2) throw InvalidArgument("embedding dimension must be >= 2");
  }

  std::string id() const override {
    return "local-trigram-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
  }
  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed_one(std::string_view text) const {
    std::u32string padded = U" ";
    padded += utf8::lower_codepoints(text);
    padded += U" ";
    std::vector<double> counts(dim_, 0.0);
    const std::uint64_t basis = hash::mix(seed_ ^ hash::kFnvOffset);
    const std::size_t n = 3;
    if (padded.size() < n) {
      counts[hash::fnv1a_u32(padded, basis) % dim_] += 1.0;
    } else {
      for (std::size_t i = 0; i + n <= padded.size(); ++i) {
        const std::u32string_view gram(padded.data() + i, n);
        counts[hash::fnv1a_u32(gram, basis) % dim_] += 1.0;
      }
    }
    return normalize(EmbeddingVector(std::move(counts)));
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RemoteEmbedderConfig {
  std::string url;
  std::string model = "text-embedding-3-small";
  std::string api_key_env = "RAGSYNTH_EMBEDDING_API_KEY";
  std::size_t dim = 1536;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  http::RetryPolicy retry{};
};

/// HTTP embedder: POST {"input": [...], "model"} -> {"data": [{"embedding": [...]}]}.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig cfg)
      : cfg_(std::move(cfg)), throttle_(std::make_shared<concurrency::Throttle>(cfg_.max_in_flight)) {
    if (cfg_.dim < 2) throw InvalidArgument("embedding dimension must be >= 2");
    if (cfg_.batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
    if (cfg_.url.empty()) throw InvalidArgument("remote embedder needs an endpoint URL");
  }

  std::string id() const override { return "remote:" + cfg_.model; }
  std::size_t dim() const override { return cfg_.dim; }
  const concurrency::Throttle& throttle() const { return *throttle_; }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    const std::size_t batches = (texts.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    using Outcome = std::variant<std::vector<EmbeddingVector>, std::string>;
    const auto token = http::credential_from_env(cfg_.api_key_env);
    auto results = concurrency::ordered_map(
        batches, std::max<std::size_t>(1, cfg_.max_in_flight), [&](std::size_t b) -> Outcome {
          const std::size_t first = b * cfg_.batch_size;
          const std::size_t last = std::min(texts.size(), first + cfg_.batch_size);
          try {
            auto permit = throttle_->permit();
            return request(texts.subspan(first, last - first), token);
          } catch (const TransportError& e) {
            return std::string(e.what());
          }
        });
    std::vector<std::size_t> failed;
    std::string first_error;
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t b = 0; b < results.size(); ++b) {
      if (auto* err = std::get_if<std::string>(&results[b])) {
        if (failed.empty()) first_error = *err;
        failed.push_back(b);
        continue;
      }
      auto& vecs = std::get<std::vector<EmbeddingVector>>(results[b]);
      out.insert(out.end(), std::make_move_iterator(vecs.begin()), std::make_move_iterator(vecs.end()));
    }
    if (!failed.empty()) {
      throw TransportError("embedding batches failed (" + std::to_string(failed.size()) + " of " +
                               std::to_string(batches) + "): " + first_error,
                           std::move(failed));
    }
    return out;
  }

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> batch,
                                       const std::string& token) const {
    const nlohmann::json body = {{"input", std::vector<std::string>(batch.begin(), batch.end())},
                                 {"model", cfg_.model}};
    const auto reply = http::post_json(cfg_.url, body.dump(), token, cfg_.retry);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception&) {
      throw ProviderError("embedding endpoint returned malformed JSON");
    }
    if (!parsed.contains("data") || !parsed["data"].is_array()) {
      throw ProviderError("embedding response lacks a 'data' array");
    }
    auto data = parsed["data"];
    if (data.size() != batch.size()) {
      throw ProviderError("embedding response has " + std::to_string(data.size()) +
                          " vectors for " + std::to_string(batch.size()) + " inputs");
    }
    if (std::all_of(data.begin(), data.end(), [](const auto& d) { return d.contains("index"); })) {
      std::sort(data.begin(), data.end(),
                [](const auto& a, const auto& b) { return a["index"] < b["index"]; });
    }
    std::vector<EmbeddingVector> out;
    out.reserve(batch.size());
    for (const auto& d : data) {
      std::vector<double> v;
      try {
        v = d.at("embedding").get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw ProviderError("embedding entry is not a float array");
      }
      if (v.size() != cfg_.dim) throw DimensionMismatch(cfg_.dim, v.size());
      out.emplace_back(std::move(v));
    }
    return out;
  }

  RemoteEmbedderConfig cfg_;
  std::shared_ptr<concurrency::Throttle> throttle_;
};

/// Wraps a provider with a line-delimited {"text_hash", "vector"} cache file.
/// New entries are appended to the file as they are computed.
class CachingEmbedder final : public EmbeddingProvider {
 public:
  CachingEmbedder(std::shared_ptr<const EmbeddingProvider> inner, std::filesystem::path path)
      : inner_(std::move(inner)), path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      io::for_each_jsonl(path_, [&](const nlohmann::json& j, std::size_t line) {
        auto v = io::field<std::vector<double>>(j, "vector", line);
        if (v.size() != inner_->dim()) throw DimensionMismatch(inner_->dim(), v.size());
        cache_.insert_or_assign(io::field<std::string>(j, "text_hash", line),
                                EmbeddingVector(std::move(v)));
      });
    }
  }

  std::string id() const override { return inner_->id(); }
  std::size_t dim() const override { return inner_->dim(); }

  std::string key(std::string_view text) const {
    return hash::hex(hash::fnv1a(text, hash::fnv1a(inner_->id() + '\0')));
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<std::string> keys;
    keys.reserve(texts.size());
    std::vector<std::string> missing;
    std::vector<std::string> missing_keys;
    {
      std::lock_guard lock(mu_);
      for (const auto& t : texts) {
        keys.push_back(key(t));
        if (!cache_.count(keys.back()) &&
            std::find(missing_keys.begin(), missing_keys.end(), keys.back()) == missing_keys.end()) {
          missing.push_back(t);
          missing_keys.push_back(keys.back());
        }
      }
    }
    if (!missing.empty()) {
      const auto fresh = inner_->embed(missing);
      std::lock_guard lock(mu_);
      std::ofstream out(path_, std::ios::app | std::ios::binary);
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        const auto& v = fresh[i];
        if (v.dim() != inner_->dim()) throw DimensionMismatch(inner_->dim(), v.dim());
        nlohmann::ordered_json rec = {
            {"text_hash", missing_keys[i]},
            {"vector", std::vector<double>(v.values().begin(), v.values().end())}};
        out << rec.dump() << '\n';
        cache_.insert_or_assign(missing_keys[i], v);
      }
    }
    std::lock_guard lock(mu_);
    std::vector<EmbeddingVector> result;
    result.reserve(texts.size());
    for (const auto& k : keys) result.push_back(cache_.at(k));
    return result;
  }

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  std::filesystem::path path_;
  mutable std::mutex mu_;
  mutable std::map<std::string, EmbeddingVector> cache_;
};

/// Embeds `texts` and enforces the provider's declared dimension.
inline std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts,
                                                const EmbeddingProvider& provider) {
  if (texts.empty()) return {};
  if (provider.dim() < 2) throw InvalidArgument("embedding dimension must be >= 2");
  auto out = provider.embed(texts);
  if (out.size() != texts.size()) {
    throw ProviderError("provider returned " + std::to_string(out.size()) + " vectors for " +
                        std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.dim() != provider.dim()) throw DimensionMismatch(provider.dim(), v.dim());
  }
  return out;
}

inline std::vector<EmbeddedChunk> embed_chunks(const std::vector<Chunk>& chunks,
                                               const EmbeddingProvider& provider,
                                               bool normalize_vectors = true) {
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto vectors = embed_texts(texts, provider);
  std::vector<EmbeddedChunk> out;
  out.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    out.push_back({chunks[i], normalize_vectors ? normalize(vectors[i]) : std::move(vectors[i])});
  }
  return out;
}

}  // namespace ragsynth
