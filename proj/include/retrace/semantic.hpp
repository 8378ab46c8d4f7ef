#pragma once

#include "retrace/generation.hpp"

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace retrace::semantic {

enum class Family { part = 0, summary = 1, original = 2 };
inline constexpr std::size_t kFamilyCount = 3;

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

struct EmbeddingVector {
  std::vector<double> values;
  std::string source_id;
  Family family = Family::original;
};

/// Normalized dot product. Throws std::invalid_argument on a dimension
/// mismatch, an empty vector or a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  /// Model tag used for cache keys.
  virtual std::string model() const = 0;
  /// One vector per input text, in order. May throw GenerationError.
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Deterministic offline embedding: signed feature hashing of character
/// trigrams into `dim` buckets. Similar strings land near each other, which
/// is enough to exercise the evaluation end to end without a model.
class HashEmbeddingClient final : public EmbeddingClient {
 public:
  explicit HashEmbeddingClient(std::size_t dim = 256) : dim_(dim) {}
  std::string model() const override { return "mock:hash-" + std::to_string(dim_); }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

/// POSTs {model, input: [...]} to <base_url>/embeddings and reads
/// data[i].embedding, ordered by data[i].index.
class HttpEmbeddingClient final : public EmbeddingClient {
 public:
  explicit HttpEmbeddingClient(EndpointConfig config);
  std::string model() const override { return config_.model; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  EndpointConfig config_;
};

/// Content-addressed on-disk cache, one file per (model, text). File layout:
/// 8-byte magic "RTEMB001", u32 dimension, u32 model-tag length, the model
/// tag bytes, then `dimension` little-endian float64 values. Writes go
/// through a temp file and rename; one writer at a time.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  std::optional<std::vector<double>> get(const std::string& model, std::string_view text) const;
  void put(const std::string& model, std::string_view text, std::span<const double> values) const;
  std::filesystem::path path_for(const std::string& model, std::string_view text) const;

 private:
  std::filesystem::path dir_;
};

struct EmbedOptions {
  std::size_t batch_size = 32;
  std::size_t max_retries = 3;
  std::chrono::milliseconds retry_backoff{500};
  const EmbeddingCache* cache = nullptr;
};

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One vector per text, order-aligned. Cached texts skip the endpoint.
/// Throws EmbeddingError naming the batch after exhausted retries, on a
/// wrong-sized reply, or when the dimension drifts between vectors; throws
/// std::invalid_argument on an empty text list.
std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts, EmbeddingClient& client,
                                             const EmbedOptions& options = {});

/// embed_texts plus id/family tagging. `ids` must align with `texts`.
std::vector<EmbeddingVector> embed_corpus(std::span<const std::string> texts, std::span<const std::string> ids,
                                          Family family, EmbeddingClient& client, const EmbedOptions& options = {});

struct RetrievalOutcome {
  /// Indexed by Family: share of queries whose top-1 candidate has that
  /// family and the query's id.
  std::array<double, kFamilyCount> match_ratio{};
  /// Indexed by Family: mean cosine between each query and its same-id
  /// candidate of that family; absent when no such pairs exist.
  std::array<std::optional<double>, kFamilyCount> avg_cos{};
  /// Share of queries whose top-1 candidate (any family) has the query's id.
  double self_match_ratio = 0.0;
  std::size_t n_queries = 0;
  /// Queries whose top cosine was shared by more than one candidate.
  std::size_t ties = 0;

  double ratio(Family f) const { return match_ratio[static_cast<std::size_t>(f)]; }
};

/// Global top-1 retrieval of every query over all candidates by cosine.
/// Equal cosines are broken by family (part, summary, original) and then id.
/// Throws std::invalid_argument if a query id has no candidate, and as
/// cosine() on bad vectors.
RetrievalOutcome retrieval_eval(std::span<const EmbeddingVector> queries,
                                std::span<const EmbeddingVector> candidates);

}  // namespace retrace::semantic
