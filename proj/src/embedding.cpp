#include "retrace/io.hpp"
#include "retrace/semantic.hpp"
#include "retrace/text.hpp"

#include "http.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <thread>

namespace retrace::semantic {

using json = nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<std::vector<double>> HashEmbeddingClient::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dim_, 0.0);
    std::u32string cps = text::to_u32(text::ascii_lower(text::collapse_whitespace(t)));
    if (cps.empty()) {
      v[0] = 1.0;
    } else if (cps.size() < 3) {
      std::uint64_t h = fnv1a(text::to_utf8(cps));
      v[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
    } else {
      for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
        std::uint64_t h = fnv1a(text::to_utf8(std::u32string_view(cps).substr(i, 3)));
        v[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
      }
    }
    bool all_zero = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    if (all_zero) v[0] = 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingClient::HttpEmbeddingClient(EndpointConfig config) : config_(std::move(config)) {}

std::vector<std::vector<double>> HttpEmbeddingClient::embed(std::span<const std::string> texts) {
  json body = {{"model", config_.model}, {"input", json(std::vector<std::string>(texts.begin(), texts.end()))}};
  json reply = retrace::detail::post_json(config_, "/embeddings", body);
  try {
    const json& data = reply.at("data");
    std::vector<std::vector<double>> out(data.size());
    std::vector<bool> filled(data.size(), false);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const json& item = data.at(i);
      std::size_t index = item.contains("index") ? item.at("index").get<std::size_t>() : i;
      if (index >= out.size() || filled[index]) throw GenerationError("embedding indices are not a permutation", true);
      out[index] = item.at("embedding").get<std::vector<double>>();
      filled[index] = true;
    }
    return out;
  } catch (const json::exception& e) {
    throw GenerationError(std::string("unexpected embedding response shape: ") + e.what(), true);
  }
}

namespace {

constexpr char kMagic[8] = {'R', 'T', 'E', 'M', 'B', '0', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create embedding cache directory '" + dir_.string() + "'");
}

std::filesystem::path EmbeddingCache::path_for(const std::string& model, std::string_view text) const {
  std::string key = model;
  key.push_back('\0');
  key.append(text);
  return dir_ / (sha256_hex(key) + ".emb");
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& model, std::string_view text) const {
  auto path = path_for(model, text);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  std::string raw;
  try {
    raw = read_file(path);
  } catch (const IoError&) {
    return std::nullopt;
  }
  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 8) != 0) return std::nullopt;
  const auto dim = static_cast<std::size_t>(get_le(raw, 8, 4));
  const auto tag_len = static_cast<std::size_t>(get_le(raw, 12, 4));
  if (raw.size() != 16 + tag_len + 8 * dim) return std::nullopt;
  if (std::string_view(raw).substr(16, tag_len) != model) return std::nullopt;
  std::vector<double> values(dim);
  for (std::size_t i = 0; i < dim; ++i) values[i] = std::bit_cast<double>(get_le(raw, 16 + tag_len + 8 * i, 8));
  return values;
}

void EmbeddingCache::put(const std::string& model, std::string_view text, std::span<const double> values) const {
  std::string raw(kMagic, sizeof(kMagic));
  put_u32(raw, static_cast<std::uint32_t>(values.size()));
  put_u32(raw, static_cast<std::uint32_t>(model.size()));
  raw += model;
  for (double v : values) put_u64(raw, std::bit_cast<std::uint64_t>(v));
  write_file_atomic(path_for(model, text), raw);
}

std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts, EmbeddingClient& client,
                                             const EmbedOptions& options) {
  if (texts.empty()) throw std::invalid_argument("embed_texts: no texts");
  if (options.batch_size == 0) throw std::invalid_argument("embed_texts: batch_size must be positive");
  const std::string model = client.model();

  std::vector<std::vector<double>> out(texts.size());
  std::vector<std::size_t> misses;
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::optional<std::vector<double>> hit;
    if (options.cache != nullptr) hit = options.cache->get(model, texts[i]);
    if (hit && !hit->empty() && (!dim || hit->size() == *dim)) {
      dim = hit->size();
      out[i] = std::move(*hit);
    } else {
      misses.push_back(i);
    }
  }

  for (std::size_t b = 0, begin = 0; begin < misses.size(); ++b, begin += options.batch_size) {
    const std::size_t end = std::min(begin + options.batch_size, misses.size());
    std::vector<std::string> batch;
    for (std::size_t k = begin; k < end; ++k) batch.push_back(texts[misses[k]]);

    std::vector<std::vector<double>> vectors;
    std::string last_error;
    bool done = false;
    for (std::size_t attempt = 0; attempt <= options.max_retries && !done; ++attempt) {
      if (attempt > 0 && options.retry_backoff.count() > 0) {
        std::this_thread::sleep_for(options.retry_backoff * (1LL << std::min<std::size_t>(attempt - 1, 16)));
      }
      try {
        vectors = client.embed(batch);
        done = true;
      } catch (const GenerationError& e) {
        last_error = e.what();
        if (!e.retryable()) break;
      }
    }
    if (!done) throw EmbeddingError("embedding batch " + std::to_string(b) + " failed: " + last_error);
    if (vectors.size() != batch.size()) {
      throw EmbeddingError("embedding batch " + std::to_string(b) + ": expected " + std::to_string(batch.size()) +
                           " vectors, got " + std::to_string(vectors.size()));
    }
    for (std::size_t k = begin; k < end; ++k) {
      const auto& v = vectors[k - begin];
      if (v.empty()) throw EmbeddingError("embedding batch " + std::to_string(b) + ": empty vector");
      if (!dim) dim = v.size();
      if (v.size() != *dim) {
        throw EmbeddingError("embedding batch " + std::to_string(b) + ": dimension drift (got " +
                             std::to_string(v.size()) + ", expected " + std::to_string(*dim) + ")");
      }
    }
    for (std::size_t k = begin; k < end; ++k) {
      out[misses[k]] = std::move(vectors[k - begin]);
      if (options.cache != nullptr) options.cache->put(model, texts[misses[k]], out[misses[k]]);
    }
  }

  return out;
}

std::vector<EmbeddingVector> embed_corpus(std::span<const std::string> texts, std::span<const std::string> ids,
                                          Family family, EmbeddingClient& client, const EmbedOptions& options) {
  if (texts.size() != ids.size()) throw std::invalid_argument("embed_corpus: ids and texts differ in length");
  auto vectors = embed_texts(texts, client, options);
  std::vector<EmbeddingVector> out;
  out.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) out.push_back({std::move(vectors[i]), ids[i], family});
  return out;
}

}  // namespace retrace::semantic
