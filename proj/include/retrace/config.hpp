#pragma once

#include "retrace/generation.hpp"
#include "retrace/lexmatch.hpp"
#include "retrace/rewriter.hpp"
#include "retrace/semantic.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace retrace {

/// Bad command line or configuration; the CLI maps it to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProviderSettings {
  /// "http" for a remote endpoint, or a mock: "mock:echo" (generation),
  /// "mock:hash" (embedding).
  std::string provider;
  EndpointConfig endpoint;
};

struct RunConfig {
  std::string subcommand;
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> output;

  ProviderSettings generation{"http", {"https://api.openai.com/v1", "gpt-4o", "GENERATION_API_KEY"}};
  ProviderSettings embedding{"http", {"http://localhost:8000/v1", "Qwen/Qwen3-Embedding-4B", "EMBEDDING_API_KEY"}};
  std::size_t embed_batch_size = 32;
  std::size_t embed_dim = 256;  // mock:hash only
  std::optional<std::filesystem::path> cache_dir;

  lexmatch::EvalConfig eval;
  RewriteConfig rewrite;
  std::optional<std::filesystem::path> lexicon;
  double fpr_budget = 0.01;
  int verbosity = 0;

  /// Throws UsageError when input and output paths collide, or when an HTTP
  /// provider has no credential variable name.
  void validate(bool needs_generation, bool needs_embedding) const;
  nlohmann::json to_json() const;
};

/// Applies an INI-style file: `[section]` headers and `key = value` lines,
/// values optionally quoted. Unknown sections or keys are rejected.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, const std::string& contents);

/// RETRACE_GENERATION_URL and RETRACE_EMBEDDING_URL override the endpoints.
void apply_env_overrides(RunConfig& cfg);

std::unique_ptr<GenerationClient> make_generation_client(const ProviderSettings& settings);
std::unique_ptr<semantic::EmbeddingClient> make_embedding_client(const ProviderSettings& settings,
                                                                 std::size_t mock_dim);

}  // namespace retrace
