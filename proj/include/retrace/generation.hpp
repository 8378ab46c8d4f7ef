#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace retrace {

enum class PromptKind { removal, reorder, summary };

struct GenerationRequest {
  /// Optional system message; omitted from the wire request when empty.
  std::string system;
  /// Fully rendered user message.
  std::string prompt;
  /// The text segment embedded in `prompt`. Not sent over the wire; mock
  /// clients answer from it.
  std::string payload;
  PromptKind kind = PromptKind::removal;
  double temperature = 0.0;
  std::size_t max_tokens = 0;  // 0 leaves the provider default
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

/// Text-generation endpoint. Implementations must be safe to call from
/// several threads at once and add no randomness of their own.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
};

/// Answers every request with its payload wrapped in REWRITTEN tags.
class EchoGenerationClient final : public GenerationClient {
 public:
  std::string generate(const GenerationRequest& request) override;
};

/// Where a chat-completion style endpoint lives and how to call it.
struct EndpointConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  /// Name of the environment variable holding the bearer token; the token
  /// itself is never stored in configuration.
  std::string api_key_env;
  std::chrono::seconds timeout{120};
};

/// POSTs {model, messages, temperature, max_tokens} to <base_url>/chat/completions
/// and returns choices[0].message.content. HTTP 408/429/5xx and transport
/// failures are retryable; other statuses are not.
class HttpChatClient final : public GenerationClient {
 public:
  explicit HttpChatClient(EndpointConfig config);
  std::string generate(const GenerationRequest& request) override;

 private:
  EndpointConfig config_;
};

}  // namespace retrace
