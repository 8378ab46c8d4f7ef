#pragma once

#include "retrace/corpus.hpp"
#include "retrace/generation.hpp"

#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace retrace {

/// A prompt body with exactly one `{{TEXT}}` placeholder.
class PromptTemplate {
 public:
  static constexpr std::string_view kPlaceholder = "{{TEXT}}";

  /// Throws std::invalid_argument unless `body` has exactly one placeholder.
  PromptTemplate(PromptKind kind, std::string body);

  static const PromptTemplate& removal();
  static const PromptTemplate& reorder();
  static const PromptTemplate& summary();

  PromptKind kind() const { return kind_; }
  const std::string& body() const { return body_; }

 private:
  PromptKind kind_;
  std::string body_;
  std::size_t placeholder_ = 0;

  friend std::string render_prompt(const PromptTemplate&, std::string_view);
};

std::string render_prompt(const PromptTemplate& tmpl, std::string_view segment_text);

struct TaggedOutput {
  std::vector<std::string> subs;
  std::string rewritten;
  /// Non-fatal findings, e.g. no SUB captures.
  std::vector<std::string> warnings;
};

class TagParseError : public std::runtime_error {
 public:
  enum class Kind { missing_rewritten, duplicate_rewritten, unclosed_tag, nested_tag, unmatched_close, empty_content };

  TagParseError(Kind kind, const std::string& detail);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Extracts `<SUB>…</SUB>` captures in order and the single
/// `<REWRITTEN>…</REWRITTEN>` block. SUB tags nested inside the REWRITTEN
/// block are captured too and their markup is dropped from `rewritten`.
/// Captures are trimmed. Errors: missing/unclosed/duplicate REWRITTEN,
/// unclosed SUB, a tag nested inside one of the same name, a stray closing
/// tag, or empty content.
TaggedOutput parse_tagged_output(std::string_view raw);

/// Inverse of parse_tagged_output for well-formed outputs.
std::string serialize_tagged_output(const TaggedOutput& tagged);

/// Output of a plain (removal or summary) step: the REWRITTEN capture when the
/// reply uses any protocol tag, otherwise the trimmed text. SUB tags without a
/// REWRITTEN block count as malformed. Throws
/// TagParseError on malformed tags or empty output.
std::string parse_plain_output(std::string_view raw);

struct ValidationFailure {
  enum class Kind { order, content_loss };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationFailure> failures;
  /// Share of original sentences found in `rewritten` at min_similarity.
  double content_match_ratio = 1.0;
};

/// Checks that each sub-conclusion appears before the sentences that led up to
/// it in the original, and that at least half of the original sentences are
/// still present in `rewritten` at `min_similarity`. Reports, never throws
/// (except for min_similarity outside [0, 1]).
ValidationReport validate_reorder(std::string_view original_segment, const TaggedOutput& tagged,
                                  double min_similarity = 0.6);

struct RewriteConfig {
  /// Maximum code points per chunk sent to the endpoint.
  std::size_t segment_budget = 2500;
  /// Retries after the first attempt, per endpoint call.
  std::size_t max_retries = 3;
  std::size_t concurrency_limit = 4;
  /// Delay before retry k (0-based) is retry_backoff · 2^k.
  std::chrono::milliseconds retry_backoff{500};
  double temperature = 0.0;
  /// Output bound as a multiple of the chunk length.
  double max_output_factor = 2.0;
  std::string system_prompt;

  void validate() const;
};

struct TextRange {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const TextRange&, const TextRange&) = default;
};

/// Greedy packing of blank-line steps into chunks of at most `budget` code
/// points. A step longer than the budget is broken at sentence boundaries; a
/// single sentence longer than the budget becomes its own oversize chunk.
/// Chunks are ordered byte ranges; everything between them is whitespace.
std::vector<TextRange> plan_chunks(std::string_view trace, std::size_t budget);

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Chunks the reasoning, runs removal then reorder on every chunk and joins
/// the rewritten chunks with blank lines in chunk order. Returns a copy of the
/// record with `reformulated` set and method = part; query and answer are
/// untouched. When `validations` is given it receives one report per chunk.
/// Throws PipelineError naming the chunk when a call still fails after
/// cfg.max_retries retries.
TraceRecord reformulate_trace(const TraceRecord& record, const RewriteConfig& cfg, GenerationClient& client,
                              std::vector<ValidationReport>* validations = nullptr);

/// Segment-level summary baseline: same chunking, one summary call per chunk.
TraceRecord summarize_trace(const TraceRecord& record, const RewriteConfig& cfg, GenerationClient& client);

}  // namespace retrace
