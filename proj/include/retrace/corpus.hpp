#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace retrace {

/// How a record's `reformulated` text was produced. Labels other than
/// "part" and "summary" round-trip through `label`.
struct Method {
  enum class Kind { part, summary, other };

  Kind kind = Kind::other;
  std::string label;

  static Method part() { return {Kind::part, "part"}; }
  static Method summary() { return {Kind::summary, "summary"}; }
  static Method parse(std::string_view s);

  const std::string& name() const { return label; }
  friend bool operator==(const Method&, const Method&) = default;
};

/// One (query, reasoning, answer) triple. `answer` is carried through every
/// transformation untouched.
struct TraceRecord {
  std::string id;
  std::string query;
  std::string reasoning;
  std::string answer;
  std::optional<std::string> reformulated;
  std::optional<Method> method;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Corpus = std::vector<TraceRecord>;

class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, const std::string& what);
  explicit CorpusError(const std::string& what);

  /// 1-based source line, or 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

Corpus parse_corpus(std::string_view contents);
Corpus load_corpus(const std::filesystem::path& path);

std::string serialize_record(const TraceRecord& record);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Throws CorpusError on empty or duplicate ids.
void validate_corpus(const Corpus& corpus);

enum class Granularity { sentence, step };

Granularity parse_granularity(std::string_view s);
std::string_view to_string(Granularity g);

/// A slice [start, end) of a source trace, in UTF-8 byte offsets. `text` is
/// the slice with whitespace runs collapsed.
struct Segment {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  Granularity granularity = Granularity::sentence;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Splits a trace into ordered, non-overlapping segments.
///
/// Step granularity splits on one or more blank lines. Sentence granularity
/// splits after a run of `.`, `?` or `!` when it is followed by whitespace and
/// an uppercase letter (or by end of text), unless the terminator sits inside
/// an open `$...$` span or unbalanced parentheses. Paragraph breaks also end a
/// sentence.
std::vector<Segment> segment(std::string_view trace, Granularity granularity);

}  // namespace retrace
