#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace retrace {

/// Lowercase keyword forms treated as self-talk markers.
class SelfTalkLexicon {
 public:
  /// Throws std::invalid_argument if empty, if any entry has uppercase ASCII
  /// letters or whitespace.
  explicit SelfTalkLexicon(std::set<std::string> keywords);

  static SelfTalkLexicon default_lexicon();

  /// One keyword per line; `#` starts a comment. Entries are lowercased.
  static SelfTalkLexicon parse(std::string_view contents);
  static SelfTalkLexicon load(const std::filesystem::path& path);

  /// `word` must already be lowercased.
  bool contains(std::string_view word) const;
  const std::set<std::string, std::less<>>& keywords() const { return keywords_; }

 private:
  std::set<std::string, std::less<>> keywords_;
};

/// Lowercases ASCII, maps U+2019 to `'`, and strips leading and trailing
/// punctuation. Internal apostrophes survive (`let's`).
std::string normalize_word(std::string_view token);

struct TextSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

/// Whole-word, case-insensitive lexicon hits as byte spans.
std::vector<TextSpan> find_selftalk(std::string_view text, const SelfTalkLexicon& lexicon);

struct TermFrequencyReport {
  std::size_t hit_count = 0;
  std::size_t word_count = 0;
  double frequency = 0.0;
};

TermFrequencyReport term_frequency(std::string_view text, const SelfTalkLexicon& lexicon);

enum class TraceClass { original_like, reformulated_like };

std::string_view to_string(TraceClass c);
TraceClass parse_trace_class(std::string_view s);

/// Original traces are the high-frequency class; a tie goes to original_like.
TraceClass classify_by_threshold(double frequency, double threshold);

struct ScoredExample {
  double score = 0.0;
  bool positive = false;  // true for original_like
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct DetectReport {
  double f1 = 0.0;
  std::vector<RocPoint> roc;
  double tpr_at_fpr = 0.0;
  double fpr_budget = 0.01;
  /// Threshold that maximizes F1 (predict positive iff score >= threshold).
  double threshold_used = 0.0;
  /// Threshold achieving tpr_at_fpr; +inf when only the predict-nothing
  /// classifier stays within budget.
  double tpr_threshold = 0.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

/// Sweeps every distinct score as a `score >= t` threshold, plus +inf.
/// F1 is for the positive (original_like) class and taken at the best
/// threshold; ties prefer the higher threshold. Mixed-class inputs whose
/// scores are all identical are not an error: the only finite threshold is
/// the all-positive classifier and F1 is reported for it.
///
/// Throws std::invalid_argument("ROC undefined ...") when either class is
/// absent, and for an fpr_budget outside (0, 1).
DetectReport classifier_metrics(std::vector<ScoredExample> scores, double fpr_budget = 0.01);

/// Deletes interjections (hmm, wait, okay, ok, oh, alright, when present in the
/// lexicon) that stand alone at a sentence start or after a comma and are
/// followed by `,`, `.`, `!` or an ellipsis. Other words are never removed. A
/// sentence whose first letter was exposed by a deletion is capitalized.
/// Idempotent.
std::string strip_selftalk_baseline(std::string_view text, const SelfTalkLexicon& lexicon);

}  // namespace retrace
