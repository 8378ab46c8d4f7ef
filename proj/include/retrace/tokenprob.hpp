#pragma once

#include "retrace/selftalk.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace retrace {

/// Probability distribution over a vocabulary at one position, plus the
/// index of the ground-truth token.
class ProbRow {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Throws std::invalid_argument unless probs is nonempty, every entry lies
  /// in [0, 1], the entries sum to 1 within kSumTolerance and target < size.
  ProbRow(std::vector<double> probs, std::size_t target, std::optional<std::string> token_text = std::nullopt);

  std::span<const double> probs() const { return probs_; }
  std::size_t target() const { return target_; }
  std::size_t vocab_size() const { return probs_.size(); }
  double target_prob() const { return probs_[target_]; }
  const std::optional<std::string>& token_text() const { return token_text_; }

 private:
  std::vector<double> probs_;
  std::size_t target_;
  std::optional<std::string> token_text_;
};

struct ProbLog {
  std::vector<ProbRow> rows;
  std::optional<std::string> stage;
};

class InfiniteLossError : public std::domain_error {
 public:
  InfiniteLossError() : std::domain_error("infinite loss: target probability is zero") {}
};

/// Max-subtracted softmax. Throws on empty or non-finite logits.
std::vector<double> softmax(std::span<const double> logits);

/// -log p[target].
double token_loss(const ProbRow& row);

/// p - e_target, the gradient of token_loss∘softmax w.r.t. the logits.
std::vector<double> grad_logits(const ProbRow& row);

/// sum p_i^2 + 1 - 2 p_target, the squared norm of grad_logits(row).
double grad_norm_sq(const ProbRow& row);

/// Mean token loss over the rows of one sequence.
double sft_loss(const ProbLog& log);

/// Target probability of one token with its stage label; the unit the gap
/// report consumes. Full rows and compact log lines both reduce to this.
struct TokenObservation {
  std::string stage;
  std::string token_text;
  double target_prob = 0.0;
};

struct StageGapReport {
  std::string stage;
  std::size_t n_rows = 0;
  std::size_t n_selftalk = 0;
  double avg_all = 0.0;
  /// Absent when the stage has no lexicon hits.
  std::optional<double> avg_selftalk;
  std::optional<double> gap;
};

/// One report per distinct stage, in first-appearance order. A token counts
/// as self-talk when its text, stripped of whitespace and punctuation and
/// lowercased, is a lexicon keyword.
std::vector<StageGapReport> selftalk_prob_gap(std::span<const TokenObservation> observations,
                                              const SelfTalkLexicon& lexicon);

/// Throws std::invalid_argument if any log is empty or any row lacks token text.
std::vector<StageGapReport> selftalk_prob_gap(std::span<const ProbLog> logs, const SelfTalkLexicon& lexicon);

// ---- probability-log files ----------------------------------------------
//
// One JSON object per line, either the full form
//   {"stage": "...", "token_text": "...", "target_index": 3, "probs": [...]}
// or the compact form
//   {"stage": "...", "token_text": "...", "target_prob": 0.42}
// `stage` is optional in both.

class ProbLogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbLogLine {
  std::string stage;
  std::string token_text;
  std::optional<std::size_t> target_index;
  std::vector<double> probs;  // empty for compact lines
  double target_prob = 0.0;

  bool is_compact() const { return !target_index.has_value(); }
};

std::vector<ProbLogLine> parse_prob_log(std::string_view contents);
std::vector<ProbLogLine> load_prob_log(const std::filesystem::path& path);

std::vector<TokenObservation> to_observations(std::span<const ProbLogLine> lines);

/// Groups full-form lines into one ProbLog per stage (first-appearance order).
/// Throws ProbLogError naming the line when a compact line is present.
std::vector<ProbLog> to_prob_logs(std::span<const ProbLogLine> lines);

// ---- self-test ------------------------------------------------------------

struct SelfCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Checks grad_norm_sq against the direct norm of grad_logits on random rows,
/// and grad_logits against central finite differences of token_loss∘softmax.
std::vector<SelfCheck> gradient_self_test(std::uint64_t seed = 1);

}  // namespace retrace
