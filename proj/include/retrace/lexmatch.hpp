#pragma once

#include "retrace/corpus.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace retrace::lexmatch {

/// NFC, whitespace runs collapsed to one space, ends trimmed; returned as
/// code points. All scoring runs on this form.
std::u32string normalize(std::string_view utf8);

/// Length of the longest common subsequence (bit-parallel, O(|a|·|b|/64)).
std::size_t lcs_length(std::u32string_view a, std::u32string_view b);

/// 1 - indel_distance / (len_a + len_b), where indel_distance = len_a + len_b - 2·lcs.
/// Two empty strings score 1.
double indel_score(std::size_t lcs, std::size_t len_a, std::size_t len_b);

double indel_similarity(std::u32string_view a, std::u32string_view b);
/// Normalizes both sides first.
double indel_similarity(std::string_view a, std::string_view b);

struct Alignment {
  double score = 0.0;
  /// Code-point offsets into the normalized haystack.
  std::size_t hay_start = 0;
  std::size_t hay_end = 0;
};

/// Best indel similarity of `needle` against any haystack window whose length
/// lies in [1, 2·len(needle)]. Ties go to the smallest start, then the
/// shortest window. Throws std::invalid_argument for an empty needle; an
/// empty haystack scores 0 with an empty window.
Alignment partial_ratio_alignment(std::u32string_view needle, std::u32string_view haystack);
/// Normalizes both sides first.
Alignment partial_ratio_alignment(std::string_view needle, std::string_view haystack);

/// Per-segment partial-ratio scores against one reformulated text.
std::vector<double> segment_scores(std::span<const Segment> segments, std::string_view reformulated);

/// Fraction of scores >= threshold. Throws on an empty score list.
double ratio_at(std::span<const double> scores, double threshold);

/// Fraction of segments whose partial-ratio score against `reformulated` is
/// >= threshold. Throws std::invalid_argument when `segments` is empty.
double match_ratio(std::span<const Segment> segments, std::string_view reformulated, double threshold);

struct EvalConfig {
  std::vector<double> thresholds = default_thresholds();
  Granularity granularity = Granularity::sentence;
  /// Similarity floor a reformulation should stay above.
  double tau = 0.7;

  static std::vector<double> default_thresholds();
  /// Parses "lo:hi:step" (inclusive of hi when it falls on the grid).
  static std::vector<double> parse_grid(std::string_view spec);
  /// Throws std::invalid_argument unless the grid is nonempty, strictly
  /// ascending and inside [0, 1], and tau is in [0, 1].
  void validate() const;
};

struct CurvePoint {
  double threshold = 0.0;
  double match_ratio = 0.0;
};

struct MatchCurve {
  std::vector<CurvePoint> points;
  std::size_t n_pairs = 0;
  std::size_t n_segments = 0;

  /// Throws std::logic_error if thresholds are not ascending, a ratio leaves
  /// [0, 1], or ratios increase with the threshold.
  void check() const;
};

/// Macro average: mean over pairs of each pair's match ratio.
MatchCurve curve_from_scores(std::span<const std::vector<double>> per_pair_scores,
                             std::span<const double> thresholds);

struct TracePair {
  std::string original;
  std::string reformulated;
};

/// Segments each original at cfg.granularity and scores it against its
/// reformulation. Throws std::invalid_argument on an empty pair list or an
/// original with no segments.
MatchCurve match_curve(std::span<const TracePair> pairs, const EvalConfig& cfg);

}  // namespace retrace::lexmatch
