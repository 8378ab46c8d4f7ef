#include "retrace/lexmatch.hpp"

#include "retrace/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace retrace::lexmatch {

std::u32string normalize(std::string_view utf8) { return text::to_u32(text::collapse_whitespace(text::nfc(utf8))); }

namespace {

constexpr std::size_t kWordBits = 64;

/// Match masks of a pattern, one bitset of ceil(m/64) words per distinct
/// pattern character, plus the Hyyrö/Allison-Dix row update.
class BitPattern {
 public:
  explicit BitPattern(std::u32string_view pattern)
      : m_(pattern.size()), words_((pattern.size() + kWordBits - 1) / kWordBits) {
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      auto [it, inserted] = index_.try_emplace(pattern[i], index_.size());
      if (inserted) masks_.resize(masks_.size() + words_, 0);
      masks_[it->second * words_ + i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
    }
  }

  std::size_t size() const { return m_; }
  std::size_t words() const { return words_; }

  /// Alphabet slot of `c`, or -1 when `c` is absent from the pattern.
  std::ptrdiff_t slot(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

  void reset(std::vector<std::uint64_t>& v) const { v.assign(words_, ~std::uint64_t{0}); }

  void step(std::vector<std::uint64_t>& v, std::size_t slot) const {
    const std::uint64_t* pm = &masks_[slot * words_];
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      const std::uint64_t u = v[w] & pm[w];
      const std::uint64_t x = v[w] + u;
      const std::uint64_t y = x + carry;
      carry = static_cast<std::uint64_t>(x < v[w]) | static_cast<std::uint64_t>(y < x);
      v[w] = y | (v[w] - u);
    }
  }

  std::size_t lcs(const std::vector<std::uint64_t>& v) const {
    std::size_t ones = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t word = v[w];
      if (w + 1 == words_ && m_ % kWordBits != 0) word &= (std::uint64_t{1} << (m_ % kWordBits)) - 1;
      ones += static_cast<std::size_t>(std::popcount(word));
    }
    return m_ - ones;
  }

 private:
  std::size_t m_;
  std::size_t words_;
  std::unordered_map<char32_t, std::size_t> index_;
  std::vector<std::uint64_t> masks_;
};

}  // namespace

std::size_t lcs_length(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return 0;
  BitPattern pattern(b);
  std::vector<std::uint64_t> v;
  pattern.reset(v);
  for (char32_t c : a) {
    auto slot = pattern.slot(c);
    if (slot >= 0) pattern.step(v, static_cast<std::size_t>(slot));
  }
  return pattern.lcs(v);
}

double indel_score(std::size_t lcs, std::size_t len_a, std::size_t len_b) {
  const std::size_t total = len_a + len_b;
  if (total == 0) return 1.0;
  // Equal to 1 - (total - 2·lcs) / total, with a single rounding.
  return static_cast<double>(2 * lcs) / static_cast<double>(total);
}

double indel_similarity(std::u32string_view a, std::u32string_view b) {
  return indel_score(lcs_length(a, b), a.size(), b.size());
}

double indel_similarity(std::string_view a, std::string_view b) { return indel_similarity(normalize(a), normalize(b)); }

Alignment partial_ratio_alignment(std::u32string_view needle, std::u32string_view haystack) {
  if (needle.empty()) throw std::invalid_argument("partial_ratio_alignment: empty needle");
  const std::size_t m = needle.size();
  const std::size_t n = haystack.size();
  if (n == 0) return {0.0, 0, 0};

  BitPattern pattern(needle);
  std::vector<std::ptrdiff_t> slots(n);
  for (std::size_t j = 0; j < n; ++j) slots[j] = pattern.slot(haystack[j]);

  // Best so far as (lcs, length); compared exactly as 2·lcs/(m+len).
  std::size_t best_lcs = 0;
  std::size_t best_len = 1;
  std::size_t best_start = 0;
  auto beats = [&](std::size_t lcs, std::size_t len) {
    return static_cast<std::uint64_t>(lcs) * (m + best_len) > static_cast<std::uint64_t>(best_lcs) * (m + len);
  };

  std::vector<std::uint64_t> v;
  for (std::size_t s = 0; s < n && !(best_lcs == m && best_len == m); ++s) {
    // A window opening on a character absent from the needle is strictly
    // beaten by the same window without that character.
    if (slots[s] < 0) continue;
    pattern.reset(v);
    const std::size_t max_len = std::min(2 * m, n - s);
    std::size_t lcs = 0;
    for (std::size_t len = 1; len <= max_len; ++len) {
      // Windows ending on a character absent from the needle keep the same
      // lcs at a greater length, so they are never a new best.
      if (const auto slot = slots[s + len - 1]; slot >= 0) {
        pattern.step(v, static_cast<std::size_t>(slot));
        lcs = pattern.lcs(v);
        if (beats(lcs, len)) {
          best_lcs = lcs;
          best_len = len;
          best_start = s;
        }
      }
      // Even if every later character matched, the score could reach at most
      // 2m / (2m + unmatched); stop once that cannot beat the best.
      const std::size_t unmatched = len - lcs;
      if (static_cast<std::uint64_t>(m) * (m + best_len) <=
          static_cast<std::uint64_t>(best_lcs) * (2 * m + unmatched)) {
        break;
      }
    }
  }
  return {indel_score(best_lcs, m, best_len), best_start, best_start + best_len};
}

Alignment partial_ratio_alignment(std::string_view needle, std::string_view haystack) {
  return partial_ratio_alignment(normalize(needle), normalize(haystack));
}

std::vector<double> segment_scores(std::span<const Segment> segments, std::string_view reformulated) {
  const std::u32string hay = normalize(reformulated);
  std::vector<double> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) out.push_back(partial_ratio_alignment(normalize(seg.text), hay).score);
  return out;
}

double ratio_at(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw std::invalid_argument("match ratio over an empty segment list");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must be in [0, 1]");
  auto hits = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= threshold; });
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double match_ratio(std::span<const Segment> segments, std::string_view reformulated, double threshold) {
  if (segments.empty()) throw std::invalid_argument("match ratio over an empty segment list");
  auto scores = segment_scores(segments, reformulated);
  return ratio_at(scores, threshold);
}

std::vector<double> EvalConfig::default_thresholds() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back((50.0 + 5.0 * i) / 100.0);
  return grid;
}

std::vector<double> EvalConfig::parse_grid(std::string_view spec) {
  auto bad = [&] { return std::invalid_argument("threshold grid must look like lo:hi:step, got '" + std::string(spec) + "'"); };
  auto c1 = spec.find(':');
  if (c1 == std::string_view::npos) throw bad();
  auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw bad();
  double lo = 0;
  double hi = 0;
  double step = 0;
  try {
    std::size_t used = 0;
    std::string a(spec.substr(0, c1));
    std::string b(spec.substr(c1 + 1, c2 - c1 - 1));
    std::string c(spec.substr(c2 + 1));
    lo = std::stod(a, &used);
    if (used != a.size()) throw bad();
    hi = std::stod(b, &used);
    if (used != b.size()) throw bad();
    step = std::stod(c, &used);
    if (used != c.size()) throw bad();
  } catch (const std::logic_error&) {
    throw bad();
  }
  if (!(step > 0.0) || hi < lo) throw bad();
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    // Round to 1e-9 so 0.5 + 4·0.05 prints and compares as 0.7.
    grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  }
  return grid;
}

void EvalConfig::validate() const {
  if (thresholds.empty()) throw std::invalid_argument("threshold grid is empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) throw std::invalid_argument("thresholds must lie in [0, 1]");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("thresholds must be strictly ascending");
    }
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
}

void MatchCurve::check() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.match_ratio >= 0.0 && p.match_ratio <= 1.0)) throw std::logic_error("match ratio outside [0, 1]");
    if (i > 0) {
      if (!(p.threshold > points[i - 1].threshold)) throw std::logic_error("curve thresholds not ascending");
      if (p.match_ratio > points[i - 1].match_ratio) throw std::logic_error("match ratio increases with threshold");
    }
  }
}

MatchCurve curve_from_scores(std::span<const std::vector<double>> per_pair_scores,
                             std::span<const double> thresholds) {
  if (per_pair_scores.empty()) throw std::invalid_argument("match curve over an empty pair list");
  MatchCurve curve;
  curve.n_pairs = per_pair_scores.size();
  for (const auto& s : per_pair_scores) curve.n_segments += s.size();
  for (double t : thresholds) {
    double sum = 0.0;
    for (const auto& s : per_pair_scores) sum += ratio_at(s, t);
    curve.points.push_back({t, sum / static_cast<double>(per_pair_scores.size())});
  }
  curve.check();
  return curve;
}

MatchCurve match_curve(std::span<const TracePair> pairs, const EvalConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("match curve over an empty pair list");
  std::vector<std::vector<double>> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto segs = segment(p.original, cfg.granularity);
    if (segs.empty()) throw std::invalid_argument("original trace has no segments");
    scores.push_back(segment_scores(segs, p.reformulated));
  }
  return curve_from_scores(scores, cfg.thresholds);
}

}  // namespace retrace::lexmatch
