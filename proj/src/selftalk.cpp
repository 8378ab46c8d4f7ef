#include "retrace/selftalk.hpp"

#include "retrace/io.hpp"
#include "retrace/text.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace retrace {

SelfTalkLexicon::SelfTalkLexicon(std::set<std::string> keywords) {
  if (keywords.empty()) throw std::invalid_argument("self-talk lexicon must not be empty");
  for (const auto& k : keywords) {
    if (k.empty()) throw std::invalid_argument("self-talk lexicon entries must be nonempty");
    for (char c : k) {
      if (c >= 'A' && c <= 'Z') throw std::invalid_argument("lexicon entry '" + k + "' is not lowercase");
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        throw std::invalid_argument("lexicon entry '" + k + "' contains whitespace");
      }
    }
  }
  keywords_.insert(keywords.begin(), keywords.end());
}

SelfTalkLexicon SelfTalkLexicon::default_lexicon() {
  return SelfTalkLexicon({"hmm", "wait", "okay", "ok", "oh", "alright", "let's", "lets", "i", "i'm", "i'll",
                          "i've", "me", "my", "we", "we're", "let", "us"});
}

SelfTalkLexicon SelfTalkLexicon::parse(std::string_view contents) {
  std::set<std::string> words;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    std::string_view line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (!line.empty()) words.insert(normalize_word(line));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return SelfTalkLexicon(std::move(words));
}

SelfTalkLexicon SelfTalkLexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

bool SelfTalkLexicon::contains(std::string_view word) const { return keywords_.find(word) != keywords_.end(); }

namespace {

constexpr char32_t kRightQuote = 0x2019;
constexpr char32_t kEllipsis = 0x2026;

bool is_alnum(char32_t c) { return u_isalnum(static_cast<UChar32>(c)) != 0; }
bool is_apostrophe(char32_t c) { return c == U'\'' || c == kRightQuote; }

struct Word {
  std::size_t start;
  std::size_t end;
};

// Maximal runs of letters and digits, joined by single internal apostrophes.
std::vector<Word> scan_words(std::string_view s) {
  std::vector<Word> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t start = pos;
    char32_t c = text::decode_at(s, pos);
    if (!is_alnum(c)) continue;
    std::size_t end = pos;
    while (pos < s.size()) {
      std::size_t probe = pos;
      char32_t n = text::decode_at(s, probe);
      if (is_alnum(n)) {
        pos = end = probe;
        continue;
      }
      if (is_apostrophe(n) && probe < s.size()) {
        std::size_t after = probe;
        if (is_alnum(text::decode_at(s, after))) {
          pos = end = after;
          continue;
        }
      }
      break;
    }
    out.push_back({start, end});
    pos = end;
  }
  return out;
}

}  // namespace

std::string normalize_word(std::string_view token) {
  std::u32string cps = text::to_u32(token);
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && !is_alnum(cps[b])) ++b;
  while (e > b && !is_alnum(cps[e - 1])) --e;
  std::u32string core = cps.substr(b, e - b);
  for (char32_t& c : core) {
    if (c == kRightQuote) c = U'\'';
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  }
  return text::to_utf8(core);
}

std::vector<TextSpan> find_selftalk(std::string_view text, const SelfTalkLexicon& lexicon) {
  std::vector<TextSpan> out;
  for (const Word& w : scan_words(text)) {
    if (lexicon.contains(normalize_word(text.substr(w.start, w.end - w.start)))) out.push_back({w.start, w.end});
  }
  return out;
}

TermFrequencyReport term_frequency(std::string_view text, const SelfTalkLexicon& lexicon) {
  TermFrequencyReport r;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size()) {
      std::size_t probe = pos;
      if (!text::is_space(text::decode_at(text, probe))) break;
      pos = probe;
    }
    std::size_t start = pos;
    while (pos < text.size()) {
      std::size_t probe = pos;
      if (text::is_space(text::decode_at(text, probe))) break;
      pos = probe;
    }
    if (start == pos) break;
    std::string word = normalize_word(text.substr(start, pos - start));
    if (word.empty()) continue;
    ++r.word_count;
    if (lexicon.contains(word)) ++r.hit_count;
  }
  r.frequency = r.word_count == 0 ? 0.0 : static_cast<double>(r.hit_count) / static_cast<double>(r.word_count);
  return r;
}

std::string_view to_string(TraceClass c) {
  return c == TraceClass::original_like ? "original_like" : "reformulated_like";
}

TraceClass parse_trace_class(std::string_view s) {
  if (s == "original_like") return TraceClass::original_like;
  if (s == "reformulated_like") return TraceClass::reformulated_like;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

TraceClass classify_by_threshold(double frequency, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must be in [0, 1]");
  return frequency >= threshold ? TraceClass::original_like : TraceClass::reformulated_like;
}

DetectReport classifier_metrics(std::vector<ScoredExample> scores, double fpr_budget) {
  if (!(fpr_budget > 0.0 && fpr_budget < 1.0)) throw std::invalid_argument("fpr budget must be in (0, 1)");
  std::size_t n_pos = 0;
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw std::invalid_argument("scores must be finite");
    if (s.positive) ++n_pos;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("ROC undefined: both classes are required");

  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

  DetectReport r;
  r.fpr_budget = fpr_budget;
  r.n_positive = n_pos;
  r.n_negative = n_neg;
  r.roc.push_back({0.0, 0.0});
  r.tpr_at_fpr = 0.0;
  r.tpr_threshold = std::numeric_limits<double>::infinity();
  double best_f1 = -1.0;

  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < scores.size()) {
    const double threshold = scores[i].score;
    while (i < scores.size() && scores[i].score == threshold) {
      if (scores[i].positive) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const std::size_t fn = n_pos - tp;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    r.roc.push_back({fpr, tpr});
    if (f1 > best_f1) {
      best_f1 = f1;
      r.threshold_used = threshold;
    }
    if (fpr <= fpr_budget && tpr > r.tpr_at_fpr) {
      r.tpr_at_fpr = tpr;
      r.tpr_threshold = threshold;
    }
  }
  r.f1 = best_f1;
  return r;
}

namespace {

bool is_interjection(std::string_view w) {
  return w == "hmm" || w == "wait" || w == "okay" || w == "ok" || w == "oh" || w == "alright";
}

bool is_hspace(char c) { return c == ' ' || c == '\t'; }

enum class Position { sentence_start, after_comma, inline_word };

Position position_of(std::string_view s, std::size_t start) {
  std::size_t p = start;
  while (p > 0 && is_hspace(s[p - 1])) --p;
  if (p == 0) return Position::sentence_start;
  char c = s[p - 1];
  if (c == '\n' || c == '\r') return Position::sentence_start;
  if (p == start) return Position::inline_word;
  if (c == '.' || c == '?' || c == '!') return Position::sentence_start;
  if (c == ',') return Position::after_comma;
  return Position::inline_word;
}

// End of the trailing punctuation run, or npos when the word is not followed
// by one the position allows.
std::size_t punctuation_end(std::string_view s, std::size_t end, Position where) {
  std::size_t p = end;
  bool any = false;
  while (p < s.size()) {
    std::size_t probe = p;
    char32_t c = text::decode_at(s, probe);
    bool ok = c == U',' || (where == Position::sentence_start && (c == U'.' || c == U'!' || c == kEllipsis));
    if (!ok) break;
    any = true;
    p = probe;
  }
  if (!any) return std::string_view::npos;
  if (p < s.size()) {
    std::size_t probe = p;
    char32_t next = text::decode_at(s, probe);
    if (!text::is_space(next)) return std::string_view::npos;
  }
  return p;
}

// Single letters other than "a" are usually variables; leave them alone.
void capitalize_word_at(std::string& s, std::size_t pos) {
  std::size_t end = pos;
  std::size_t letters = 0;
  while (end < s.size()) {
    std::size_t probe = end;
    if (u_isalpha(static_cast<UChar32>(text::decode_at(s, probe))) == 0) break;
    end = probe;
    ++letters;
  }
  if (letters == 0 || (letters == 1 && s[pos] != 'a')) return;
  std::size_t probe = pos;
  char32_t c = text::decode_at(s, probe);
  char32_t up = static_cast<char32_t>(u_toupper(static_cast<UChar32>(c)));
  if (up != c) s.replace(pos, probe - pos, text::to_utf8(std::u32string(1, up)));
}

bool strip_once(std::string& s, const SelfTalkLexicon& lexicon) {
  for (const Word& w : scan_words(s)) {
    std::string word = normalize_word(std::string_view(s).substr(w.start, w.end - w.start));
    if (!is_interjection(word) || !lexicon.contains(word)) continue;
    Position where = position_of(s, w.start);
    if (where == Position::inline_word) continue;
    std::size_t cut_end = punctuation_end(s, w.end, where);
    if (cut_end == std::string_view::npos) continue;
    while (cut_end < s.size() && is_hspace(s[cut_end])) ++cut_end;
    std::size_t cut_start = w.start;
    bool line_end = cut_end == s.size() || s[cut_end] == '\n' || s[cut_end] == '\r';
    if (line_end) {
      while (cut_start > 0 && is_hspace(s[cut_start - 1])) --cut_start;
    }
    s.erase(cut_start, cut_end - cut_start);
    if (where == Position::sentence_start && !line_end) capitalize_word_at(s, cut_start);
    return true;
  }
  return false;
}

}  // namespace

std::string strip_selftalk_baseline(std::string_view text, const SelfTalkLexicon& lexicon) {
  std::string out(text);
  while (strip_once(out, lexicon)) {
  }
  return out;
}

}  // namespace retrace
