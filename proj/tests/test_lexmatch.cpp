#include "retrace/lexmatch.hpp"

#include "retrace/io.hpp"
#include "retrace/text.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace retrace;
using namespace retrace::lexmatch;

namespace {

std::size_t lcs_dp(std::u32string_view a, std::u32string_view b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

double sim_dp(std::u32string_view a, std::u32string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  return 2.0 * lcs_dp(a, b) / static_cast<double>(a.size() + b.size());
}

Alignment brute_windows(std::u32string_view n, std::u32string_view h) {
  Alignment best{0.0, 0, 0};
  bool any = false;
  for (std::size_t s = 0; s < h.size(); ++s) {
    for (std::size_t len = 1; len <= 2 * n.size() && s + len <= h.size(); ++len) {
      const double v = sim_dp(n, h.substr(s, len));
      if (!any || v > best.score) {
        best = {v, s, s + len};
        any = true;
      }
    }
  }
  return best;
}

std::u32string random_abc(std::mt19937& rng, std::size_t lo, std::size_t hi) {
  std::u32string s(std::uniform_int_distribution<std::size_t>(lo, hi)(rng), U'a');
  for (auto& c : s) c = U'a' + std::uniform_int_distribution<int>(0, 2)(rng);
  return s;
}

}  // namespace

TEST(Indel, Examples) {
  EXPECT_EQ(indel_similarity("abc", "abc"), 1.0);
  EXPECT_EQ(indel_similarity("ab", "cd"), 0.0);
  EXPECT_DOUBLE_EQ(indel_similarity("kitten", "sitting"), 8.0 / 13.0);
  EXPECT_EQ(indel_similarity("", ""), 1.0);
  EXPECT_EQ(indel_similarity("a", ""), 0.0);
  EXPECT_EQ(indel_similarity("a  b", " a b "), 1.0);
}

TEST(Lcs, MatchesDynamicProgramming) {
  std::mt19937 rng(1);
  for (int t = 0; t < 400; ++t) {
    const auto a = random_abc(rng, 0, 150);
    const auto b = random_abc(rng, 0, 150);
    ASSERT_EQ(lcs_length(a, b), lcs_dp(a, b));
  }
  std::u32string x(300, U'x'), y(200, U'x');
  EXPECT_EQ(lcs_length(x, y), 200u);
}

TEST(Indel, SymmetricBoundedAndExactOnlyForEqual) {
  std::mt19937 rng(2);
  for (int t = 0; t < 300; ++t) {
    const auto a = random_abc(rng, 0, 10);
    const auto b = random_abc(rng, 0, 10);
    const double ab = indel_similarity(a, b);
    EXPECT_EQ(ab, indel_similarity(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(ab == 1.0, a == b);
  }
}

TEST(PartialRatio, Examples) {
  const auto a = partial_ratio_alignment(std::string_view("cat"), std::string_view("the cat sat"));
  EXPECT_EQ(a.score, 1.0);
  EXPECT_EQ(a.hay_start, 4u);
  EXPECT_EQ(a.hay_end, 7u);
  const auto same = partial_ratio_alignment(std::string_view("abc d"), std::string_view("abc d"));
  EXPECT_EQ(same.score, 1.0);
  EXPECT_EQ(same.hay_start, 0u);
  EXPECT_EQ(same.hay_end, 5u);
  const auto empty = partial_ratio_alignment(std::string_view("x"), std::string_view("  "));
  EXPECT_EQ(empty.score, 0.0);
  EXPECT_EQ(empty.hay_start, empty.hay_end);
  EXPECT_THROW(partial_ratio_alignment(std::string_view(" "), std::string_view("x")), std::invalid_argument);
}

TEST(PartialRatio, EqualsExhaustiveWindowSearch) {
  std::mt19937 rng(42);
  for (int t = 0; t < 2000; ++t) {
    const auto n = random_abc(rng, 1, 12);
    const auto h = random_abc(rng, 0, 20);
    const auto got = partial_ratio_alignment(n, h);
    const auto want = brute_windows(n, h);
    ASSERT_EQ(got.score, want.score);
    ASSERT_EQ(got.hay_start, want.hay_start);
    ASSERT_EQ(got.hay_end, want.hay_end);
    ASSERT_GE(got.score + 1e-15, sim_dp(n, h));
  }
}

TEST(MatchRatio, Basics) {
  const std::string t = "First we add. Then we subtract. Finally we check.";
  const auto segs = segment(t, Granularity::sentence);
  for (double th : {0.0, 0.5, 1.0}) EXPECT_EQ(match_ratio(segs, t, th), 1.0);
  EXPECT_EQ(match_ratio(segs, " ", 0.5), 0.0);
  EXPECT_THROW(match_ratio({}, t, 0.5), std::invalid_argument);
  EXPECT_THROW(match_ratio(segs, t, 1.5), std::invalid_argument);
}

TEST(MatchCurve, HandAveragedExample) {
  const std::vector<double> th{0.5, 0.9};
  // Per-pair ratios: (1.0, 0.5) and (0.5, 0.0).
  const std::vector<std::vector<double>> per_pair2{{1.0, 0.6}, {0.6, 0.1}};
  const auto c2 = curve_from_scores(per_pair2, th);
  EXPECT_DOUBLE_EQ(c2.points[0].match_ratio, 0.75);
  EXPECT_DOUBLE_EQ(c2.points[1].match_ratio, 0.25);
  EXPECT_EQ(c2.n_pairs, 2u);
  EXPECT_EQ(c2.n_segments, 4u);
}

TEST(MatchCurve, IdenticalPairsAreConstantOne) {
  std::vector<TracePair> pairs{{"A b c. D e f.", "A b c. D e f."}, {"Only one.", "Only one."}};
  const auto c = match_curve(pairs, EvalConfig{});
  EXPECT_EQ(c.points.size(), 11u);
  for (const auto& p : c.points) EXPECT_EQ(p.match_ratio, 1.0);
}

TEST(MatchCurve, NonincreasingOnRandomCorpora) {
  std::mt19937 rng(8);
  const char* words[] = {"Alpha", "beta", "gamma", "delta", "x", "y"};
  auto sentence = [&] {
    std::string s;
    for (int i = 0; i < 5; ++i) s += std::string(words[std::uniform_int_distribution<int>(0, 5)(rng)]) + " ";
    return s + "end. ";
  };
  for (int t = 0; t < 30; ++t) {
    std::vector<TracePair> pairs;
    for (int p = 0; p < 4; ++p) {
      std::string a, b;
      for (int i = 0; i < 4; ++i) a += sentence();
      for (int i = 0; i < 3; ++i) b += sentence();
      pairs.push_back({a, b});
    }
    EvalConfig cfg;
    cfg.thresholds = EvalConfig::parse_grid("0:1:0.1");
    const auto c = match_curve(pairs, cfg);
    EXPECT_NO_THROW(c.check());
    for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_LE(c.points[i].match_ratio, c.points[i - 1].match_ratio);
  }
}

TEST(EvalConfig, Grid) {
  const auto g = EvalConfig::parse_grid("0.5:1.0:0.05");
  ASSERT_EQ(g.size(), 11u);
  EXPECT_EQ(g.front(), 0.5);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_EQ(g, EvalConfig::default_thresholds());
  EXPECT_THROW(EvalConfig::parse_grid("1:0:0.1"), std::invalid_argument);
  EXPECT_THROW(EvalConfig::parse_grid("0:1:0"), std::invalid_argument);
  EXPECT_THROW(EvalConfig::parse_grid("abc"), std::invalid_argument);
  EvalConfig bad;
  bad.thresholds = {0.5, 0.5};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.thresholds = {};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Fixtures, PrintedExamplesNearHeaders) {
  const std::string dir = RETRACE_FIXTURES;
  const auto orig = load_corpus(dir + "/lexical_orig.jsonl");
  const auto part = load_corpus(dir + "/lexical_part.jsonl");
  const auto expected = nlohmann::json::parse(read_file(dir + "/lexical_expected.json"));
  ASSERT_EQ(orig.size(), 4u);
  for (std::size_t i = 0; i < orig.size(); ++i) {
    const double header = expected.at(orig[i].id).get<double>();
    EXPECT_NEAR(partial_ratio_alignment(orig[i].reasoning, *part[i].reformulated).score, header, 0.07) << orig[i].id;
  }
  // The step headed 0.75 matches at 0.7 but not at 0.8.
  const std::vector<Segment> step{{text::collapse_whitespace(orig[1].reasoning), 0, orig[1].reasoning.size(),
                                   Granularity::step}};
  EXPECT_EQ(match_ratio(step, *part[1].reformulated, 0.7), 1.0);
  EXPECT_EQ(match_ratio(step, *part[1].reformulated, 0.8), 0.0);
}
