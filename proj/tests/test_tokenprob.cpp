#include "retrace/tokenprob.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace retrace;

namespace {

ProbRow uniform(std::size_t v, std::size_t target) { return ProbRow(std::vector<double>(v, 1.0 / v), target); }

ProbRow random_row(std::mt19937_64& rng, std::size_t v) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(v);
  double sum = 0.0;
  for (double& x : w) sum += (x = u(rng) + 1e-9);
  for (double& x : w) x /= sum;
  return ProbRow(std::move(w), std::uniform_int_distribution<std::size_t>(0, v - 1)(rng));
}

}  // namespace

TEST(ProbRow, Invariants) {
  EXPECT_NO_THROW(ProbRow({0.25, 0.75}, 1));
  EXPECT_THROW(ProbRow({}, 0), std::invalid_argument);
  EXPECT_THROW(ProbRow({0.5, 0.4}, 0), std::invalid_argument);
  EXPECT_THROW(ProbRow({1.5, -0.5}, 0), std::invalid_argument);
  EXPECT_THROW(ProbRow({0.5, 0.5}, 2), std::invalid_argument);
}

TEST(Softmax, Examples) {
  const std::vector<double> z0{0, 0, 0};
  for (double p : softmax(z0)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  const std::vector<double> z1{0, std::log(2.0)};
  const auto p1 = softmax(z1);
  EXPECT_NEAR(p1[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p1[1], 2.0 / 3.0, 1e-15);
  const std::vector<double> base{0, 1, 2};
  for (double c : {-1000.0, -3.5, 7.0, 900.0}) {
    const std::vector<double> shifted{c, c + 1, c + 2};
    const auto a = softmax(base), b = softmax(shifted);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
  EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(softmax(std::vector<double>{0.0, INFINITY}), std::invalid_argument);
}

TEST(Softmax, SumsToOneAndPreservesOrder) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> l(1 + t % 30);
    for (double& x : l) x = z(rng);
    const auto p = softmax(l);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < l.size(); ++i) {
      for (std::size_t j = 0; j < l.size(); ++j) {
        if (l[i] < l[j]) EXPECT_LE(p[i], p[j]);
      }
    }
  }
}

TEST(TokenLoss, Examples) {
  EXPECT_EQ(token_loss(ProbRow({0.0, 1.0}, 1)), 0.0);
  const double e1 = std::exp(-1.0);
  EXPECT_NEAR(token_loss(ProbRow({e1, 1.0 - e1}, 0)), 1.0, 1e-15);
  EXPECT_NEAR(token_loss(uniform(4, 2)), 1.386294, 1e-6);
  try {
    token_loss(ProbRow({0.0, 1.0}, 0));
    FAIL();
  } catch (const InfiniteLossError& e) {
    EXPECT_NE(std::string(e.what()).find("infinite loss"), std::string::npos);
  }
}

TEST(GradLogits, Examples) {
  for (double g : grad_logits(ProbRow({0.0, 1.0, 0.0}, 1))) EXPECT_EQ(g, 0.0);
  const auto g = grad_logits(uniform(2, 0));
  EXPECT_DOUBLE_EQ(g[0], -0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  EXPECT_EQ(grad_norm_sq(ProbRow({1.0, 0.0}, 0)), 0.0);
  EXPECT_DOUBLE_EQ(grad_norm_sq(uniform(2, 0)), 0.5);
}

// Finite-difference oracle for a random vocabulary of 8.
TEST(GradLogits, MatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  constexpr double h = 1e-5;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> l(8);
    for (double& x : l) x = z(rng);
    const std::size_t target = t % 8;
    auto loss = [&](const std::vector<double>& v) { return -std::log(softmax(v)[target]); };
    const auto g = grad_logits(ProbRow(softmax(l), target));
    double sum = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      auto a = l, b = l;
      a[i] += h;
      b[i] -= h;
      const double fd = (loss(a) - loss(b)) / (2 * h);
      EXPECT_LT(std::abs(fd - g[i]) / std::max(std::abs(fd), std::abs(g[i])), 1e-6);
      sum += g[i];
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
}

TEST(GradNormSq, IdentityAndMonotonicity) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 500; ++t) {
    const auto row = random_row(rng, 1 + t % 64);
    double direct = 0.0;
    for (double g : grad_logits(row)) direct += g * g;
    EXPECT_NEAR(grad_norm_sq(row), direct, 1e-12);
  }
  // Off-target mass kept proportional while p_target grows.
  const std::vector<double> shape{0.5, 0.3, 0.2};
  double prev = INFINITY;
  for (int k = 0; k <= 100; ++k) {
    const double pt = k / 100.0;
    std::vector<double> p{pt};
    for (double s : shape) p.push_back((1.0 - pt) * s);
    const double n = grad_norm_sq(ProbRow(p, 0));
    EXPECT_LT(n, prev);
    prev = n;
  }
  EXPECT_NEAR(prev, 0.0, 1e-15);
}

TEST(SftLoss, Examples) {
  EXPECT_EQ(sft_loss(ProbLog{{ProbRow({1.0, 0.0}, 0), ProbRow({0.0, 1.0}, 1)}, {}}), 0.0);
  EXPECT_NEAR(sft_loss(ProbLog{{uniform(4, 0)}, {}}), std::log(4.0), 1e-15);
  const double e2 = std::exp(-2.0);
  EXPECT_NEAR(sft_loss(ProbLog{{ProbRow({1.0, 0.0}, 0), ProbRow({e2, 1.0 - e2}, 0)}, {}}), 1.0, 1e-15);
  EXPECT_THROW(sft_loss(ProbLog{}), std::invalid_argument);
}

TEST(SftLoss, ConcatenationIsLengthWeightedMean) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 50; ++t) {
    ProbLog a, b, ab;
    for (int i = 0; i < 1 + t % 7; ++i) a.rows.push_back(random_row(rng, 5));
    for (int i = 0; i < 1 + t % 4; ++i) b.rows.push_back(random_row(rng, 9));
    ab.rows = a.rows;
    ab.rows.insert(ab.rows.end(), b.rows.begin(), b.rows.end());
    const double na = a.rows.size(), nb = b.rows.size();
    EXPECT_NEAR(sft_loss(ab), (na * sft_loss(a) + nb * sft_loss(b)) / (na + nb), 1e-12);
  }
}

TEST(Gap, ArithmeticExample) {
  const auto lex = SelfTalkLexicon::default_lexicon();
  std::vector<TokenObservation> obs{{"s", "Wait", 0.1}, {"s", "x", 0.9}};
  const auto simple = selftalk_prob_gap(obs, lex);
  EXPECT_NEAR(*simple.at(0).gap, 0.5 - 0.1, 1e-15);
}

// Ten rows: hits at 0.2, 0.3, 0.4 and seven other rows bringing the mean to 0.6.
TEST(Gap, TenRowExample) {
  const auto lex = SelfTalkLexicon::default_lexicon();
  std::vector<TokenObservation> obs{{"", " Hmm", 0.2}, {"", "wait", 0.3}, {"", "Let's", 0.4}};
  for (int i = 0; i < 7; ++i) obs.push_back({"", "tok" + std::to_string(i), 5.1 / 7.0});
  double mean = 0.0;
  for (const auto& o : obs) mean += o.target_prob / 10.0;
  ASSERT_NEAR(mean, 0.6, 1e-15);
  const auto r = selftalk_prob_gap(obs, lex).at(0);
  EXPECT_EQ(r.n_rows, 10u);
  EXPECT_EQ(r.n_selftalk, 3u);
  EXPECT_NEAR(*r.avg_selftalk, 0.3, 1e-15);
  EXPECT_NEAR(*r.gap, 0.3, 1e-15);
}

TEST(Gap, NoHitsLeavesGapUndefined) {
  const auto lex = SelfTalkLexicon::default_lexicon();
  std::vector<TokenObservation> obs{{"a", "x", 0.5}, {"b", "y", 0.6}, {"a", "z", 0.7}};
  const auto r = selftalk_prob_gap(obs, lex);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].stage, "a");
  EXPECT_EQ(r[0].n_rows, 2u);
  EXPECT_EQ(r[0].n_selftalk, 0u);
  EXPECT_FALSE(r[0].gap.has_value());
  EXPECT_FALSE(r[0].avg_selftalk.has_value());
}

TEST(Gap, ProbLogsNeedTokenText) {
  const auto lex = SelfTalkLexicon::default_lexicon();
  std::vector<ProbLog> logs{{{ProbRow({0.5, 0.5}, 0)}, std::string("s")}};
  EXPECT_THROW(selftalk_prob_gap(logs, lex), std::invalid_argument);
  std::vector<ProbLog> empty{ProbLog{}};
  EXPECT_THROW(selftalk_prob_gap(empty, lex), std::invalid_argument);
}

TEST(ProbLogFile, FullAndCompactForms) {
  const auto lines = parse_prob_log(
      "{\"stage\":\"e1\",\"token_text\":\"Hmm\",\"target_index\":1,\"probs\":[0.75,0.25]}\n"
      "\n"
      "{\"stage\":\"e1\",\"token_text\":\"x\",\"target_prob\":0.5}\n");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_FALSE(lines[0].is_compact());
  EXPECT_DOUBLE_EQ(lines[0].target_prob, 0.25);
  EXPECT_TRUE(lines[1].is_compact());
  const auto obs = to_observations(lines);
  EXPECT_EQ(obs.size(), 2u);
  try {
    to_prob_logs(lines);
    FAIL();
  } catch (const ProbLogError& e) {
    EXPECT_NE(std::string(e.what()).find("compact"), std::string::npos);
  }
  EXPECT_THROW(parse_prob_log("{\"token_text\":\"x\"}\n"), ProbLogError);
  EXPECT_THROW(parse_prob_log("{\"token_text\":\"x\",\"target_index\":0,\"probs\":[0.3]}\n"), ProbLogError);
  EXPECT_THROW(parse_prob_log("{\"token_text\":\"x\",\"target_prob\":1.5}\n"), ProbLogError);
}

TEST(SelfTest, Passes) {
  for (const auto& c : gradient_self_test(3)) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}
