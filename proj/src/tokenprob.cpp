#include "retrace/tokenprob.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace retrace {

ProbRow::ProbRow(std::vector<double> probs, std::size_t target, std::optional<std::string> token_text)
    : probs_(std::move(probs)), target_(target), token_text_(std::move(token_text)) {
  if (probs_.empty()) throw std::invalid_argument("probability row is empty");
  if (target_ >= probs_.size()) throw std::invalid_argument("target index out of range");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) throw std::invalid_argument("probabilities must sum to 1");
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
  double max = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("logits must be finite");
    max = std::max(max, z);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

double token_loss(const ProbRow& row) {
  double p = row.target_prob();
  if (p <= 0.0) throw InfiniteLossError();
  return -std::log(p);
}

std::vector<double> grad_logits(const ProbRow& row) {
  std::vector<double> g(row.probs().begin(), row.probs().end());
  g[row.target()] -= 1.0;
  return g;
}

double grad_norm_sq(const ProbRow& row) {
  double sum_sq = 0.0;
  for (double p : row.probs()) sum_sq += p * p;
  return sum_sq + 1.0 - 2.0 * row.target_prob();
}

double sft_loss(const ProbLog& log) {
  if (log.rows.empty()) throw std::invalid_argument("sft_loss of an empty log");
  double total = 0.0;
  for (const auto& row : log.rows) total += token_loss(row);
  return total / static_cast<double>(log.rows.size());
}

std::vector<StageGapReport> selftalk_prob_gap(std::span<const TokenObservation> observations,
                                              const SelfTalkLexicon& lexicon) {
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0;
    std::size_t n_hit = 0;
    double sum_hit = 0.0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc, std::less<>> acc;
  for (const auto& obs : observations) {
    auto [it, inserted] = acc.try_emplace(obs.stage);
    if (inserted) order.push_back(obs.stage);
    Acc& a = it->second;
    ++a.n;
    a.sum += obs.target_prob;
    if (lexicon.contains(normalize_word(obs.token_text))) {
      ++a.n_hit;
      a.sum_hit += obs.target_prob;
    }
  }
  std::vector<StageGapReport> out;
  out.reserve(order.size());
  for (const auto& stage : order) {
    const Acc& a = acc.find(stage)->second;
    StageGapReport r;
    r.stage = stage;
    r.n_rows = a.n;
    r.n_selftalk = a.n_hit;
    r.avg_all = a.sum / static_cast<double>(a.n);
    if (a.n_hit > 0) {
      r.avg_selftalk = a.sum_hit / static_cast<double>(a.n_hit);
      r.gap = r.avg_all - *r.avg_selftalk;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StageGapReport> selftalk_prob_gap(std::span<const ProbLog> logs, const SelfTalkLexicon& lexicon) {
  std::vector<TokenObservation> obs;
  for (const auto& log : logs) {
    if (log.rows.empty()) throw std::invalid_argument("probability log is empty");
    for (const auto& row : log.rows) {
      if (!row.token_text()) throw std::invalid_argument("gap report needs token_text on every row");
      obs.push_back({log.stage.value_or(""), *row.token_text(), row.target_prob()});
    }
  }
  return selftalk_prob_gap(obs, lexicon);
}

std::vector<SelfCheck> gradient_self_test(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SelfCheck> out;

  {
    double worst = 0.0;
    std::uniform_int_distribution<std::size_t> vdist(1, 64);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t v = vdist(rng);
      std::vector<double> w(v);
      double sum = 0.0;
      for (double& x : w) sum += (x = u(rng) + 1e-12);
      for (double& x : w) x /= sum;
      ProbRow row(std::move(w), std::uniform_int_distribution<std::size_t>(0, v - 1)(rng));
      double direct = 0.0;
      for (double g : grad_logits(row)) direct += g * g;
      worst = std::max(worst, std::abs(direct - grad_norm_sq(row)));
    }
    std::ostringstream d;
    d << "max abs error " << worst << " over 1000 rows";
    out.push_back({"grad_norm_sq equals squared norm of grad_logits", worst < 1e-12, d.str()});
  }

  {
    constexpr double h = 1e-5;
    double worst = 0.0;
    std::uniform_int_distribution<std::size_t> vdist(2, 16);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t v = vdist(rng);
      const std::size_t target = std::uniform_int_distribution<std::size_t>(0, v - 1)(rng);
      std::vector<double> logits(v);
      for (double& x : logits) x = z(rng);
      auto loss = [&](const std::vector<double>& l) { return token_loss(ProbRow(softmax(l), target)); };
      const auto analytic = grad_logits(ProbRow(softmax(logits), target));
      for (std::size_t i = 0; i < v; ++i) {
        auto plus = logits, minus = logits;
        plus[i] += h;
        minus[i] -= h;
        const double numeric = (loss(plus) - loss(minus)) / (2.0 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
      }
    }
    std::ostringstream d;
    d << "max relative error " << worst << " over 100 logit vectors, step 1e-5";
    out.push_back({"grad_logits matches central differences", worst < 1e-6, d.str()});
  }
  return out;
}

}  // namespace retrace
