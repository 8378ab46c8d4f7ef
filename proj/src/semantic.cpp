#include "retrace/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

namespace retrace::semantic {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::part:
      return "part";
    case Family::summary:
      return "summary";
    case Family::original:
      return "original";
  }
  return "original";
}

Family parse_family(std::string_view s) {
  if (s == "part") return Family::part;
  if (s == "summary") return Family::summary;
  if (s == "original") return Family::original;
  throw std::invalid_argument("unknown family '" + std::string(s) + "'");
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  }
  if (u.empty()) throw std::invalid_argument("cosine: empty vectors");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine: zero vector");
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

RetrievalOutcome retrieval_eval(std::span<const EmbeddingVector> queries,
                                std::span<const EmbeddingVector> candidates) {
  std::unordered_set<std::string_view> candidate_ids;
  for (const auto& c : candidates) candidate_ids.insert(c.source_id);
  for (const auto& q : queries) {
    if (!candidate_ids.contains(q.source_id)) {
      throw std::invalid_argument("query '" + q.source_id + "' has no candidate with the same id");
    }
  }

  RetrievalOutcome out;
  out.n_queries = queries.size();
  if (queries.empty()) return out;

  std::array<std::size_t, kFamilyCount> hits{};
  std::array<double, kFamilyCount> cos_sum{};
  std::array<std::size_t, kFamilyCount> cos_n{};
  std::size_t self_hits = 0;

  for (const auto& q : queries) {
    const EmbeddingVector* best = nullptr;
    double best_cos = 0.0;
    std::size_t n_at_best = 0;
    for (const auto& c : candidates) {
      const double cs = cosine(q.values, c.values);
      if (c.source_id == q.source_id) {
        auto f = static_cast<std::size_t>(c.family);
        cos_sum[f] += cs;
        ++cos_n[f];
      }
      if (best == nullptr || cs > best_cos) {
        best = &c;
        best_cos = cs;
        n_at_best = 1;
      } else if (cs == best_cos) {
        ++n_at_best;
        if (std::tie(c.family, c.source_id) < std::tie(best->family, best->source_id)) best = &c;
      }
    }
    if (n_at_best > 1) ++out.ties;
    if (best->source_id == q.source_id) {
      ++self_hits;
      ++hits[static_cast<std::size_t>(best->family)];
    }
  }
  const auto nq = static_cast<double>(queries.size());
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    out.match_ratio[f] = static_cast<double>(hits[f]) / nq;
    if (cos_n[f] > 0) out.avg_cos[f] = cos_sum[f] / static_cast<double>(cos_n[f]);
  }
  out.self_match_ratio = static_cast<double>(self_hits) / nq;
  return out;
}

}  // namespace retrace::semantic
