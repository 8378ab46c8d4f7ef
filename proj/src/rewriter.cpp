#include "retrace/rewriter.hpp"

#include "retrace/lexmatch.hpp"
#include "retrace/text.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>

namespace retrace {

ValidationReport validate_reorder(std::string_view original_segment, const TaggedOutput& tagged,
                                  double min_similarity) {
  if (!(min_similarity >= 0.0 && min_similarity <= 1.0)) {
    throw std::invalid_argument("min_similarity must lie in [0, 1]");
  }
  ValidationReport report;
  const auto sentences = segment(original_segment, Granularity::sentence);
  if (sentences.empty()) return report;

  const std::u32string rewritten = lexmatch::normalize(tagged.rewritten);
  std::vector<std::u32string> sentence_text;
  std::vector<lexmatch::Alignment> placed;
  std::size_t retained = 0;
  for (const auto& s : sentences) {
    sentence_text.push_back(lexmatch::normalize(s.text));
    placed.push_back(lexmatch::partial_ratio_alignment(sentence_text.back(), rewritten));
    if (placed.back().score >= min_similarity) ++retained;
  }
  report.content_match_ratio = static_cast<double>(retained) / static_cast<double>(sentences.size());
  if (report.content_match_ratio < 0.5) {
    report.failures.push_back({ValidationFailure::Kind::content_loss,
                               "only " + std::to_string(retained) + " of " + std::to_string(sentences.size()) +
                                   " original sentences survive in the rewritten text"});
  }

  // Anchor each sub-conclusion at the original sentence it best matches, no
  // earlier than the previous sub's anchor. The sentences after the previous
  // anchor and before this one are its reasoning.
  std::size_t prev_anchor = 0;
  bool have_prev = false;
  for (std::size_t i = 0; i < tagged.subs.size(); ++i) {
    const std::u32string sub = lexmatch::normalize(tagged.subs[i]);
    if (sub.empty()) continue;
    std::size_t anchor = prev_anchor;
    double best_score = -1.0;
    for (std::size_t j = prev_anchor; j < sentence_text.size(); ++j) {
      const double score = lexmatch::partial_ratio_alignment(sub, sentence_text[j]).score;
      if (score > best_score) {
        best_score = score;
        anchor = j;
      }
    }
    const std::size_t lo = have_prev ? prev_anchor + 1 : 0;
    const std::size_t sub_pos = lexmatch::partial_ratio_alignment(sub, rewritten).hay_start;
    for (std::size_t j = lo; j < anchor; ++j) {
      if (placed[j].score >= min_similarity && placed[j].hay_start < sub_pos) {
        report.failures.push_back({ValidationFailure::Kind::order, "sub-conclusion " + std::to_string(i + 1) +
                                                                       " appears after its supporting sentence " +
                                                                       std::to_string(j + 1)});
        break;
      }
    }
    prev_anchor = anchor;
    have_prev = true;
  }
  report.ok = report.failures.empty();
  return report;
}

void RewriteConfig::validate() const {
  if (segment_budget == 0) throw std::invalid_argument("segment_budget must be positive");
  if (concurrency_limit == 0) throw std::invalid_argument("concurrency_limit must be positive");
  if (!(max_output_factor > 0.0)) throw std::invalid_argument("max_output_factor must be positive");
}

std::vector<TextRange> plan_chunks(std::string_view trace, std::size_t budget) {
  if (budget == 0) throw std::invalid_argument("chunk budget must be positive");
  std::vector<TextRange> units;
  for (const auto& step : segment(trace, Granularity::step)) {
    std::string_view body = trace.substr(step.start, step.end - step.start);
    if (text::code_point_count(body) <= budget) {
      units.push_back({step.start, step.end});
      continue;
    }
    for (const auto& s : segment(body, Granularity::sentence)) {
      units.push_back({step.start + s.start, step.start + s.end});
    }
  }

  std::vector<TextRange> chunks;
  for (const auto& u : units) {
    if (!chunks.empty()) {
      TextRange& cur = chunks.back();
      if (text::code_point_count(trace.substr(cur.start, u.end - cur.start)) <= budget) {
        cur.end = u.end;
        continue;
      }
    }
    chunks.push_back(u);
  }
  return chunks;
}

namespace {

std::size_t output_bound(const RewriteConfig& cfg, std::string_view chunk) {
  return static_cast<std::size_t>(std::ceil(cfg.max_output_factor * static_cast<double>(text::code_point_count(chunk))));
}

// Calls the endpoint and parses the reply, retrying both transport and parse
// failures up to cfg.max_retries times.
template <typename Parse>
auto call_with_retries(GenerationClient& client, const GenerationRequest& request, const RewriteConfig& cfg,
                       Parse parse) -> decltype(parse(std::string_view{})) {
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0 && cfg.retry_backoff.count() > 0) {
      std::this_thread::sleep_for(cfg.retry_backoff * (1LL << std::min<std::size_t>(attempt - 1, 16)));
    }
    try {
      return parse(client.generate(request));
    } catch (const GenerationError& e) {
      last_error = e.what();
      if (!e.retryable()) break;
    } catch (const TagParseError& e) {
      last_error = e.what();
    }
  }
  throw PipelineError(last_error);
}

GenerationRequest make_request(const PromptTemplate& tmpl, std::string_view text, const RewriteConfig& cfg) {
  GenerationRequest req;
  req.system = cfg.system_prompt;
  req.prompt = render_prompt(tmpl, text);
  req.payload = std::string(text);
  req.kind = tmpl.kind();
  req.temperature = cfg.temperature;
  req.max_tokens = output_bound(cfg, text);
  return req;
}

struct ChunkResult {
  std::string text;
  std::optional<ValidationReport> validation;
};

using ChunkFn = ChunkResult (*)(std::string_view, const RewriteConfig&, GenerationClient&, bool);

ChunkResult reformulate_chunk(std::string_view chunk, const RewriteConfig& cfg, GenerationClient& client,
                              bool want_validation) {
  std::string declarative =
      call_with_retries(client, make_request(PromptTemplate::removal(), chunk, cfg), cfg, parse_plain_output);
  TaggedOutput tagged = call_with_retries(client, make_request(PromptTemplate::reorder(), declarative, cfg), cfg,
                                          parse_tagged_output);
  ChunkResult out;
  if (want_validation) out.validation = validate_reorder(chunk, tagged);
  out.text = std::move(tagged.rewritten);
  return out;
}

ChunkResult summarize_chunk(std::string_view chunk, const RewriteConfig& cfg, GenerationClient& client, bool) {
  return {call_with_retries(client, make_request(PromptTemplate::summary(), chunk, cfg), cfg, parse_plain_output),
          std::nullopt};
}

// Runs fn over every chunk with at most cfg.concurrency_limit in flight and
// joins results strictly by chunk index.
TraceRecord run_pipeline(const TraceRecord& record, const RewriteConfig& cfg, GenerationClient& client,
                         ChunkFn fn, Method method, std::vector<ValidationReport>* validations) {
  cfg.validate();
  if (text::is_blank(record.reasoning)) {
    throw PipelineError("record '" + record.id + "': reasoning is empty");
  }
  const auto chunks = plan_chunks(record.reasoning, cfg.segment_budget);
  std::vector<ChunkResult> results(chunks.size());
  std::vector<std::exception_ptr> errors(chunks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < chunks.size(); i = next.fetch_add(1)) {
      std::string_view chunk =
          std::string_view(record.reasoning).substr(chunks[i].start, chunks[i].end - chunks[i].start);
      try {
        results[i] = fn(chunk, cfg, client, validations != nullptr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(cfg.concurrency_limit, chunks.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw PipelineError("record '" + record.id + "' chunk " + std::to_string(i) + ": " + e.what());
    }
  }

  std::string joined;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) joined += "\n\n";
    joined += results[i].text;
  }
  if (validations != nullptr) {
    for (auto& r : results) {
      if (r.validation) validations->push_back(std::move(*r.validation));
    }
  }
  TraceRecord out = record;
  out.reformulated = std::move(joined);
  out.method = std::move(method);
  return out;
}

}  // namespace

TraceRecord reformulate_trace(const TraceRecord& record, const RewriteConfig& cfg, GenerationClient& client,
                              std::vector<ValidationReport>* validations) {
  return run_pipeline(record, cfg, client, reformulate_chunk, Method::part(), validations);
}

TraceRecord summarize_trace(const TraceRecord& record, const RewriteConfig& cfg, GenerationClient& client) {
  return run_pipeline(record, cfg, client, summarize_chunk, Method::summary(), nullptr);
}

}  // namespace retrace
