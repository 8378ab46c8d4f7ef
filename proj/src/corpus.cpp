#include "retrace/corpus.hpp"

#include "retrace/io.hpp"
#include "retrace/text.hpp"

#include <nlohmann/json.hpp>

#include <unordered_set>

namespace retrace {

using json = nlohmann::json;

CorpusError::CorpusError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

CorpusError::CorpusError(const std::string& what) : std::runtime_error(what) {}

Method Method::parse(std::string_view s) {
  if (s == "part") return part();
  if (s == "summary") return summary();
  return {Kind::other, std::string(s)};
}

namespace {

std::string required_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw CorpusError(line, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw CorpusError(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw CorpusError(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

TraceRecord parse_record(std::string_view line_text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(line_text);
  } catch (const json::parse_error& e) {
    throw CorpusError(line, std::string("parse error: ") + e.what());
  }
  if (!obj.is_object()) throw CorpusError(line, "parse error: record must be a JSON object");

  TraceRecord r;
  r.id = required_string(obj, "id", line);
  r.query = required_string(obj, "query", line);
  r.reasoning = required_string(obj, "reasoning", line);
  r.answer = required_string(obj, "answer", line);
  r.reformulated = optional_string(obj, "reformulated", line);
  if (auto m = optional_string(obj, "method", line)) {
    if (m->empty()) throw CorpusError(line, "field 'method' must be nonempty");
    r.method = Method::parse(*m);
  }
  if (r.id.empty()) throw CorpusError(line, "field 'id' must be nonempty");
  return r;
}

}  // namespace

Corpus parse_corpus(std::string_view contents) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    std::string_view line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? contents.size() : nl + 1;
    ++line_no;
    if (text::is_blank(line)) continue;
    TraceRecord r = parse_record(line, line_no);
    if (!seen.insert(r.id).second) throw CorpusError(line_no, "duplicate id '" + r.id + "'");
    corpus.push_back(std::move(r));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

std::string serialize_record(const TraceRecord& r) {
  json obj = json::object();
  obj["id"] = r.id;
  obj["query"] = r.query;
  obj["reasoning"] = r.reasoning;
  obj["answer"] = r.answer;
  if (r.reformulated) obj["reformulated"] = *r.reformulated;
  if (r.method) obj["method"] = r.method->name();
  return obj.dump();
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus) {
    out += serialize_record(r);
    out.push_back('\n');
  }
  return out;
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string_view> seen;
  for (const auto& r : corpus) {
    if (r.id.empty()) throw CorpusError("record with empty id");
    if (!seen.insert(r.id).second) throw CorpusError("duplicate id '" + r.id + "'");
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  validate_corpus(corpus);
  write_file_atomic(path, serialize_corpus(corpus));
}

Granularity parse_granularity(std::string_view s) {
  if (s == "sentence") return Granularity::sentence;
  if (s == "step") return Granularity::step;
  throw std::invalid_argument("unknown granularity '" + std::string(s) + "'");
}

std::string_view to_string(Granularity g) { return g == Granularity::sentence ? "sentence" : "step"; }

namespace {

struct Span {
  std::size_t start;
  std::size_t end;
};

bool is_ascii_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Maximal runs of non-blank lines.
std::vector<Span> paragraphs(std::string_view trace) {
  std::vector<Span> out;
  std::size_t pos = 0;
  std::optional<Span> cur;
  while (pos < trace.size()) {
    std::size_t nl = trace.find('\n', pos);
    std::size_t line_end = nl == std::string_view::npos ? trace.size() : nl;
    std::string_view line = trace.substr(pos, line_end - pos);
    if (text::is_blank(line)) {
      if (cur) out.push_back(*cur);
      cur.reset();
    } else if (cur) {
      cur->end = line_end;
    } else {
      cur = Span{pos, line_end};
    }
    pos = nl == std::string_view::npos ? trace.size() : nl + 1;
  }
  if (cur) out.push_back(*cur);
  return out;
}

Span trimmed(std::string_view trace, Span s) {
  while (s.start < s.end && is_ascii_ws(trace[s.start])) ++s.start;
  while (s.end > s.start && is_ascii_ws(trace[s.end - 1])) --s.end;
  return s;
}

bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

void split_sentences(std::string_view trace, Span para, std::vector<Span>& out) {
  std::size_t sentence_start = para.start;
  int paren_depth = 0;
  bool in_math = false;
  std::size_t i = para.start;
  while (i < para.end) {
    char c = trace[i];
    if (c == '\\' && i + 1 < para.end) {
      i += 2;  // escaped character, e.g. \$ or \(
      continue;
    }
    if (c == '$') {
      in_math = !in_math;
    } else if (!in_math && c == '(') {
      ++paren_depth;
    } else if (!in_math && c == ')') {
      if (paren_depth > 0) --paren_depth;
    } else if (is_terminator(c) && !in_math && paren_depth == 0) {
      std::size_t j = i;
      while (j < para.end && is_terminator(trace[j])) ++j;
      if (j == para.end) {
        out.push_back({sentence_start, j});
        sentence_start = j;
        i = j;
        continue;
      }
      std::size_t k = j;
      while (k < para.end && is_ascii_ws(trace[k])) ++k;
      if (k > j && k < para.end) {
        std::size_t probe = k;
        if (text::is_upper(text::decode_at(trace, probe))) {
          out.push_back({sentence_start, j});
          sentence_start = k;
          i = k;
          continue;
        }
      }
      i = j;
      continue;
    }
    ++i;
  }
  if (sentence_start < para.end) out.push_back({sentence_start, para.end});
}

}  // namespace

std::vector<Segment> segment(std::string_view trace, Granularity granularity) {
  std::vector<Span> spans;
  for (const Span& para : paragraphs(trace)) {
    if (granularity == Granularity::step) {
      spans.push_back(para);
    } else {
      split_sentences(trace, para, spans);
    }
  }
  std::vector<Segment> out;
  out.reserve(spans.size());
  for (Span s : spans) {
    s = trimmed(trace, s);
    if (s.start == s.end) continue;
    out.push_back({text::collapse_whitespace(trace.substr(s.start, s.end - s.start)), s.start, s.end, granularity});
  }
  return out;
}

}  // namespace retrace
