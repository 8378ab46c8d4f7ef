#include "retrace/io.hpp"
#include "retrace/text.hpp"
#include "retrace/tokenprob.hpp"

#include <nlohmann/json.hpp>

#include <map>

namespace retrace {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ProbLogError("line " + std::to_string(line) + ": " + what);
}

ProbLogLine parse_line(std::string_view s, std::size_t line) {
  json obj;
  try {
    obj = json::parse(s);
  } catch (const json::parse_error& e) {
    fail(line, std::string("parse error: ") + e.what());
  }
  if (!obj.is_object()) fail(line, "record must be a JSON object");

  ProbLogLine out;
  if (auto it = obj.find("stage"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) fail(line, "'stage' must be a string");
    out.stage = it->get<std::string>();
  }
  auto tt = obj.find("token_text");
  if (tt == obj.end() || !tt->is_string()) fail(line, "missing string field 'token_text'");
  out.token_text = tt->get<std::string>();

  auto probs = obj.find("probs");
  auto idx = obj.find("target_index");
  if (probs != obj.end() || idx != obj.end()) {
    if (probs == obj.end() || !probs->is_array()) fail(line, "full form needs a 'probs' array");
    if (idx == obj.end() || !idx->is_number_unsigned()) fail(line, "full form needs a non-negative 'target_index'");
    for (const auto& p : *probs) {
      if (!p.is_number()) fail(line, "'probs' must contain numbers");
      out.probs.push_back(p.get<double>());
    }
    out.target_index = idx->get<std::size_t>();
    try {
      ProbRow check(out.probs, *out.target_index);
    } catch (const std::invalid_argument& e) {
      fail(line, e.what());
    }
    out.target_prob = out.probs[*out.target_index];
    return out;
  }
  auto tp = obj.find("target_prob");
  if (tp == obj.end() || !tp->is_number()) fail(line, "expected 'probs'+'target_index' or 'target_prob'");
  out.target_prob = tp->get<double>();
  if (!(out.target_prob >= 0.0 && out.target_prob <= 1.0)) fail(line, "'target_prob' must lie in [0, 1]");
  return out;
}

}  // namespace

std::vector<ProbLogLine> parse_prob_log(std::string_view contents) {
  std::vector<ProbLogLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    std::string_view line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? contents.size() : nl + 1;
    ++line_no;
    if (text::is_blank(line)) continue;
    out.push_back(parse_line(line, line_no));
  }
  return out;
}

std::vector<ProbLogLine> load_prob_log(const std::filesystem::path& path) { return parse_prob_log(read_file(path)); }

std::vector<TokenObservation> to_observations(std::span<const ProbLogLine> lines) {
  std::vector<TokenObservation> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back({l.stage, l.token_text, l.target_prob});
  return out;
}

std::vector<ProbLog> to_prob_logs(std::span<const ProbLogLine> lines) {
  std::vector<ProbLog> logs;
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (l.is_compact()) {
      throw ProbLogError("entry " + std::to_string(i + 1) +
                         ": compact form (target_prob only) cannot be used where full probability vectors are "
                         "required");
    }
    auto [it, inserted] = index.try_emplace(l.stage, logs.size());
    if (inserted) logs.push_back({{}, l.stage});
    try {
      logs[it->second].rows.emplace_back(l.probs, *l.target_index, l.token_text);
    } catch (const std::invalid_argument& e) {
      throw ProbLogError("entry " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return logs;
}

}  // namespace retrace
