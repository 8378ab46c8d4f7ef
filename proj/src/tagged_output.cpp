#include "retrace/rewriter.hpp"
#include "retrace/text.hpp"

#include <array>

namespace retrace {

TagParseError::TagParseError(Kind kind, const std::string& detail)
    : std::runtime_error("malformed rewrite: " + detail), kind_(kind) {}

namespace {

enum class Tag { sub_open, sub_close, rw_open, rw_close };

struct TagSpelling {
  Tag tag;
  std::string_view text;
};

constexpr std::array<TagSpelling, 4> kTags{{
    {Tag::sub_open, "<SUB>"},
    {Tag::sub_close, "</SUB>"},
    {Tag::rw_open, "<REWRITTEN>"},
    {Tag::rw_close, "</REWRITTEN>"},
}};

}  // namespace

TaggedOutput parse_tagged_output(std::string_view raw) {
  using K = TagParseError::Kind;
  TaggedOutput out;
  bool in_sub = false;
  bool in_rewritten = false;
  std::size_t rewritten_blocks = 0;
  std::size_t sub_start = 0;
  std::size_t text_start = 0;  // start of the current untagged run inside REWRITTEN
  std::string rewritten;

  std::size_t pos = 0;
  while ((pos = raw.find('<', pos)) != std::string_view::npos) {
    const TagSpelling* hit = nullptr;
    for (const auto& t : kTags) {
      if (raw.substr(pos, t.text.size()) == t.text) {
        hit = &t;
        break;
      }
    }
    if (hit == nullptr) {
      ++pos;
      continue;
    }
    const std::size_t after = pos + hit->text.size();
    switch (hit->tag) {
      case Tag::sub_open:
        if (in_sub) throw TagParseError(K::nested_tag, "<SUB> opened inside another <SUB>");
        in_sub = true;
        sub_start = after;
        break;
      case Tag::sub_close: {
        if (!in_sub) throw TagParseError(K::unmatched_close, "</SUB> without a matching <SUB>");
        in_sub = false;
        std::string_view capture = text::trim(raw.substr(sub_start, pos - sub_start));
        if (capture.empty()) {
          out.warnings.emplace_back("empty <SUB> capture skipped");
        } else {
          out.subs.emplace_back(capture);
        }
        break;
      }
      case Tag::rw_open:
        if (in_rewritten) throw TagParseError(K::nested_tag, "<REWRITTEN> opened inside another <REWRITTEN>");
        if (in_sub) throw TagParseError(K::unclosed_tag, "<SUB> not closed before <REWRITTEN>");
        if (rewritten_blocks > 0) throw TagParseError(K::duplicate_rewritten, "more than one <REWRITTEN> block");
        in_rewritten = true;
        break;
      case Tag::rw_close:
        if (!in_rewritten) throw TagParseError(K::unmatched_close, "</REWRITTEN> without a matching <REWRITTEN>");
        if (in_sub) throw TagParseError(K::unclosed_tag, "<SUB> not closed inside <REWRITTEN>");
        rewritten.append(raw.substr(text_start, pos - text_start));
        in_rewritten = false;
        ++rewritten_blocks;
        break;
    }
    if (in_rewritten) {
      if (hit->tag != Tag::rw_open) rewritten.append(raw.substr(text_start, pos - text_start));
      text_start = after;
    }
    pos = after;
  }
  if (in_sub) throw TagParseError(K::unclosed_tag, "unclosed <SUB>");
  if (in_rewritten) throw TagParseError(K::unclosed_tag, "unclosed <REWRITTEN>");
  if (rewritten_blocks == 0) throw TagParseError(K::missing_rewritten, "no <REWRITTEN> block");

  out.rewritten = std::string(text::trim(rewritten));
  if (out.rewritten.empty()) throw TagParseError(K::empty_content, "empty <REWRITTEN> block");
  if (out.subs.empty()) out.warnings.emplace_back("no <SUB> captures");
  return out;
}

std::string serialize_tagged_output(const TaggedOutput& tagged) {
  std::string out;
  for (const auto& s : tagged.subs) out += "<SUB>" + s + "</SUB>\n";
  out += "<REWRITTEN>" + tagged.rewritten + "</REWRITTEN>";
  return out;
}

std::string parse_plain_output(std::string_view raw) {
  bool tagged = false;
  for (std::string_view tag : {"<REWRITTEN>", "</REWRITTEN>", "<SUB>", "</SUB>"}) {
    tagged = tagged || raw.find(tag) != std::string_view::npos;
  }
  if (tagged) {
    return parse_tagged_output(raw).rewritten;
  }
  std::string_view body = text::trim(raw);
  if (body.empty()) throw TagParseError(TagParseError::Kind::empty_content, "empty output");
  return std::string(body);
}

}  // namespace retrace
