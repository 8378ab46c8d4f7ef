#include "retrace/rewriter.hpp"

namespace retrace {

PromptTemplate::PromptTemplate(PromptKind kind, std::string body) : kind_(kind), body_(std::move(body)) {
  auto first = body_.find(kPlaceholder);
  if (first == std::string::npos) throw std::invalid_argument("prompt template has no {{TEXT}} placeholder");
  if (body_.find(kPlaceholder, first + kPlaceholder.size()) != std::string::npos) {
    throw std::invalid_argument("prompt template has more than one {{TEXT}} placeholder");
  }
  placeholder_ = first;
}

const PromptTemplate& PromptTemplate::removal() {
  static const PromptTemplate t(
      PromptKind::removal,
      "Rewrite the given text, which is a part of a complete reasoning process. Convert only the parts expressed in "
      "a self-talk style into a declarative format. Avoid using first-person expressions such as 'I', 'me', 'we', or "
      "'let's'. Do not alter any parts that are not self-talk; keep them exactly as in the original text.\n"
      "\n"
      "Do not add any extra information. Do not include any introductory phrases.\n"
      "\n"
      "Text:\n"
      "\n"
      "{{TEXT}}");
  return t;
}

const PromptTemplate& PromptTemplate::reorder() {
  static const PromptTemplate t(
      PromptKind::reorder,
      "You will process the given text in two steps. The given text is a part of a complete reasoning process.\n"
      "\n"
      "Step 1: Extract and list the most important sub-conclusions in the given reasoning process. Keep the number "
      "of sub-conclusions small and focused.\n"
      "\n"
      "Wrap the sub-conclusions in the tags <SUB> and </SUB> for easy extraction.\n"
      "\n"
      "Step 2: Move the sentences corresponding to these sub-conclusions to appear *before* their respective "
      "reasoning processes. Keep the sub-conclusions unnumbered and naturally integrated into the context. Do not "
      "modify any other parts of the original text.\n"
      "\n"
      "Wrap the entire transformed text in the tags <REWRITTEN> and </REWRITTEN> for easy extraction.\n"
      "\n"
      "Text:\n"
      "\n"
      "{{TEXT}}");
  return t;
}

const PromptTemplate& PromptTemplate::summary() {
  static const PromptTemplate t(PromptKind::summary,
                                "Summarize the following reasoning segment in 1–2 sentences.\n"
                                "\n"
                                "Text:\n"
                                "\n"
                                "{{TEXT}}");
  return t;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view segment_text) {
  std::string out;
  out.reserve(tmpl.body_.size() + segment_text.size());
  out.append(tmpl.body_, 0, tmpl.placeholder_);
  out.append(segment_text);
  out.append(tmpl.body_, tmpl.placeholder_ + PromptTemplate::kPlaceholder.size());
  return out;
}

}  // namespace retrace
