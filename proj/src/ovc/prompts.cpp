#include "pmf/ovc/prompts.hpp"

#include <cctype>
#include <string_view>

#include "pmf/core/errors.hpp"

namespace pmf::ovc {

namespace detail {
extern const std::string_view kPromptTemplateText;
}

namespace {

std::size_t count_slots(const std::string& tmpl) {
  std::size_t n = 0;
  for (std::size_t pos = tmpl.find("{}"); pos != std::string::npos; pos = tmpl.find("{}", pos + 2)) ++n;
  return n;
}

std::vector<std::string> parse_templates() {
  std::vector<std::string> out;
  std::string_view text = detail::kPromptTemplateText;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    validate_template(line);
    out.push_back(std::move(line));
  }
  if (out.size() != kNumPromptTemplates) {
    throw FormatError("expected " + std::to_string(kNumPromptTemplates) + " prompt templates, found " +
                      std::to_string(out.size()));
  }
  return out;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

const std::vector<std::string>& prompt_templates() {
  static const std::vector<std::string> templates = parse_templates();
  return templates;
}

void validate_template(const std::string& tmpl) {
  if (count_slots(tmpl) != 1) throw InvalidArgument("prompt template must contain exactly one {} slot: " + tmpl);
}

std::string article_for(const std::string& word) {
  if (word.empty()) return "a";
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word.front())));
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

std::string fill_template(const std::string& tmpl, std::span<const std::string> labels) {
  if (labels.empty()) throw InvalidArgument("pseudo caption needs at least one label");
  validate_template(tmpl);
  std::string joined;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) joined += " and ";
    joined += labels[i];
  }
  std::string out = tmpl;
  replace_all(out, "{article}", article_for(labels.front()));
  const auto pos = out.find("{}");
  out.replace(pos, 2, joined);
  return out;
}

Caption pseudo_caption(std::span<const std::string> labels, RngStream& rng) {
  if (labels.empty()) throw InvalidArgument("pseudo caption needs at least one label");
  const auto& templates = prompt_templates();
  const auto id = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(templates.size()) - 1));
  return {fill_template(templates[id], labels), id};
}

}  // namespace pmf::ovc
