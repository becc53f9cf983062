#pragma once

#include <span>
#include <string>
#include <vector>

#include "pmf/core/rng.hpp"

namespace pmf::ovc {

inline constexpr std::size_t kNumPromptTemplates = 63;

/// The bundled prompt templates. Each has exactly one "{}" slot for the
/// category list; "{article}" is replaced by "a" or "an" to agree with the
/// first category name.
const std::vector<std::string>& prompt_templates();

/// Throws InvalidArgument unless "{}" occurs exactly once.
void validate_template(const std::string& tmpl);

std::string article_for(const std::string& word);

/// Category names joined with " and " and substituted into the template.
/// Throws InvalidArgument on an empty label list.
std::string fill_template(const std::string& tmpl, std::span<const std::string> labels);

struct Caption {
  std::string text;
  std::size_t template_id = 0;
};

/// Uniformly sampled template filled with the labels.
Caption pseudo_caption(std::span<const std::string> labels, RngStream& rng);

}  // namespace pmf::ovc
