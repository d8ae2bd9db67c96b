#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "capreason/domain.hpp"

namespace capreason::prompts {

enum class TemplateId {
  RephrasePrompt,
  DefaultCaptionPrompt,
  GroundingPrompt,
  StructuredCaptionPrompt,
  AnswerPrompt,
  FormatOptimizationPrompt,
  CriticalReviewPrompt,
  JudgePrompt,
  MathVerseCaptionPrompt,
};

inline constexpr std::array<TemplateId, 9> kAllTemplates = {
    TemplateId::RephrasePrompt,        TemplateId::DefaultCaptionPrompt,
    TemplateId::GroundingPrompt,       TemplateId::StructuredCaptionPrompt,
    TemplateId::AnswerPrompt,          TemplateId::FormatOptimizationPrompt,
    TemplateId::CriticalReviewPrompt,  TemplateId::JudgePrompt,
    TemplateId::MathVerseCaptionPrompt,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);
TemplateId template_for_mode(domain::CaptionMode mode);

struct PromptTemplate {
  TemplateId id = TemplateId::AnswerPrompt;
  std::string body;
  std::set<std::string> required_vars;  // exactly the placeholders in body
};

struct RenderedPrompt {
  TemplateId template_id;
  std::string text;
  std::string bindings_digest;
};

class MissingTemplate : public std::runtime_error {
 public:
  MissingTemplate(TemplateId id, const std::string& detail);
  TemplateId id;
};

class PlaceholderMismatch : public std::runtime_error {
 public:
  PlaceholderMismatch(TemplateId id, const std::string& detail);
  TemplateId id;
};

class MissingBinding : public std::runtime_error {
 public:
  explicit MissingBinding(const std::string& name);
  std::string name;
};

// Placeholders a template may / must use.
struct PlaceholderSpec {
  std::set<std::string> required;
  std::set<std::string> allowed;  // superset of required
};

const PlaceholderSpec& placeholder_spec(TemplateId id);

// Extracts {name} placeholders; "{{" and "}}" escape literal braces.
// Throws PlaceholderMismatch on malformed placeholder syntax.
std::set<std::string> scan_placeholders(TemplateId id, std::string_view body);

class TemplateSet {
 public:
  // Expects one "<TemplateId>.prompt" file per id, each starting with a
  // "# id: <TemplateId>" header line.
  static TemplateSet load(const std::filesystem::path& dir);

  const PromptTemplate& get(TemplateId id) const;
  std::size_t size() const { return templates_.size(); }

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

// Literal single-pass substitution; binding values are never re-expanded.
// Bindings may be a superset of required_vars.
RenderedPrompt render(const PromptTemplate& tmpl,
                      const std::map<std::string, std::string>& bindings);

}  // namespace capreason::prompts
