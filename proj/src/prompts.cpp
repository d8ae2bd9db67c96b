#include "capreason/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "capreason/util.hpp"

namespace capreason::prompts {

namespace {

bool is_placeholder_char(char c) {
  return (c >= 'a' && c <= 'z') || c == '_';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::RephrasePrompt: return "RephrasePrompt";
    case TemplateId::DefaultCaptionPrompt: return "DefaultCaptionPrompt";
    case TemplateId::GroundingPrompt: return "GroundingPrompt";
    case TemplateId::StructuredCaptionPrompt: return "StructuredCaptionPrompt";
    case TemplateId::AnswerPrompt: return "AnswerPrompt";
    case TemplateId::FormatOptimizationPrompt: return "FormatOptimizationPrompt";
    case TemplateId::CriticalReviewPrompt: return "CriticalReviewPrompt";
    case TemplateId::JudgePrompt: return "JudgePrompt";
    case TemplateId::MathVerseCaptionPrompt: return "MathVerseCaptionPrompt";
  }
  return "?";
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
  for (TemplateId id : kAllTemplates)
    if (name == to_string(id)) return id;
  return std::nullopt;
}

TemplateId template_for_mode(domain::CaptionMode mode) {
  switch (mode) {
    case domain::CaptionMode::Rephrase: return TemplateId::RephrasePrompt;
    case domain::CaptionMode::Default: return TemplateId::DefaultCaptionPrompt;
    case domain::CaptionMode::Grounding: return TemplateId::GroundingPrompt;
    case domain::CaptionMode::Structured: return TemplateId::StructuredCaptionPrompt;
    case domain::CaptionMode::MathVerse: return TemplateId::MathVerseCaptionPrompt;
  }
  return TemplateId::DefaultCaptionPrompt;
}

MissingTemplate::MissingTemplate(TemplateId id_in, const std::string& detail)
    : std::runtime_error("MissingTemplate(" + std::string(to_string(id_in)) + "): " + detail),
      id(id_in) {}

PlaceholderMismatch::PlaceholderMismatch(TemplateId id_in, const std::string& detail)
    : std::runtime_error("PlaceholderMismatch(" + std::string(to_string(id_in)) + "): " + detail),
      id(id_in) {}

MissingBinding::MissingBinding(const std::string& name_in)
    : std::runtime_error("MissingBinding(" + name_in + ")"), name(name_in) {}

const PlaceholderSpec& placeholder_spec(TemplateId id) {
  static const std::map<TemplateId, PlaceholderSpec> kSpecs = {
      {TemplateId::RephrasePrompt, {{"question"}, {"question"}}},
      {TemplateId::DefaultCaptionPrompt, {{}, {"question"}}},
      {TemplateId::GroundingPrompt, {{}, {"question"}}},
      {TemplateId::StructuredCaptionPrompt, {{}, {"question"}}},
      {TemplateId::MathVerseCaptionPrompt, {{}, {"question"}}},
      {TemplateId::AnswerPrompt, {{"question"}, {"question", "caption"}}},
      {TemplateId::FormatOptimizationPrompt, {{"answer"}, {"question", "answer"}}},
      {TemplateId::CriticalReviewPrompt,
       {{"question", "answer"}, {"question", "answer", "caption"}}},
      {TemplateId::JudgePrompt,
       {{"question", "ground_truth", "answer"}, {"question", "ground_truth", "answer"}}},
  };
  return kSpecs.at(id);
}

std::set<std::string> scan_placeholders(TemplateId id, std::string_view body) {
  std::set<std::string> names;
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        i += 2;
        continue;
      }
      std::size_t end = i + 1;
      while (end < body.size() && is_placeholder_char(body[end])) ++end;
      if (end == i + 1 || end >= body.size() || body[end] != '}')
        throw PlaceholderMismatch(id, "malformed placeholder near offset " + std::to_string(i));
      names.insert(std::string(body.substr(i + 1, end - i - 1)));
      i = end + 1;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') {
        i += 2;
        continue;
      }
      throw PlaceholderMismatch(id, "unmatched '}' at offset " + std::to_string(i));
    } else {
      ++i;
    }
  }
  return names;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet set;
  for (TemplateId id : kAllTemplates) {
    const std::filesystem::path path = dir / (std::string(to_string(id)) + ".prompt");
    if (!std::filesystem::exists(path))
      throw MissingTemplate(id, "no file " + path.string());

    std::string content = read_file(path);
    auto newline = content.find('\n');
    std::string header = newline == std::string::npos ? content : content.substr(0, newline);
    const std::string expected = "# id: " + std::string(to_string(id));
    if (trim_copy(header) != expected)
      throw MissingTemplate(id, "bad header line in " + path.string() + " (expected \"" +
                                    expected + "\")");
    std::string body = newline == std::string::npos ? "" : content.substr(newline + 1);
    if (trim_copy(body).empty())
      throw PlaceholderMismatch(id, "template body empty");

    PromptTemplate tmpl;
    tmpl.id = id;
    tmpl.body = std::move(body);
    tmpl.required_vars = scan_placeholders(id, tmpl.body);

    const PlaceholderSpec& spec = placeholder_spec(id);
    for (const std::string& name : tmpl.required_vars)
      if (!spec.allowed.count(name))
        throw PlaceholderMismatch(id, "placeholder {" + name + "} not allowed");
    for (const std::string& name : spec.required)
      if (!tmpl.required_vars.count(name))
        throw PlaceholderMismatch(id, "placeholder {" + name + "} required but absent");

    set.templates_.emplace(id, std::move(tmpl));
  }
  return set;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw MissingTemplate(id, "not loaded");
  return it->second;
}

RenderedPrompt render(const PromptTemplate& tmpl,
                      const std::map<std::string, std::string>& bindings) {
  for (const std::string& name : tmpl.required_vars)
    if (!bindings.count(name)) throw MissingBinding(name);

  std::string out;
  out.reserve(tmpl.body.size());
  const std::string_view body = tmpl.body;
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        out.push_back('{');
        i += 2;
        continue;
      }
      std::size_t end = i + 1;
      while (end < body.size() && is_placeholder_char(body[end])) ++end;
      // load() guarantees well-formed placeholders
      std::string name(body.substr(i + 1, end - i - 1));
      out += bindings.at(name);
      i = end + 1;
    } else if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      out.push_back('}');
      i += 2;
    } else {
      out.push_back(c);
      ++i;
    }
  }

  nlohmann::json substituted = nlohmann::json::object();
  for (const std::string& name : tmpl.required_vars) substituted[name] = bindings.at(name);

  RenderedPrompt rendered;
  rendered.template_id = tmpl.id;
  rendered.text = std::move(out);
  rendered.bindings_digest = canonical_json_digest(substituted);
  return rendered;
}

}  // namespace capreason::prompts
