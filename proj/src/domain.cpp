#include "capreason/domain.hpp"

#include <algorithm>

#include "capreason/util.hpp"

namespace capreason::domain {

std::string_view to_string(KnowledgeLevel level) {
  switch (level) {
    case KnowledgeLevel::Mid: return "Mid";
    case KnowledgeLevel::High: return "High";
    case KnowledgeLevel::BO: return "BO";
    case KnowledgeLevel::AO: return "AO";
    case KnowledgeLevel::UG: return "UG";
    case KnowledgeLevel::SUG: return "SUG";
    case KnowledgeLevel::MA: return "MA";
    case KnowledgeLevel::PhD: return "PhD";
  }
  return "?";
}

std::optional<KnowledgeLevel> parse_level(std::string_view label) {
  for (KnowledgeLevel level : kLevelOrder)
    if (label == to_string(level)) return level;
  return std::nullopt;
}

std::string_view to_string(VisionVariant variant) {
  return variant == VisionVariant::VisionOnly ? "vision_only" : "vision_intensive";
}

std::string_view display_name(VisionVariant variant) {
  return variant == VisionVariant::VisionOnly ? "Vision Only" : "Vision Intensive";
}

std::optional<VisionVariant> parse_vision_variant(std::string_view token) {
  if (token == "vision_only") return VisionVariant::VisionOnly;
  if (token == "vision_intensive") return VisionVariant::VisionIntensive;
  return std::nullopt;
}

std::string_view to_string(MediaType type) {
  return type == MediaType::Png ? "png" : "jpeg";
}

std::string_view mime_type(MediaType type) {
  return type == MediaType::Png ? "image/png" : "image/jpeg";
}

std::optional<MediaType> media_type_from_path(std::string_view path) {
  auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return std::nullopt;
  std::string ext = lower_copy(path.substr(dot + 1));
  if (ext == "png") return MediaType::Png;
  if (ext == "jpg" || ext == "jpeg") return MediaType::Jpeg;
  return std::nullopt;
}

ValidationResult validate_problem(const Problem& p) {
  ValidationResult result;
  if (trim_copy(p.id).empty()) result.violations.push_back("id empty");
  if (trim_copy(p.question).empty()) result.violations.push_back("question empty");
  if (trim_copy(p.ground_truth).empty()) result.violations.push_back("ground_truth empty");
  if (p.category) {
    if (trim_copy(*p.category).empty())
      result.violations.push_back("category empty");
    else if (has_upper_ascii(*p.category))
      result.violations.push_back("category not lowercase");
  }
  if (p.image && p.image->bytes_digest.empty())
    result.violations.push_back("image digest missing");
  return result;
}

std::string_view to_string(CaptionMode mode) {
  switch (mode) {
    case CaptionMode::Rephrase: return "Rephrase";
    case CaptionMode::Default: return "Default";
    case CaptionMode::Grounding: return "Grounding";
    case CaptionMode::Structured: return "Structured";
    case CaptionMode::MathVerse: return "MathVerse";
  }
  return "?";
}

std::optional<CaptionMode> parse_caption_mode(std::string_view name) {
  for (CaptionMode mode : {CaptionMode::Rephrase, CaptionMode::Default, CaptionMode::Grounding,
                           CaptionMode::Structured, CaptionMode::MathVerse})
    if (name == to_string(mode)) return mode;
  return std::nullopt;
}

bool operator==(const ModelSpec& a, const ModelSpec& b) {
  return a.provider == b.provider && a.model_id == b.model_id && a.params == b.params;
}

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"provider", spec.provider}, {"model_id", spec.model_id}, {"params", spec.params}};
}

ModelSpec model_spec_from_json(const nlohmann::json& value) {
  ModelSpec spec;
  spec.provider = value.at("provider").get<std::string>();
  spec.model_id = value.at("model_id").get<std::string>();
  if (value.contains("params") && !value.at("params").is_null())
    spec.params = value.at("params");
  if (!spec.params.is_object())
    throw std::invalid_argument("model spec params must be an object");
  return spec;
}

std::string canonical_model_digest(const ModelSpec& spec) {
  return canonical_json_digest(to_json(spec));
}

std::optional<ModelSpec> parse_model_ref(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 >= text.size())
    return std::nullopt;
  ModelSpec spec;
  spec.provider = std::string(text.substr(0, colon));
  spec.model_id = std::string(text.substr(colon + 1));
  return spec;
}

std::string_view to_string(StageTag tag) {
  switch (tag) {
    case StageTag::CaptionStage: return "CaptionStage";
    case StageTag::AnswerStage: return "AnswerStage";
    case StageTag::FormatStage: return "FormatStage";
    case StageTag::ReviewStage: return "ReviewStage";
    case StageTag::RouteDecision: return "RouteDecision";
  }
  return "?";
}

std::optional<StageTag> parse_stage_tag(std::string_view name) {
  for (StageTag tag : {StageTag::CaptionStage, StageTag::AnswerStage, StageTag::FormatStage,
                       StageTag::ReviewStage, StageTag::RouteDecision})
    if (name == to_string(tag)) return tag;
  return std::nullopt;
}

bool contains_marker(std::string_view raw, std::string_view marker) {
  return raw.find(marker) != std::string_view::npos;
}

std::string extract_final(std::string_view raw, std::string_view marker) {
  auto pos = raw.rfind(marker);
  if (pos == std::string_view::npos) return trim_copy(raw);
  return trim_copy(raw.substr(pos + marker.size()));
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::Correct ? "Correct" : "Incorrect";
}

}  // namespace capreason::domain
