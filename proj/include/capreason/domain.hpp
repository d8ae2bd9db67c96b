#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace capreason::domain {

// Knowledge levels in presentation order: Middle School through PhD.
enum class KnowledgeLevel { Mid, High, BO, AO, UG, SUG, MA, PhD };

inline constexpr std::array<KnowledgeLevel, 8> kLevelOrder = {
    KnowledgeLevel::Mid, KnowledgeLevel::High, KnowledgeLevel::BO,
    KnowledgeLevel::AO,  KnowledgeLevel::UG,   KnowledgeLevel::SUG,
    KnowledgeLevel::MA,  KnowledgeLevel::PhD};

std::string_view to_string(KnowledgeLevel level);
std::optional<KnowledgeLevel> parse_level(std::string_view label);

enum class VisionVariant { VisionOnly, VisionIntensive };

std::string_view to_string(VisionVariant variant);             // parse token
std::string_view display_name(VisionVariant variant);          // report label
std::optional<VisionVariant> parse_vision_variant(std::string_view token);

enum class MediaType { Png, Jpeg };

std::string_view to_string(MediaType type);
std::string_view mime_type(MediaType type);
std::optional<MediaType> media_type_from_path(std::string_view path);

struct ImageRef {
  std::string path;
  MediaType media_type = MediaType::Png;
  std::string bytes_digest;
  std::shared_ptr<const std::vector<std::uint8_t>> bytes;
};

struct Problem {
  std::string id;
  std::string question;
  std::optional<ImageRef> image;
  std::string ground_truth;
  KnowledgeLevel level = KnowledgeLevel::Mid;
  std::optional<std::string> category;  // free-form, lowercase
  std::optional<VisionVariant> vision_variant;
};

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Reports violated invariants as data; never throws, never mutates.
ValidationResult validate_problem(const Problem& p);

enum class CaptionMode { Rephrase, Default, Grounding, Structured, MathVerse };

std::string_view to_string(CaptionMode mode);
std::optional<CaptionMode> parse_caption_mode(std::string_view name);

struct ModelSpec {
  std::string provider;
  std::string model_id;
  nlohmann::json params = nlohmann::json::object();  // sampling parameters
};

bool operator==(const ModelSpec& a, const ModelSpec& b);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& value);

// Deterministic digest; param map order never matters because the canonical
// serialization sorts keys.
std::string canonical_model_digest(const ModelSpec& spec);

// Parses "provider:model_id" references from CLI flags.
std::optional<ModelSpec> parse_model_ref(std::string_view text);

struct Caption {
  CaptionMode mode = CaptionMode::Default;
  std::string text;
  ModelSpec producer;
  std::string source_problem;
};

enum class StageTag { CaptionStage, AnswerStage, FormatStage, ReviewStage, RouteDecision };

std::string_view to_string(StageTag tag);
std::optional<StageTag> parse_stage_tag(std::string_view name);

struct Answer {
  std::string raw;    // model output verbatim
  std::string final;  // extracted final answer
  std::vector<StageTag> stage_history;
};

inline constexpr std::string_view kDefaultAnswerMarker = "ANSWER:";

bool contains_marker(std::string_view raw, std::string_view marker = kDefaultAnswerMarker);

// Substring after the last occurrence of the marker, trimmed; the trimmed
// raw text when no marker is present.
std::string extract_final(std::string_view raw, std::string_view marker = kDefaultAnswerMarker);

enum class Verdict { Correct, Incorrect };

std::string_view to_string(Verdict verdict);

struct JudgeVerdict {
  Verdict verdict = Verdict::Incorrect;
  std::optional<std::string> rationale;
};

}  // namespace capreason::domain
