#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "capreason/domain.hpp"

namespace capreason::backend {

struct TextPart {
  std::string text;
};

struct ImagePart {
  domain::MediaType media_type = domain::MediaType::Png;
  std::string base64_payload;  // standard base64, no line wrapping
  std::string bytes_digest;    // sha256 of the decoded bytes
};

using Part = std::variant<TextPart, ImagePart>;

// Encodes the referenced bytes; the part's digest is recomputed from them.
ImagePart image_part_from_ref(const domain::ImageRef& ref);

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::vector<Part> parts;
};

ChatMessage user_message(std::string text);

// Mock-scripting hooks; never contributes to the cache key.
struct RequestMeta {
  std::string problem_id;
  std::string stage_label;
};

struct CompletionRequest {
  domain::ModelSpec model;
  std::vector<ChatMessage> messages;
  RequestMeta meta;
};

std::vector<std::string> validate_request(const CompletionRequest& req);

// Canonical content serialization: image parts contribute their byte
// digest, never the base64 text, so re-encoding cannot change the key.
nlohmann::json canonical_request_json(const CompletionRequest& req);
std::string cache_key(const CompletionRequest& req);

struct Usage {
  std::int64_t prompt_units = 0;
  std::int64_t completion_units = 0;
};

enum class ResultSource { Live, Replay, Mock };

std::string_view to_string(ResultSource source);

struct CompletionResult {
  std::string text;
  Usage usage;
  std::chrono::milliseconds latency{0};
  ResultSource source = ResultSource::Live;
};

}  // namespace capreason::backend
