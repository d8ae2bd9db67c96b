#include "capreason/messages.hpp"

#include "capreason/util.hpp"

namespace capreason::backend {

ImagePart image_part_from_ref(const domain::ImageRef& ref) {
  if (!ref.bytes) throw std::invalid_argument("image ref carries no bytes: " + ref.path);
  ImagePart part;
  part.media_type = ref.media_type;
  part.base64_payload = base64_encode(*ref.bytes);
  part.bytes_digest = sha256_hex(*ref.bytes);
  return part;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "?";
}

ChatMessage user_message(std::string text) {
  ChatMessage msg;
  msg.role = Role::User;
  msg.parts.push_back(TextPart{std::move(text)});
  return msg;
}

std::vector<std::string> validate_request(const CompletionRequest& req) {
  std::vector<std::string> violations;
  if (req.model.provider.empty()) violations.push_back("model provider empty");
  if (req.model.model_id.empty()) violations.push_back("model id empty");
  bool has_user = false;
  for (const ChatMessage& msg : req.messages) {
    if (msg.parts.empty()) violations.push_back("message with no parts");
    if (msg.role == Role::User) has_user = true;
  }
  if (!has_user) violations.push_back("no user message");
  return violations;
}

nlohmann::json canonical_request_json(const CompletionRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  for (const ChatMessage& msg : req.messages) {
    nlohmann::json parts = nlohmann::json::array();
    for (const Part& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part)) {
        parts.push_back({{"text", text->text}});
      } else {
        const auto& image = std::get<ImagePart>(part);
        parts.push_back({{"image",
                          {{"media_type", std::string(domain::to_string(image.media_type))},
                           {"digest", image.bytes_digest}}}});
      }
    }
    messages.push_back({{"role", std::string(to_string(msg.role))}, {"parts", parts}});
  }
  return {{"model", domain::to_json(req.model)}, {"messages", messages}};
}

std::string cache_key(const CompletionRequest& req) {
  return canonical_json_digest(canonical_request_json(req));
}

std::string_view to_string(ResultSource source) {
  switch (source) {
    case ResultSource::Live: return "Live";
    case ResultSource::Replay: return "Replay";
    case ResultSource::Mock: return "Mock";
  }
  return "?";
}

}  // namespace capreason::backend
