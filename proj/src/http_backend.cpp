#include "capreason/http_backend.hpp"

#include <httplib.h>

namespace capreason::backend {

namespace {

std::string data_uri(const ImagePart& image) {
  return "data:" + std::string(domain::mime_type(image.media_type)) + ";base64," +
         image.base64_payload;
}

BackendReply post_json(const HttpOptions& options, const std::string& path,
                       const httplib::Headers& headers, const nlohmann::json& body,
                       BackendReply (*parse)(const nlohmann::json&)) {
  httplib::Client client(options.base_url);
  client.set_connection_timeout(options.timeout_s, 0);
  client.set_read_timeout(options.timeout_s, 0);
  client.set_write_timeout(options.timeout_s, 0);

  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result)
    throw TransientBackendError("transport error: " + httplib::to_string(result.error()));
  if (result->status < 200 || result->status >= 300) {
    const std::string detail =
        "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 512);
    if (is_transient_status(result->status)) throw TransientBackendError(detail);
    throw PermanentRejection(detail);
  }
  try {
    return parse(nlohmann::json::parse(result->body));
  } catch (const std::exception& e) {
    throw PermanentRejection(std::string("unparseable response body: ") + e.what());
  }
}

}  // namespace

bool is_transient_status(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

OpenAiBackend::OpenAiBackend(HttpOptions options) : options_(std::move(options)) {}

nlohmann::json OpenAiBackend::build_request_body(const CompletionRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  for (const ChatMessage& msg : req.messages) {
    nlohmann::json entry;
    entry["role"] = std::string(to_string(msg.role));
    if (msg.parts.size() == 1 && std::holds_alternative<TextPart>(msg.parts[0])) {
      entry["content"] = std::get<TextPart>(msg.parts[0]).text;
    } else {
      nlohmann::json content = nlohmann::json::array();
      for (const Part& part : msg.parts) {
        if (const auto* text = std::get_if<TextPart>(&part))
          content.push_back({{"type", "text"}, {"text", text->text}});
        else
          content.push_back({{"type", "image_url"},
                             {"image_url", {{"url", data_uri(std::get<ImagePart>(part))}}}});
      }
      entry["content"] = std::move(content);
    }
    messages.push_back(std::move(entry));
  }

  nlohmann::json body = {{"model", req.model.model_id}, {"messages", std::move(messages)}};
  // default parameters: sampling fields appear only when explicitly set
  for (const auto& [key, value] : req.model.params.items()) body[key] = value;
  return body;
}

BackendReply OpenAiBackend::parse_response_body(const nlohmann::json& body) {
  BackendReply reply;
  const auto& message = body.at("choices").at(0).at("message");
  if (message.contains("content") && !message.at("content").is_null())
    reply.text = message.at("content").get<std::string>();
  if (body.contains("usage")) {
    reply.usage.prompt_units = body.at("usage").value("prompt_tokens", 0);
    reply.usage.completion_units = body.at("usage").value("completion_tokens", 0);
  }
  return reply;
}

BackendReply OpenAiBackend::complete(const CompletionRequest& req) {
  const httplib::Headers headers = {{"Authorization", "Bearer " + options_.api_key}};
  return post_json(options_, "/v1/chat/completions", headers, build_request_body(req),
                   &parse_response_body);
}

GeminiBackend::GeminiBackend(HttpOptions options) : options_(std::move(options)) {}

nlohmann::json GeminiBackend::build_request_body(const CompletionRequest& req) {
  nlohmann::json body;
  nlohmann::json contents = nlohmann::json::array();
  for (const ChatMessage& msg : req.messages) {
    nlohmann::json parts = nlohmann::json::array();
    for (const Part& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part)) {
        parts.push_back({{"text", text->text}});
      } else {
        const auto& image = std::get<ImagePart>(part);
        parts.push_back({{"inline_data",
                          {{"mime_type", std::string(domain::mime_type(image.media_type))},
                           {"data", image.base64_payload}}}});
      }
    }
    if (msg.role == Role::System) {
      body["systemInstruction"] = {{"parts", std::move(parts)}};
      continue;
    }
    contents.push_back(
        {{"role", msg.role == Role::Assistant ? "model" : "user"}, {"parts", std::move(parts)}});
  }
  body["contents"] = std::move(contents);
  if (!req.model.params.empty()) body["generationConfig"] = req.model.params;
  return body;
}

BackendReply GeminiBackend::parse_response_body(const nlohmann::json& body) {
  BackendReply reply;
  const auto& parts = body.at("candidates").at(0).at("content").at("parts");
  for (const auto& part : parts)
    if (part.contains("text")) reply.text += part.at("text").get<std::string>();
  if (body.contains("usageMetadata")) {
    reply.usage.prompt_units = body.at("usageMetadata").value("promptTokenCount", 0);
    reply.usage.completion_units = body.at("usageMetadata").value("candidatesTokenCount", 0);
  }
  return reply;
}

std::string GeminiBackend::request_path(const CompletionRequest& req) {
  return "/v1beta/models/" + req.model.model_id + ":generateContent";
}

BackendReply GeminiBackend::complete(const CompletionRequest& req) {
  const httplib::Headers headers = {{"x-goog-api-key", options_.api_key}};
  return post_json(options_, request_path(req), headers, build_request_body(req),
                   &parse_response_body);
}

}  // namespace capreason::backend
