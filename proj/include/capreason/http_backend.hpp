#pragma once

#include <string>

#include <json.hpp>

#include "capreason/backend.hpp"

namespace capreason::backend {

struct HttpOptions {
  std::string base_url;  // scheme://host[:port]
  std::string api_key;
  int timeout_s = 300;
};

// Shared status classification: 408/409/429/5xx and transport faults are
// transient, any other non-2xx is a permanent rejection.
bool is_transient_status(int status);

// OpenAI-compatible chat completions: POST /v1/chat/completions with a
// messages array whose user content carries text / image_url parts (base64
// data URIs).
class OpenAiBackend : public ChatBackend {
 public:
  explicit OpenAiBackend(HttpOptions options);

  static nlohmann::json build_request_body(const CompletionRequest& req);
  static BackendReply parse_response_body(const nlohmann::json& body);

  BackendReply complete(const CompletionRequest& req) override;

 private:
  HttpOptions options_;
};

// Gemini-compatible generateContent: POST
// /v1beta/models/<model>:generateContent with contents[].parts of text /
// inline_data, assistant turns mapped to role "model".
class GeminiBackend : public ChatBackend {
 public:
  explicit GeminiBackend(HttpOptions options);

  static nlohmann::json build_request_body(const CompletionRequest& req);
  static BackendReply parse_response_body(const nlohmann::json& body);
  static std::string request_path(const CompletionRequest& req);

  BackendReply complete(const CompletionRequest& req) override;

 private:
  HttpOptions options_;
};

}  // namespace capreason::backend
