#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "capreason/http_backend.hpp"
#include "support/fixtures.hpp"

using namespace capreason;
using namespace capreason::backend;
using testsupport::make_problem;

namespace {

CompletionRequest multimodal_request(const std::string& provider, const std::string& model_id) {
  auto p = make_problem("p1");
  CompletionRequest req;
  req.model.provider = provider;
  req.model.model_id = model_id;
  ChatMessage msg = user_message("describe the figure");
  msg.parts.push_back(image_part_from_ref(*p.image));
  req.messages = {msg};
  return req;
}

// Serves scripted handlers on a loopback port for adapter round-trips.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(httplib::Server&)> configure) {
    configure(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this]() { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("openai request bodies follow the chat-completions shape") {
  auto req = multimodal_request("openai", "o3-2025-04-16");
  auto body = OpenAiBackend::build_request_body(req);

  CHECK(body.at("model") == "o3-2025-04-16");
  const auto& message = body.at("messages").at(0);
  CHECK(message.at("role") == "user");
  const auto& content = message.at("content");
  REQUIRE(content.is_array());
  CHECK(content.at(0).at("type") == "text");
  CHECK(content.at(0).at("text") == "describe the figure");
  CHECK(content.at(1).at("type") == "image_url");
  const std::string url = content.at(1).at("image_url").at("url").get<std::string>();
  CHECK(url.rfind("data:image/png;base64,", 0) == 0);

  SUBCASE("default parameters add no sampling fields") {
    CHECK_FALSE(body.contains("temperature"));
    CHECK_FALSE(body.contains("top_p"));
    CHECK(body.size() == 2);  // model + messages only
  }

  SUBCASE("explicit params pass through top-level") {
    req.model.params["temperature"] = 0.2;
    auto with_params = OpenAiBackend::build_request_body(req);
    CHECK(with_params.at("temperature") == 0.2);
  }

  SUBCASE("text-only user content collapses to a plain string") {
    CompletionRequest plain;
    plain.model = req.model;
    plain.messages = {user_message("hi")};
    auto simple = OpenAiBackend::build_request_body(plain);
    CHECK(simple.at("messages").at(0).at("content") == "hi");
  }
}

TEST_CASE("gemini request bodies follow the generateContent shape") {
  auto req = multimodal_request("gemini", "gemini-2.5-pro");
  auto body = GeminiBackend::build_request_body(req);

  CHECK(GeminiBackend::request_path(req) == "/v1beta/models/gemini-2.5-pro:generateContent");
  const auto& content = body.at("contents").at(0);
  CHECK(content.at("role") == "user");
  CHECK(content.at("parts").at(0).at("text") == "describe the figure");
  const auto& inline_data = content.at("parts").at(1).at("inline_data");
  CHECK(inline_data.at("mime_type") == "image/png");
  CHECK(inline_data.at("data").get<std::string>().size() > 0);
  CHECK_FALSE(body.contains("generationConfig"));

  SUBCASE("system messages become systemInstruction") {
    ChatMessage sys;
    sys.role = Role::System;
    sys.parts = {TextPart{"be terse"}};
    req.messages.insert(req.messages.begin(), sys);
    auto with_system = GeminiBackend::build_request_body(req);
    CHECK(with_system.at("systemInstruction").at("parts").at(0).at("text") == "be terse");
    CHECK(with_system.at("contents").size() == 1);
  }

  SUBCASE("assistant turns map to role model") {
    ChatMessage assistant;
    assistant.role = Role::Assistant;
    assistant.parts = {TextPart{"earlier reply"}};
    req.messages.push_back(assistant);
    auto with_turn = GeminiBackend::build_request_body(req);
    CHECK(with_turn.at("contents").at(1).at("role") == "model");
  }
}

TEST_CASE("openai responses parse text and usage") {
  nlohmann::json body = {
      {"choices", {{{"message", {{"role", "assistant"}, {"content", "ANSWER: 5 kg"}}}}}},
      {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 7}}}};
  auto reply = OpenAiBackend::parse_response_body(body);
  CHECK(reply.text == "ANSWER: 5 kg");
  CHECK(reply.usage.prompt_units == 12);
  CHECK(reply.usage.completion_units == 7);
}

TEST_CASE("gemini responses concatenate candidate parts") {
  nlohmann::json body = {
      {"candidates",
       {{{"content", {{"parts", {{{"text", "AB"}}, {{"text", "CD"}}}}}}}}},
      {"usageMetadata", {{"promptTokenCount", 3}, {"candidatesTokenCount", 4}}}};
  auto reply = GeminiBackend::parse_response_body(body);
  CHECK(reply.text == "ABCD");
  CHECK(reply.usage.prompt_units == 3);
  CHECK(reply.usage.completion_units == 4);
}

TEST_CASE("openai adapter round-trips against a local server") {
  nlohmann::json seen_body;
  std::string seen_auth;
  LocalServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request& r, httplib::Response& res) {
      seen_body = nlohmann::json::parse(r.body);
      seen_auth = r.get_header_value("Authorization");
      nlohmann::json reply = {
          {"choices", {{{"message", {{"content", "pong"}}}}}},
          {"usage", {{"prompt_tokens", 1}, {"completion_tokens", 2}}}};
      res.set_content(reply.dump(), "application/json");
    });
  });

  HttpOptions options{server.base_url(), "sk-test", 5};
  OpenAiBackend backend(options);
  auto req = multimodal_request("openai", "o3-2025-04-16");
  auto reply = backend.complete(req);

  CHECK(reply.text == "pong");
  CHECK(seen_auth == "Bearer sk-test");
  CHECK(seen_body.at("model") == "o3-2025-04-16");
  CHECK(seen_body.at("messages").at(0).at("content").at(1).at("type") == "image_url");
}

TEST_CASE("gemini adapter round-trips against a local server") {
  std::string seen_key;
  std::string seen_path;
  LocalServer server([&](httplib::Server& s) {
    s.Post(R"(/v1beta/models/.*)", [&](const httplib::Request& r, httplib::Response& res) {
      seen_key = r.get_header_value("x-goog-api-key");
      seen_path = r.path;
      nlohmann::json reply = {
          {"candidates", {{{"content", {{"parts", {{{"text", "gemini pong"}}}}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
  });

  HttpOptions options{server.base_url(), "g-test", 5};
  GeminiBackend backend(options);
  auto reply = backend.complete(multimodal_request("gemini", "gemini-2.5-pro"));

  CHECK(reply.text == "gemini pong");
  CHECK(seen_key == "g-test");
  CHECK(seen_path == "/v1beta/models/gemini-2.5-pro:generateContent");
}

TEST_CASE("http status classification drives retry behavior") {
  CHECK(is_transient_status(408));
  CHECK(is_transient_status(429));
  CHECK(is_transient_status(500));
  CHECK(is_transient_status(503));
  CHECK_FALSE(is_transient_status(400));
  CHECK_FALSE(is_transient_status(401));
  CHECK_FALSE(is_transient_status(404));

  std::atomic<int> hits{0};
  LocalServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      if (hits.fetch_add(1) < 2) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
        return;
      }
      nlohmann::json reply = {{"choices", {{{"message", {{"content", "recovered"}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
  });

  auto registry = std::make_shared<BackendRegistry>();
  registry->add("openai",
                std::make_shared<OpenAiBackend>(HttpOptions{server.base_url(), "k", 5}));
  testsupport::TempDir dir;
  auto store = std::make_shared<RecordStore>(dir / "records");
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.base_delay = std::chrono::milliseconds(1);
  Gateway gateway(registry, store, policy);

  CompletionRequest req;
  req.model.provider = "openai";
  req.model.model_id = "o3-2025-04-16";
  req.messages = {user_message("ping")};

  auto result = gateway.complete(req);
  CHECK(result.text == "recovered");
  CHECK(hits.load() == 3);
  CHECK(result.source == ResultSource::Live);
}

TEST_CASE("4xx responses surface as permanent rejections without retries") {
  std::atomic<int> hits{0};
  LocalServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      hits.fetch_add(1);
      res.status = 400;
      res.set_content("{\"error\":\"bad request\"}", "application/json");
    });
  });

  OpenAiBackend backend(HttpOptions{server.base_url(), "k", 5});
  CompletionRequest req;
  req.model.provider = "openai";
  req.model.model_id = "m";
  req.messages = {user_message("ping")};
  CHECK_THROWS_AS(backend.complete(req), PermanentRejection);
  CHECK(hits.load() == 1);
}
