#include "capreason/backend.hpp"

#include <algorithm>
#include <cmath>

#include "capreason/util.hpp"

namespace capreason::backend {

std::chrono::milliseconds retry_delay(const RetryPolicy& policy, int attempt,
                                      std::mt19937_64& rng) {
  double delay = static_cast<double>(policy.base_delay.count()) *
                 std::pow(std::max(policy.multiplier, 1.0), attempt - 1);
  if (policy.jitter_fraction > 0.0) {
    std::uniform_real_distribution<double> dist(-policy.jitter_fraction, policy.jitter_fraction);
    delay *= 1.0 + dist(rng);
  }
  return std::chrono::milliseconds(static_cast<long long>(std::max(delay, 0.0)));
}

void BackendRegistry::add(const std::string& provider, std::shared_ptr<ChatBackend> backend) {
  backends_[provider] = std::move(backend);
}

bool BackendRegistry::has(const std::string& provider) const {
  return backends_.count(provider) > 0;
}

ChatBackend& BackendRegistry::lookup(const std::string& provider) const {
  auto it = backends_.find(provider);
  if (it == backends_.end()) throw BackendUnregistered(provider);
  return *it->second;
}

BackendReply BackendRegistry::dispatch(const CompletionRequest& req) {
  ChatBackend& backend = lookup(req.model.provider);
  dispatches_.fetch_add(1);
  return backend.complete(req);
}

void MockBackend::script(const std::string& stage_label, const std::string& problem_id,
                         std::string reply) {
  std::lock_guard<std::mutex> lock(mu_);
  scripted_[{stage_label, problem_id}] = std::move(reply);
}

std::string MockBackend::fallback_reply(const CompletionRequest& req) {
  return "mock:" + cache_key(req).substr(0, 16);
}

BackendReply MockBackend::complete(const CompletionRequest& req) {
  std::string reply;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = scripted_.find({req.meta.stage_label, req.meta.problem_id});
    reply = it != scripted_.end() ? it->second : fallback_reply(req);
  }
  return {reply, estimate_usage(req, reply)};
}

Usage estimate_usage(const CompletionRequest& req, const std::string& reply) {
  Usage usage;
  for (const ChatMessage& msg : req.messages) {
    for (const Part& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part))
        usage.prompt_units += static_cast<std::int64_t>(text->text.size());
      else
        usage.prompt_units +=
            static_cast<std::int64_t>(std::get<ImagePart>(part).base64_payload.size());
    }
  }
  usage.completion_units = static_cast<std::int64_t>(reply.size());
  return usage;
}

}  // namespace capreason::backend
