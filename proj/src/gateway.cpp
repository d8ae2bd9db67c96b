#include "capreason/gateway.hpp"

#include <thread>

#include "capreason/util.hpp"

namespace capreason::backend {

Gateway::Gateway(std::shared_ptr<BackendRegistry> registry, std::shared_ptr<RecordStore> store,
                 RetryPolicy default_policy, GatewayMode mode)
    : registry_(std::move(registry)),
      store_(std::move(store)),
      default_policy_(default_policy),
      mode_(mode) {}

void Gateway::set_rate_limit(const std::string& provider, RateLimit limit) {
  limiters_[provider] = std::make_unique<RateLimiter>(limit);
}

CompletionResult Gateway::complete(const CompletionRequest& req) {
  return complete(req, default_policy_);
}

CompletionResult Gateway::complete(const CompletionRequest& req, const RetryPolicy& policy) {
  RateLimiter* limiter = nullptr;
  if (auto it = limiters_.find(req.model.provider); it != limiters_.end())
    limiter = it->second.get();

  const auto start = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    try {
      BackendReply reply;
      {
        RateLimiter::Permit permit;
        if (limiter != nullptr) permit = limiter->acquire();
        reply = registry_->dispatch(req);
      }
      StoredRecord record;
      record.request_canonical = canonical_request_json(req);
      record.result_text = reply.text;
      record.usage = reply.usage;
      record.recorded_at = iso8601_utc_now();
      record.model_spec = domain::to_json(req.model);
      store_->append(cache_key(req), record);

      CompletionResult result;
      result.text = reply.text;
      result.usage = reply.usage;
      result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      result.source = registry_->lookup(req.model.provider).source_kind();
      return result;
    } catch (const TransientBackendError& e) {
      last_error = e.what();
      if (attempt == policy.max_attempts) break;
      std::chrono::milliseconds delay;
      {
        std::lock_guard<std::mutex> lock(rng_mu_);
        delay = retry_delay(policy, attempt, rng_);
      }
      std::this_thread::sleep_for(delay);
    }
    // PermanentRejection and BackendUnregistered propagate untouched.
  }
  throw ExhaustedRetries(policy.max_attempts, last_error);
}

CompletionResult Gateway::replay(const CompletionRequest& req) {
  const std::string key = cache_key(req);
  auto record = store_->load(key);
  if (!record) throw MissingRecording(key);
  CompletionResult result;
  result.text = record->result_text;
  result.usage = record->usage;
  result.latency = std::chrono::milliseconds(0);
  result.source = ResultSource::Replay;
  return result;
}

CompletionResult Gateway::invoke(const CompletionRequest& req) {
  if (mode_ == GatewayMode::ReplayOnly) return replay(req);
  if (store_->contains(cache_key(req))) return replay(req);
  return complete(req);
}

}  // namespace capreason::backend
