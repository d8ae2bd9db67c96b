#pragma once

#include <map>
#include <memory>

#include "capreason/backend.hpp"
#include "capreason/rate_limit.hpp"
#include "capreason/record_store.hpp"

namespace capreason::backend {

enum class GatewayMode { Live, ReplayOnly };

// Single entry point for completions: retry + rate-limit policy around the
// registered backends, with every successful completion written to the
// record store before it is returned.
class Gateway {
 public:
  Gateway(std::shared_ptr<BackendRegistry> registry, std::shared_ptr<RecordStore> store,
          RetryPolicy default_policy = {}, GatewayMode mode = GatewayMode::Live);

  GatewayMode mode() const { return mode_; }
  BackendRegistry& registry() { return *registry_; }
  RecordStore& records() { return *store_; }

  void set_rate_limit(const std::string& provider, RateLimit limit);

  // Live path: retries transient faults per policy, never retries a
  // permanent rejection, records the completion before returning.
  CompletionResult complete(const CompletionRequest& req);
  CompletionResult complete(const CompletionRequest& req, const RetryPolicy& policy);

  // Pure store lookup; no network activity. Throws MissingRecording.
  CompletionResult replay(const CompletionRequest& req);

  // Mode-aware dispatch: ReplayOnly always replays; Live replays recorded
  // requests and goes live otherwise, which is what makes runs resumable.
  CompletionResult invoke(const CompletionRequest& req);

 private:
  std::shared_ptr<BackendRegistry> registry_;
  std::shared_ptr<RecordStore> store_;
  RetryPolicy default_policy_;
  GatewayMode mode_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_{0x9e3779b97f4a7c15ull};
};

}  // namespace capreason::backend
