#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>

#include "capreason/messages.hpp"

namespace capreason::backend {

// Retriable fault: timeouts, 5xx, connection resets.
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 4xx-class semantic rejection; never retried.
class PermanentRejection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendUnregistered : public std::runtime_error {
 public:
  explicit BackendUnregistered(const std::string& provider)
      : std::runtime_error("no backend registered for provider \"" + provider + "\""),
        provider(provider) {}
  std::string provider;
};

class ExhaustedRetries : public std::runtime_error {
 public:
  ExhaustedRetries(int attempts, const std::string& last_error)
      : std::runtime_error("exhausted " + std::to_string(attempts) +
                           " attempts; last error: " + last_error),
        attempts(attempts) {}
  int attempts;
};

class MissingRecording : public std::runtime_error {
 public:
  explicit MissingRecording(const std::string& key)
      : std::runtime_error("no recording for key " + key), key(key) {}
  std::string key;
};

class RecordConflict : public std::runtime_error {
 public:
  explicit RecordConflict(const std::string& key)
      : std::runtime_error("divergent re-record for key " + key), key(key) {}
  std::string key;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;       // >= 1
  double jitter_fraction = 0.0;  // [0, 1]
};

// Delay before retrying after `attempt` failures (attempt >= 1).
std::chrono::milliseconds retry_delay(const RetryPolicy& policy, int attempt,
                                      std::mt19937_64& rng);

struct BackendReply {
  std::string text;
  Usage usage;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply complete(const CompletionRequest& req) = 0;
  virtual ResultSource source_kind() const { return ResultSource::Live; }
};

class BackendRegistry {
 public:
  void add(const std::string& provider, std::shared_ptr<ChatBackend> backend);
  bool has(const std::string& provider) const;
  ChatBackend& lookup(const std::string& provider) const;  // throws BackendUnregistered

  // Forwards to the provider's backend; every call is counted, which lets
  // replay-only runs assert zero live dispatches.
  BackendReply dispatch(const CompletionRequest& req);
  long dispatch_count() const { return dispatches_.load(); }

 private:
  std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
  std::atomic<long> dispatches_{0};
};

// Deterministic test double. Scripted replies are keyed by
// (stage label, problem id); anything unscripted falls back to a pure
// transform of the request's cache key.
class MockBackend : public ChatBackend {
 public:
  void script(const std::string& stage_label, const std::string& problem_id, std::string reply);
  BackendReply complete(const CompletionRequest& req) override;
  ResultSource source_kind() const override { return ResultSource::Mock; }

  static std::string fallback_reply(const CompletionRequest& req);

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::string> scripted_;
};

Usage estimate_usage(const CompletionRequest& req, const std::string& reply);

}  // namespace capreason::backend
