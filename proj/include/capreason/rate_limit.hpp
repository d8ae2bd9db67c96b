#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>

namespace capreason::backend {

struct RateLimit {
  int capacity = 1;           // max in-flight permits and bucket size
  double refill_per_sec = 1;  // token refill rate
};

// Token bucket combined with an in-flight cap: a permit consumes one bucket
// token (refilled by time) and one concurrency slot (returned on release).
class RateLimiter {
 public:
  explicit RateLimiter(RateLimit limit);

  RateLimiter(const RateLimiter&) = delete;
  RateLimiter& operator=(const RateLimiter&) = delete;

  class Permit {
   public:
    Permit() = default;
    explicit Permit(RateLimiter* owner) : owner_(owner) {}
    Permit(Permit&& other) noexcept : owner_(other.owner_) { other.owner_ = nullptr; }
    Permit& operator=(Permit&& other) noexcept;
    ~Permit();

   private:
    RateLimiter* owner_ = nullptr;
  };

  Permit acquire();  // blocks until a token and a slot are available
  int in_flight() const;

 private:
  void release();
  void refill_locked(std::chrono::steady_clock::time_point now);

  RateLimit limit_;
  double tokens_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point last_refill_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace capreason::backend
