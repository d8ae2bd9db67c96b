#include "capreason/rate_limit.hpp"

#include <algorithm>
#include <stdexcept>

namespace capreason::backend {

RateLimiter::Permit& RateLimiter::Permit::operator=(Permit&& other) noexcept {
  if (this != &other) {
    if (owner_ != nullptr) owner_->release();
    owner_ = other.owner_;
    other.owner_ = nullptr;
  }
  return *this;
}

RateLimiter::Permit::~Permit() {
  if (owner_ != nullptr) owner_->release();
}

RateLimiter::RateLimiter(RateLimit limit)
    : limit_(limit),
      tokens_(static_cast<double>(limit.capacity)),
      last_refill_(std::chrono::steady_clock::now()) {
  if (limit.capacity < 1) throw std::invalid_argument("rate limit capacity must be positive");
  if (limit.refill_per_sec <= 0) throw std::invalid_argument("refill rate must be positive");
}

void RateLimiter::refill_locked(std::chrono::steady_clock::time_point now) {
  std::chrono::duration<double> elapsed = now - last_refill_;
  last_refill_ = now;
  tokens_ = std::min(tokens_ + elapsed.count() * limit_.refill_per_sec,
                     static_cast<double>(limit_.capacity));
}

RateLimiter::Permit RateLimiter::acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    refill_locked(now);
    if (tokens_ >= 1.0 && in_flight_ < limit_.capacity) {
      tokens_ -= 1.0;
      ++in_flight_;
      return Permit(this);
    }
    if (tokens_ < 1.0) {
      auto wait = std::chrono::duration<double>((1.0 - tokens_) / limit_.refill_per_sec);
      cv_.wait_for(lock, std::chrono::duration_cast<std::chrono::milliseconds>(wait) +
                             std::chrono::milliseconds(1));
    } else {
      cv_.wait(lock);  // all slots busy; woken on release
    }
  }
}

void RateLimiter::release() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    --in_flight_;
  }
  cv_.notify_all();
}

int RateLimiter::in_flight() const {
  std::lock_guard<std::mutex> lock(mu_);
  return in_flight_;
}

}  // namespace capreason::backend
