#pragma once

#include <memory>
#include <mutex>
#include <utility>

namespace vtgrasp {

/// Single-slot mailbox holding the most recent value from a producer.
/// publish() replaces the slot; latest() returns a shared immutable snapshot
/// without waiting for the producer.
template <typename T>
class LatestSnapshot {
 public:
  void publish(T value) {
    auto next = std::make_shared<const T>(std::move(value));
    std::lock_guard lock(mutex_);
    value_ = std::move(next);
    ++version_;
  }

  std::shared_ptr<const T> latest() const {
    std::lock_guard lock(mutex_);
    return value_;
  }

  unsigned long long version() const {
    std::lock_guard lock(mutex_);
    return version_;
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const T> value_;
  unsigned long long version_ = 0;
};

}  // namespace vtgrasp
