#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace ragsynth::concurrency {

/// Caps concurrent in-flight calls and, optionally, the start rate per second.
class Throttle {
 public:
  Throttle(std::size_t max_in_flight = 0, double requests_per_second = 0.0)
      : max_in_flight_(max_in_flight), rps_(requests_per_second) {}

  Throttle(const Throttle&) = delete;
  Throttle& operator=(const Throttle&) = delete;

  class Permit {
   public:
    explicit Permit(Throttle& t) : t_(&t) { t_->acquire(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit() { t_->release(); }

   private:
    Throttle* t_;
  };

  Permit permit() { return Permit(*this); }

  std::size_t max_in_flight() const noexcept { return max_in_flight_; }
  std::size_t peak_in_flight() const noexcept { return peak_.load(); }

 private:
  void acquire() {
    std::unique_lock lock(mu_);
    if (max_in_flight_ > 0) {
      cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    }
    ++in_flight_;
    peak_ = std::max(peak_.load(), in_flight_);
    if (rps_ > 0.0) {
      const auto spacing = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / rps_));
      const auto now = std::chrono::steady_clock::now();
      const auto slot = std::max(now, next_start_);
      next_start_ = slot + spacing;
      lock.unlock();
      std::this_thread::sleep_until(slot);
    }
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  std::size_t max_in_flight_;
  double rps_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::atomic<std::size_t> peak_{0};
  std::chrono::steady_clock::time_point next_start_{};
};

/// Applies `fn(i)` for i in [0, n) on up to `workers` threads. Results keep index order;
/// the first exception (lowest index) is rethrown after all workers finish.
template <class Fn>
auto ordered_map(std::size_t n, std::size_t workers, Fn fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = cursor++; i < n; i = cursor++) {
          try {
            slots[i].emplace(fn(i));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace ragsynth::concurrency
