#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace tir {

/// Fixed-size worker pool. Tasks are run in submission order by whichever
/// worker is free; the destructor drains the queue.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  template <typename F>
  auto submit(F&& fn) -> std::future<std::invoke_result_t<F>> {
    using R = std::invoke_result_t<F>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
    std::future<R> fut = task->get_future();
    enqueue([task] { (*task)(); });
    return fut;
  }

  [[nodiscard]] std::size_t size() const { return workers_.size(); }

 private:
  void enqueue(std::function<void()> job);
  void run();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Bounded in-flight admission with an optional minimum spacing between
/// consecutive admissions (a QPS ceiling).
class InflightLimiter {
 public:
  explicit InflightLimiter(std::size_t max_inflight,
                           std::chrono::milliseconds min_interval = std::chrono::milliseconds(0));

  void acquire();
  void release();

  [[nodiscard]] std::size_t max_inflight() const { return max_inflight_; }
  /// Highest concurrent admission count observed so far.
  [[nodiscard]] std::size_t peak_inflight() const;

  class Permit {
   public:
    explicit Permit(InflightLimiter& l) : limiter_(&l) { limiter_->acquire(); }
    ~Permit() {
      if (limiter_ != nullptr) limiter_->release();
    }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    InflightLimiter* limiter_;
  };

 private:
  std::size_t max_inflight_;
  std::chrono::milliseconds min_interval_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t inflight_ = 0;
  std::size_t peak_ = 0;
  std::chrono::steady_clock::time_point next_admission_{};
};

/// Thread-safe append-only log of named events; used to observe wave and
/// barrier ordering in tests.
class EventLog {
 public:
  void record(std::string event);
  [[nodiscard]] std::vector<std::string> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> events_;
};

}  // namespace tir
