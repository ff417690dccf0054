#include "tir/concurrency.hpp"

#include <algorithm>

namespace tir {

ThreadPool::ThreadPool(std::size_t threads) {
  threads = std::max<std::size_t>(threads, 1);
  workers_.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) workers_.emplace_back([this] { run(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::enqueue(std::function<void()> job) {
  {
    std::lock_guard lock(mu_);
    jobs_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void ThreadPool::run() {
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    job();
  }
}

InflightLimiter::InflightLimiter(std::size_t max_inflight, std::chrono::milliseconds min_interval)
    : max_inflight_(std::max<std::size_t>(max_inflight, 1)), min_interval_(min_interval) {}

void InflightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return inflight_ < max_inflight_; });
  ++inflight_;
  peak_ = std::max(peak_, inflight_);
  if (min_interval_.count() > 0) {
    const auto now = std::chrono::steady_clock::now();
    const auto slot = std::max(now, next_admission_);
    next_admission_ = slot + min_interval_;
    if (slot > now) {
      lock.unlock();
      std::this_thread::sleep_until(slot);
    }
  }
}

void InflightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --inflight_;
  }
  cv_.notify_one();
}

std::size_t InflightLimiter::peak_inflight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

void EventLog::record(std::string event) {
  std::lock_guard lock(mu_);
  events_.push_back(std::move(event));
}

std::vector<std::string> EventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

}  // namespace tir
