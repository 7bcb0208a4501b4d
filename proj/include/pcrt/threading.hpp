// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pcrt {

/// Persistent worker pool. parallel_for hands out [begin, end) chunks through an
/// atomic cursor, so the partition of work is independent of scheduling; callers
/// that need deterministic output write to index-addressed slots.
class ThreadPool {
public:
  explicit ThreadPool(unsigned thread_count = 0) {
    if (thread_count == 0) thread_count = std::thread::hardware_concurrency();
    if (thread_count == 0) thread_count = 1;
    for (unsigned i = 0; i + 1 < thread_count; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  unsigned thread_count() const { return static_cast<unsigned>(workers_.size()) + 1; }

  /// Runs fn(begin, end) over a partition of [0, n). Blocks until done.
  void parallel_for(std::size_t n, std::size_t grain,
                    const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (grain == 0) grain = 1;
    if (workers_.empty() || n <= grain) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      job_fn_ = &fn;
      job_n_ = n;
      job_grain_ = grain;
      next_.store(0, std::memory_order_relaxed);
      pending_.store(static_cast<int>(workers_.size()), std::memory_order_relaxed);
      ++epoch_;
    }
    cv_.notify_all();
    run_chunks(fn, n, grain);
    std::unique_lock<std::mutex> lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_.load(std::memory_order_acquire) == 0; });
    job_fn_ = nullptr;
  }

private:
  void run_chunks(const std::function<void(std::size_t, std::size_t)>& fn, std::size_t n,
                  std::size_t grain) {
    for (;;) {
      const std::size_t begin = next_.fetch_add(grain, std::memory_order_relaxed);
      if (begin >= n) break;
      fn(begin, std::min(begin + grain, n));
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
      std::size_t n = 0, grain = 0;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || epoch_ != seen; });
        if (stop_) return;
        seen = epoch_;
        fn = job_fn_;
        n = job_n_;
        grain = job_grain_;
      }
      if (fn) run_chunks(*fn, n, grain);
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lock(mutex_);
        done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0, job_grain_ = 0;
  std::uint64_t epoch_ = 0;
  std::atomic<std::size_t> next_{0};
  std::atomic<int> pending_{0};
  bool stop_ = false;
};

} // namespace pcrt
