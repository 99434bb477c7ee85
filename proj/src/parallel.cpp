// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace splatar {

ThreadPool::ThreadPool(int threads) {
  const int extra = std::max(threads, 1) - 1;
  workers_.reserve(static_cast<std::size_t>(extra));
  for (int i = 0; i < extra; ++i) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::drain() {
  for (;;) {
    std::size_t index;
    const FunctionRef<void(std::size_t)>* job;
    {
      std::lock_guard lock(mutex_);
      if (next_ >= tasks_) return;
      index = next_++;
      job = job_;
    }
    (*job)(index);
    {
      std::lock_guard lock(mutex_);
      if (++finished_ == tasks_) done_.notify_all();
    }
  }
}

void ThreadPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      ++active_;
    }
    drain();
    {
      std::lock_guard lock(mutex_);
      if (--active_ == 0) done_.notify_all();
    }
  }
}

void ThreadPool::run(std::size_t tasks, FunctionRef<void(std::size_t)> fn) {
  {
    std::lock_guard lock(mutex_);
    job_ = &fn;
    tasks_ = tasks;
    next_ = 0;
    finished_ = 0;
    ++generation_;
  }
  wake_.notify_all();
  drain();
  std::unique_lock lock(mutex_);
  // Workers that woke late must leave drain() before `fn` goes out of scope.
  done_.wait(lock, [&] { return finished_ == tasks_ && active_ == 0; });
  job_ = nullptr;
  tasks_ = 0;
}

int default_thread_count() {
  if (const char* env = std::getenv("SPLATAR_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace splatar
