// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

namespace splatar {

/// Non-owning, non-allocating callable reference.
template <typename Signature>
class FunctionRef;

template <typename R, typename... Args>
class FunctionRef<R(Args...)> {
 public:
  template <typename F,
            typename = std::enable_if_t<!std::is_same_v<std::decay_t<F>, FunctionRef>>>
  FunctionRef(F&& f) noexcept  // NOLINT(google-explicit-constructor)
      : object_(const_cast<void*>(static_cast<const void*>(&f))),
        call_([](void* o, Args... args) -> R {
          return (*static_cast<std::remove_reference_t<F>*>(o))(std::forward<Args>(args)...);
        }) {}

  R operator()(Args... args) const { return call_(object_, std::forward<Args>(args)...); }

 private:
  void* object_;
  R (*call_)(void*, Args...);
};

/// Persistent worker pool. `run` blocks until every task index has been
/// processed; the calling thread participates. Dispatch never allocates.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  void run(std::size_t tasks, FunctionRef<void(std::size_t)> fn);

 private:
  void worker_loop();
  void drain();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::size_t generation_ = 0;
  bool stop_ = false;

  // State of the job in flight; guarded by mutex_ except next_ which is
  // claimed under the lock as well (tasks are coarse).
  const FunctionRef<void(std::size_t)>* job_ = nullptr;
  std::size_t tasks_ = 0;
  std::size_t next_ = 0;
  std::size_t finished_ = 0;
  int active_ = 0;
};

/// Default thread count: $SPLATAR_THREADS if set and positive, else the
/// hardware concurrency.
int default_thread_count();

/// Run fn(i) for i in [0, tasks). A null pool runs sequentially.
inline void parallel_for(ThreadPool* pool, std::size_t tasks, FunctionRef<void(std::size_t)> fn) {
  if (pool == nullptr || pool->size() == 1 || tasks <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  pool->run(tasks, fn);
}

}  // namespace splatar
