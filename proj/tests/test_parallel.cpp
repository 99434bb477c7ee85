// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <vector>

#include "splatar/parallel.hpp"

using namespace splatar;

TEST(ThreadPool, EveryTaskRunsOnce) {
  ThreadPool pool(4);
  EXPECT_EQ(pool.size(), 4);
  for (std::size_t tasks : {0u, 1u, 3u, 100u, 1000u}) {
    std::vector<std::atomic<int>> hits(tasks);
    pool.run(tasks, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ThreadPool, ReusableAcrossManyJobs) {
  ThreadPool pool(3);
  std::atomic<long> sum{0};
  for (int job = 0; job < 500; ++job) pool.run(7, [&](std::size_t i) { sum += static_cast<long>(i); });
  EXPECT_EQ(sum.load(), 500L * 21);
}

TEST(ParallelFor, NullPoolSequential) {
  std::vector<std::size_t> order;
  parallel_for(nullptr, 5, [&](std::size_t i) { order.push_back(i); });
  EXPECT_EQ(order, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(DefaultThreadCount, ReadsEnvironment) {
  ::setenv("SPLATAR_THREADS", "3", 1);
  EXPECT_EQ(default_thread_count(), 3);
  ::setenv("SPLATAR_THREADS", "junk", 1);
  EXPECT_GE(default_thread_count(), 1);
  ::unsetenv("SPLATAR_THREADS");
  EXPECT_GE(default_thread_count(), 1);
}
