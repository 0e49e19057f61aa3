#include "probekit/parallel.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace probekit {
namespace {

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t n : {0u, 1u, 7u, 1000u}) {
    std::vector<std::atomic<int>> hits(n);
    parallel_for(n, [&](std::size_t i) { hits[i]++; });
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(hits[i].load(), 1) << i;
  }
}

TEST(ParallelFor, RethrowsAfterAllTasksRun) {
  std::atomic<int> done{0};
  EXPECT_THROW(parallel_for(50,
                            [&](std::size_t i) {
                              ++done;
                              if (i % 10 == 3) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_EQ(done.load(), 50);
}

TEST(WorkerCount, HonoursEnvironment) {
  const char* old = std::getenv("PROBEKIT_THREADS");
  const std::string saved = old ? old : "";
  setenv("PROBEKIT_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  setenv("PROBEKIT_THREADS", "zero", 1);
  EXPECT_GE(worker_count(), 1u);
  setenv("PROBEKIT_THREADS", "-2", 1);
  EXPECT_GE(worker_count(), 1u);
  if (old) {
    setenv("PROBEKIT_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("PROBEKIT_THREADS");
  }
}

}  // namespace
}  // namespace probekit
