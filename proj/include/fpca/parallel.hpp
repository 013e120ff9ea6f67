#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <vector>

namespace fpca {

/// Runs body(i) for i in [0, n) on the task scheduler. Every index runs even if
/// some throw; afterwards the exception of the lowest failing index is rethrown,
/// so the observable outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Like parallel_for but returns the per-index exceptions instead of throwing.
std::vector<std::exception_ptr> parallel_for_collect(std::size_t n,
                                                     const std::function<void(std::size_t)>& body);

/// Caps worker threads for its lifetime. threads <= 0 leaves the default.
class ThreadLimit {
 public:
  explicit ThreadLimit(int threads);
  ~ThreadLimit();
  ThreadLimit(const ThreadLimit&) = delete;
  ThreadLimit& operator=(const ThreadLimit&) = delete;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int available_threads();

}  // namespace fpca
