#include "fpca/parallel.hpp"

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/info.h>
#include <tbb/parallel_for.h>

namespace fpca {

std::vector<std::exception_ptr> parallel_for_collect(std::size_t n,
                                                     const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  if (n == 0) return errors;
  if (n == 1) {
    try {
      body(0);
    } catch (...) {
      errors[0] = std::current_exception();
    }
    return errors;
  }
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1), [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  });
  return errors;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  for (auto& e : parallel_for_collect(n, body)) {
    if (e) std::rethrow_exception(e);
  }
}

struct ThreadLimit::Impl {
  std::unique_ptr<tbb::global_control> control;
};

ThreadLimit::ThreadLimit(int threads) : impl_(std::make_unique<Impl>()) {
  if (threads > 0) {
    impl_->control = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                           static_cast<std::size_t>(threads));
  }
}

ThreadLimit::~ThreadLimit() = default;

int available_threads() { return tbb::info::default_concurrency(); }

}  // namespace fpca
