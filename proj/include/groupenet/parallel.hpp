#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace groupenet {

// Runs fn(0..count-1) across up to `jobs` threads. Tasks must write only to
// their own slots so results are independent of scheduling; the first
// exception is rethrown on the calling thread.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::mutex mu;
  std::exception_ptr first_error;
  int next = 0;
  for (int t = 0; t < jobs; ++t) {
    threads.emplace_back([&]() {
      for (;;) {
        int task;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= count || first_error) return;
          task = next++;
        }
        try {
          fn(task);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace groupenet
