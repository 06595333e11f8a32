#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lyap {

// Runs body(trial) for trial in [0, n_trials). Callers write into per-trial
// slots and reduce in index order afterwards, so the schedule (and hence the
// worker count) cannot affect results.
inline void parallel_trials(int n_trials, int workers,
                            const std::function<void(int)>& body) {
  if (workers <= 1 || n_trials <= 1) {
    for (int t = 0; t < n_trials; ++t) body(t);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err = nullptr;
  std::mutex err_mutex;
  auto run = [&] {
    try {
      for (int t = next++; t < n_trials; t = next++) body(t);
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!err) err = std::current_exception();
    }
  };
  const int k = std::min(workers, n_trials);
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(k));
  for (int i = 0; i < k; ++i) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace lyap
