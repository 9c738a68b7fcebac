#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

namespace ust3d {

/// Cooperative stop signal shared by a run: set `cancel` (e.g. from a
/// signal handler) or give a deadline.
struct RunControl {
  const std::atomic<bool>* cancel = nullptr;
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();

  bool should_stop() const {
    if (cancel && cancel->load(std::memory_order_relaxed)) return true;
    return std::chrono::steady_clock::now() >= deadline;
  }
};

struct ReplicaStatus {
  std::int64_t completed = 0;
  bool stopped_early = false;
};

/// Runs replicas 0..reps-1 on `workers` threads. `fn(r, acc)` adds replica
/// r's contribution to a worker-local accumulator; accumulators are merged
/// with `Acc::merge`, which must be commutative and associative so the result
/// does not depend on scheduling.
template <typename Acc, typename Fn>
ReplicaStatus run_replicas(std::int64_t reps, int workers, Acc& total, Fn&& fn,
                           const RunControl& control = {}) {
  if (workers < 1) workers = 1;
  std::atomic<std::int64_t> next{0};
  std::atomic<std::int64_t> done{0};
  std::atomic<bool> stopped{false};
  std::vector<Acc> partial(static_cast<std::size_t>(workers), total);
  auto work = [&](std::size_t w) {
    while (true) {
      if (control.should_stop()) {
        stopped = true;
        return;
      }
      const std::int64_t r = next.fetch_add(1);
      if (r >= reps) return;
      fn(r, partial[w]);
      done.fetch_add(1);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, static_cast<std::size_t>(w));
    for (auto& t : pool) t.join();
  }
  for (auto& p : partial) total.merge(p);
  return {done.load(), stopped.load()};
}

}  // namespace ust3d
