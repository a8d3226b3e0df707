#include "dyntex/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace dyntex {

int thread_budget() {
  int budget = static_cast<int>(std::thread::hardware_concurrency());
  if (budget < 1) budget = 1;
  if (const char* cap = std::getenv("DYNTEX_THREADS")) {
    try {
      int requested = std::stoi(cap);
      if (requested >= 1) budget = std::min(budget, requested);
    } catch (const std::exception&) {
      // unparseable cap is ignored
    }
  }
  return budget;
}

void parallel_index_for(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_budget(), count);
  if (workers <= 1 || count < 64) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

} // namespace dyntex
