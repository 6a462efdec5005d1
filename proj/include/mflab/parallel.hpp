#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mflab {

// Fixed-size pool. parallel_for hands out task indices dynamically; callers
// keep per-task results and merge them in index order, so output never
// depends on the number of workers.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const { return static_cast<unsigned>(threads_.size()) + 1; }
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop();
  void run_tasks();

  std::vector<std::thread> threads_;
  std::mutex call_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t n_ = 0;
  std::size_t next_ = 0;
  std::size_t finished_ = 0;
  unsigned active_ = 0;
  unsigned long generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::size_t error_index_ = 0;
};

// Pool used when a caller passes none. Sized from MFLAB_WORKERS, else the
// hardware concurrency.
WorkerPool& default_pool();
void set_default_workers(unsigned workers);
unsigned default_workers();
// default_pool().parallel_for; nested calls run inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mflab
