#include "mflab/parallel.hpp"

#include <cstdlib>
#include <memory>

namespace mflab {

namespace {
// Set while a thread executes a pool task; nested parallel_for calls then run
// inline instead of re-entering the pool.
thread_local bool t_in_task = false;

struct TaskScope {
  bool prev;
  TaskScope() : prev(t_in_task) { t_in_task = true; }
  ~TaskScope() { t_in_task = prev; }
};
}  // namespace

WorkerPool::WorkerPool(unsigned workers) {
  if (workers == 0) workers = 1;
  for (unsigned i = 1; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run_tasks() {
  for (;;) {
    std::size_t i;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (next_ >= n_) return;
      i = next_++;
    }
    try {
      TaskScope scope;
      (*job_)(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!error_ || i < error_index_) {
        error_ = std::current_exception();
        error_index_ = i;
      }
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++finished_;
    }
  }
}

void WorkerPool::worker_loop() {
  unsigned long seen = 0;
  for (;;) {
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      ++active_;
    }
    run_tasks();
    {
      std::lock_guard<std::mutex> lock(mu_);
      --active_;
    }
    done_cv_.notify_all();
  }
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads_.empty() || n == 1 || t_in_task) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::lock_guard<std::mutex> caller(call_mu_);
  {
    std::lock_guard<std::mutex> lock(mu_);
    job_ = &fn;
    n_ = n;
    next_ = 0;
    finished_ = 0;
    error_ = nullptr;
    ++generation_;
  }
  cv_.notify_all();
  run_tasks();
  std::exception_ptr err;
  {
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [&] { return finished_ == n_ && active_ == 0; });
    job_ = nullptr;
    err = error_;
  }
  if (err) std::rethrow_exception(err);
}

namespace {
std::mutex g_pool_mu;
std::unique_ptr<WorkerPool> g_pool;
unsigned g_workers = 0;

unsigned env_workers() {
  if (const char* s = std::getenv("MFLAB_WORKERS")) {
    int v = std::atoi(s);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}
}  // namespace

WorkerPool& default_pool() {
  std::lock_guard<std::mutex> lock(g_pool_mu);
  if (!g_pool) {
    if (g_workers == 0) g_workers = env_workers();
    g_pool = std::make_unique<WorkerPool>(g_workers);
  }
  return *g_pool;
}

void set_default_workers(unsigned workers) {
  std::lock_guard<std::mutex> lock(g_pool_mu);
  g_workers = workers ? workers : env_workers();
  g_pool = std::make_unique<WorkerPool>(g_workers);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  default_pool().parallel_for(n, fn);
}

unsigned default_workers() {
  std::lock_guard<std::mutex> lock(g_pool_mu);
  return g_workers ? g_workers : env_workers();
}

}  // namespace mflab
