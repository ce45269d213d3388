#include "gdhm/common.hpp"

#include <iomanip>
#include <sstream>

namespace gdhm {

std::string Rng::serialize() const {
  std::ostringstream os;
  os << gen_ << " " << (have_spare_ ? 1 : 0) << " " << std::setprecision(17) << spare_;
  return os.str();
}

void Rng::deserialize(const std::string& s) {
  std::istringstream is(s);
  int flag = 0;
  is >> gen_ >> flag >> spare_;
  if (!is) throw data_error("rng: malformed serialized state");
  have_spare_ = flag != 0;
}

namespace {
int g_worker_threads = 2;
}

int worker_threads() { return g_worker_threads; }

void set_worker_threads(int n) { g_worker_threads = n < 1 ? 1 : n; }

void parallel_for(int n, int num_threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  num_threads = std::min(num_threads, n);
  if (num_threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(num_threads);
  pool.reserve(num_threads);
  for (int t = 0; t < num_threads; ++t) {
    pool.emplace_back([=, &fn, &errors]() {
      // Contiguous blocks: thread t gets [t*chunk, min((t+1)*chunk, n)).
      const int chunk = (n + num_threads - 1) / num_threads;
      const int lo = t * chunk;
      const int hi = std::min(n, lo + chunk);
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gdhm
