#pragma once
// Shared small types, error hierarchy, and numeric-text helpers.

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace goaladapt {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Error categories map onto the CLI exit codes (config=2, solver=3, io=4).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& msg) : Error(msg) {}
};
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};
struct MeshError : Error {
  explicit MeshError(const std::string& msg) : Error(msg) {}
};

// %.17g round-trips every finite double exactly; all text output goes
// through here so reruns are byte-identical.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Worker cap for element loops. 0 or unset means "all cores"; results are
// independent of the value because accumulation order is fixed elsewhere.
inline int thread_limit() {
  const char* s = std::getenv("GOALADAPT_THREADS");
  if (!s || !*s) return 0;
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 0) throw ConfigError("GOALADAPT_THREADS must be a non-negative integer");
  return static_cast<int>(v);
}

// Run fn(i) for i in [0, n) on worker threads. Each index writes only its
// own output slot, so the caller's later sequential gather is bitwise
// reproducible regardless of the worker count.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = thread_limit();
  if (workers == 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
      int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace goaladapt
