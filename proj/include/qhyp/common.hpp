#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qhyp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr const char* kVersion = "0.3.1";

// Error categories map one-to-one onto CLI exit codes and C API status codes.
enum class ErrorKind { Input = 2, Precondition = 3, InternalCheck = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

class InternalCheckError : public Error {
 public:
  explicit InternalCheckError(const std::string& what) : Error(ErrorKind::InternalCheck, what) {}
};

/// Numerical knobs shared by every module. Defaults are the documented
/// toolkit tolerances; the CLI can override them with `--tol NAME=VALUE`.
struct Settings {
  double tol_ray = 1e-10;        // relative to body diameter
  double tol_opt = 1e-6;         // relative improvement for frame ascent
  int restarts = 32;             // random restarts of the frame optimizer
  int theta_grid = 64;           // complex line search grid
  int sphere_samples_per_k = 256;
  int quad_order = 4;            // Gauss-Legendre points per panel
  double quad_tol = 1e-5;        // adaptive panel acceptance (relative)
  double dist_tol = 1e-4;        // relative improvement per refinement round
  int max_vertices = 65;
  std::uint64_t seed = 20240611;
  int workers = 1;

  /// Applies `name=value`; throws InputError for unknown names.
  void set(const std::string& name, double value);
};

struct Bracket {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots so that the outcome does not depend on the
/// worker count.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int w = std::min(workers, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  pool.reserve(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vec unit(int n, int i) {
  Vec v = Vec::Zero(n);
  v(i) = 1.0;
  return v;
}

}  // namespace qhyp
