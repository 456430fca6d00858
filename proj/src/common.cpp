#include "qhyp/common.hpp"

#include <cmath>

namespace qhyp {

void Settings::set(const std::string& name, double value) {
  auto as_count = [&](int lo) {
    if (value != std::floor(value) || value < lo)
      throw InputError("tolerance '" + name + "' must be an integer >= " + std::to_string(lo));
    return static_cast<int>(value);
  };
  auto positive = [&] {
    if (!(value > 0.0) || !std::isfinite(value))
      throw InputError("tolerance '" + name + "' must be positive");
    return value;
  };
  if (name == "tol_ray") tol_ray = positive();
  else if (name == "tol_opt") tol_opt = positive();
  else if (name == "quad_tol") quad_tol = positive();
  else if (name == "dist_tol") dist_tol = positive();
  else if (name == "restarts") restarts = as_count(0);
  else if (name == "theta_grid") theta_grid = as_count(4);
  else if (name == "sphere_samples_per_k") sphere_samples_per_k = as_count(8);
  else if (name == "quad_order") {
    quad_order = as_count(1);
    if (quad_order > 8) throw InputError("tolerance 'quad_order' must be <= 8");
  } else if (name == "max_vertices") max_vertices = as_count(3);
  else if (name == "workers") workers = as_count(1);
  else throw InputError("unknown tolerance '" + name + "'");
}

}  // namespace qhyp
