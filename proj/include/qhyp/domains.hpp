#pragma once

#include "qhyp/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <variant>

namespace qhyp {

enum class Field { Real, Complex };

std::string to_string(Field f);

/// Multiplication by i on C^d written in real coordinates
/// (x_0, y_0, x_1, y_1, ...): (x_j, y_j) -> (-y_j, x_j).
Vec apply_J(const Vec& v);

// Halfspaces a_i . x < b_i, one per row of `normals`.
struct Polytope {
  Mat normals;
  Vec offsets;
};

// (x - c)^T M (x - c) < 1 with M symmetric positive definite.
struct Ellipsoid {
  Vec center;
  Mat matrix;
};

// || (x - c) / scale ||_p < 1.
struct PBall {
  double p = 2.0;
  double scale = 1.0;
  Vec center;
};

// { g < 0 } for a convex g. The bounding ball must contain the closure.
struct SublevelSet {
  std::function<double(const Vec&)> g;
  Vec bounding_center;
  double bounding_radius = 1.0;
  std::string label = "sublevel";
};

// { x_1 > 0 }. Unbounded; only closed-form operations accept it.
struct HalfSpace {};

using Shape = std::variant<Polytope, Ellipsoid, PBall, SublevelSet, HalfSpace>;

/// Ray with interior origin and unit direction.
struct Ray {
  Vec origin;
  Vec direction;
  Ray(Vec o, const Vec& d);
};

struct SliceResult {
  double value = kInf;  // +inf when the slice never leaves the body
  Vec direction;        // unit vector in span(frame) achieving the minimum
  bool exact = false;
};

struct ConvexityReport {
  int pairs_tested = 0;
  int violations = 0;
  double worst_excess = 0.0;
};

class ConvexBody {
 public:
  static ConvexBody polytope(Mat normals, Vec offsets, Vec base_point, Field field = Field::Real);
  static ConvexBody ellipsoid(Vec center, Mat matrix, Vec base_point, Field field = Field::Real);
  static ConvexBody ball(Vec center, double radius, Field field = Field::Real);
  static ConvexBody pball(double p, double scale, Vec center, Vec base_point,
                          Field field = Field::Real);
  static ConvexBody sublevel(SublevelSet set, Vec base_point, Field field = Field::Real);
  static ConvexBody halfspace(int real_dim, Vec base_point, Field field = Field::Real);

  /// Axis-aligned box (-h, h)^n centred at the origin.
  static ConvexBody cube(int real_dim, double half_width = 1.0);

  const Shape& shape() const { return shape_; }
  Field field() const { return field_; }
  int real_dim() const { return real_dim_; }
  /// Dimension over the scalar field (d for R^d, d for C^d = R^{2d}).
  int kdim() const { return field_ == Field::Real ? real_dim_ : real_dim_ / 2; }
  bool bounded() const { return !std::holds_alternative<HalfSpace>(shape_); }
  const Vec& base_point() const { return base_point_; }
  /// Euclidean diameter estimate used as the scale for relative tolerances.
  double scale() const { return scale_; }
  std::string kind() const;

  bool contains(const Vec& x) const;
  double ray_hit(const Ray& ray, const Settings& s = {}) const;
  double ray_hit(const Vec& origin, const Vec& dir, const Settings& s = {}) const;
  Bracket boundary_distance(const Vec& p, const Settings& s = {}) const;
  /// Distance from p to the boundary along the K-line through p spanned by v.
  Bracket line_distance(const Vec& p, const Vec& v, const Settings& s = {}) const;
  /// Distance from p to the boundary of the slice (p + span(frame)).
  SliceResult plane_slice_distance(const Vec& p, const Mat& frame, const Settings& s = {}) const;

  /// Boundary point hit by the ray from the base point in direction dir.
  Vec boundary_point(const Vec& dir, const Settings& s = {}) const;
  /// Unit outer normals of supporting hyperplanes at a boundary point
  /// (several at nonsmooth points of polytopes and l1/l-inf balls).
  std::vector<Vec> outer_normals(const Vec& x, const Settings& s = {}) const;
  /// True when x lies on the boundary within tol * scale.
  bool on_boundary(const Vec& x, double tol = 1e-8, const Settings& s = {}) const;

  /// Image under y = A x + b (A invertible). Base point is mapped too.
  ConvexBody transformed(const Mat& A, const Vec& b) const;

  /// Midpoint-convexity sampling for sublevel bodies; other variants are
  /// convex by construction and report zero pairs.
  ConvexityReport check_convexity(int pairs, std::uint64_t seed) const;

 private:
  ConvexBody(Shape shape, Vec base_point, Field field, int real_dim);
  void validate();
  double hit_closed_form(const Vec& p, const Vec& u, bool& ok) const;
  double hit_bisect(const Vec& p, const Vec& u, const Settings& s) const;
  bool slice_closed_form(const Vec& p, const Mat& frame, SliceResult& out) const;
  SliceResult slice_sampled(const Vec& p, const Mat& frame, const Settings& s) const;
  double real_line_distance(const Vec& p, const Vec& u, const Settings& s) const;

  Shape shape_;
  Vec base_point_;
  Field field_ = Field::Real;
  int real_dim_ = 0;
  double scale_ = 1.0;
};

/// Deterministic low-discrepancy directions on S^{m-1}: equispaced for m = 2,
/// Fibonacci lattice for m = 3, Halton-mapped Gaussians above.
std::vector<Vec> sphere_lattice(int m, int count);
/// Nominal covering angle of sphere_lattice(m, count).
double sphere_lattice_covering(int m, int count);

/// Orthonormal basis of span(columns) after Gram-Schmidt; columns with
/// negligible residual are dropped.
Mat orthonormalize(const Mat& columns, double drop_tol = 1e-12);

/// Lower bound on the distance from a boundary point of the ellipsoid
/// {w^T Q w + 2 g^T w + c < 0} to the origin, which must be interior. Exact up
/// to root-finding precision.
double ellipsoid_origin_distance(const Mat& Q, const Vec& g, double c);

}  // namespace qhyp
