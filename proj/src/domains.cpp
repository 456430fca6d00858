#include "qhyp/domains.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace qhyp {

namespace {

constexpr double kPi = 3.14159265358979323846;

double pnorm(const Vec& w, double p) {
  if (std::isinf(p)) return w.cwiseAbs().maxCoeff();
  if (p == 1.0) return w.cwiseAbs().sum();
  if (p == 2.0) return w.norm();
  double m = w.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) s += std::pow(std::abs(w(i)) / m, p);
  return m * std::pow(s, 1.0 / p);
}

// Faces of the l1 ball: s . w < scale for every sign vector s.
Mat l1_faces(int n) {
  const int count = 1 << n;
  Mat A(count, n);
  for (int m = 0; m < count; ++m)
    for (int i = 0; i < n; ++i) A(m, i) = (m >> i) & 1 ? -1.0 : 1.0;
  return A;
}

// Halfspace data (A x < b) for bodies with a polyhedral description.
bool polyhedral(const Shape& shape, int n, Mat& A, Vec& b) {
  if (auto* P = std::get_if<Polytope>(&shape)) {
    A = P->normals;
    b = P->offsets;
    return true;
  }
  if (auto* B = std::get_if<PBall>(&shape)) {
    if (std::isinf(B->p)) {
      A.resize(2 * n, n);
      b.resize(2 * n);
      A.setZero();
      for (int i = 0; i < n; ++i) {
        A(2 * i, i) = 1.0;
        b(2 * i) = B->scale + B->center(i);
        A(2 * i + 1, i) = -1.0;
        b(2 * i + 1) = B->scale - B->center(i);
      }
      return true;
    }
    if (B->p == 1.0 && n <= 16) {
      A = l1_faces(n);
      b = Vec::Constant(A.rows(), B->scale) + A * B->center;
      return true;
    }
    return false;
  }
  if (std::holds_alternative<HalfSpace>(shape)) {
    A = Mat::Zero(1, n);
    A(0, 0) = -1.0;
    b = Vec::Zero(1);
    return true;
  }
  return false;
}

// Nearest point w to the origin on {w^T Q w + 2 g^T w + c = 0}, with c < 0.
Vec ellipsoid_nearest(const Mat& Q, const Vec& g, double c) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  const Vec lam = es.eigenvalues();
  const Mat V = es.eigenvectors();
  const Vec gt = V.transpose() * g;
  const int m = static_cast<int>(lam.size());
  const double lmax = lam.maxCoeff();
  // Parametrize nu = (1 - s) / lmax so that 1 - nu l_i = (lmax - l_i + s l_i) / lmax
  // stays accurate when the root sits next to the pole at nu = 1/lmax.
  auto denom = [&](double sg, int i) { return (lmax - lam(i) + sg * lam(i)) / lmax; };
  // F = c + sum g_i^2 nu (2 - nu l_i) / (1 - nu l_i)^2, decreasing in s.
  auto F = [&](double sg) {
    const double nu = (1.0 - sg) / lmax;
    double f = c;
    for (int i = 0; i < m; ++i) {
      const double d = denom(sg, i);
      if (gt(i) == 0.0) continue;
      f += gt(i) * gt(i) * nu * (1.0 + d) / (d * d);
    }
    return f;
  };
  Vec wt(m);
  const double s_min = 1e-150;
  if (F(s_min) >= 0.0) {
    double lo = std::log(s_min), hi = 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (F(std::exp(mid)) >= 0.0 ? lo : hi) = mid;
    }
    const double sg = std::exp(0.5 * (lo + hi));
    const double nu = (1.0 - sg) / lmax;
    for (int i = 0; i < m; ++i) wt(i) = nu * gt(i) / denom(sg, i);
  } else {
    // The top component vanishes; nearest points form a sphere in the top eigenspace.
    const double nu = 1.0 / lmax;
    double rest = c;
    int first_top = -1;
    for (int i = 0; i < m; ++i) {
      if (lam(i) >= lmax * (1.0 - 1e-12)) {
        wt(i) = 0.0;
        if (first_top < 0) first_top = i;
      } else {
        const double d = 1.0 - nu * lam(i);
        wt(i) = nu * gt(i) / d;
        rest += gt(i) * gt(i) * nu * (1.0 + d) / (d * d);
      }
    }
    wt(first_top) = std::sqrt(std::max(0.0, -rest / lmax));
  }
  return V * wt;
}

std::vector<int> first_primes(int count) {
  std::vector<int> out;
  for (int c = 2; static_cast<int>(out.size()) < count; ++c) {
    bool prime = true;
    for (int p : out)
      if (c % p == 0) {
        prime = false;
        break;
      }
    if (prime) out.push_back(c);
  }
  return out;
}

double radical_inverse(int i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

}  // namespace

std::string to_string(Field f) { return f == Field::Real ? "real" : "complex"; }

Vec apply_J(const Vec& v) {
  if (v.size() % 2 != 0) throw InputError("complex structure needs an even real dimension");
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); i += 2) {
    out(i) = -v(i + 1);
    out(i + 1) = v(i);
  }
  return out;
}

Ray::Ray(Vec o, const Vec& d) : origin(std::move(o)) {
  const double n = d.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InputError("ray direction must be a nonzero finite vector");
  if (d.size() != origin.size()) throw InputError("ray direction and origin differ in dimension");
  direction = d / n;
}

std::vector<Vec> sphere_lattice(int m, int count) {
  std::vector<Vec> out;
  if (m <= 0) return out;
  if (m == 1) {
    out.push_back(make_vec({1.0}));
    out.push_back(make_vec({-1.0}));
    return out;
  }
  count = std::max(count, 2);
  out.reserve(count);
  if (m == 2) {
    for (int i = 0; i < count; ++i) {
      double a = 2.0 * kPi * i / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return out;
  }
  if (m == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = golden * i;
      out.push_back(make_vec({r * std::cos(phi), r * std::sin(phi), z}));
    }
    return out;
  }
  const int pairs = (m + 1) / 2;
  const auto primes = first_primes(2 * pairs);
  for (int i = 1; static_cast<int>(out.size()) < count; ++i) {
    Vec g(2 * pairs);
    for (int j = 0; j < pairs; ++j) {
      double u1 = radical_inverse(i, primes[2 * j]);
      double u2 = radical_inverse(i, primes[2 * j + 1]);
      double r = std::sqrt(-2.0 * std::log(u1));
      g(2 * j) = r * std::cos(2.0 * kPi * u2);
      g(2 * j + 1) = r * std::sin(2.0 * kPi * u2);
    }
    Vec v = g.head(m);
    double n = v.norm();
    if (n > 1e-12) out.push_back(v / n);
  }
  return out;
}

double sphere_lattice_covering(int m, int count) {
  if (m <= 1) return 0.0;
  count = std::max(count, 2);
  if (m == 2) return kPi / count;
  if (m == 3) return std::min(kPi / 2, 2.2 / std::sqrt(static_cast<double>(count)));
  const double area = 2.0 * std::pow(kPi, m / 2.0) / std::tgamma(m / 2.0);
  const double cap = std::pow(kPi, (m - 1) / 2.0) / std::tgamma((m + 1) / 2.0);
  return std::min(kPi / 2, 2.0 * std::pow(area / (cap * count), 1.0 / (m - 1)));
}

Mat orthonormalize(const Mat& columns, double drop_tol) {
  std::vector<Vec> kept;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Vec v = columns.col(j);
    const double n0 = v.norm();
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : kept) v -= q.dot(v) * q;
    const double n = v.norm();
    if (n > drop_tol * n0) kept.push_back(v / n);
  }
  Mat out(columns.rows(), static_cast<Eigen::Index>(kept.size()));
  for (size_t j = 0; j < kept.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = kept[j];
  return out;
}

double ellipsoid_origin_distance(const Mat& Q, const Vec& g, double c) {
  if (!(c < 0.0)) throw PreconditionError("origin is not interior to the ellipsoid");
  return ellipsoid_nearest(Q, g, c).norm();
}

// ---------------------------------------------------------------------------

ConvexBody::ConvexBody(Shape shape, Vec base_point, Field field, int real_dim)
    : shape_(std::move(shape)), base_point_(std::move(base_point)), field_(field), real_dim_(real_dim) {
  validate();
}

ConvexBody ConvexBody::polytope(Mat normals, Vec offsets, Vec base_point, Field field) {
  const int n = static_cast<int>(normals.cols());
  return ConvexBody(Polytope{std::move(normals), std::move(offsets)}, std::move(base_point), field, n);
}

ConvexBody ConvexBody::ellipsoid(Vec center, Mat matrix, Vec base_point, Field field) {
  const int n = static_cast<int>(center.size());
  return ConvexBody(Ellipsoid{std::move(center), std::move(matrix)}, std::move(base_point), field, n);
}

ConvexBody ConvexBody::ball(Vec center, double radius, Field field) {
  if (!(radius > 0.0)) throw InputError("ball radius must be positive");
  const int n = static_cast<int>(center.size());
  Vec base = center;
  return ConvexBody(PBall{2.0, radius, std::move(center)}, std::move(base), field, n);
}

ConvexBody ConvexBody::pball(double p, double scale, Vec center, Vec base_point, Field field) {
  const int n = static_cast<int>(center.size());
  return ConvexBody(PBall{p, scale, std::move(center)}, std::move(base_point), field, n);
}

ConvexBody ConvexBody::sublevel(SublevelSet set, Vec base_point, Field field) {
  const int n = static_cast<int>(set.bounding_center.size());
  return ConvexBody(std::move(set), std::move(base_point), field, n);
}

ConvexBody ConvexBody::halfspace(int real_dim, Vec base_point, Field field) {
  return ConvexBody(HalfSpace{}, std::move(base_point), field, real_dim);
}

ConvexBody ConvexBody::cube(int real_dim, double half_width) {
  if (!(half_width > 0.0)) throw InputError("cube half width must be positive");
  return pball(kInf, half_width, Vec::Zero(real_dim), Vec::Zero(real_dim));
}

std::string ConvexBody::kind() const {
  switch (shape_.index()) {
    case 0: return "polytope";
    case 1: return "ellipsoid";
    case 2: return "pball";
    case 3: return std::get<SublevelSet>(shape_).label;
    default: return "halfspace";
  }
}

void ConvexBody::validate() {
  const int n = real_dim_;
  if (n < 1) throw InputError("dimension must be at least 1");
  if (field_ == Field::Complex && n % 2 != 0)
    throw InputError("complex bodies need an even real dimension");
  if (base_point_.size() != n) throw InputError("base_point has the wrong dimension");
  if (!base_point_.allFinite()) throw InputError("base_point must be finite");

  if (auto* P = std::get_if<Polytope>(&shape_)) {
    if (P->normals.rows() == 0) throw InputError("polytope needs at least one halfspace");
    if (P->offsets.size() != P->normals.rows())
      throw InputError("polytope offsets and normals differ in count");
    for (Eigen::Index i = 0; i < P->normals.rows(); ++i)
      if (!(P->normals.row(i).norm() > 0.0)) throw InputError("polytope normal " + std::to_string(i) + " is zero");
    scale_ = 1.0;
  } else if (auto* E = std::get_if<Ellipsoid>(&shape_)) {
    if (E->matrix.rows() != n || E->matrix.cols() != n) throw InputError("ellipsoid matrix has the wrong shape");
    const double asym = (E->matrix - E->matrix.transpose()).norm();
    if (asym > 1e-12 * E->matrix.norm()) throw InputError("ellipsoid matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(E->matrix);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw InputError("ellipsoid matrix is not positive definite");
    scale_ = 2.0 / std::sqrt(es.eigenvalues().minCoeff());
  } else if (auto* B = std::get_if<PBall>(&shape_)) {
    if (!(B->p >= 1.0)) throw InputError("pball exponent must be >= 1");
    if (!(B->scale > 0.0)) throw InputError("pball scale must be positive");
    scale_ = 2.0 * B->scale * std::sqrt(static_cast<double>(n));
  } else if (auto* S = std::get_if<SublevelSet>(&shape_)) {
    if (!S->g) throw InputError("sublevel body needs a function");
    if (!(S->bounding_radius > 0.0)) throw InputError("sublevel body needs a positive bounding radius");
    scale_ = 2.0 * S->bounding_radius;
  } else {
    scale_ = 1.0;
  }

  if (!contains(base_point_)) throw InputError("base_point is not interior");
  if (!bounded()) return;

  double far = 0.0;
  std::vector<Vec> dirs = sphere_lattice(n, 64);
  for (int i = 0; i < n; ++i) {
    dirs.push_back(unit(n, i));
    dirs.push_back(-unit(n, i));
  }
  for (const auto& d : dirs) {
    double t = ray_hit(base_point_, d);
    if (!std::isfinite(t)) throw InputError("body is unbounded (only the halfspace variant may be)");
    far = std::max(far, t);
  }
  scale_ = 2.0 * far;
}

bool ConvexBody::contains(const Vec& x) const {
  if (x.size() != real_dim_)
    throw InputError("point has dimension " + std::to_string(x.size()) + ", body has " +
                     std::to_string(real_dim_));
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Polytope>) {
          return ((s.normals * x - s.offsets).array() < 0.0).all();
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          Vec w = x - s.center;
          return w.dot(s.matrix * w) < 1.0;
        } else if constexpr (std::is_same_v<T, PBall>) {
          return pnorm(x - s.center, s.p) < s.scale;
        } else if constexpr (std::is_same_v<T, SublevelSet>) {
          return s.g(x) < 0.0;
        } else {
          return x(0) > 0.0;
        }
      },
      shape_);
}

double ConvexBody::hit_closed_form(const Vec& p, const Vec& u, bool& ok) const {
  ok = true;
  auto quadratic = [](const Vec& w, const Vec& Mu, const Vec& u, const Vec& Mw) {
    const double a = u.dot(Mu), b = u.dot(Mw), c = w.dot(Mw) - 1.0;
    const double disc = std::sqrt(std::max(0.0, b * b - a * c));
    return b >= 0.0 ? -c / (b + disc) : (disc - b) / a;
  };
  if (auto* P = std::get_if<Polytope>(&shape_)) {
    double t = kInf;
    const Vec au = P->normals * u;
    const Vec slack = P->offsets - P->normals * p;
    for (Eigen::Index i = 0; i < au.size(); ++i)
      if (au(i) > 0.0) t = std::min(t, slack(i) / au(i));
    return t;
  }
  if (auto* E = std::get_if<Ellipsoid>(&shape_)) {
    Vec w = p - E->center;
    return quadratic(w, E->matrix * u, u, E->matrix * w);
  }
  if (auto* B = std::get_if<PBall>(&shape_)) {
    const Vec w = p - B->center;
    if (B->p == 2.0) {
      const double s2 = 1.0 / (B->scale * B->scale);
      return quadratic(w, s2 * u, u, s2 * w);
    }
    if (std::isinf(B->p)) {
      double t = kInf;
      for (Eigen::Index i = 0; i < u.size(); ++i)
        if (u(i) != 0.0) t = std::min(t, ((u(i) > 0 ? B->scale : -B->scale) - w(i)) / u(i));
      return t;
    }
    if (B->p == 1.0) {
      // Walk the breakpoints of the convex piecewise-linear t -> |w + t u|_1.
      std::vector<std::pair<double, double>> breaks;
      double f = w.cwiseAbs().sum(), slope = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) == 0.0) continue;
        double bt = -w(i) / u(i);
        if (bt > 0.0) {
          breaks.emplace_back(bt, 2.0 * std::abs(u(i)));
          slope -= std::abs(u(i));
        } else {
          slope += std::abs(u(i));
        }
      }
      std::sort(breaks.begin(), breaks.end());
      double t = 0.0;
      for (const auto& [bt, jump] : breaks) {
        double f_next = f + slope * (bt - t);
        if (slope > 0.0 && f_next >= B->scale) return t + (B->scale - f) / slope;
        f = f_next;
        t = bt;
        slope += jump;
      }
      return t + (B->scale - f) / slope;
    }
    ok = false;
    return 0.0;
  }
  if (std::holds_alternative<HalfSpace>(shape_)) return u(0) < 0.0 ? p(0) / -u(0) : kInf;
  ok = false;
  return 0.0;
}

double ConvexBody::hit_bisect(const Vec& p, const Vec& u, const Settings& s) const {
  double hi;
  if (auto* S = std::get_if<SublevelSet>(&shape_)) {
    hi = (p - S->bounding_center).norm() + S->bounding_radius * (1.0 + 1e-9) + 1e-300;
  } else {
    const auto& B = std::get<PBall>(shape_);
    hi = (p - B.center).norm() + B.scale * std::sqrt(static_cast<double>(real_dim_)) * (1.0 + 1e-9);
  }
  while (contains(p + hi * u)) hi *= 2.0;
  double lo = 0.0;
  const double floor = 1e-15 * scale_;
  for (int it = 0; it < 400; ++it) {
    if (hi - lo <= std::max(s.tol_ray * lo, floor)) break;
    double mid = 0.5 * (lo + hi);
    (contains(p + mid * u) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ConvexBody::ray_hit(const Ray& ray, const Settings& s) const {
  return ray_hit(ray.origin, ray.direction, s);
}

double ConvexBody::ray_hit(const Vec& origin, const Vec& dir, const Settings& s) const {
  if (!contains(origin)) throw PreconditionError("ray origin is not interior");
  Ray r(origin, dir);
  bool ok = false;
  double t = hit_closed_form(r.origin, r.direction, ok);
  return ok ? t : hit_bisect(r.origin, r.direction, s);
}

Bracket ConvexBody::boundary_distance(const Vec& p, const Settings& s) const {
  if (!contains(p)) throw PreconditionError("point is not interior");
  auto exact = [](double v) { return Bracket{v, v, v}; };
  Mat A;
  Vec b;
  if (polyhedral(shape_, real_dim_, A, b)) {
    if (auto* B = std::get_if<PBall>(&shape_); B && B->p == 1.0)
      return exact((B->scale - (p - B->center).cwiseAbs().sum()) / std::sqrt(static_cast<double>(real_dim_)));
    const Vec slack = b - A * p;
    double d = kInf;
    for (Eigen::Index i = 0; i < A.rows(); ++i) d = std::min(d, slack(i) / A.row(i).norm());
    return exact(d);
  }
  if (auto* E = std::get_if<Ellipsoid>(&shape_)) {
    const Vec w = p - E->center;
    return exact(ellipsoid_origin_distance(E->matrix, E->matrix * w, w.dot(E->matrix * w) - 1.0));
  }
  if (auto* B = std::get_if<PBall>(&shape_); B && B->p == 2.0)
    return exact(B->scale - (p - B->center).norm());
  const SliceResult r = slice_sampled(p, Mat::Identity(real_dim_, real_dim_), s);
  const int count = s.sphere_samples_per_k * real_dim_;
  return Bracket{r.value, r.value * std::cos(sphere_lattice_covering(real_dim_, count)), r.value};
}

double ConvexBody::real_line_distance(const Vec& p, const Vec& u, const Settings& s) const {
  return std::min(ray_hit(p, u, s), ray_hit(p, -u, s));
}

Bracket ConvexBody::line_distance(const Vec& p, const Vec& v, const Settings& s) const {
  if (!contains(p)) throw PreconditionError("point is not interior");
  if (v.size() != real_dim_) throw InputError("direction has the wrong dimension");
  const double nv = v.norm();
  if (!(nv > 0.0)) throw PreconditionError("direction must be nonzero");
  const Vec u = v / nv;
  if (field_ == Field::Real) {
    const double d = real_line_distance(p, u, s);
    bool closed = false;
    hit_closed_form(p, u, closed);
    const double slack = closed ? 0.0 : s.tol_ray * d;
    return Bracket{d, d - slack, d + slack};
  }
  Mat F(real_dim_, 2);
  F.col(0) = u;
  F.col(1) = apply_J(u);
  SliceResult closed;
  if (slice_closed_form(p, F, closed)) return Bracket{closed.value, closed.value, closed.value};

  // Complex line through p: minimize over the real directions cos(t) u + sin(t) Ju.
  const Vec Ju = F.col(1);
  auto f = [&](double t) { return real_line_distance(p, std::cos(t) * u + std::sin(t) * Ju, s); };
  const int N = s.theta_grid;
  int best = 0;
  double fbest = kInf;
  for (int i = 0; i < N; ++i) {
    double fi = f(kPi * i / N);
    if (fi < fbest) {
      fbest = fi;
      best = i;
    }
  }
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = kPi * (best - 1) / N, b = kPi * (best + 1) / N;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  const double val = std::min({fbest, fc, fd});
  return Bracket{val, val * std::cos(kPi / N), val};
}

bool ConvexBody::slice_closed_form(const Vec& p, const Mat& F, SliceResult& out) const {
  Mat A;
  Vec b;
  if (polyhedral(shape_, real_dim_, A, b)) {
    const Vec slack = b - A * p;
    out.value = kInf;
    out.direction = F.col(0);
    out.exact = true;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      Vec proj = F.transpose() * A.row(i).transpose();
      const double pn = proj.norm();
      if (pn <= 1e-14 * A.row(i).norm()) continue;
      const double t = slack(i) / pn;
      if (t < out.value) {
        out.value = t;
        out.direction = F * (proj / pn);
      }
    }
    return true;
  }
  const Ellipsoid* E = std::get_if<Ellipsoid>(&shape_);
  Ellipsoid tmp;
  if (auto* B = std::get_if<PBall>(&shape_); B && B->p == 2.0) {
    tmp.center = B->center;
    tmp.matrix = Mat::Identity(real_dim_, real_dim_) / (B->scale * B->scale);
    E = &tmp;
  }
  if (!E) return false;
  const Vec w = p - E->center;
  const Mat MF = E->matrix * F;
  const Vec y = ellipsoid_nearest(F.transpose() * MF, MF.transpose() * w, w.dot(E->matrix * w) - 1.0);
  out.value = y.norm();
  out.direction = out.value > 0.0 ? Vec(F * (y / out.value)) : Vec(F.col(0));
  out.exact = true;
  return true;
}

SliceResult ConvexBody::slice_sampled(const Vec& p, const Mat& F, const Settings& s) const {
  const int m = static_cast<int>(F.cols());
  auto hit = [&](const Vec& y) { return ray_hit(p, F * y, s); };
  SliceResult out;
  if (m == 1) {
    double a = hit(make_vec({1.0})), b = hit(make_vec({-1.0}));
    out.value = std::min(a, b);
    out.direction = a <= b ? Vec(F.col(0)) : Vec(-F.col(0));
    return out;
  }
  const int k = field_ == Field::Complex ? std::max(1, m / 2) : m;
  const int count = s.sphere_samples_per_k * k;
  const auto dirs = sphere_lattice(m, count);
  std::vector<std::pair<double, int>> vals(dirs.size());
  for (size_t i = 0; i < dirs.size(); ++i) vals[i] = {hit(dirs[i]), static_cast<int>(i)};
  std::sort(vals.begin(), vals.end());

  // Pattern search on the sphere from the best few samples.
  const double h0 = sphere_lattice_covering(m, count);
  out.value = kInf;
  Vec best_y;
  for (int start = 0; start < std::min<int>(3, static_cast<int>(vals.size())); ++start) {
    Vec y = dirs[vals[start].second];
    double fy = vals[start].first;
    double h = h0;
    while (h > 1e-8) {
      Mat basis(m, m);
      basis.col(0) = y;
      for (int j = 1; j < m; ++j) basis.col(j) = unit(m, j - 1);
      Mat T = orthonormalize(basis);
      bool improved = false;
      for (Eigen::Index j = 1; j < T.cols() && !improved; ++j)
        for (double sg : {1.0, -1.0}) {
          Vec yn = (y + sg * h * T.col(j)).normalized();
          double fn = hit(yn);
          if (fn < fy) {
            y = yn;
            fy = fn;
            improved = true;
            break;
          }
        }
      if (!improved) h *= 0.5;
    }
    if (fy < out.value) {
      out.value = fy;
      best_y = y;
    }
  }
  out.direction = F * best_y;
  return out;
}

SliceResult ConvexBody::plane_slice_distance(const Vec& p, const Mat& frame, const Settings& s) const {
  if (!contains(p)) throw PreconditionError("point is not interior");
  if (frame.rows() != real_dim_ || frame.cols() < 1) throw InputError("frame has the wrong shape");
  const Mat F = orthonormalize(frame);
  if (F.cols() != frame.cols()) throw InputError("frame columns are linearly dependent");
  SliceResult out;
  if (slice_closed_form(p, F, out)) return out;
  if (!bounded()) throw PreconditionError("sampled slices need a bounded body");
  return slice_sampled(p, F, s);
}

Vec ConvexBody::boundary_point(const Vec& dir, const Settings& s) const {
  const double t = ray_hit(base_point_, dir, s);
  if (!std::isfinite(t)) throw PreconditionError("ray from the base point never leaves the body");
  return base_point_ + t * dir.normalized();
}

bool ConvexBody::on_boundary(const Vec& x, double tol, const Settings& s) const {
  if (x.size() != real_dim_) throw InputError("point has the wrong dimension");
  if (!bounded()) return std::abs(x(0)) <= tol;
  const Vec d = x - base_point_;
  const double r = d.norm();
  if (r == 0.0) return false;
  return std::abs(ray_hit(base_point_, d, s) - r) <= tol * scale_;
}

std::vector<Vec> ConvexBody::outer_normals(const Vec& x, const Settings& s) const {
  const int n = real_dim_;
  std::vector<Vec> out;
  const double tol = 1e-7 * scale_;
  if (auto* B = std::get_if<PBall>(&shape_)) {
    const Vec w = x - B->center;
    if (B->p == 1.0) {
      std::vector<int> zeros;
      Vec sg(n);
      for (int i = 0; i < n; ++i) {
        sg(i) = w(i) > tol ? 1.0 : (w(i) < -tol ? -1.0 : 0.0);
        if (sg(i) == 0.0) zeros.push_back(i);
      }
      if (zeros.size() > 10) zeros.resize(10);
      for (int m = 0; m < (1 << zeros.size()); ++m) {
        Vec v = sg;
        for (size_t j = 0; j < zeros.size(); ++j) v(zeros[j]) = (m >> j) & 1 ? -1.0 : 1.0;
        for (int i = 0; i < n; ++i)
          if (v(i) == 0.0) v(i) = 1.0;
        out.push_back(v.normalized());
      }
      return out;
    }
    if (std::isinf(B->p)) {
      const double top = w.cwiseAbs().maxCoeff();
      for (int i = 0; i < n; ++i)
        if (std::abs(w(i)) >= top - tol) out.push_back((w(i) >= 0 ? 1.0 : -1.0) * unit(n, i));
      return out;
    }
    Vec g(n);
    for (int i = 0; i < n; ++i) g(i) = (w(i) >= 0 ? 1.0 : -1.0) * std::pow(std::abs(w(i)), B->p - 1.0);
    out.push_back(g.normalized());
    return out;
  }
  Mat A;
  Vec b;
  if (polyhedral(shape_, n, A, b)) {
    Eigen::Index closest = 0;
    double best = kInf;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double gap = std::abs(b(i) - A.row(i).dot(x)) / A.row(i).norm();
      if (gap <= tol) out.push_back(A.row(i).transpose().normalized());
      if (gap < best) {
        best = gap;
        closest = i;
      }
    }
    if (out.empty()) out.push_back(A.row(closest).transpose().normalized());
    return out;
  }
  if (auto* E = std::get_if<Ellipsoid>(&shape_)) {
    out.push_back((E->matrix * (x - E->center)).normalized());
    return out;
  }
  const auto& S = std::get<SublevelSet>(shape_);
  const double h = 1e-6 * scale_;
  Vec g(n);
  for (int i = 0; i < n; ++i) g(i) = (S.g(x + h * unit(n, i)) - S.g(x - h * unit(n, i))) / (2 * h);
  if (!(g.norm() > 0.0)) {
    (void)s;
    g = x - base_point_;
  }
  out.push_back(g.normalized());
  return out;
}

ConvexBody ConvexBody::transformed(const Mat& A, const Vec& b) const {
  const int n = real_dim_;
  if (A.rows() != n || A.cols() != n || b.size() != n) throw InputError("affine map has the wrong shape");
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) throw InputError("affine map is singular");
  const Mat Ai = lu.inverse();
  const Vec base = A * base_point_ + b;
  if (auto* P = std::get_if<Polytope>(&shape_)) {
    Mat N = P->normals * Ai;
    Vec off = P->offsets + P->normals * (Ai * b);
    return polytope(N, off, base, field_);
  }
  if (auto* E = std::get_if<Ellipsoid>(&shape_)) {
    Mat M = Ai.transpose() * E->matrix * Ai;
    M = 0.5 * (M + M.transpose()).eval();
    return ellipsoid(A * E->center + b, M, base, field_);
  }
  const double opnorm = Eigen::JacobiSVD<Mat>(A).singularValues()(0);
  if (auto* B = std::get_if<PBall>(&shape_)) {
    SublevelSet S;
    const PBall ball = *B;
    S.g = [ball, Ai, b](const Vec& y) { return pnorm(Ai * (y - b) - ball.center, ball.p) / ball.scale - 1.0; };
    S.bounding_center = A * B->center + b;
    S.bounding_radius = opnorm * B->scale * std::sqrt(static_cast<double>(n)) * (1.0 + 1e-9);
    S.label = "pball";
    return sublevel(S, base, field_);
  }
  if (auto* S0 = std::get_if<SublevelSet>(&shape_)) {
    SublevelSet S = *S0;
    auto g0 = S0->g;
    S.g = [g0, Ai, b](const Vec& y) { return g0(Ai * (y - b)); };
    S.bounding_center = A * S0->bounding_center + b;
    S.bounding_radius = opnorm * S0->bounding_radius * (1.0 + 1e-9);
    return sublevel(S, base, field_);
  }
  throw PreconditionError("affine images of the halfspace are not supported");
}

ConvexityReport ConvexBody::check_convexity(int pairs, std::uint64_t seed) const {
  ConvexityReport rep;
  auto* S = std::get_if<SublevelSet>(&shape_);
  if (!S) return rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto sample = [&] {
    for (int tries = 0; tries < 10000; ++tries) {
      Vec d(real_dim_);
      for (int i = 0; i < real_dim_; ++i) d(i) = gauss(rng);
      d.normalize();
      const double r = S->bounding_radius * std::pow(unif(rng), 1.0 / real_dim_);
      Vec x = S->bounding_center + r * d;
      if (S->g(x) < 0.0) return x;
    }
    return Vec(base_point_);
  };
  for (int i = 0; i < pairs; ++i) {
    const Vec a = sample(), c = sample();
    const double ga = S->g(a), gc = S->g(c), gm = S->g(0.5 * (a + c));
    const double excess = gm - 0.5 * (ga + gc);
    const double slack = 1e-12 * (1.0 + std::abs(ga) + std::abs(gc));
    ++rep.pairs_tested;
    if (excess > slack) {
      ++rep.violations;
      rep.worst_excess = std::max(rep.worst_excess, excess);
    }
  }
  return rep;
}

}  // namespace qhyp
