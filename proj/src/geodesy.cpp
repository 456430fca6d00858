#include "qhyp/geodesy.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>

namespace qhyp {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

void check_interior(const ConvexBody& body, const Vec& x, const char* what) {
  if (x.size() != body.real_dim()) throw InputError(std::string(what) + " has the wrong dimension");
  if (!body.contains(x)) throw PreconditionError(std::string(what) + " is not interior");
}

const std::vector<double>& cached_rule(int order, bool want_nodes) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    std::vector<double> x, w;
    // Golub-Welsch on the Legendre Jacobi matrix.
    Mat J = Mat::Zero(order, order);
    for (int i = 1; i < order; ++i) {
      const double b = i / std::sqrt(4.0 * i * i - 1.0);
      J(i, i - 1) = J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    x.resize(order);
    w.resize(order);
    for (int i = 0; i < order; ++i) {
      x[i] = es.eigenvalues()(i);
      w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
    for (int i = 0; i < order; ++i) {
      const int j = order - 1 - i;
      if (i < j) {
        const double xs = 0.5 * (x[j] - x[i]), ws = 0.5 * (w[i] + w[j]);
        x[i] = -xs;
        x[j] = xs;
        w[i] = w[j] = ws;
      } else if (i == j) {
        x[i] = 0.0;
      }
    }
    for (int i = 0; i < order; ++i) {
      x[i] = 0.5 * (x[i] + 1.0);
      w[i] *= 0.5;
    }
    it = cache.emplace(order, std::make_pair(std::move(x), std::move(w))).first;
  }
  return want_nodes ? it->second.first : it->second.second;
}

struct Integrator {
  const ConvexBody& body;
  int k;
  const Settings& s;
  const std::vector<double>& x;
  const std::vector<double>& w;
  LengthResult acc;

  double panel(const Vec& a, const Vec& d, double t0, double t1) {
    double sum = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      const Vec pt = a + (t0 + x[i] * (t1 - t0)) * d;
      sum += w[i] * qk_norm(body, pt, d, k, s).value;
    }
    return (t1 - t0) * sum;
  }

  void adaptive(const Vec& a, const Vec& d, double t0, double t1, double whole, int depth) {
    const double tm = 0.5 * (t0 + t1);
    const double l = panel(a, d, t0, tm), r = panel(a, d, tm, t1);
    const double fine = l + r, diff = std::abs(fine - whole);
    if (diff <= s.quad_tol * std::abs(fine) || depth >= 24 || fine == 0.0) {
      acc.value += fine;
      acc.error += diff;
      acc.panels += 2;
      return;
    }
    adaptive(a, d, t0, tm, l, depth + 1);
    adaptive(a, d, tm, t1, r, depth + 1);
  }

  // Split where boundary distances at the ends differ by more than 2x.
  void piece(const Vec& a, const Vec& b, double da, double db, int depth) {
    if (depth < 40 && std::max(da, db) > 2.0 * std::min(da, db)) {
      const Vec m = 0.5 * (a + b);
      const double dm = body.boundary_distance(m, s).value;
      piece(a, m, da, dm, depth + 1);
      piece(m, b, dm, db, depth + 1);
      return;
    }
    const Vec d = b - a;
    adaptive(a, d, 0.0, 1.0, panel(a, d, 0.0, 1.0), 0);
  }
};

std::vector<Vec> resample(const std::vector<Vec>& pts, int m) {
  std::vector<double> cum(pts.size(), 0.0);
  for (size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cum.back();
  std::vector<Vec> out;
  out.push_back(pts.front());
  size_t seg = 1;
  for (int j = 1; j < m - 1; ++j) {
    const double target = total * j / (m - 1);
    while (seg < pts.size() - 1 && cum[seg] < target) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double f = len > 0.0 ? (target - cum[seg - 1]) / len : 0.0;
    out.push_back(pts[seg - 1] + f * (pts[seg] - pts[seg - 1]));
  }
  out.push_back(pts.back());
  return out;
}

struct Descent {
  const ConvexBody& body;
  int k;
  const Settings& s;

  double seg(const Vec& a, const Vec& b) const { return segment_length_qk(body, a, b, k, s).value; }

  // Coordinate probes on interior vertices; returns the path length.
  double run(std::vector<Vec>& v) const {
    const int m = static_cast<int>(v.size());
    const int n = body.real_dim();
    std::vector<double> L(m - 1);
    for (int i = 0; i + 1 < m; ++i) L[i] = seg(v[i], v[i + 1]);
    std::vector<double> h(m, 0.0);
    for (int i = 1; i + 1 < m; ++i)
      h[i] = 0.25 * std::min((v[i] - v[i - 1]).norm(), (v[i + 1] - v[i]).norm());
    auto total = [&] {
      double t = 0.0;
      for (double x : L) t += x;
      return t;
    };
    double cur = total();
    const double hmin = 1e-7 * body.scale();
    for (int sweep = 0; sweep < 50; ++sweep) {
      const double before = cur;
      bool any_step = false;
      for (int i = 1; i + 1 < m; ++i) {
        if (h[i] < hmin) continue;
        any_step = true;
        bool moved = false;
        for (int j = 0; j < n && !moved; ++j) {
          for (double sg : {1.0, -1.0}) {
            Vec c = v[i];
            c(j) += sg * h[i];
            if (!body.contains(c)) continue;
            const double la = seg(v[i - 1], c), lb = seg(c, v[i + 1]);
            if (la + lb < (L[i - 1] + L[i]) * (1.0 - 1e-12)) {
              v[i] = c;
              L[i - 1] = la;
              L[i] = lb;
              moved = true;
              break;
            }
          }
        }
        if (!moved) h[i] *= 0.5;
      }
      cur = total();
      if (!any_step) break;
      if (before - cur < s.dist_tol * cur && sweep >= 2) {
        bool small = true;
        for (int i = 1; i + 1 < m; ++i) small = small && h[i] < 1e-3 * body.scale();
        if (small) break;
      }
    }
    return cur;
  }
};

}  // namespace

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  if (order < 1) throw InputError("quadrature order must be positive");
  nodes = cached_rule(order, true);
  weights = cached_rule(order, false);
}

LengthResult segment_length_qk(const ConvexBody& body, const Vec& a0, const Vec& b0, int k, const Settings& s) {
  check_interior(body, a0, "path vertex");
  check_interior(body, b0, "path vertex");
  LengthResult out;
  if ((a0 - b0).norm() == 0.0) return out;
  const bool swap = lex_less(b0, a0);
  const Vec& a = swap ? b0 : a0;
  const Vec& b = swap ? a0 : b0;
  Integrator in{body, k, s, cached_rule(s.quad_order, true), cached_rule(s.quad_order, false), {}};
  in.piece(a, b, body.boundary_distance(a, s).value, body.boundary_distance(b, s).value, 0);
  return in.acc;
}

LengthResult path_length_qk(const ConvexBody& body, const PolylinePath& path, int k, const Settings& s) {
  if (!body.bounded()) throw PreconditionError("path lengths need a bounded body");
  LengthResult out;
  for (size_t i = 0; i + 1 < path.vertices.size(); ++i) {
    const LengthResult r = segment_length_qk(body, path.vertices[i], path.vertices[i + 1], k, s);
    out.value += r.value;
    out.error += r.error;
    out.panels += r.panels;
  }
  if (path.vertices.size() == 1) check_interior(body, path.vertices[0], "path vertex");
  return out;
}

double hyperplane_distance(const Hyperplane& H, const Vec& x, Field field) {
  const Vec w = x - H.point;
  const double a = H.normal.dot(w);
  if (field == Field::Real) return std::abs(a);
  const double b = apply_J(H.normal).dot(w);
  return std::hypot(a, b);
}

double hyperplane_lower_bound(const ConvexBody& body, const Vec& p, const Vec& q, const Hyperplane& H,
                              const Settings& s) {
  check_interior(body, p, "p");
  check_interior(body, q, "q");
  const Vec nu = H.normal.normalized();
  const Hyperplane Hn{H.point, nu};
  // The real hyperplane through H.point with normal nu must support the body.
  const double side = nu.dot(body.base_point() - H.point);
  if (side >= 0.0) throw PreconditionError("hyperplane meets the body");
  if (body.bounded()) {
    const double tol = 1e-9 * body.scale();
    for (const auto& d : sphere_lattice(body.real_dim(), 256)) {
      if (nu.dot(body.boundary_point(d, s) - H.point) > tol) throw PreconditionError("hyperplane meets the body");
    }
    if (nu.dot(body.boundary_point(nu, s) - H.point) > tol) throw PreconditionError("hyperplane meets the body");
  }
  const double dp = hyperplane_distance(Hn, p, body.field()), dq = hyperplane_distance(Hn, q, body.field());
  return std::abs(std::log(dq / dp));
}

std::vector<Hyperplane> supporting_hyperplanes(const ConvexBody& body, const Vec& p, const Vec& q,
                                               const Settings& s) {
  std::vector<Hyperplane> out;
  const int n = body.real_dim();
  if (auto* P = std::get_if<Polytope>(&body.shape())) {
    for (Eigen::Index i = 0; i < P->normals.rows(); ++i) {
      const Vec a = P->normals.row(i).transpose();
      const double an = a.norm();
      out.push_back({a * (P->offsets(i) / (an * an)), a / an});
    }
    return out;
  }
  if (std::holds_alternative<HalfSpace>(body.shape())) {
    out.push_back({Vec::Zero(n), -unit(n, 0)});
    return out;
  }
  auto add_at = [&](const Vec& x) {
    for (const auto& nu : body.outer_normals(x, s)) out.push_back({x, nu});
  };
  if (auto* B = std::get_if<PBall>(&body.shape()); B && std::isinf(B->p)) {
    for (int i = 0; i < n; ++i)
      for (double sg : {1.0, -1.0}) {
        Vec x = B->center;
        x(i) += sg * B->scale;
        out.push_back({x, sg * unit(n, i)});
      }
    return out;
  }
  // Points where the chord through p and q leaves the body, nearest boundary
  // points of p and q, radial projections, and lattice points nearest [p, q].
  if ((q - p).norm() > 0.0) {
    const Vec u = (q - p).normalized();
    add_at(q + body.ray_hit(q, u, s) * u);
    add_at(p - body.ray_hit(p, -u, s) * u);
  }
  for (const Vec* z : {&p, &q}) {
    const SliceResult near = body.plane_slice_distance(*z, Mat::Identity(n, n), s);
    add_at(*z + near.value * near.direction);
    if ((*z - body.base_point()).norm() > 0.0) add_at(body.boundary_point(*z - body.base_point(), s));
  }
  std::vector<std::pair<double, Vec>> pts;
  for (const auto& d : sphere_lattice(n, 256)) {
    const Vec x = body.boundary_point(d, s);
    const Vec pq = q - p;
    const double len2 = pq.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((x - p).dot(pq) / len2, 0.0, 1.0) : 0.0;
    pts.emplace_back((x - p - t * pq).norm(), x);
  }
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t i = 0; i < std::min<size_t>(64, pts.size()); ++i) add_at(pts[i].second);
  return out;
}

double lower_bound_sweep(const ConvexBody& body, const Vec& p, const Vec& q, const Settings& s) {
  check_interior(body, p, "p");
  check_interior(body, q, "q");
  if ((p - q).norm() == 0.0) return 0.0;
  double best = 0.0;
  for (const auto& H : supporting_hyperplanes(body, p, q, s)) {
    const double dp = hyperplane_distance(H, p, body.field()), dq = hyperplane_distance(H, q, body.field());
    if (dp > 0.0 && dq > 0.0) best = std::max(best, std::abs(std::log(dq / dp)));
  }
  // Collinear boundary points on the real line through p and q.
  const Vec u = (q - p).normalized();
  const double tq = body.ray_hit(q, u, s), tp = body.ray_hit(p, -u, s);
  const double L = (q - p).norm();
  if (std::isfinite(tq)) best = std::max(best, std::log1p(L / tq));
  if (std::isfinite(tp)) best = std::max(best, std::log1p(L / tp));
  return best;
}

DistanceResult distance_qk(const ConvexBody& body, const Vec& p0, const Vec& q0, int k, const Settings& s) {
  if (!body.bounded()) throw PreconditionError("distances need a bounded body");
  check_interior(body, p0, "p");
  check_interior(body, q0, "q");
  if (k < 1 || k > body.kdim()) throw PreconditionError("k out of range");
  DistanceResult out;
  if ((p0 - q0).norm() == 0.0) {
    out.path.vertices = {p0};
    out.candidate = "constant";
    return out;
  }
  // Work in a canonical endpoint order so that the result is symmetric.
  const bool swap = lex_less(q0, p0);
  const Vec& p = swap ? q0 : p0;
  const Vec& q = swap ? p0 : q0;
  const Vec& c = body.base_point();

  struct Candidate {
    std::string name;
    std::vector<Vec> pts;
  };
  std::vector<Candidate> cands;
  cands.push_back({"straight", {p, q}});
  {
    const Vec pq = q - p;
    const double t = std::clamp((c - p).dot(pq) / pq.squaredNorm(), 0.0, 1.0);
    if ((c - p - t * pq).norm() > 1e-9 * body.scale()) cands.push_back({"base_point", {p, c, q}});
  }
  {
    // Radial coordinates about the base point: direction and relative depth,
    // with the path pulled inward in proportion to the angular separation.
    auto polar = [&](const Vec& x, Vec& dir, double& e) {
      const Vec d = x - c;
      if (d.norm() == 0.0) {
        dir = Vec::Zero(x.size());
        e = 1.0;
        return;
      }
      dir = d.normalized();
      e = 1.0 - d.norm() / body.ray_hit(c, dir, s);
    };
    Vec dp, dq;
    double ep, eq;
    polar(p, dp, ep);
    polar(q, dq, eq);
    if (dp.norm() == 0.0) dp = dq;
    if (dq.norm() == 0.0) dq = dp;
    const double sep = std::min(1.0, 0.5 * (dp - dq).norm());
    std::vector<Vec> pts;
    bool ok = true;
    const int M = 33;
    for (int i = 0; i < M && ok; ++i) {
      const double tau = static_cast<double>(i) / (M - 1);
      Vec dir = (1.0 - tau) * dp + tau * dq;
      if (dir.norm() < 1e-9) {
        ok = false;
        break;
      }
      dir.normalize();
      double e = std::pow(ep, 1.0 - tau) * std::pow(eq, tau);
      e = std::min(1.0, std::max(e, 0.5 * sep * std::sin(kPi * tau)));
      Vec x = i == 0 ? p : (i == M - 1 ? q : Vec(c + (1.0 - e) * body.ray_hit(c, dir, s) * dir));
      pts.push_back(x);
    }
    if (ok) cands.push_back({"radial", pts});
  }

  struct Outcome {
    std::vector<Vec> path;
    std::vector<double> rounds;
    std::vector<int> verts;
    double value = kInf;
  };
  std::vector<Outcome> res(cands.size());
  Settings inner = s;
  inner.workers = 1;
  parallel_for(static_cast<int>(cands.size()), s.workers, [&](int ci) {
    Descent desc{body, k, inner};
    Outcome& o = res[ci];
    std::vector<Vec> v = resample(cands[ci].pts, std::min(9, std::max(3, s.max_vertices)));
    double best = kInf;
    std::vector<Vec> best_path;
    while (true) {
      const double val = desc.run(v);
      const double prev = best;
      if (val < best) {
        best = val;
        best_path = v;
      }
      o.rounds.push_back(best);
      o.verts.push_back(static_cast<int>(v.size()));
      const int next = 2 * static_cast<int>(v.size()) - 1;
      if (next > s.max_vertices) break;
      if (std::isfinite(prev) && prev - best < s.dist_tol * best) break;
      std::vector<Vec> dbl;
      for (size_t i = 0; i + 1 < v.size(); ++i) {
        dbl.push_back(v[i]);
        dbl.push_back(0.5 * (v[i] + v[i + 1]));
      }
      dbl.push_back(v.back());
      v = std::move(dbl);
    }
    o.path = best_path;
    o.value = best;
  });

  size_t bi = 0;
  for (size_t i = 1; i < res.size(); ++i)
    if (res[i].value < res[bi].value) bi = i;
  out.candidate = cands[bi].name;
  out.round_upper = res[bi].rounds;
  out.round_vertices = res[bi].verts;

  // Certify the winning path with a tight quadrature tolerance.
  Settings tight = inner;
  tight.quad_tol = std::min(s.quad_tol, 1e-8);
  const LengthResult final_len = path_length_qk(body, PolylinePath{res[bi].path}, k, tight);
  // Floating-point slack keeps the bound sound when quadrature is exact.
  out.upper = (final_len.value + final_len.error) * (1.0 + 1e-12);
  out.path.vertices = res[bi].path;
  if (swap) std::reverse(out.path.vertices.begin(), out.path.vertices.end());

  out.lower = lower_bound_sweep(body, p, q, s);
  if (!(out.lower <= out.upper))
    throw InternalCheckError("lower bound " + std::to_string(out.lower) + " exceeds upper bound " +
                             std::to_string(out.upper));
  return out;
}

double hilbert_distance(const ConvexBody& body, const Vec& p, const Vec& q, const Settings& s) {
  if (body.field() != Field::Real) throw PreconditionError("the Hilbert distance needs a real body");
  if (!body.bounded()) throw PreconditionError("the Hilbert distance needs a bounded body");
  check_interior(body, p, "p");
  check_interior(body, q, "q");
  const double L = (q - p).norm();
  if (L == 0.0) return 0.0;
  const Vec u = (q - p) / L;
  const double tb = body.ray_hit(q, u, s), ta = body.ray_hit(p, -u, s);
  return 0.5 * (std::log1p(L / ta) + std::log1p(L / tb));
}

RadialCurve radial_quasi_geodesic(const ConvexBody& body, const Vec& x, const Vec& p, int k, const Settings& s) {
  check_interior(body, p, "p");
  if (!body.on_boundary(x, 1e-8, s)) throw PreconditionError("x is not on the boundary");
  RadialCurve c;
  c.x = x;
  c.p = p;
  const Vec d = x - p;
  const DeltaResult dr = delta_k(body, p, d, k, s);
  c.frame = dr.frame;
  c.epsilon = std::isfinite(dr.value) ? dr.value / d.norm() : kInf;
  c.degenerate = !(c.epsilon > 0.0);
  return c;
}

QuasiGeodesicReport quasi_geodesic_check(const ConvexBody& body, const std::function<Vec(double)>& curve,
                                         double t0, double t1, int k, double A, double B, int pairs,
                                         std::uint64_t seed, const Settings& s) {
  if (!(A >= 1.0) || !(B >= 0.0)) throw InputError("quasi-geodesic constants need A >= 1 and B >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(t0, t1);
  QuasiGeodesicReport rep;
  rep.pairs.resize(pairs);
  for (auto& pr : rep.pairs) {
    double a = U(rng), b = U(rng);
    pr.s = std::min(a, b);
    pr.t = std::max(a, b);
  }
  Settings inner = s;
  inner.workers = 1;
  parallel_for(pairs, s.workers, [&](int i) {
    auto& pr = rep.pairs[i];
    const Vec a = curve(pr.s), b = curve(pr.t);
    const double gap = pr.t - pr.s;
    const DistanceResult d = distance_qk(body, a, b, k, inner);
    pr.upper = d.upper;
    pr.lower = d.lower;
    pr.margin_upper = A * gap + B - d.upper;
    pr.margin_lower = d.lower - (gap / A - B);
    // A margin is only a definite failure when the other bound confirms it.
    const double slack = 1e-9 * (1.0 + gap);
    const bool up_fail = d.lower > A * gap + B + slack;
    const bool low_fail = d.upper < gap / A - B - slack;
    pr.failed = up_fail || low_fail;
    pr.inconclusive = !pr.failed && (pr.margin_upper < -slack || pr.margin_lower < -slack);
  });
  for (const auto& pr : rep.pairs) {
    rep.worst_margin_upper = std::min(rep.worst_margin_upper, pr.margin_upper);
    rep.worst_margin_lower = std::min(rep.worst_margin_lower, pr.margin_lower);
    rep.inconclusive += pr.inconclusive;
    rep.failed += pr.failed;
  }
  rep.pass = rep.failed == 0;
  return rep;
}

}  // namespace qhyp
