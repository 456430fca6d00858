#include "qhyp/hyperbolicity.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace qhyp {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec gaussian_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = N(rng);
  return v;
}

// Orthonormal columns from `draw`, each projected off `avoid` and the columns
// already accepted; J-pairs in the complex case.
Mat frame_from(int n, const std::vector<Vec>& avoid, int k, Field field, const std::function<Vec()>& draw) {
  std::vector<Vec> cols;
  std::vector<Vec> basis = avoid;
  int tries = 0;
  while (static_cast<int>(cols.size()) < (field == Field::Complex ? 2 * k : k)) {
    if (++tries > 1000) throw InternalCheckError("could not build a frame");
    Vec c = draw();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) c -= q.dot(c) * q;
    if (c.norm() < 1e-6) continue;
    c.normalize();
    cols.push_back(c);
    basis.push_back(c);
    if (field == Field::Complex) {
      Vec jc = apply_J(c);
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) jc -= q.dot(jc) * q;
      jc.normalize();
      cols.push_back(jc);
      basis.push_back(jc);
    }
  }
  Mat F(n, static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) F.col(static_cast<Eigen::Index>(j)) = cols[j];
  return F;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> dyadic_grid(int j_min, int j_max) {
  if (j_min > j_max) throw InputError("empty dyadic grid");
  std::vector<double> t;
  for (int j = j_min; j <= j_max; ++j) t.push_back(std::ldexp(1.0, -j));
  return t;
}

ExpansionProfile expansion_profile(const ConvexBody& body, const Vec& x, const Vec& p, const Mat& frame,
                                   const std::vector<double>& grid, const Settings& s) {
  const int n = body.real_dim();
  if (x.size() != n || p.size() != n || frame.rows() != n) throw InputError("profile input has the wrong dimension");
  if (frame.cols() == 0) throw InputError("empty frame");
  if (!body.contains(p)) throw PreconditionError("profile base point is not interior");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] < grid[i - 1])) throw InputError("grid must be strictly decreasing");
  ExpansionProfile prof;
  prof.x = x;
  prof.p = p;
  prof.frame = frame;
  for (double t : grid) {
    if (!(t > 0.0 && t <= 1.0)) {
      prof.rejected.push_back("t = " + fmt(t) + " outside (0, 1]");
      continue;
    }
    const Vec xt = (1.0 - t) * x + t * p;
    if (!body.contains(xt)) {
      prof.rejected.push_back("x_t leaves the body at t = " + fmt(t));
      continue;
    }
    const SliceResult r = body.plane_slice_distance(xt, frame, s);
    if (!(r.value > 0.0) || !std::isfinite(r.value)) {
      prof.rejected.push_back("slice distance " + fmt(r.value) + " at t = " + fmt(t));
      continue;
    }
    prof.t.push_back(t);
    prof.g.push_back(r.value);
  }
  prof.envelope = prof.g;
  for (size_t i = prof.envelope.size(); i-- > 1;)
    prof.envelope[i - 1] = std::max(prof.envelope[i - 1], prof.envelope[i]);
  return prof;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Expanding: return "expanding";
    case Verdict::Flat: return "flat";
    default: return "inconclusive";
  }
}

ExpansionFit fit_expansion(const ExpansionProfile& profile, double lambda_min, double residual_cap) {
  ExpansionFit fit;
  std::vector<double> lt, lg;
  for (size_t i = 0; i < profile.t.size(); ++i) {
    if (profile.t[i] > 0.0 && profile.g[i] > 0.0 && std::isfinite(profile.g[i])) {
      lt.push_back(std::log(profile.t[i]));
      lg.push_back(std::log(profile.g[i]));
    }
  }
  fit.points = static_cast<int>(lt.size());
  if (fit.points < 4) return fit;
  const double n = fit.points;
  const double mt = std::accumulate(lt.begin(), lt.end(), 0.0) / n;
  const double mg = std::accumulate(lg.begin(), lg.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < lt.size(); ++i) {
    sxx += (lt[i] - mt) * (lt[i] - mt);
    sxy += (lt[i] - mt) * (lg[i] - mg);
  }
  if (sxx <= 0.0) return fit;
  fit.lambda = sxy / sxx;
  double ss = 0.0;
  for (size_t i = 0; i < lt.size(); ++i) {
    const double r = lg[i] - (mg + fit.lambda * (lt[i] - mt));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  // Pairs s < t: log C >= log g(s) - log g(t) - lambda (log s - log t).
  double logC = 0.0;
  for (size_t i = 0; i < lt.size(); ++i)
    for (size_t j = 0; j < lt.size(); ++j)
      if (lt[i] < lt[j]) logC = std::max(logC, lg[i] - lg[j] - fit.lambda * (lt[i] - lt[j]));
  fit.C = std::exp(logC);
  if (fit.lambda < lambda_min)
    fit.verdict = Verdict::Flat;
  else if (fit.residual < residual_cap)
    fit.verdict = Verdict::Expanding;
  return fit;
}

Mat tangential_frame(const Vec& nu, int k, Field field, std::mt19937_64& rng) {
  const int n = static_cast<int>(nu.size());
  const int kd = field == Field::Complex ? n / 2 : n;
  if (k < 1 || k > kd - 1) throw PreconditionError("tangential frames need 1 <= k < dimension");
  std::vector<Vec> avoid{nu.normalized()};
  if (field == Field::Complex) {
    Vec jn = apply_J(avoid[0]);
    jn -= avoid[0].dot(jn) * avoid[0];
    avoid.push_back(jn.normalized());
  }
  return frame_from(n, avoid, k, field, [&] { return gaussian_vec(n, rng); });
}

ExpansionAudit expansion_audit(const ConvexBody& body, int k, const AuditOptions& opt, const Settings& s) {
  if (!body.bounded()) throw PreconditionError("expansion audit needs a bounded body");
  if (k < 1 || k > body.kdim()) throw PreconditionError("k out of range");
  const int n = body.real_dim();
  const Field field = body.field();
  std::mt19937_64 rng(opt.seed);

  std::vector<Vec> points = opt.extra_points;
  for (int i = 0; i < opt.boundary_points; ++i) points.push_back(body.boundary_point(gaussian_vec(n, rng), s));

  struct Job {
    Vec x;
    Mat frame;
    bool tangential;
  };
  std::vector<Job> jobs;
  ExpansionAudit rep;
  for (const Vec& x : points) {
    if (x.size() != n || !body.on_boundary(x, 1e-8, s)) {
      ++rep.skipped;
      continue;
    }
    const std::vector<Vec> normals = body.outer_normals(x, s);
    if (k < body.kdim() && !normals.empty()) {
      for (int j = 0; j < opt.frames_per_point; ++j) {
        const Vec& nu = normals[static_cast<size_t>(j) % normals.size()];
        jobs.push_back({x, tangential_frame(nu, k, field, rng), true});
      }
    }
    for (int j = 0; j < opt.random_frames_per_point; ++j)
      jobs.push_back({x, frame_from(n, {}, k, field, [&] { return gaussian_vec(n, rng); }), false});
  }
  rep.entries.resize(jobs.size());
  Settings inner = s;
  inner.workers = 1;
  std::vector<int> failed(jobs.size(), 0);
  parallel_for(static_cast<int>(jobs.size()), s.workers, [&](int i) {
    const Job& jb = jobs[i];
    AuditEntry& e = rep.entries[i];
    e.x = jb.x;
    e.frame = jb.frame;
    e.tangential = jb.tangential;
    try {
      e.fit = fit_expansion(expansion_profile(body, jb.x, body.base_point(), jb.frame, opt.grid, inner));
    } catch (const Error&) {
      failed[i] = 1;
    }
  });
  bool any_tangential = false;
  for (const auto& j : jobs) any_tangential = any_tangential || j.tangential;
  // With k equal to the dimension no frame misses the body; the verdict then
  // falls back to the unconstrained family.
  rep.family = any_tangential ? "tangential" : "all frames";
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (failed[i]) {
      ++rep.skipped;
      continue;
    }
    const AuditEntry& e = rep.entries[i];
    if (!e.tangential) rep.min_lambda_random = std::min(rep.min_lambda_random, e.fit.lambda);
    if (e.tangential == any_tangential) {
      rep.min_lambda = std::min(rep.min_lambda, e.fit.lambda);
      rep.max_C = std::max(rep.max_C, e.fit.C);
      if (e.fit.verdict == Verdict::Flat) rep.flat_witnesses.push_back(i);
    }
  }
  if (!rep.flat_witnesses.empty())
    rep.verdict = "flat witnesses found";
  else if (rep.min_lambda >= kLambdaMin && std::isfinite(rep.min_lambda))
    rep.verdict = "expansion holds (empirical)";
  else
    rep.verdict = "inconclusive";
  return rep;
}

// --- four-point condition -------------------------------------------------

FourPointResult four_point_delta(const Mat& D, std::uint64_t seed) {
  const Eigen::Index n = D.rows();
  if (D.cols() != n) throw InputError("distance matrix must be square");
  const double big = n > 0 ? D.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(D(i, i)) > 1e-12 * std::max(1.0, big)) throw InputError("distance matrix has a nonzero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(D(i, j)) || D(i, j) < 0.0) throw InputError("distances must be finite and nonnegative");
      if (std::abs(D(i, j) - D(j, i)) > 1e-9 * std::max(1.0, big)) throw InputError("distance matrix is not symmetric");
    }
  }
  FourPointResult out;
  if (n == 0) return out;
  auto gp = [&](Eigen::Index w, Eigen::Index x, Eigen::Index y) { return 0.5 * (D(x, w) + D(y, w) - D(x, y)); };
  double delta = 0.0;
  if (n <= 40) {
    for (Eigen::Index w = 0; w < n; ++w)
      for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) {
          const double xy = gp(w, x, y);
          for (Eigen::Index z = 0; z < n; ++z)
            delta = std::max(delta, std::min(xy, gp(w, y, z)) - gp(w, x, z));
        }
    out.quadruples = static_cast<long long>(n) * n * n * n;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> U(0, n - 1);
    const long long m = 100000;
    for (long long i = 0; i < m; ++i) {
      const Eigen::Index w = U(rng), x = U(rng), y = U(rng), z = U(rng);
      delta = std::max(delta, std::min(gp(w, x, y), gp(w, y, z)) - gp(w, x, z));
    }
    out.quadruples = m;
    out.exhaustive = false;
  }
  out.delta = delta;
  return out;
}

HilbertSample hilbert_depth_sample(const ConvexBody& body, double depth, int count, std::uint64_t seed,
                                   const Settings& s) {
  if (!(depth > 0.0 && depth < 0.5)) throw InputError("depth must lie in (0, 1/2)");
  if (count < 1) throw InputError("need at least one point");
  if (body.field() != Field::Real || !body.bounded()) throw PreconditionError("Hilbert samples need a bounded real body");
  const int n = body.real_dim();
  const Vec& c = body.base_point();
  // Hilbert radius of relative depth `depth` on a chord bisected by c.
  const double R = 0.5 * std::log((2.0 - depth) / depth);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto rel_depth = [&](const Vec& x) {
    const Vec d = x - c;
    if (d.norm() == 0.0) return 1.0;
    return 1.0 - d.norm() / body.ray_hit(c, d.normalized(), s);
  };
  HilbertSample out;
  out.points.push_back(c);
  int guard = 0;
  while (static_cast<int>(out.points.size()) < count) {
    if (++guard > 1000 * count) throw InternalCheckError("depth sampling stalled");
    // Two Hilbert-straight moves in random directions, each of length <= R.
    Vec x = c;
    for (int leg = 0; leg < 2; ++leg) {
      const Vec u = gaussian_vec(n, rng).normalized();
      const double ta = body.ray_hit(x, -u, s), tb = body.ray_hit(x, u, s);
      const double L = ta + tb;
      const double K = std::exp(2.0 * R * U(rng)) * ta / tb;
      x = x + (K * L / (1.0 + K) - ta) * u;
    }
    if (rel_depth(x) >= depth) out.points.push_back(x);
  }
  const auto m = static_cast<Eigen::Index>(out.points.size());
  out.distances = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      out.distances(i, j) = out.distances(j, i) = hilbert_distance(body, out.points[i], out.points[j], s);
  return out;
}

// --- non-hyperbolicity witness ----------------------------------------------

int default_witness_n(double gap) {
  return std::max(8, static_cast<int>(std::ceil(2.0 * std::exp(2.0 * gap + 1.0))));
}

namespace {

// Hyperplanes certifying distance bounds from u to points near z.
std::vector<Hyperplane> gap_hyperplanes(const ConvexBody& body, const Vec& u, const Vec& z, const Settings& s) {
  return supporting_hyperplanes(body, u, z, s);
}

// min over the piece [z0, z1] of |log(d(z,H)/d(u,H))|; d(., H) is affine on the piece.
double piece_bound(const Hyperplane& H, const Vec& u, const Vec& z0, const Vec& z1) {
  const double du = (u - H.point).dot(-H.normal);
  const double d0 = (z0 - H.point).dot(-H.normal), d1 = (z1 - H.point).dot(-H.normal);
  if (!(du > 0.0 && d0 > 0.0 && d1 > 0.0)) return 0.0;
  const double f0 = std::log(d0 / du), f1 = std::log(d1 / du);
  if ((f0 <= 0.0 && f1 >= 0.0) || (f0 >= 0.0 && f1 <= 0.0)) return 0.0;
  return std::min(std::abs(f0), std::abs(f1));
}

}  // namespace

double segment_gap_lower_bound(const ConvexBody& body, const Vec& u, const Vec& a, const Vec& b, int pieces,
                               const Settings& s) {
  if (body.field() != Field::Real) throw PreconditionError("gap bounds are implemented for real bodies");
  struct Piece {
    double t0, t1, bound;
  };
  auto eval = [&](double t0, double t1) {
    const Vec z0 = a + t0 * (b - a), z1 = a + t1 * (b - a);
    double best = 0.0;
    for (const auto& H : gap_hyperplanes(body, u, 0.5 * (z0 + z1), s)) best = std::max(best, piece_bound(H, u, z0, z1));
    return Piece{t0, t1, best};
  };
  std::vector<Piece> ps;
  const int initial = 8;
  for (int i = 0; i < initial; ++i) ps.push_back(eval(static_cast<double>(i) / initial, static_cast<double>(i + 1) / initial));
  // Refine the weakest piece; the minimum over pieces is a valid bound at every stage.
  for (int it = 0; it < pieces; ++it) {
    auto worst = std::min_element(ps.begin(), ps.end(), [](const Piece& x, const Piece& y) { return x.bound < y.bound; });
    if (worst->t1 - worst->t0 < 1e-9) break;
    const Piece w = *worst;
    const double mid = 0.5 * (w.t0 + w.t1);
    *worst = eval(w.t0, mid);
    ps.push_back(eval(mid, w.t1));
  }
  double m = kInf;
  for (const auto& p : ps) m = std::min(m, p.bound);
  return m;
}

WitnessRectangle nonhyperbolicity_witness(const ConvexBody& body, const Vec& x, const Mat& frame,
                                          const WitnessOptions& opt, const Settings& s) {
  if (body.field() != Field::Real) throw PreconditionError("witness rectangles are implemented for real bodies");
  if (frame.rows() != body.real_dim() || frame.cols() < 1) throw InputError("frame has the wrong shape");
  if (!(opt.b > opt.a) || !(opt.a >= 0.0)) throw InputError("witness needs 0 <= a < b");
  WitnessRectangle w;
  w.n = opt.n == 0 ? default_witness_n(opt.b - opt.a) : opt.n;
  if (w.n <= 2) throw PreconditionError("witness needs n > 2 (p_n would coincide with x_a)");
  const QuasiNormal qn = quasi_normal_at(body, x, s);
  w.x = x;
  w.normal = qn.n;
  w.frame = orthonormalize(frame);
  w.a = opt.a;
  w.b = opt.b;
  w.xa = x + qn.r * std::exp(-opt.a) * qn.n;
  w.xb = x + qn.r * std::exp(-opt.b) * qn.n;

  const SliceResult sa = body.plane_slice_distance(w.xa, w.frame, s);
  if (!std::isfinite(sa.value)) throw PreconditionError("slice through x_a never leaves the body");
  if (!(sa.value > 1e-9 * body.scale())) throw PreconditionError("flat direction collapses: y_n too close to x_a");
  w.y = w.xa + sa.value * sa.direction;
  const Vec shift = (1.0 - 2.0 / w.n) * (w.y - w.xa);
  w.pn = w.xa + shift;
  // Keep p'_n inside when the slice at depth b is shorter than at depth a.
  const double reach = body.ray_hit(w.xb, sa.direction, s);
  w.y_prime = w.xb + reach * sa.direction;
  w.pn_prime = w.xb + std::min(1.0, reach / sa.value) * shift;

  // Probe on [x_a, p_n] at the log-midpoint of the distances to y.
  const double l = sa.value;
  w.probe = w.y - std::sqrt(2.0 / w.n) * l * sa.direction;

  w.side_bounds[0] = segment_gap_lower_bound(body, w.probe, w.xa, w.xb, opt.pieces, s);
  w.side_bounds[1] = segment_gap_lower_bound(body, w.probe, w.xb, w.pn_prime, opt.pieces, s);
  w.side_bounds[2] = segment_gap_lower_bound(body, w.probe, w.pn_prime, w.pn, opt.pieces, s);
  w.gap = std::min({w.side_bounds[0], w.side_bounds[1], w.side_bounds[2]});
  return w;
}

// --- polynomials -------------------------------------------------------------

PolynomialR PolynomialR::monomial(int dim, const Index& alpha, double c) {
  PolynomialR p(dim);
  p.add_term(alpha, c);
  return p;
}

PolynomialR PolynomialR::linear(const Vec& coeffs) {
  const int d = static_cast<int>(coeffs.size());
  PolynomialR p(d);
  for (int i = 0; i < d; ++i) {
    Index a(d, 0);
    a[i] = 1;
    p.add_term(a, coeffs(i));
  }
  return p;
}

void PolynomialR::add_term(const Index& alpha, double c) {
  if (static_cast<int>(alpha.size()) != dim_) throw InputError("multi-index has the wrong length");
  for (int a : alpha)
    if (a < 0) throw InputError("negative exponent");
  if (!std::isfinite(c)) throw InputError("non-finite coefficient");
  if (c == 0.0) return;
  double& slot = terms_[alpha];
  slot += c;
  if (slot == 0.0) terms_.erase(alpha);
}

int PolynomialR::degree() const {
  int d = 0;
  for (const auto& [a, c] : terms_) d = std::max(d, std::accumulate(a.begin(), a.end(), 0));
  return d;
}

double PolynomialR::eval(const Vec& x) const {
  if (x.size() != dim_) throw InputError("point has the wrong dimension");
  double s = 0.0;
  for (const auto& [a, c] : terms_) {
    double m = c;
    for (int i = 0; i < dim_; ++i)
      if (a[i]) m *= std::pow(x(i), a[i]);
    s += m;
  }
  return s;
}

double PolynomialR::norm() const {
  double s = 0.0;
  for (const auto& kv : terms_) s += std::abs(kv.second);
  return s;
}

int PolynomialR::vanishing_order(double tol) const {
  int best = kInfiniteOrder;
  for (const auto& [a, c] : terms_)
    if (std::abs(c) > tol) best = std::min(best, std::accumulate(a.begin(), a.end(), 0));
  return best;
}

PolynomialR PolynomialR::homogeneous_part(int degree) const {
  PolynomialR p(dim_);
  for (const auto& [a, c] : terms_)
    if (std::accumulate(a.begin(), a.end(), 0) == degree) p.terms_[a] = c;
  return p;
}

PolynomialR PolynomialR::operator+(const PolynomialR& o) const {
  if (o.dim_ != dim_) throw InputError("polynomial dimensions differ");
  PolynomialR p = *this;
  for (const auto& [a, c] : o.terms_) p.add_term(a, c);
  return p;
}

PolynomialR PolynomialR::operator*(const PolynomialR& o) const {
  if (o.dim_ != dim_) throw InputError("polynomial dimensions differ");
  PolynomialR p(dim_);
  for (const auto& [a, c] : terms_)
    for (const auto& [b, e] : o.terms_) {
      Index s(dim_);
      for (int i = 0; i < dim_; ++i) s[i] = a[i] + b[i];
      p.add_term(s, c * e);
    }
  return p;
}

PolynomialR PolynomialR::scaled(double c) const {
  PolynomialR p(dim_);
  for (const auto& [a, v] : terms_) p.add_term(a, c * v);
  return p;
}

PolynomialR PolynomialR::restrict_to(const Mat& W) const {
  if (W.rows() != dim_) throw InputError("restriction matrix has the wrong shape");
  const int m = static_cast<int>(W.cols());
  std::vector<PolynomialR> lin;
  for (int i = 0; i < dim_; ++i) lin.push_back(PolynomialR::linear(W.row(i).transpose()));
  PolynomialR out(m);
  for (const auto& [a, c] : terms_) {
    PolynomialR t = PolynomialR::monomial(m, Index(m, 0), c);
    for (int i = 0; i < dim_; ++i)
      for (int e = 0; e < a[i]; ++e) t = t * lin[i];
    out = out + t;
  }
  return out;
}

int vanishing_order(const PolynomialR& P, double tol) { return P.vanishing_order(tol); }

double max_on_ball(const PolynomialR& P, double rho, std::uint64_t seed) {
  if (!(rho > 0.0)) throw InputError("radius must be positive");
  const int d = P.dim();
  auto absP = [&](const Vec& x) { return std::abs(P.eval(x)); };
  std::vector<std::pair<double, Vec>> best;
  auto consider = [&](const Vec& x) { best.emplace_back(absP(x), x); };
  if (d == 1) {
    const int m = 4096;
    std::mt19937_64 rng(seed);
    const double off = seed ? std::uniform_real_distribution<double>(0.0, 1.0)(rng) : 0.0;
    for (int i = 0; i <= m; ++i) consider(make_vec({rho * std::clamp(-1.0 + 2.0 * (i + off) / m, -1.0, 1.0)}));
    consider(make_vec({rho}));
    consider(make_vec({-rho}));
  } else {
    Mat Q = Mat::Identity(d, d);
    if (seed) {
      std::mt19937_64 rng(seed);
      Mat G(d, d);
      for (int i = 0; i < d; ++i) G.col(i) = gaussian_vec(d, rng);
      Q = Eigen::HouseholderQR<Mat>(G).householderQ();
    }
    const auto dirs = sphere_lattice(d, 512 * (d - 1));
    const int shells = 8;
    for (const auto& u : dirs)
      for (int j = 1; j <= shells; ++j) consider(rho * j / shells * (Q * u));
  }
  std::stable_sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double m = best.empty() ? 0.0 : best.front().first;
  // Pattern search from the leading samples, projected back into the ball.
  const size_t starts = std::min<size_t>(4, best.size());
  for (size_t i = 0; i < starts; ++i) {
    Vec x = best[i].second;
    double fx = best[i].first;
    double h = 0.05 * rho;
    while (h > 1e-10 * rho) {
      bool moved = false;
      for (int c = 0; c < d; ++c)
        for (double sg : {1.0, -1.0}) {
          Vec y = x;
          y(c) += sg * h;
          if (y.norm() > rho) y *= rho / y.norm();
          const double fy = absP(y);
          if (fy > fx) {
            x = y;
            fx = fy;
            moved = true;
          }
        }
      if (!moved) h *= 0.5;
    }
    m = std::max(m, fx);
  }
  return m;
}

PolynomialBounds polynomial_bounds_check(const PolynomialR& P, double r, double R, std::uint64_t seed) {
  if (std::abs(P.eval(Vec::Zero(P.dim()))) > 1e-12) throw PreconditionError("P(0) must vanish");
  if (!(r > 0.0 && r <= R && R <= 1.0)) throw PreconditionError("need 0 < r <= R <= 1");
  PolynomialBounds b;
  b.L = P.degree();
  b.norm = P.norm();
  if (b.norm == 0.0) return b;
  b.M_r = max_on_ball(P, r, seed);
  b.M_R = max_on_ball(P, R, seed);
  const double L = b.L;
  b.A = std::max({1.0, std::pow(r / R, L) * b.M_R / b.M_r, b.M_r * R / (r * b.M_R),
                  std::pow(r, L) * b.norm / b.M_r, b.M_r / (r * b.norm)});
  return b;
}

PolynomialAudit polynomial_audit(int d, int L, int count, std::uint64_t poly_seed, std::uint64_t sampling_seed) {
  if (d < 1 || L < 1 || count < 1) throw InputError("audit needs d, L, count >= 1");
  std::mt19937_64 rng(poly_seed);
  std::normal_distribution<double> N(0.0, 1.0);
  // All multi-indices with 1 <= |alpha| <= L.
  std::vector<PolynomialR::Index> idx;
  PolynomialR::Index a(d, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == d) {
      if (std::accumulate(a.begin(), a.end(), 0) >= 1) idx.push_back(a);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      a[i] = e;
      rec(i + 1, left - e);
    }
    a[i] = 0;
  };
  rec(0, L);
  PolynomialAudit out;
  for (int i = 0; i < count; ++i) {
    PolynomialR P(d);
    for (const auto& al : idx) P.add_term(al, N(rng));
    for (double r : {0.25, 0.5}) out.A = std::max(out.A, polynomial_bounds_check(P, r, 1.0, sampling_seed).A);
    ++out.polynomials;
  }
  return out;
}

ConvexBody graph_domain(const PolynomialR& f) {
  const int m = f.dim();
  SublevelSet set;
  set.g = [f, m](const Vec& X) {
    const Vec y = X.tail(m);
    return std::max({f.eval(y) - X(0), X(0) - 2.0, y.cwiseAbs().maxCoeff() - 1.1});
  };
  set.bounding_center = unit(m + 1, 0);
  set.bounding_radius = std::sqrt(1.0 + 1.21 * m) + 0.1;
  set.label = "graph";
  return ConvexBody::sublevel(set, unit(m + 1, 0));
}

namespace {

// Sum of coefficient magnitudes of the homogeneous parts of degree < j of f∘W.
double low_order_mass(const PolynomialR& f, const Mat& W, int j) {
  const PolynomialR g = f.restrict_to(W);
  double s = 0.0;
  for (const auto& [a, c] : g.terms())
    if (std::accumulate(a.begin(), a.end(), 0) < j) s += std::abs(c);
  return s;
}

}  // namespace

ContactOrder contact_order_graph_domain(const PolynomialR& f, int k, bool measure, const Settings& s) {
  const int m = f.dim();
  if (k < 1 || k > m) throw PreconditionError("k must lie in [1, dim f]");
  if (std::abs(f.eval(Vec::Zero(m))) > 1e-12) throw PreconditionError("f(0) must vanish");
  {
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> U(-1.1, 1.1);
    for (int i = 0; i < 2000; ++i) {
      Vec a(m), b(m);
      for (int c = 0; c < m; ++c) {
        a(c) = U(rng);
        b(c) = U(rng);
      }
      const double fa = f.eval(a), fb = f.eval(b), fm = f.eval(0.5 * (a + b));
      if (fa < -1e-12) throw PreconditionError("f is negative on the reference box");
      if (fm > 0.5 * (fa + fb) + 1e-9 * (1.0 + std::abs(fa) + std::abs(fb)))
        throw PreconditionError("f fails the sampled convexity check");
    }
  }
  const double tol = 1e-9 * std::max(1.0, f.norm());
  ContactOrder out;
  out.L = 0;
  auto consider = [&](const Mat& W) {
    const int nu = f.restrict_to(W).vanishing_order(tol);
    if (nu > out.L || out.plane.size() == 0) {
      out.L = nu;
      out.plane = W;
    }
  };
  // Coordinate k-planes.
  std::vector<int> sel(m, 0);
  std::fill(sel.begin(), sel.begin() + k, 1);
  do {
    Mat W = Mat::Zero(m, k);
    int c = 0;
    for (int i = 0; i < m; ++i)
      if (sel[i]) W(i, c++) = 1.0;
    consider(W);
  } while (std::prev_permutation(sel.begin(), sel.end()));

  // Rotation descent on the low-order mass for orders above the best found.
  std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  const int top = f.degree();
  for (int j = top; j > out.L && out.L != kInfiniteOrder; --j) {
    bool found = false;
    for (int r = 0; r < s.restarts && !found; ++r) {
      Mat G(m, m);
      for (int c = 0; c < m; ++c) G.col(c) = gaussian_vec(m, rng);
      Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ();
      double cur = low_order_mass(f, Q.leftCols(k), j);
      double th = 0.5;
      int evals = 0;
      while (th > 1e-8 && cur > tol && evals < 4000) {
        bool moved = false;
        for (int a = 0; a < k; ++a)
          for (int b = k; b < m; ++b) {
            for (double sg : {1.0, -1.0}) {
              Mat T = Q;
              T.col(a) = std::cos(th) * Q.col(a) + sg * std::sin(th) * Q.col(b);
              T.col(b) = -sg * std::sin(th) * Q.col(a) + std::cos(th) * Q.col(b);
              const double v = low_order_mass(f, T.leftCols(k), j);
              ++evals;
              if (v < cur) {
                cur = v;
                Q = T;
                moved = true;
              }
            }
          }
        if (!moved) th *= 0.5;
      }
      if (cur <= tol) {
        consider(Q.leftCols(k));
        found = true;
      }
    }
  }
  out.predicted_lambda = out.L == kInfiniteOrder ? 0.0 : 1.0 / out.L;
  if (measure) {
    const ConvexBody body = graph_domain(f);
    Mat F = Mat::Zero(m + 1, k);
    F.bottomRows(m) = out.plane;
    const ExpansionFit fit =
        fit_expansion(expansion_profile(body, Vec::Zero(m + 1), unit(m + 1, 0), F, dyadic_grid(), s));
    out.measured_lambda = fit.lambda;
    out.measured = true;
  }
  return out;
}

}  // namespace qhyp
