#include "qhyp/metrics.hpp"

#include <cmath>
#include <iterator>
#include <random>

namespace qhyp {

namespace {

constexpr double kPi = 3.14159265358979323846;

int step(Field f) { return f == Field::Complex ? 2 : 1; }

void check_point(const ConvexBody& body, const Vec& p) {
  if (p.size() != body.real_dim()) throw InputError("point has the wrong dimension");
  if (!body.contains(p)) throw PreconditionError("point is not interior");
}

// Appends c (and Jc) to `cols` after projecting out everything already there.
bool append_direction(std::vector<Vec>& cols, Vec c, Field field) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : cols) c -= q.dot(c) * q;
  const double n = c.norm();
  if (n <= 1e-9) return false;
  c /= n;
  cols.push_back(c);
  if (field == Field::Complex) {
    Vec jc = apply_J(c);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : cols) jc -= q.dot(jc) * q;
    cols.push_back(jc.normalized());
  }
  return true;
}

Mat to_mat(const std::vector<Vec>& cols, int n) {
  Mat F(n, static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) F.col(static_cast<Eigen::Index>(j)) = cols[j];
  return F;
}

double slice(const ConvexBody& body, const Vec& p, const Mat& F, const Settings& s, int& evals) {
  ++evals;
  return body.plane_slice_distance(p, F, s).value;
}

struct AscentResult {
  double value;
  Mat frame;
  int evaluations;
};

// Givens-style ascent: rotate each free column toward each complement column
// (with phase 0 or pi/2 in the complex case) and keep strict improvements.
AscentResult ascend(const ConvexBody& body, const Vec& p, Mat F, const Settings& s) {
  const Field field = body.field();
  const int st = step(field);
  int evals = 0;
  double best = slice(body, p, F, s, evals);
  Mat C = frame_complement(F, field);
  const double theta_min = 0.01 * s.tol_opt;
  const int budget = 4000;
  double theta = 0.4;
  while (theta >= theta_min && std::isfinite(best) && evals < budget) {
    bool improved = false;
    for (Eigen::Index i = st; i < F.cols() && std::isfinite(best); i += st) {
      for (Eigen::Index j = 0; j < C.cols() && std::isfinite(best); j += st) {
        for (int phase = 0; phase < st; ++phase) {
          Vec c = phase == 0 ? Vec(C.col(j)) : apply_J(C.col(j));
          for (double sg : {1.0, -1.0}) {
            Mat G = F;
            Vec w = std::cos(theta) * F.col(i) + sg * std::sin(theta) * c;
            w.normalize();
            G.col(i) = w;
            if (field == Field::Complex) G.col(i + 1) = apply_J(w);
            const double val = slice(body, p, G, s, evals);
            if (val > best * (1.0 + s.tol_opt)) {
              best = val;
              F = G;
              C = frame_complement(F, field);
              improved = true;
              break;
            }
          }
        }
      }
    }
    if (!improved) theta *= 0.5;
  }
  return {best, F, evals};
}

}  // namespace

FrameCheck check_frame(const Mat& F, Field field) {
  FrameCheck out;
  const Mat G = F.transpose() * F;
  out.gram_error = (G - Mat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
  if (field == Field::Complex) {
    for (Eigen::Index j = 0; j < F.cols(); ++j) {
      Vec jv = apply_J(F.col(j));
      out.j_residual = std::max(out.j_residual, (jv - F * (F.transpose() * jv)).norm());
    }
  }
  return out;
}

Vec canonical_direction(const Vec& v, Field field) {
  const double n = v.norm();
  if (!(n > 0.0)) throw PreconditionError("direction must be nonzero");
  Vec u = v / n;
  if (field == Field::Real) {
    Eigen::Index i;
    u.cwiseAbs().maxCoeff(&i);
    if (u(i) < 0.0) u = -u;
    return u;
  }
  Eigen::Index best = 0;
  double m = -1.0;
  for (Eigen::Index j = 0; j < u.size(); j += 2) {
    const double r = u(j) * u(j) + u(j + 1) * u(j + 1);
    if (r > m) {
      m = r;
      best = j;
    }
  }
  const double phi = std::atan2(u(best + 1), u(best));
  const double c = std::cos(phi), sn = std::sin(phi);
  Vec out(u.size());
  for (Eigen::Index j = 0; j < u.size(); j += 2) {
    out(j) = u(j) * c + u(j + 1) * sn;
    out(j + 1) = -u(j) * sn + u(j + 1) * c;
  }
  out(best + 1) = 0.0;
  return out;
}

Mat complete_frame(const Vec& u, const Mat& extra, int k, Field field) {
  const int n = static_cast<int>(u.size());
  const int target = k * step(field);
  std::vector<Vec> cols;
  append_direction(cols, u, field);
  for (Eigen::Index j = 0; j < extra.cols() && static_cast<int>(cols.size()) < target; ++j)
    append_direction(cols, extra.col(j), field);
  for (int i = 0; i < n && static_cast<int>(cols.size()) < target; ++i) append_direction(cols, unit(n, i), field);
  return to_mat(cols, n);
}

Mat frame_complement(const Mat& F, Field field) {
  const int n = static_cast<int>(F.rows());
  std::vector<Vec> cols;
  for (Eigen::Index j = 0; j < F.cols(); ++j) cols.push_back(F.col(j));
  const size_t base = cols.size();
  for (int i = 0; i < n && static_cast<int>(cols.size()) < n; ++i) append_direction(cols, unit(n, i), field);
  return to_mat(std::vector<Vec>(cols.begin() + static_cast<long>(base), cols.end()), n);
}

DeltaResult delta_k(const ConvexBody& body, const Vec& p, const Vec& v, int k, const Settings& s) {
  check_point(body, p);
  if (v.size() != body.real_dim()) throw InputError("direction has the wrong dimension");
  const int d = body.kdim();
  if (k < 1 || k > d)
    throw PreconditionError("k must lie in [1, " + std::to_string(d) + "], got " + std::to_string(k));
  const Field field = body.field();
  const int n = body.real_dim();
  const Vec u = canonical_direction(v, field);

  DeltaResult out;
  out.line_value = body.line_distance(p, u, s).value;
  if (k == 1) {
    out.value = out.line_value;
    out.frame = complete_frame(u, Mat(n, 0), 1, field);
    out.starts = 1;
    return out;
  }
  if (k == d) {
    out.value = body.boundary_distance(p, s).value;
    out.frame = complete_frame(u, Mat::Identity(n, n), k, field);
    out.starts = 1;
    return out;
  }

  std::vector<Mat> starts;
  // Coordinate frames: u together with k-1 coordinate K-axes.
  {
    std::vector<bool> pick(d, false);
    std::fill(pick.begin(), pick.begin() + (k - 1), true);
    int count = 0;
    do {
      Mat E(n, k - 1);
      int c = 0;
      for (int i = 0; i < d; ++i)
        if (pick[i]) E.col(c++) = unit(n, i * step(field));
      starts.push_back(complete_frame(u, E, k, field));
    } while (++count < 16 && std::prev_permutation(pick.begin(), pick.end()));
  }
  // Frame avoiding the direction of the nearest boundary point.
  {
    const SliceResult near = body.plane_slice_distance(p, Mat::Identity(n, n), s);
    const Mat G = complete_frame(u, near.direction, 2, field);
    starts.push_back(complete_frame(u, frame_complement(G, field), k, field));
  }
  // delta^(1) bounds every slice from above, so a structured start that
  // reaches it is already optimal (the ball away from k = d, for instance).
  for (auto it = starts.rbegin(); it != starts.rend(); ++it) {
    int evals = 0;
    const double v0 = slice(body, p, *it, s, evals);
    ++out.evaluations;
    if (std::isfinite(out.line_value) && v0 >= out.line_value * (1.0 - 1e-9)) {
      out.value = v0;
      out.frame = *it;
      out.starts = static_cast<int>(std::distance(starts.rbegin(), it)) + 1;
      return out;
    }
  }
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int r = 0; r < s.restarts; ++r) {
    Mat R(n, k - 1);
    for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = gauss(rng);
    starts.push_back(complete_frame(u, R, k, field));
  }

  std::vector<AscentResult> results(starts.size(), AscentResult{0.0, Mat(), 0});
  parallel_for(static_cast<int>(starts.size()), s.workers,
               [&](int i) { results[i] = ascend(body, p, starts[i], s); });

  size_t best = 0;
  double worst = kInf;
  for (size_t i = 0; i < results.size(); ++i) {
    out.evaluations += results[i].evaluations;
    if (results[i].value > results[best].value) best = i;
    worst = std::min(worst, results[i].value);
  }
  out.value = results[best].value;
  out.frame = results[best].frame;
  out.starts = static_cast<int>(starts.size());
  out.restart_spread = std::isfinite(out.value) ? (out.value - worst) / out.value : 0.0;
  return out;
}

MetricValue qk_norm(const ConvexBody& body, const Vec& p, const Vec& v, int k, const Settings& s) {
  MetricValue out;
  check_point(body, p);
  if (v.size() != body.real_dim()) throw InputError("direction has the wrong dimension");
  if (k < 1 || k > body.kdim())
    throw PreconditionError("k must lie in [1, " + std::to_string(body.kdim()) + "], got " + std::to_string(k));
  const double nv = v.norm();
  if (nv == 0.0) {
    out.frame = Mat(body.real_dim(), 0);
    return out;
  }
  const DeltaResult d = delta_k(body, p, v, k, s);
  out.delta = d.value;
  out.frame = d.frame;
  out.value = std::isinf(d.value) ? 0.0 : nv / d.value;
  out.upper = out.value;
  out.lower = std::min(out.value, std::isinf(d.line_value) ? 0.0 : nv / d.line_value);
  out.restart_spread = d.restart_spread;
  return out;
}

double minimal_metric_halfspace(const Vec& p, const Vec& v) {
  if (p.size() != v.size() || p.size() < 1) throw InputError("point and direction differ in dimension");
  if (!(p(0) > 0.0)) throw PreconditionError("point must satisfy p_1 > 0");
  return std::abs(v(0)) / (2.0 * p(0));
}

Sandwich minimal_sandwich(const ConvexBody& body, const Vec& p, const Vec& v, const Settings& s) {
  if (body.field() != Field::Real) throw PreconditionError("minimal-metric bounds need a real body");
  if (body.kdim() < 3) throw PreconditionError("minimal-metric bounds need dimension at least 3");
  check_point(body, p);
  if (v.norm() == 0.0) return {};
  const double q2 = qk_norm(body, p, v, 2, s).value;
  return {0.5 * q2, q2};
}

QuasiNormal quasi_normal_at(const ConvexBody& body, const Vec& x, const Settings& s) {
  if (!body.bounded()) throw PreconditionError("quasi-normals need a bounded body");
  if (!body.on_boundary(x, 1e-8, s)) throw PreconditionError("point is not on the boundary");
  QuasiNormal q;
  q.x = x;
  const Vec d = body.base_point() - x;
  q.r = d.norm();
  q.n = d / q.r;
  q.delta = body.boundary_distance(body.base_point(), s).value;
  return q;
}

bool tangent_line_misses(const ConvexBody& body, const Vec& x, const Vec& v0, const Settings& s) {
  (void)s;
  if (body.contains(x)) return false;
  const Vec u = v0.normalized();
  const Vec ju = body.field() == Field::Complex ? apply_J(u) : Vec::Zero(u.size());
  const int phases = body.field() == Field::Complex ? 8 : 1;
  for (int e = -24; e <= 8; ++e) {
    const double tau = std::pow(2.0, e) * body.scale();
    for (int ph = 0; ph < 2 * phases; ++ph) {
      const double a = kPi * ph / phases;
      if (body.contains(x + tau * (std::cos(a) * u + std::sin(a) * ju))) return false;
    }
  }
  return true;
}

DecompositionSample decomposition_sample(const ConvexBody& body, const QuasiNormal& qn, double t, double s,
                                         const Vec& v0, int k, const Settings& st) {
  if (!(t > 0.0) || t > qn.r) throw PreconditionError("depth t must lie in (0, r]");
  if (s == 0.0 || v0.norm() == 0.0) throw PreconditionError("both components must be nonzero");
  if (!tangent_line_misses(body, qn.x, v0, st)) throw PreconditionError("tangent line meets the body");
  DecompositionSample out;
  out.t = t;
  out.s = s;
  const Vec p = qn.x + t * qn.n;
  const Vec sn = s * qn.n;
  const Vec v = sn + v0;
  out.delta_n = body.line_distance(p, qn.n, st).value;
  out.delta_v0 = body.line_distance(p, v0, st).value;
  out.delta_v = body.line_distance(p, v, st).value;
  out.q_sn = qk_norm(body, p, sn, k, st).value;
  out.q_v0 = qk_norm(body, p, v0, k, st).value;
  out.q_v = qk_norm(body, p, v, k, st).value;
  const double nv = v.norm(), n0 = v0.norm(), as = std::abs(s);
  out.harmonic_ratio = out.delta_v / (nv / (as / out.delta_n + n0 / out.delta_v0));
  out.min_ratio = out.delta_v / std::min(nv / as * out.delta_n, nv / n0 * out.delta_v0);
  out.split_ratio = (out.q_sn + out.q_v0) / out.q_v;
  return out;
}

DecompositionReport decomposition_audit(const ConvexBody& body, int k, int samples, std::uint64_t seed,
                                        const Settings& s) {
  if (!body.bounded()) throw PreconditionError("decomposition audit needs a bounded body");
  const int n = body.real_dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  struct Job {
    QuasiNormal qn;
    double t, s;
    Vec v0;
  };
  std::vector<Job> jobs;
  DecompositionReport rep;
  for (int attempt = 0; static_cast<int>(jobs.size()) < samples && attempt < 20 * samples; ++attempt) {
    Vec dir(n), g(n);
    for (int i = 0; i < n; ++i) {
      dir(i) = gauss(rng);
      g(i) = gauss(rng);
    }
    const double tlog = unif(rng), slog = unif(rng), ssign = unif(rng), pick = unif(rng);
    const Vec x = body.boundary_point(dir, s);
    const auto normals = body.outer_normals(x, s);
    const Vec nu = normals[std::min(normals.size() - 1, static_cast<size_t>(pick * normals.size()))];
    Vec v0 = g - nu.dot(g) * nu;
    if (body.field() == Field::Complex) {
      const Vec jn = apply_J(nu);
      v0 -= jn.dot(v0) * jn;
    }
    if (v0.norm() < 1e-6 || !tangent_line_misses(body, x, v0, s)) {
      ++rep.skipped;
      continue;
    }
    QuasiNormal qn = quasi_normal_at(body, x, s);
    const double t = qn.r * std::exp(std::log(1e-3) * tlog);
    const double sv = (ssign < 0.5 ? -1.0 : 1.0) * std::exp(std::log(0.1) + std::log(100.0) * slog);
    jobs.push_back({std::move(qn), t, sv, v0.normalized()});
  }

  rep.records.resize(jobs.size());
  Settings inner = s;
  inner.workers = 1;
  parallel_for(static_cast<int>(jobs.size()), s.workers, [&](int i) {
    const Job& j = jobs[i];
    rep.records[i] = decomposition_sample(body, j.qn, j.t, j.s, j.v0, k, inner);
  });
  for (const auto& r : rep.records) {
    ++rep.samples;
    rep.min_harmonic_ratio = std::min(rep.min_harmonic_ratio, r.harmonic_ratio);
    rep.max_min_ratio = std::max(rep.max_min_ratio, r.min_ratio);
    rep.max_split_ratio = std::max(rep.max_split_ratio, r.split_ratio);
    rep.min_split_ratio = std::min(rep.min_split_ratio, r.split_ratio);
  }
  if (rep.samples > 0) rep.split_constant = std::max(rep.max_split_ratio, 1.0 / rep.min_split_ratio);
  return rep;
}

}  // namespace qhyp
