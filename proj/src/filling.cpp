#include "qhyp/filling.hpp"

#include "qhyp/geodesy.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace qhyp {

namespace {

constexpr double kJoinTol = 1e-9;
constexpr double kLengthSlack = 1e-9;

struct Rule {
  std::vector<double> x, w;
  Rule() { gauss_legendre(8, x, w); }
};

const Rule& rule8() {
  static const Rule r;
  return r;
}

double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

double segment_length(const ModelMetric& m, ModelPoint a, ModelPoint b) {
  const double dx = b.x - a.x, dt = b.t - a.t;
  if (dx == 0.0 && dt == 0.0) return 0.0;
  const double ratio = (dt != 0.0) ? std::abs(std::log(b.t / a.t)) / 0.25 : 0.0;
  const int n = std::clamp(static_cast<int>(std::ceil(std::max({ratio, std::abs(dx) / 0.125, 1.0}))), 1, 4096);
  const Rule& q = rule8();
  double total = 0.0;
  double s0 = 0.0;
  for (int j = 1; j <= n; ++j) {
    double s1;
    if (j == n) {
      s1 = 1.0;
    } else if (dt != 0.0) {
      const double tj = a.t * std::pow(b.t / a.t, static_cast<double>(j) / n);
      s1 = (tj - a.t) / dt;
    } else {
      s1 = static_cast<double>(j) / n;
    }
    const double h = s1 - s0;
    for (size_t i = 0; i < q.x.size(); ++i) {
      const double s = s0 + h * q.x[i];
      total += h * q.w[i] * m.norm(a.x + s * dx, a.t + s * dt, dx, dt);
    }
    s0 = s1;
  }
  return total;
}

// Point at parameter s of segment [a, b].
ModelPoint lerp(ModelPoint a, ModelPoint b, double s) { return {a.x + s * (b.x - a.x), a.t + s * (b.t - a.t)}; }

int start_level(const Piece& p) {
  if (p.kind == PieceKind::Horizontal) return p.level;
  return p.down ? p.level : p.level + 1;
}

int end_level(const Piece& p) {
  if (p.kind == PieceKind::Horizontal) return p.level;
  return p.down ? p.level + 1 : p.level;
}

double start_x(const Piece& p) { return p.kind == PieceKind::Horizontal ? p.path.front() : p.x; }
double end_x(const Piece& p) { return p.kind == PieceKind::Horizontal ? p.path.back() : p.x; }

bool joins(const Piece& a, const Piece& b) {
  return end_level(a) == start_level(b) && circle_gap(end_x(a), start_x(b)) <= kJoinTol;
}

bool loop_closed(const std::vector<Piece>& w) {
  for (size_t i = 0; i < w.size(); ++i)
    if (!joins(w[i], w[(i + 1) % w.size()])) return false;
  return true;
}

std::string describe(const Piece& p) {
  std::ostringstream os;
  if (p.kind == PieceKind::Vertical)
    os << "V(x=" << p.x << ", level=" << p.level << (p.down ? ", down)" : ", up)");
  else
    os << "H(level=" << p.level << ", " << p.path.front() << " -> " << p.path.back() << ")";
  return os.str();
}

double horizontal_length(const ModelMetric& m, int level, const std::vector<double>& path, double T0) {
  const double t = level_height(level, T0);
  double total = 0.0;
  for (size_t i = 1; i < path.size(); ++i) total += segment_length(m, {path[i - 1], t}, {path[i], t});
  return total;
}

// b's path continued from the end of a's path.
std::vector<double> concat_paths(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out = a;
  const double shift = std::round(a.back() - b.front());
  for (size_t i = 1; i < b.size(); ++i) out.push_back(b[i] + shift);
  return out;
}

std::vector<Piece> reversed_list(const std::vector<Piece>& w) {
  std::vector<Piece> out;
  for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back(it->reversed());
  return out;
}

// Replaces `removed` pieces starting at pos (cyclically) by `added`.
std::vector<Piece> splice(const std::vector<Piece>& w, int pos, int removed, const std::vector<Piece>& added) {
  const int n = static_cast<int>(w.size());
  std::vector<Piece> out;
  if (pos + removed <= n) {
    out.insert(out.end(), w.begin(), w.begin() + pos);
    out.insert(out.end(), added.begin(), added.end());
    out.insert(out.end(), w.begin() + pos + removed, w.end());
  } else {
    const int wrap = pos + removed - n;
    out.insert(out.end(), added.begin(), added.end());
    out.insert(out.end(), w.begin() + wrap, w.begin() + pos);
  }
  return out;
}

std::vector<Piece> cyclic_slice(const std::vector<Piece>& w, int pos, int count) {
  std::vector<Piece> out;
  for (int j = 0; j < count; ++j) out.push_back(w[(pos + j) % w.size()]);
  return out;
}

// Unwrapped polyline through the pieces, each shifted to continue the last.
ModelPath pieces_to_path(const std::vector<Piece>& w, double T0) {
  ModelPath out;
  double shift = 0.0;
  for (const Piece& p : w) {
    ModelPath pts;
    if (p.kind == PieceKind::Vertical) {
      pts.push_back(p.start(T0));
      pts.push_back(p.end(T0));
    } else {
      const double t = level_height(p.level, T0);
      for (double x : p.path) pts.push_back({x, t});
    }
    if (!out.empty()) shift = std::round(out.back().x - pts.front().x);
    for (size_t i = out.empty() ? 0 : 1; i < pts.size(); ++i) out.push_back({pts[i].x + shift, pts[i].t});
  }
  return out;
}

// Upper bound on the diameter of a closed loop of pieces: half its length;
// otherwise every point is within half the longest segment of a vertex, and
// vertices are compared through a hub point or pairwise.
double certify_diameter(const ModelMetric& m, const std::vector<Piece>& loop, const FillingConstants& k) {
  const ModelPath path = pieces_to_path(loop, k.T0);
  double best = 0.5 * path_length(m, path);
  if (best <= k.R) return best;
  double longest = 0.0, top = 0.0;
  for (size_t i = 1; i < path.size(); ++i) longest = std::max(longest, segment_length(m, path[i - 1], path[i]));
  for (const auto& p : path) top = std::max(top, p.t);
  for (double hx : {0.0, 0.25, 0.5, 0.75}) {
    double far = 0.0;
    for (const auto& p : path) far = std::max(far, model_distance(m, p, {hx, top}, false).upper);
    best = std::min(best, 2.0 * far + longest);
  }
  if (best <= k.R || path.size() > 200) return best;
  double pairs = 0.0;
  for (size_t i = 0; i < path.size(); ++i)
    for (size_t j = i + 1; j < path.size(); ++j)
      pairs = std::max(pairs, model_distance(m, path[i], path[j], false).upper);
  return std::min(best, pairs + longest);
}

void check_metric(const ModelMetric& m) {
  if (!m.norm) throw InputError("model metric has no norm");
  for (double c : {m.C1, m.C2, m.C3, m.lambda})
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("model metric constants must be positive and finite");
}

void check_point(ModelPoint p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.t) || !(p.t > 0.0) || p.t > 1.0)
    throw InputError("curve exits M x (0,1]");
}

}  // namespace

// --- metrics -------------------------------------------------------------------

ModelMetric builtin_model_metric() {
  ModelMetric m;
  m.name = "builtin";
  m.norm = [](double, double t, double v, double w) { return std::abs(v) / t + std::abs(w) / t; };
  return m;
}

ModelMetric euclidean_model_metric() {
  ModelMetric m;
  m.name = "euclidean";
  m.C2 = std::sqrt(2.0);
  m.norm = [](double, double t, double v, double w) { return std::hypot(v, w) / t; };
  return m;
}

ModelMetric power_model_metric(double mu) {
  if (!(mu > 0.0)) throw InputError("power metric exponent must be positive");
  ModelMetric m;
  m.name = "power";
  m.lambda = mu;
  m.norm = [mu](double, double t, double v, double w) { return std::abs(v) / std::pow(t, mu) + std::abs(w) / t; };
  return m;
}

ConditionReport check_conditions(const ModelMetric& m, int samples, std::uint64_t seed) {
  check_metric(m);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> G(0.0, 1.0);
  ConditionReport r;
  r.samples = samples;
  auto height = [&] { return std::exp(-8.0 * U(rng)); };
  for (int i = 0; i < samples; ++i) {
    const double x = U(rng), t = height(), v = G(rng), w = G(rng);
    const double vert = m.norm(x, t, 0.0, w);
    const double lo = std::abs(w) / (m.C1 * t), hi = m.C1 * std::abs(w) / t;
    if (hi > 0.0) r.a = std::max(r.a, std::max(lo - vert, vert - hi) / hi);

    const double full = m.norm(x, t, v, w);
    const double split = m.norm(x, t, v, 0.0) + m.norm(x, t, 0.0, w);
    if (full > 0.0) r.b = std::max(r.b, (split - m.C2 * full) / (m.C2 * full));

    double s = height(), t2 = height();
    if (s > t2) std::swap(s, t2);
    const double low = m.norm(x, s, v, 0.0);
    const double rhs = m.C3 * std::pow(t2 / s, m.lambda) * m.norm(x, t2, v, 0.0);
    if (rhs > 0.0) r.c = std::max(r.c, (rhs - low) / rhs);
  }
  return r;
}

double path_length(const ModelMetric& m, const ModelPath& path) {
  double total = 0.0;
  for (size_t i = 1; i < path.size(); ++i) total += segment_length(m, path[i - 1], path[i]);
  return total;
}

ModelDistance model_distance(const ModelMetric& m, ModelPoint a, ModelPoint b, bool refine) {
  check_metric(m);
  check_point(a);
  check_point(b);
  ModelDistance out;
  out.lower = std::abs(std::log(b.t / a.t)) / (m.C1 * m.C2);
  if (circle_gap(a.x, b.x) == 0.0 && a.t == b.t) {
    out.path = {a};
    return out;
  }
  // Canonical order makes the result symmetric.
  ModelPoint p{wrap01(a.x), a.t}, q{wrap01(b.x), b.t};
  const bool swapped = std::make_pair(q.x, q.t) < std::make_pair(p.x, p.t);
  if (swapped) std::swap(p, q);

  double best = kInf;
  ModelPath best_path;
  auto consider = [&](ModelPath path) {
    path.erase(std::unique(path.begin(), path.end(),
                           [](ModelPoint u, ModelPoint v) { return u.x == v.x && u.t == v.t; }),
               path.end());
    const double len = path_length(m, path);
    if (len < best) {
      best = len;
      best_path = std::move(path);
    }
  };

  const double d = q.x - p.x;
  const double r_lo = std::log(std::min(p.t, q.t));
  for (double delta : {d, d > 0 ? d - 1.0 : d + 1.0}) {
    const double y = p.x + delta;
    consider({p, {y, q.t}});
    if (delta == 0.0 && d == 0.0) continue;
    auto hv = [&](double r) {
      const double u = std::exp(r);
      return ModelPath{p, {p.x, u}, {y, u}, {y, q.t}};
    };
    auto cost = [&](double r) { return path_length(m, hv(r)); };
    constexpr int grid = 33;
    double r_best = 0.0, c_best = kInf;
    for (int i = 0; i < grid; ++i) {
      const double r = r_lo * (1.0 - static_cast<double>(i) / (grid - 1));
      const double c = cost(r);
      if (c < c_best) c_best = c, r_best = r;
    }
    const double step = -r_lo / (grid - 1);
    double lo = std::max(r_lo, r_best - step), hi = std::min(0.0, r_best + step);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = cost(x1), f2 = cost(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      if (f1 < f2) {
        hi = x2, x2 = x1, f2 = f1;
        x1 = hi - g * (hi - lo), f1 = cost(x1);
      } else {
        lo = x1, x1 = x2, f1 = f2;
        x2 = lo + g * (hi - lo), f2 = cost(x2);
      }
    }
    consider(hv(r_best));
    consider(hv(f1 < f2 ? x1 : x2));
  }

  if (refine && best_path.size() >= 2) {
    // Densify, then coordinate descent on interior vertices in (x, log t).
    ModelPath path;
    for (size_t i = 0; i + 1 < best_path.size(); ++i) {
      path.push_back(best_path[i]);
      path.push_back(lerp(best_path[i], best_path[i + 1], 0.5));
    }
    path.push_back(best_path.back());
    double cur = path_length(m, path);
    for (double step = 0.05; step > 1e-7; step *= 0.5) {
      bool moved = true;
      for (int pass = 0; pass < 20 && moved; ++pass) {
        moved = false;
        for (size_t i = 1; i + 1 < path.size(); ++i) {
          for (int coord = 0; coord < 2; ++coord) {
            for (double sgn : {1.0, -1.0}) {
              ModelPoint old = path[i];
              if (coord == 0) {
                path[i].x += sgn * step;
              } else {
                path[i].t = std::min(1.0, path[i].t * std::exp(sgn * step));
              }
              const double len = path_length(m, path);
              if (len < cur - 1e-15) {
                cur = len;
                moved = true;
              } else {
                path[i] = old;
              }
            }
          }
        }
      }
    }
    if (cur < best) best = cur, best_path = path;
  }

  if (swapped) std::reverse(best_path.begin(), best_path.end());
  const double shift = a.x - best_path.front().x;
  for (auto& pt : best_path) pt.x += shift;
  best_path.front() = a;
  out.upper = best;
  out.path = std::move(best_path);
  return out;
}

FillingConstants derive_constants(const ModelMetric& m) {
  check_metric(m);
  FillingConstants k;
  k.T0 = std::max(0.0, std::log(2.0 / m.C3) / m.lambda) + 0.1;
  if (!(m.C3 * std::exp(m.lambda * k.T0) > 2.0)) throw InternalCheckError("T0 does not satisfy C3 e^{lambda T0} > 2");
  k.L = std::max(m.C1 * k.T0, m.C2 / m.C3);

  std::vector<ModelPoint> net;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) net.push_back({i / 8.0, std::exp(-k.T0 * j / 7.0)});
  double diam = 0.0;
  for (size_t i = 0; i < net.size(); ++i)
    for (size_t j = i + 1; j < net.size(); ++j) diam = std::max(diam, model_distance(m, net[i], net[j], false).upper);
  k.diam_num = diam;

  k.R_terms[0] = 2.0;
  k.R_terms[1] = 2.0 * m.C1 * (m.C1 * m.C2 + k.T0);
  k.R_terms[2] = diam;
  k.R_terms[3] = 4.5 * k.L;
  k.R = *std::max_element(std::begin(k.R_terms), std::end(k.R_terms));
  return k;
}

// --- pieces ----------------------------------------------------------------------

Piece Piece::vertical(double x, int level, bool down) {
  Piece p;
  p.kind = PieceKind::Vertical;
  p.x = x;
  p.level = level;
  p.down = down;
  return p;
}

Piece Piece::horizontal(int level, std::vector<double> path) {
  Piece p;
  p.kind = PieceKind::Horizontal;
  p.level = level;
  p.path = std::move(path);
  return p;
}

ModelPoint Piece::start(double T0) const { return {start_x(*this), level_height(start_level(*this), T0)}; }
ModelPoint Piece::end(double T0) const { return {end_x(*this), level_height(end_level(*this), T0)}; }

Piece Piece::reversed() const {
  Piece p = *this;
  if (kind == PieceKind::Vertical)
    p.down = !down;
  else
    std::reverse(p.path.begin(), p.path.end());
  return p;
}

double circle_gap(double x, double y) {
  const double d = wrap01(x - y);
  return std::min(d, 1.0 - d);
}

double piece_length(const ModelMetric& m, const Piece& p, double T0) {
  if (p.kind == PieceKind::Vertical) return segment_length(m, p.start(T0), p.end(T0));
  return horizontal_length(m, p.level, p.path, T0);
}

double star_length(const ModelMetric& m, const StarCurve& c, double T0) {
  double total = 0.0;
  for (const Piece& p : c.word) total += piece_length(m, p, T0);
  return total;
}

int star_depth(const StarCurve& c) {
  int h = 0;
  for (const Piece& p : c.word) h = std::max(h, std::max(start_level(p), end_level(p)));
  return h;
}

void validate_star(const ModelMetric& m, const StarCurve& c, const FillingConstants& k) {
  for (size_t i = 0; i < c.word.size(); ++i) {
    const Piece& p = c.word[i];
    const std::string where = "piece " + std::to_string(i) + " " + (p.kind == PieceKind::Vertical ? "V" : "H");
    if (p.level < 0) throw InputError(where + ": negative level");
    if (p.kind == PieceKind::Horizontal) {
      if (p.path.size() < 2) throw InputError(where + ": horizontal path needs two points");
      for (double x : p.path)
        if (!std::isfinite(x)) throw InputError(where + ": non-finite coordinate");
      const double len = piece_length(m, p, k.T0);
      if (len > k.L + kLengthSlack)
        throw InputError(where + ": horizontal length " + std::to_string(len) + " exceeds L = " + std::to_string(k.L));
    } else if (!std::isfinite(p.x)) {
      throw InputError(where + ": non-finite coordinate");
    }
    if (!joins(p, c.word[(i + 1) % c.word.size()]))
      throw InputError(where + ": does not end where the next piece starts");
  }
}

StarCurve reverse(const StarCurve& c) { return {reversed_list(c.word)}; }

ModelPath star_to_path(const StarCurve& c, double T0) { return pieces_to_path(c.word, T0); }

// --- normalization -----------------------------------------------------------------

namespace {

void check_closed_path(const ModelPath& curve) {
  if (curve.empty()) throw InputError("curve has no points");
  for (const auto& p : curve) check_point(p);
  const ModelPoint a = curve.front(), b = curve.back();
  if (circle_gap(a.x, b.x) > kJoinTol || std::abs(a.t - b.t) > 1e-12)
    throw InputError("curve is not closed");
}

// Level k with |t - e^{-k T0}| tiny, or -1.
int level_of(double t, double T0) {
  const double k = std::round(-std::log(t) / T0);
  if (k < 0) return -1;
  return std::abs(level_height(static_cast<int>(k), T0) - t) <= 1e-12 * t ? static_cast<int>(k) : -1;
}

// Cuts a closed polyline into n arcs of equal length.
std::vector<ModelPath> cut_equal(const ModelMetric& m, const ModelPath& path, int n) {
  std::vector<double> seg(path.size() - 1);
  for (size_t i = 0; i + 1 < path.size(); ++i) seg[i] = segment_length(m, path[i], path[i + 1]);
  const double total = std::accumulate(seg.begin(), seg.end(), 0.0);
  std::vector<ModelPath> arcs;
  ModelPath cur{path.front()};
  size_t i = 0;
  double done = 0.0;   // length before segment i
  double s_in = 0.0;   // parameter of the current position inside segment i
  for (int j = 1; j < n; ++j) {
    const double target = total * j / n;
    while (i < seg.size() && done + seg[i] < target) {
      done += seg[i];
      cur.push_back(path[i + 1]);
      ++i;
      s_in = 0.0;
    }
    if (i >= seg.size()) break;
    // Bisect for the parameter inside segment i reaching the target length.
    double lo = s_in, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (done + segment_length(m, path[i], lerp(path[i], path[i + 1], mid)) < target)
        lo = mid;
      else
        hi = mid;
    }
    const ModelPoint cut = lerp(path[i], path[i + 1], hi);
    cur.push_back(cut);
    arcs.push_back(cur);
    cur = {cut};
    s_in = hi;
  }
  for (size_t r = i; r + 1 < path.size(); ++r) cur.push_back(path[r + 1]);
  arcs.push_back(cur);
  return arcs;
}

// Appends `piece` to `out`, shifting its path so it continues from `prev`.
void append_continuing(ModelPath& out, const ModelPath& piece) {
  if (out.empty()) {
    out = piece;
    return;
  }
  const double shift = out.back().x - piece.front().x;
  for (size_t i = 1; i < piece.size(); ++i) out.push_back({piece[i].x + shift, piece[i].t});
}

ModelPath vertical_path(double x, double t0, double t1) { return {{x, t0}, {x, t1}}; }

double loop_half_length(const ModelMetric& m, const std::vector<ModelPath>& parts) {
  ModelPath loop;
  for (const auto& p : parts) append_continuing(loop, p);
  return 0.5 * path_length(m, loop);
}

}  // namespace

std::optional<StarCurve> as_star_curve(const ModelMetric& m, const ModelPath& curve, const FillingConstants& k) {
  check_closed_path(curve);
  StarCurve out;
  std::vector<double> run;
  int run_level = -1;
  double run_len = 0.0;
  auto flush = [&] {
    if (run.size() >= 2) out.word.push_back(Piece::horizontal(run_level, run));
    run.clear();
    run_len = 0.0;
  };
  for (size_t i = 0; i + 1 < curve.size(); ++i) {
    const ModelPoint a = curve[i], b = curve[i + 1];
    if (a.x == b.x && a.t == b.t) continue;
    if (a.t == b.t) {
      const int lev = level_of(a.t, k.T0);
      if (lev < 0) return std::nullopt;
      const double len = segment_length(m, a, b);
      if (len > k.L + kLengthSlack) return std::nullopt;
      if (lev != run_level || run_len + len > k.L + kLengthSlack) {
        flush();
        run_level = lev;
        run = {a.x};
      }
      run.push_back(b.x);
      run_len += len;
    } else if (a.x == b.x) {
      flush();
      run_level = -1;
      const int la = level_of(a.t, k.T0), lb = level_of(b.t, k.T0);
      if (la < 0 || lb < 0) return std::nullopt;
      if (lb > la)
        for (int l = la; l < lb; ++l) out.word.push_back(Piece::vertical(a.x, l, true));
      else
        for (int l = la - 1; l >= lb; --l) out.word.push_back(Piece::vertical(a.x, l, false));
    } else {
      return std::nullopt;
    }
  }
  flush();
  if (!loop_closed(out.word)) return std::nullopt;
  return out;
}

namespace {

// Sequence of (x - x0, t) compared lexicographically; picks the orientation
// that is normalized so a curve and its reverse give mirrored results.
bool prefer_reversed(const ModelPath& c) {
  const size_t n = c.size();
  const double x0 = c.front().x, xr = c.back().x;
  for (size_t i = 0; i < n; ++i) {
    const ModelPoint a = c[i], b = c[n - 1 - i];
    const double ax = a.x - x0, bx = b.x - xr;
    if (ax != bx) return bx < ax;
    if (a.t != b.t) return b.t < a.t;
  }
  return false;
}

Normalized normalize_oriented(const ModelMetric& m, const ModelPath& curve, const FillingConstants& k);

}  // namespace

Normalized normalize_to_star(const ModelMetric& m, const ModelPath& curve, const FillingConstants& k) {
  check_metric(m);
  check_closed_path(curve);
  if (auto star = as_star_curve(m, curve, k)) {
    Normalized out;
    NormalizeReport& rep = out.report;
    rep.length_in = path_length(m, curve);
    out.star = *star;
    rep.already_star = true;
    rep.length_mid = rep.length_in;
    rep.N_bound = (1.0 + rep.length_mid) * (2.0 + 2.0 * m.C1 * m.C2 / k.T0);
    rep.length_ok = true;
    rep.N_ok = out.star.N() <= rep.N_bound;
    return out;
  }
  if (!prefer_reversed(curve)) return normalize_oriented(m, curve, k);
  ModelPath rev(curve.rbegin(), curve.rend());
  Normalized out = normalize_oriented(m, rev, k);
  out.star = reverse(out.star);
  return out;
}

namespace {

Normalized normalize_oriented(const ModelMetric& m, const ModelPath& curve, const FillingConstants& k) {
  Normalized out;
  NormalizeReport& rep = out.report;
  rep.length_in = path_length(m, curve);
  const double bound_factor = 2.0 + 2.0 * m.C1 * m.C2 / k.T0;

  if (rep.length_in == 0.0) {
    rep.length_ok = rep.N_ok = true;
    rep.N_bound = bound_factor;
    return out;
  }

  // Step one: equal arcs of length <= 1, each replaced by a vertical-
  // horizontal-vertical path between its endpoints when that is not longer.
  const int n1 = std::max(1, static_cast<int>(std::ceil(rep.length_in - 1e-12)));
  rep.arcs_first = n1;
  ModelPath mid;
  double max_diam = 0.0;
  for (const ModelPath& arc : cut_equal(m, curve, n1)) {
    const double arc_len = path_length(m, arc);
    const ModelDistance d = model_distance(m, arc.front(), arc.back(), false);
    const ModelPath& use = d.upper <= arc_len ? d.path : arc;
    max_diam = std::max(max_diam, 0.5 * (arc_len + std::min(d.upper, arc_len)));
    append_continuing(mid, use.size() >= 2 ? use : ModelPath{arc.front(), arc.front()});
  }
  rep.length_mid = path_length(m, mid);
  rep.length_ok = rep.length_mid <= rep.length_in + 1.0 + 1e-12;
  rep.regions += n1;

  // Step two: snap each arc to the level just above it.
  const int n2 = std::max(1, static_cast<int>(std::ceil(rep.length_mid - 1e-12)));
  rep.arcs_second = n2;
  const std::vector<ModelPath> arcs = cut_equal(m, mid, n2);
  const int n = static_cast<int>(arcs.size());
  std::vector<int> h(n);
  for (int i = 0; i < n; ++i) {
    double tmax = 0.0;
    for (const auto& p : arcs[i]) tmax = std::max(tmax, p.t);
    h[i] = std::max(0, static_cast<int>(std::floor(-std::log(tmax) / k.T0 + 1e-9)));
  }
  for (int i = 0; i < n; ++i) {
    const ModelPath& arc = arcs[i];
    const double level_t = level_height(h[i], k.T0);
    std::vector<double> xs;
    for (const auto& p : arc)
      if (xs.empty() || xs.back() != p.x) xs.push_back(p.x);
    double travel = 0.0;
    for (size_t j = 1; j < xs.size(); ++j) travel += std::abs(xs[j] - xs[j - 1]);
    if (travel > 1e-12) {
      Piece H = Piece::horizontal(h[i], xs);
      const double len = piece_length(m, H, k.T0);
      if (len > k.L + kLengthSlack)
        throw InternalCheckError("snapped horizontal longer than L: " + std::to_string(len));
      out.star.word.push_back(std::move(H));
    }
    const int next = h[(i + 1) % n];
    const double xe = arc.back().x;
    if (next > h[i])
      for (int l = h[i]; l < next; ++l) out.star.word.push_back(Piece::vertical(xe, l, true));
    else
      for (int l = h[i] - 1; l >= next; --l) out.star.word.push_back(Piece::vertical(xe, l, false));

    // Region between the arc and its snapped copy, and the region between the
    // vertical stack and the two connecting verticals.
    ModelPath flat;
    for (double x : xs) flat.push_back({x, level_t});
    if (flat.size() == 1) flat.push_back(flat.front());
    ModelPath back_flat(flat.rbegin(), flat.rend());
    const double d1 = loop_half_length(m, {arc, vertical_path(xe, arc.back().t, level_t), back_flat,
                                           vertical_path(arc.front().x, level_t, arc.front().t)});
    const double next_t = level_height(next, k.T0);
    const ModelPoint next_start = arcs[(i + 1) % n].front();
    const double d2 = loop_half_length(m, {vertical_path(xe, level_t, next_t),
                                           vertical_path(xe, next_t, next_start.t),
                                           vertical_path(xe, next_start.t, level_t)});
    max_diam = std::max({max_diam, d1, d2});
  }
  rep.regions += 2 * n;
  rep.max_region_diameter = max_diam;
  if (max_diam > k.R) throw InternalCheckError("normalization region diameter exceeds R: " + std::to_string(max_diam));

  rep.N_bound = (1.0 + rep.length_mid) * bound_factor;
  rep.N_ok = out.star.N() <= rep.N_bound;
  if (!rep.length_ok) throw InternalCheckError("reconnected curve longer than L_I + 1");
  if (!rep.N_ok) throw InternalCheckError("star curve has more pieces than the normalization bound");
  if (!out.star.word.empty()) validate_star(m, out.star, k);
  return out;
}

}  // namespace

// --- surgery -------------------------------------------------------------------------

FillingCertificate reduce_and_fill(const ModelMetric& m, const StarCurve& star, const FillingConstants& k) {
  check_metric(m);
  validate_star(m, star, k);
  FillingCertificate cert;
  cert.N_input = star.N();
  cert.R = k.R;
  std::vector<Piece> w = star.word;
  const int max_steps = 2 * cert.N_input + 2;

  auto certify = [&](SurgeryStep& st, const std::vector<Piece>& loop) {
    if (!loop_closed(loop)) throw InternalCheckError("surgery region " + st.tag + " is not a closed loop");
    const double d = certify_diameter(m, loop, k);
    if (d > k.R) {
      std::string what = "case " + st.tag + " region diameter " + std::to_string(d) + " exceeds R = " +
                         std::to_string(k.R) + ":";
      for (const Piece& p : loop) what += " " + describe(p);
      throw InternalCheckError(what);
    }
    st.diameters.push_back(d);
    st.regions.push_back(loop);
  };
  auto lifted_len = [&](const Piece& p) { return piece_length(m, p, k.T0); };

  for (int step = 0; !w.empty(); ++step) {
    if (step > max_steps) throw InternalCheckError("surgery did not terminate within 2N steps");
    const int N = static_cast<int>(w.size());
    const int h = star_depth({w});
    SurgeryStep st;
    st.depth = h;
    st.N_before = N;

    if (h <= 1 || N <= 3) {
      st.tag = "base";
      st.removed = N;
      st.triangles = 1;
      certify(st, w);
      cert.final_diameter = st.diameters.back();
      cert.triangles += 1;
      st.N_after = 0;
      cert.log.push_back(std::move(st));
      w.clear();
      break;
    }

    bool has_deep_h = false, all_deep_h = true;
    for (const Piece& p : w) {
      const bool deep = p.kind == PieceKind::Horizontal && p.level == h;
      has_deep_h = has_deep_h || deep;
      all_deep_h = all_deep_h && deep;
    }

    if (!has_deep_h) {
      st.tag = "1";
      int at = -1;
      for (int i = 0; i < N && at < 0; ++i) {
        const Piece &a = w[i], &b = w[(i + 1) % N];
        if (a.kind == PieceKind::Vertical && a.down && a.level == h - 1 && b.kind == PieceKind::Vertical && !b.down &&
            b.level == h - 1)
          at = i;
      }
      if (at < 0) throw InternalCheckError("no cancelling vertical pair at the deepest level");
      st.position = at;
      st.removed = 2;
    } else if (all_deep_h) {
      st.tag = "2";
      if (h < 2) throw PreconditionError("lifting an all-horizontal curve two levels needs depth >= 2");
      st.position = 0;
      st.removed = N;
      int i = 0;
      while (i < N) {
        Piece group = Piece::horizontal(h - 2, w[i].path);
        if (lifted_len(group) > k.L + kLengthSlack)
          throw InternalCheckError("lifted horizontal longer than L");
        int j = i + 1;
        while (j < N && j - i < 4) {
          Piece trial = Piece::horizontal(h - 2, concat_paths(group.path, w[j].path));
          if (lifted_len(trial) > k.L + kLengthSlack) break;
          group = std::move(trial);
          ++j;
        }
        // Region: down two levels, the original run, up two levels, back along the lift.
        std::vector<Piece> loop;
        const double xs = w[i].path.front(), xe = w[j - 1].path.back();
        loop.push_back(Piece::vertical(xs, h - 2, true));
        loop.push_back(Piece::vertical(xs, h - 1, true));
        for (int r = i; r < j; ++r) loop.push_back(w[r]);
        loop.push_back(Piece::vertical(xe, h - 1, false));
        loop.push_back(Piece::vertical(xe, h - 2, false));
        loop.push_back(group.reversed());
        certify(st, loop);
        st.added.push_back(std::move(group));
        i = j;
      }
      if (static_cast<double>(st.added.size()) > N / 4.0 + 1.0)
        throw InternalCheckError("lift left more than N/4 + 1 horizontals");
    } else {
      int at = -1;
      for (int i = 0; i < N && at < 0; ++i) {
        const Piece &a = w[i], &b = w[(i + 1) % N];
        if (a.kind == PieceKind::Vertical && a.down && a.level == h - 1 && b.kind == PieceKind::Horizontal &&
            b.level == h)
          at = i;
      }
      if (at < 0) throw InternalCheckError("no vertical entering a deepest horizontal");
      const Piece& H1 = w[(at + 1) % N];
      const Piece& next = w[(at + 2) % N];
      st.position = at;
      st.removed = 3;
      if (next.kind == PieceKind::Vertical) {
        st.tag = "3a";
        if (next.down || next.level != h - 1) throw InternalCheckError("unexpected piece after a deepest horizontal");
        Piece lifted = Piece::horizontal(h - 1, H1.path);
        if (lifted_len(lifted) > 0.5 * piece_length(m, H1, k.T0) + kLengthSlack)
          throw InternalCheckError("lifted horizontal not halved");
        st.added.push_back(std::move(lifted));
      } else {
        st.tag = "3b";
        if (next.level != h) throw InternalCheckError("unexpected horizontal after a deepest horizontal");
        Piece lifted = Piece::horizontal(h - 1, concat_paths(H1.path, next.path));
        if (lifted_len(lifted) > k.L + kLengthSlack) throw InternalCheckError("merged lift longer than L");
        const double x3 = lifted.path.back();
        st.added.push_back(std::move(lifted));
        st.added.push_back(Piece::vertical(x3, h - 1, true));
      }
    }

    if (st.tag != "2") {
      std::vector<Piece> loop = cyclic_slice(w, st.position, st.removed);
      for (const Piece& p : reversed_list(st.added)) loop.push_back(p);
      certify(st, loop);
    }
    st.triangles = static_cast<int>(st.regions.size());
    w = splice(w, st.position, st.removed, st.added);
    st.N_after = static_cast<int>(w.size());
    if (st.N_after >= st.N_before) throw InternalCheckError("surgery case " + st.tag + " did not shorten the word");
    if (!w.empty() && !loop_closed(w)) throw InternalCheckError("surgery case " + st.tag + " broke the curve");
    cert.triangles += st.triangles;
    cert.log.push_back(std::move(st));
  }

  if (cert.triangles > cert.N_input)
    throw InternalCheckError("filling used " + std::to_string(cert.triangles) + " regions for N = " +
                             std::to_string(cert.N_input));
  return cert;
}

bool replay_certificate(const StarCurve& input, const FillingCertificate& cert, double, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  std::vector<Piece> w = input.word;
  if (!w.empty() && !loop_closed(w)) return fail("input is not closed");
  int triangles = 0;
  for (size_t s = 0; s < cert.log.size(); ++s) {
    const SurgeryStep& st = cert.log[s];
    const std::string at = "step " + std::to_string(s) + " (" + st.tag + ")";
    if (static_cast<int>(w.size()) != st.N_before) return fail(at + ": word length mismatch");
    for (const auto& region : st.regions)
      if (!loop_closed(region)) return fail(at + ": region is not closed");
    if (st.triangles != static_cast<int>(st.regions.size())) return fail(at + ": triangle count mismatch");
    triangles += st.triangles;
    if (st.tag == "base") {
      if (s + 1 != cert.log.size()) return fail(at + ": base case is not last");
      if (st.regions.size() != 1 || st.regions[0] != w) return fail(at + ": base region is not the word");
      w.clear();
      continue;
    }
    const std::vector<Piece> removed = cyclic_slice(w, st.position, st.removed);
    if (st.tag == "2") {
      if (st.removed != st.N_before) return fail(at + ": lift must replace the whole word");
      std::vector<Piece> lower, upper;
      for (const auto& region : st.regions)
        for (const Piece& p : region) {
          if (p.kind != PieceKind::Horizontal) continue;
          if (p.level == st.depth)
            lower.push_back(p);
          else if (p.level == st.depth - 2)
            upper.push_back(p.reversed());
        }
      if (lower != removed) return fail(at + ": regions do not cover the word");
      if (upper != st.added) return fail(at + ": regions do not cover the lifted word");
    } else {
      std::vector<Piece> loop = removed;
      for (const Piece& p : reversed_list(st.added)) loop.push_back(p);
      if (st.regions.size() != 1 || st.regions[0] != loop) return fail(at + ": region boundary mismatch");
    }
    w = splice(w, st.position, st.removed, st.added);
    if (static_cast<int>(w.size()) != st.N_after) return fail(at + ": resulting length mismatch");
    if (!w.empty() && !loop_closed(w)) return fail(at + ": resulting word is not closed");
  }
  if (!w.empty()) return fail("log ends before the word is filled");
  if (triangles != cert.triangles) return fail("triangle total mismatch");
  return true;
}

// --- random curves and the audit ------------------------------------------------------

StarCurve random_star_curve(const ModelMetric& m, const FillingConstants& k, int max_N, std::uint64_t seed) {
  if (max_N < 4) throw InputError("random star curves need max_N >= 4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  // Largest |dx| keeping a horizontal at `level` within L (metrics may depend on x).
  auto reach = [&](int level, double x) {
    double lo = 0.0, hi = 1.0;
    const double t = level_height(level, k.T0);
    if (segment_length(m, {x, t}, {x + hi, t}) <= k.L) return hi;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (segment_length(m, {x, t}, {x + mid, t}) <= k.L ? lo : hi) = mid;
    }
    return lo * (1.0 - 1e-9);
  };
  // Horizontal pieces at `level` from x to x + dx.
  auto walk = [&](std::vector<Piece>& out, int level, double x, double dx) {
    while (dx != 0.0) {
      const double r = reach(level, x);
      const double step = std::abs(dx) <= r ? dx : std::copysign(r, dx);
      out.push_back(Piece::horizontal(level, {x, x + step}));
      x += step;
      dx -= step;
      if (std::abs(dx) < 1e-15) dx = 0.0;
    }
  };

  for (int attempt = 0;; ++attempt) {
    StarCurve c;
    const double x0 = U(rng);
    if (U(rng) < 0.2) {
      // One turn around M at a single level.
      int level = 2 + static_cast<int>(U(rng) * 3);
      std::vector<Piece> w;
      for (; level >= 0; --level) {
        w.clear();
        walk(w, level, x0, U(rng) < 0.5 ? 1.0 : -1.0);
        if (static_cast<int>(w.size()) <= max_N && w.size() >= 4) break;
      }
      if (level < 0) continue;
      c.word = w;
    } else {
      const int k0 = static_cast<int>(U(rng) * 3);
      const int steps = 3 + static_cast<int>(U(rng) * (max_N - 3));
      int lev = k0;
      double x = x0;
      for (int s = 0; s < steps; ++s) {
        const double u = U(rng);
        if (u < 0.3 && lev < 6) {
          c.word.push_back(Piece::vertical(x, lev, true));
          ++lev;
        } else if (u < 0.5 && lev > 0) {
          c.word.push_back(Piece::vertical(x, lev - 1, false));
          --lev;
        } else {
          const double r = reach(lev, x);
          const double dx = (2.0 * U(rng) - 1.0) * r;
          if (dx == 0.0) continue;
          c.word.push_back(Piece::horizontal(lev, {x, x + dx}));
          x += dx;
        }
      }
      for (; lev > k0; --lev) c.word.push_back(Piece::vertical(x, lev - 1, false));
      for (; lev < k0; ++lev) c.word.push_back(Piece::vertical(x, lev, true));
      double back = x0 - x;
      back -= std::round(back);
      if (U(rng) < 0.1) back += (back > 0 ? -1.0 : 1.0);
      walk(c.word, k0, x, back);
    }
    if (c.N() >= 4 && c.N() <= max_N && loop_closed(c.word)) return c;
    if (attempt > 1000) throw InternalCheckError("random star curve generation failed");
  }
}

ModelPath random_closed_path(const ModelMetric& m, double target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const ModelPoint start{U(rng), std::exp(-3.0 * U(rng))};
  ModelPath path{start};
  double len = 0.0;
  while (true) {
    const ModelPoint cur = path.back();
    const ModelDistance home = model_distance(m, cur, start, false);
    if (len + home.upper >= target && path.size() > 2) {
      append_continuing(path, home.path.size() >= 2 ? home.path : ModelPath{cur, cur});
      path.back() = {path.back().x, start.t};
      return path;
    }
    const double theta = 2.0 * std::numbers::pi * U(rng);
    const double ell = 0.2 + 0.8 * U(rng);
    double r = std::log(cur.t) + ell * std::sin(theta);
    if (r > 0.0) r = -r;
    r = std::max(r, -12.0);
    const ModelPoint next{cur.x + ell * cur.t * std::cos(theta), std::exp(r)};
    len += segment_length(m, cur, next);
    path.push_back(next);
  }
}

int filling_triangles(const ModelMetric& m, const ModelPath& curve, const FillingConstants& k) {
  const Normalized nz = normalize_to_star(m, curve, k);
  if (nz.star.word.empty()) return nz.report.regions;
  return nz.report.regions + reduce_and_fill(m, nz.star, k).triangles;
}

IsoperimetricAudit isoperimetric_audit(const ModelMetric& m, int n_trials, double min_length, double max_length,
                                       std::uint64_t seed, int workers) {
  if (n_trials < 0 || !(min_length >= 0.0) || !(max_length >= min_length))
    throw InputError("isoperimetric audit needs n_trials >= 0 and 0 <= min_length <= max_length");
  const FillingConstants k = derive_constants(m);
  IsoperimetricAudit out;
  out.samples.resize(n_trials);
  parallel_for(n_trials, workers, [&](int i) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(i));
    const double target = min_length + (max_length - min_length) * std::uniform_real_distribution<double>(0, 1)(rng);
    const ModelPath path = random_closed_path(m, target, rng());
    const Normalized nz = normalize_to_star(m, path, k);
    IsoperimetricSample s;
    s.length = path_length(m, path);
    s.star_N = nz.star.N();
    s.triangles = nz.report.regions + (nz.star.word.empty() ? 0 : reduce_and_fill(m, nz.star, k).triangles);
    out.samples[i] = s;
  });
  const int n = n_trials;
  if (n == 0) return out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& s : out.samples) {
    sx += s.length, sy += s.triangles, sxx += s.length * s.length, sxy += s.length * s.triangles;
  }
  const double den = n * sxx - sx * sx;
  out.slope = den > 0 ? (n * sxy - sx * sy) / den : 0.0;
  out.intercept = (sy - out.slope * sx) / n;
  out.A = std::max(0.0, out.slope);
  out.B = -kInf;
  for (const auto& s : out.samples) out.B = std::max(out.B, s.triangles - out.A * s.length);

  std::vector<double> res(n), sq(n);
  for (int i = 0; i < n; ++i) {
    const auto& s = out.samples[i];
    res[i] = s.triangles - (out.slope * s.length + out.intercept);
    sq[i] = s.length * s.length;
  }
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  const double mr = mean(res), ms = mean(sq);
  double cov = 0, vr = 0, vs = 0;
  for (int i = 0; i < n; ++i) {
    cov += (res[i] - mr) * (sq[i] - ms);
    vr += (res[i] - mr) * (res[i] - mr);
    vs += (sq[i] - ms) * (sq[i] - ms);
  }
  out.residual_corr = (vr > 0 && vs > 0) ? cov / std::sqrt(vr * vs) : 0.0;
  out.linear = std::abs(out.residual_corr) < 0.1;
  return out;
}

}  // namespace qhyp
