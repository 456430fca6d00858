// Acceptance runner: one PASS/FAIL line per criterion. Tolerances are pinned
// below; nothing here reads a tolerance from the command line.

#include "qhyp/filling.hpp"
#include "qhyp/hyperbolicity.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace qhyp;

namespace {

// Criterion 1
constexpr double kHalfspaceMetricRel = 0.02;
constexpr double kSandwichTightRel = 0.02;
constexpr double kRuntime1 = 10.0;
// Criterion 2
constexpr double kArctanhAbs = 1e-9;
constexpr double kHilbertSandwichSlack = 0.02;
constexpr int kDiskPairs = 50;
constexpr double kRuntime2 = 120.0;
// Criterion 3
constexpr double kBallLambda = 0.50, kBallLambdaTol = 0.05;
constexpr double kQuarticLambda = 0.25, kQuarticLambdaTol = 0.03;
constexpr double kFlatLambdaMin = -0.02, kFlatLambdaMax = 0.05;
constexpr double kRuntime3PerDomain = 60.0;
// Criterion 4
constexpr double kRadialAgreementRel = 0.01;
// Criterion 5
constexpr double kQuasiGeodesicMargin = -1e-4;
constexpr int kQuasiGeodesicPairs = 100;
// Criterion 6
constexpr double kDiskDeltaSpread = 0.20;
constexpr double kRuntime6 = 300.0;
// Criterion 7
constexpr double kT0Expected = 0.793147, kT0Abs = 5e-7;
constexpr double kLExpected = 1.0;
constexpr int kStarCurves = 200, kStarMaxN = 60;
constexpr int kAuditTrials = 100;
constexpr double kResidualCorrMax = 0.1;
constexpr double kRuntime7 = 180.0;
// Criterion 8
constexpr int kDecompositionSamples = 200;
constexpr double kSeedStabilityRel = 0.15;
// Criterion 9
constexpr double kBallGapSpread = 2.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[FAILED] ";
    }
    detail << what << "; ";
  }
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Mat col(std::initializer_list<double> xs) { return Mat(make_vec(xs)); }

// {(x - 1)^2 + y^4 < 1}: quartic contact at (0, 0).
ConvexBody quartic_cap() {
  SublevelSet set;
  set.g = [](const Vec& X) { return (X(0) - 1) * (X(0) - 1) + std::pow(X(1), 4) - 1.0; };
  set.bounding_center = make_vec({1.0, 0.0});
  set.bounding_radius = 1.5;
  set.label = "quartic cap";
  return ConvexBody::sublevel(set, make_vec({1.0, 0.0}));
}

// ---------------------------------------------------------------------------

void criterion1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto H = ConvexBody::halfspace(3, make_vec({1, 0, 0}));
  const Vec p = make_vec({1, 0, 0}), e1 = unit(3, 0);
  // Oracle for p on the positive side and v with v_1 != 0: p_1 |v| / |v_1|
  // at p = (1, 0, 0), v = e_1 evaluates to 1.
  const double oracle = p(0) * e1.norm() / std::abs(e1(0));
  const double q = qk_norm(H, p, e1, 2).value;
  o.require(std::abs(q - oracle) <= kHalfspaceMetricRel * oracle,
            "q^(2)((1,0,0); e1) = " + fmt(q) + " vs " + fmt(oracle));

  // Minimal metric closed form, compared exactly on random points.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-2, 2), P(0.05, 3);
  int exact = 0, sandwich_ok = 0, tight = 0;
  const int n = 20;
  double worst_tight = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec pp = make_vec({P(rng), U(rng), U(rng)});
    Vec v = make_vec({U(rng), U(rng), U(rng)});
    const double m = minimal_metric_halfspace(pp, v);
    exact += (m == std::abs(v(0)) / (2 * std::abs(pp(0)))) ? 1 : 0;
    const double qq = qk_norm(H, pp, v, 2).value;
    const bool in = 0.5 * qq <= m * (1 + 1e-12) && m <= qq * (1 + 1e-12);
    sandwich_ok += in ? 1 : 0;
    const double rel = std::abs(m - 0.5 * qq) / m;
    worst_tight = std::max(worst_tight, rel);
    tight += rel <= kSandwichTightRel ? 1 : 0;
  }
  o.require(exact == n, "m(p;v) = |v1|/(2|p1|) exactly on " + std::to_string(exact) + "/" + std::to_string(n));
  o.require(sandwich_ok == n, "q/2 <= m <= q on " + std::to_string(sandwich_ok) + "/" + std::to_string(n));
  o.require(tight == n, "lower bound tight, worst relative gap " + fmt(worst_tight, 3));
  const double t = seconds_since(t0);
  o.require(t < kRuntime1, "runtime " + fmt(t, 3) + " s");
}

void criterion2(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  double worst = 0.0;
  for (double r : {0.1, 0.5, 0.9})
    worst = std::max(worst, std::abs(hilbert_distance(D, Vec::Zero(2), make_vec({r, 0})) - std::atanh(r)));
  o.require(worst <= kArctanhAbs, "Hilbert vs arctanh r, worst error " + fmt(worst, 3));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> R(0, 0.9), A(0, 2 * std::numbers::pi);
  auto draw = [&] {
    const double r = std::sqrt(R(rng) / 0.9) * 0.9, a = A(rng);
    return make_vec({r * std::cos(a), r * std::sin(a)});
  };
  int inside = 0;
  double lo_ratio = kInf, hi_ratio = 0.0;
  for (int i = 0; i < kDiskPairs; ++i) {
    const Vec p = draw(), q = draw();
    const double dh = hilbert_distance(D, p, q);
    const double up = distance_qk(D, p, q, 1).upper;
    const double ratio = up / dh;
    lo_ratio = std::min(lo_ratio, ratio);
    hi_ratio = std::max(hi_ratio, ratio);
    inside += (up >= dh * (1 - 1e-9) && up <= 2 * dh * (1 + kHilbertSandwichSlack)) ? 1 : 0;
  }
  o.require(inside == kDiskPairs, "d_H <= upper <= 2.04 d_H on " + std::to_string(inside) + "/" +
                                      std::to_string(kDiskPairs) + " pairs, ratio in [" + fmt(lo_ratio, 4) + ", " +
                                      fmt(hi_ratio, 4) + "]");
  const double t = seconds_since(t0);
  o.require(t < kRuntime2, "runtime " + fmt(t, 3) + " s");
}

void criterion3(Outcome& o) {
  const auto grid = dyadic_grid(4, 14);
  o.require(grid.size() == 11 && grid.front() == std::ldexp(1.0, -4) && grid.back() == std::ldexp(1.0, -14),
            "dyadic grid j in [4,14]");

  auto timed = [&](const std::string& name, const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double t = seconds_since(t0);
    o.require(t < kRuntime3PerDomain, name + " runtime " + fmt(t, 3) + " s");
  };

  timed("ball", [&] {
    auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
    AuditOptions opt;
    opt.grid = grid;
    opt.boundary_points = 8;
    opt.frames_per_point = 2;
    opt.random_frames_per_point = 1;
    for (int k : {1, 2, 3}) {
      // The reported family: tangential frames, or every frame when k = 3.
      auto rep = expansion_audit(B, k, opt);
      const bool tangential_family = rep.family == "tangential";
      double lo = kInf, hi = -kInf;
      int used = 0;
      for (const auto& e : rep.entries) {
        if (e.tangential != tangential_family) continue;
        lo = std::min(lo, e.fit.lambda);
        hi = std::max(hi, e.fit.lambda);
        ++used;
      }
      o.require(used > 0 && lo >= kBallLambda - kBallLambdaTol && hi <= kBallLambda + kBallLambdaTol,
                "ball k=" + std::to_string(k) + " lambda in [" + fmt(lo, 4) + ", " + fmt(hi, 4) + "] over " +
                    std::to_string(used) + " entries (" + rep.family + ")");
    }
  });

  timed("quartic", [&] {
    // Graph domain {x > y^4} at its flat point (0, 0), tangent frame e_y.
    auto G = graph_domain(PolynomialR::monomial(1, {4}));
    auto fit = fit_expansion(expansion_profile(G, Vec::Zero(2), make_vec({1, 0}), col({0, 1}), grid));
    o.require(std::abs(fit.lambda - kQuarticLambda) <= kQuarticLambdaTol,
              "quartic graph lambda " + fmt(fit.lambda, 4));
    // Smooth cap with the same contact, audited with the flat point included.
    AuditOptions opt;
    opt.grid = grid;
    opt.boundary_points = 6;
    opt.frames_per_point = 1;
    opt.random_frames_per_point = 0;
    opt.extra_points = {Vec::Zero(2)};
    auto rep = expansion_audit(quartic_cap(), 1, opt);
    o.require(std::abs(rep.entries.front().fit.lambda - kQuarticLambda) <= kQuarticLambdaTol,
              "quartic cap audit at the flat point lambda " + fmt(rep.entries.front().fit.lambda, 4));
  });

  timed("cube", [&] {
    auto C = ConvexBody::cube(3);
    AuditOptions opt;
    opt.grid = grid;
    opt.boundary_points = 8;
    opt.frames_per_point = 2;
    opt.random_frames_per_point = 0;
    // Face centres with frames inside the face.
    int flat = 0, total = 0;
    double lo = kInf, hi = -kInf;
    for (int axis = 0; axis < 3; ++axis)
      for (double sgn : {-1.0, 1.0}) {
        const Vec x = sgn * unit(3, axis);
        const Mat V = Mat(unit(3, (axis + 1) % 3));
        auto fit = fit_expansion(expansion_profile(C, x, Vec::Zero(3), V, grid));
        lo = std::min(lo, fit.lambda);
        hi = std::max(hi, fit.lambda);
        flat += fit.verdict == Verdict::Flat ? 1 : 0;
        ++total;
      }
    o.require(lo >= kFlatLambdaMin && hi <= kFlatLambdaMax && flat == total,
              "cube faces lambda in [" + fmt(lo, 3) + ", " + fmt(hi, 3) + "], flat " + std::to_string(flat) + "/" +
                  std::to_string(total));
    auto rep = expansion_audit(C, 1, opt);
    o.require(rep.verdict == "flat witnesses found", "cube audit verdict \"" + rep.verdict + "\"");
  });
}

void criterion4(Outcome& o) {
  int calls = 0, violations = 0;
  double worst_gap = 0.0;  // max (lower - upper) / upper, must stay <= 0
  auto probe = [&](const ConvexBody& b, const Vec& p, const Vec& q, int k) {
    // distance_qk raises InternalCheckError itself when lower > upper; the
    // runner turns that into a failure.
    const DistanceResult d = distance_qk(b, p, q, k);
    ++calls;
    if (d.upper > 0) worst_gap = std::max(worst_gap, (d.lower - d.upper) / d.upper);
    violations += d.lower <= d.upper ? 0 : 1;
    return d;
  };
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  auto S = ConvexBody::cube(2);
  Mat M = Mat::Identity(2, 2);
  M(0, 0) = 0.25;
  auto E = ConvexBody::ellipsoid(Vec::Zero(2), M, Vec::Zero(2));
  auto CB = ConvexBody::ball(Vec::Zero(4), 1.0, Field::Complex);
  for (int i = 0; i < 6; ++i) {
    const Vec p2 = make_vec({U(rng), U(rng)}), q2 = make_vec({U(rng), U(rng)});
    probe(D, p2, q2, 1);
    probe(D, p2, q2, 2);
    probe(S, p2, q2, 1);
    probe(E, p2, q2, 1);
    const Vec p3 = make_vec({U(rng), U(rng), U(rng)}), q3 = make_vec({U(rng), U(rng), U(rng)});
    for (int k : {1, 2, 3}) probe(B, p3, q3, k);
    const Vec p4 = make_vec({U(rng), U(rng), U(rng), U(rng)}) * 0.7, q4 = make_vec({U(rng), U(rng), U(rng), U(rng)}) * 0.7;
    probe(CB, p4, q4, 1);
  }
  o.require(violations == 0, std::to_string(calls) + " distance calls with lower <= upper, worst (lower-upper)/upper " +
                        fmt(worst_gap, 3));
  const auto r = probe(B, Vec::Zero(3), make_vec({0.9, 0, 0}), 3);
  o.require(violations == 0, "radial pair lower <= upper");
  const double rel = (r.upper - r.lower) / r.upper;
  o.require(rel <= kRadialAgreementRel, "ball radial pair lower " + fmt(r.lower, 8) + " upper " + fmt(r.upper, 8));
}

void criterion5(Outcome& o) {
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  const Vec x = make_vec({1, 0, 0});
  for (int k : {1, 3}) {
    RadialCurve c = radial_quasi_geodesic(B, x, Vec::Zero(3), k);
    o.require(std::abs(c.epsilon - 1.0) < 1e-12, "k=" + std::to_string(k) + " epsilon " + fmt(c.epsilon));
    auto rep = quasi_geodesic_check(B, [&](double t) { return c.at(t); }, 0.0, 6.0, k, 1.0 / c.epsilon, 0.0,
                                    kQuasiGeodesicPairs, 5);
    const double worst = std::min(rep.worst_margin_lower, rep.worst_margin_upper);
    o.require(rep.pairs.size() == static_cast<size_t>(kQuasiGeodesicPairs) && worst >= kQuasiGeodesicMargin,
              "k=" + std::to_string(k) + " " + std::to_string(rep.pairs.size()) + " pairs, worst margin " +
                  fmt(worst, 3));
  }
}

void criterion6(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  auto S = ConvexBody::cube(2);
  std::vector<double> disk, square;
  for (int j : {6, 8, 10}) {
    const double depth = std::ldexp(1.0, -j);
    disk.push_back(four_point_delta(hilbert_depth_sample(D, depth, 30, 1).distances).delta);
    square.push_back(four_point_delta(hilbert_depth_sample(S, depth, 30, 1).distances).delta);
  }
  const auto [lo, hi] = std::minmax_element(disk.begin(), disk.end());
  const double spread = (*hi - *lo) / *lo;
  o.require(spread < kDiskDeltaSpread, "disk delta " + fmt(disk[0], 4) + " / " + fmt(disk[1], 4) + " / " +
                                           fmt(disk[2], 4) + " (spread " + fmt(100 * spread, 3) + "%)");
  o.require(square[0] < square[1] && square[1] < square[2],
            "square delta " + fmt(square[0], 4) + " / " + fmt(square[1], 4) + " / " + fmt(square[2], 4));
  const double t = seconds_since(t0);
  o.require(t < kRuntime6, "runtime " + fmt(t, 3) + " s");
}

void criterion7(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = builtin_model_metric();
  const auto k = derive_constants(m);
  o.require(std::abs(k.T0 - kT0Expected) <= kT0Abs, "T0 " + fmt(k.T0, 8));
  o.require(k.L == kLExpected, "L " + fmt(k.L));
  int ok = 0, replayed = 0;
  double worst_ratio = 0.0, worst_diam = 0.0;
  for (int i = 0; i < kStarCurves; ++i) {
    const auto star = random_star_curve(m, k, kStarMaxN, 1000 + i);
    const auto cert = reduce_and_fill(m, star, k);
    double diam = cert.final_diameter;
    for (const auto& st : cert.log)
      for (double d : st.diameters) diam = std::max(diam, d);
    worst_ratio = std::max(worst_ratio, static_cast<double>(cert.triangles) / star.N());
    worst_diam = std::max(worst_diam, diam);
    ok += (star.N() <= kStarMaxN && cert.triangles <= star.N() && diam <= k.R) ? 1 : 0;
    replayed += replay_certificate(star, cert, k.T0) ? 1 : 0;
  }
  o.require(ok == kStarCurves, std::to_string(ok) + "/" + std::to_string(kStarCurves) +
                                   " certificates with triangles <= N and diameters <= R = " + fmt(k.R) +
                                   " (worst triangles/N " + fmt(worst_ratio, 3) + ", worst diameter " +
                                   fmt(worst_diam, 4) + ")");
  o.require(replayed == kStarCurves, std::to_string(replayed) + " certificates replay");
  const auto audit = isoperimetric_audit(m, kAuditTrials, 5.0, 100.0, 1);
  o.require(std::abs(audit.residual_corr) < kResidualCorrMax,
            "isoperimetric fit A " + fmt(audit.A, 4) + " B " + fmt(audit.B, 4) + ", residual-vs-L^2 corr " +
                fmt(audit.residual_corr, 3));
  const double t = seconds_since(t0);
  o.require(t < kRuntime7, "runtime " + fmt(t, 3) + " s");
}

void criterion8(Outcome& o) {
  Mat M = Mat::Identity(3, 3);
  M(0, 0) = 0.25;
  M(1, 1) = 4.0 / 9.0;
  struct Fixture {
    std::string name;
    ConvexBody body;
    int k;
  };
  std::vector<Fixture> fixtures{{"ball", ConvexBody::ball(Vec::Zero(3), 1.0), 1},
                                {"ellipsoid", ConvexBody::ellipsoid(Vec::Zero(3), M, Vec::Zero(3)), 1},
                                {"cube", ConvexBody::cube(3), 1},
                                {"quartic", quartic_cap(), 1}};
  auto stable = [](double a, double b) { return std::abs(a - b) <= kSeedStabilityRel * std::min(a, b); };
  for (const auto& f : fixtures) {
    const auto r1 = decomposition_audit(f.body, f.k, kDecompositionSamples, 1);
    const auto r2 = decomposition_audit(f.body, f.k, kDecompositionSamples, 2);
    const bool finite = std::isfinite(r1.split_constant) && std::isfinite(r2.split_constant) &&
                        std::isfinite(r1.max_min_ratio) && std::isfinite(r2.max_min_ratio) &&
                        r1.min_harmonic_ratio > 0 && r2.min_harmonic_ratio > 0;
    o.require(finite && r1.samples == kDecompositionSamples && r2.samples == kDecompositionSamples,
              f.name + " ratios finite on " + std::to_string(r1.samples) + "+" + std::to_string(r2.samples) +
                  " samples");
    o.require(stable(r1.split_constant, r2.split_constant),
              f.name + " splitting C " + fmt(r1.split_constant, 4) + " / " + fmt(r2.split_constant, 4));
    o.require(stable(r1.max_min_ratio, r2.max_min_ratio),
              f.name + " decomposition upper " + fmt(r1.max_min_ratio, 4) + " / " + fmt(r2.max_min_ratio, 4));
    o.require(stable(r1.min_harmonic_ratio, r2.min_harmonic_ratio),
              f.name + " decomposition lower " + fmt(r1.min_harmonic_ratio, 4) + " / " +
                  fmt(r2.min_harmonic_ratio, 4));
  }
}

void criterion9(Outcome& o) {
  const std::vector<double> gaps{2.0, 4.0, 6.0};
  WitnessOptions opt;
  opt.n = default_witness_n(6.0);
  opt.a = 1.0;

  auto C = ConvexBody::cube(3);
  std::vector<double> cube;
  for (double g : gaps) {
    opt.b = opt.a + g;
    cube.push_back(nonhyperbolicity_witness(C, make_vec({1, 0, 0}), Mat(unit(3, 1)), opt).gap);
  }
  o.require(cube[0] < cube[1] && cube[1] < cube[2],
            "cube k=1 gaps " + fmt(cube[0], 4) + " / " + fmt(cube[1], 4) + " / " + fmt(cube[2], 4));

  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  std::vector<double> ball;
  for (double g : gaps) {
    opt.b = opt.a + g;
    ball.push_back(nonhyperbolicity_witness(B, make_vec({1, 0, 0}), Mat(unit(3, 1)), opt).gap);
  }
  const auto [lo, hi] = std::minmax_element(ball.begin(), ball.end());
  o.require(*lo > 0 && *hi <= kBallGapSpread * *lo,
            "ball gaps " + fmt(ball[0], 4) + " / " + fmt(ball[1], 4) + " / " + fmt(ball[2], 4));
}

const std::vector<std::pair<std::string, std::function<void(Outcome&)>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> list{
      {"half-space closed forms and minimal-metric sandwich", criterion1},
      {"Hilbert distance on the disk and the k=1 sandwich", criterion2},
      {"expansion exponents on ball, quartic and cube", criterion3},
      {"lower bounds never exceed upper bounds", criterion4},
      {"radial curves are (1/eps, 0)-quasi-geodesics", criterion5},
      {"four-point delta: disk stable, square increasing", criterion6},
      {"filling certificates and isoperimetric envelope", criterion7},
      {"decomposition and splitting ratios bounded and seed-stable", criterion8},
      {"witness rectangle gaps", criterion9},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (size_t i = 0; i < criteria().size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria()[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    all_pass = all_pass && o.pass;
    std::printf("criterion %zu: %s  %s  (%.1f s)\n    %s\n", i + 1, o.pass ? "PASS" : "FAIL",
                criteria()[i].first.c_str(), seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
