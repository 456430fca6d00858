#include <doctest.h>

#include "qhyp/metrics.hpp"

#include <cmath>
#include <random>

using namespace qhyp;

namespace {

ConvexBody ellipsoid3() {
  Mat M = Mat::Zero(3, 3);
  M(0, 0) = 1.0;
  M(1, 1) = 0.25;
  M(2, 2) = 4.0;
  return ConvexBody::ellipsoid(Vec::Zero(3), M, Vec::Zero(3));
}

// Independent brute force: maximize the slice distance over random 2-frames containing u.
double brute_delta2(const ConvexBody& body, const Vec& p, const Vec& u, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G;
  const int n = body.real_dim();
  double best = 0.0;
  const Vec un = u.normalized();
  for (int i = 0; i < frames; ++i) {
    Vec w(n);
    for (int j = 0; j < n; ++j) w(j) = G(rng);
    w -= un.dot(w) * un;
    Mat F(n, 2);
    F.col(0) = un;
    F.col(1) = w.normalized();
    best = std::max(best, body.plane_slice_distance(p, F).value);
  }
  return best;
}

}  // namespace

TEST_CASE("canonical direction is shared by all multiples") {
  Vec v = make_vec({0.3, -1.2, 0.7});
  Vec u = canonical_direction(v, Field::Real);
  CHECK((canonical_direction(-2.0 * v, Field::Real) - u).norm() == 0.0);
  CHECK((canonical_direction(0.5 * v, Field::Real) - u).norm() == 0.0);
  Vec w = make_vec({0.3, -1.2, 0.7, 0.1});
  Vec cw = -0.6 * w + 0.8 * apply_J(w);
  CHECK((canonical_direction(cw, Field::Complex) - canonical_direction(w, Field::Complex)).norm() < 1e-14);
}

TEST_CASE("frames are orthonormal and complex frames are J-invariant") {
  Vec u = make_vec({1, 2, 0, -1, 0.5, 0.3});
  Mat R = Mat::Random(6, 2);
  Mat F = complete_frame(u.normalized(), R, 2, Field::Complex);
  CHECK(F.cols() == 4);
  FrameCheck c = check_frame(F, Field::Complex);
  CHECK(c.gram_error < 1e-10);
  CHECK(c.j_residual < 1e-8);
  Mat C = frame_complement(F, Field::Complex);
  CHECK(C.cols() == 2);
  CHECK((F.transpose() * C).norm() < 1e-10);
  CHECK(check_frame(C, Field::Complex).j_residual < 1e-8);
}

TEST_CASE("delta_k on the ball is the radius") {
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  for (int k = 1; k <= 3; ++k) {
    CHECK(delta_k(B, Vec::Zero(3), make_vec({0.2, 1, -3}), k).value == doctest::Approx(1.0));
    CHECK(qk_norm(B, Vec::Zero(3), unit(3, 1), k).value == doctest::Approx(1.0));
  }
  auto sq = ConvexBody::cube(2);
  CHECK(delta_k(sq, make_vec({0.5, 0}), unit(2, 1), 2).value == doctest::Approx(0.5));
}

TEST_CASE("halfspace delta_2 matches the closed form and a brute-force sweep") {
  auto H = ConvexBody::halfspace(3, make_vec({1, 0, 0}));
  const Vec p = make_vec({1, 0, 0});
  auto d = delta_k(H, p, unit(3, 0), 2);
  CHECK(d.value == doctest::Approx(1.0).epsilon(1e-9));
  const double brute = brute_delta2(H, p, unit(3, 0), 100000, 1);
  CHECK(brute <= d.value + 1e-9);
  CHECK(brute == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(qk_norm(H, p, unit(3, 0), 2).value == doctest::Approx(1.0).epsilon(1e-9));

  MetricValue flat = qk_norm(H, p, unit(3, 1), 2);
  CHECK(flat.value == 0.0);
  CHECK(std::isinf(flat.delta));

  // Oblique direction: p_1 |v| / |v_1|.
  Vec v = make_vec({0.6, 0.8, 0});
  CHECK(delta_k(H, p, v, 2).value == doctest::Approx(1.0 / 0.6).epsilon(1e-6));
}

TEST_CASE("q is absolutely homogeneous") {
  auto E = ellipsoid3();
  Vec p = make_vec({0.2, -0.4, 0.1});
  Vec v = make_vec({0.3, 1.0, -0.2});
  for (int k = 1; k <= 3; ++k) {
    const double q = qk_norm(E, p, v, k).value;
    CHECK(qk_norm(E, p, -2.0 * v, k).value == 2.0 * q);
    CHECK(qk_norm(E, p, 0.5 * v, k).value == 0.5 * q);
    CHECK(qk_norm(E, p, 10.0 * v, k).value == doctest::Approx(10.0 * q).epsilon(1e-14));
    CHECK(qk_norm(E, p, Vec::Zero(3), k).value == 0.0);
  }
}

TEST_CASE("delta_k decreases with k and respects its bracket") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  Mat N(6, 4);
  N << 1, 0.2, 0, 0, -1, 0, 0.3, 0, 0, 1, 0, -0.1, 0, -1, 0.4, 0, 0.2, 0.2, 1, 1, -0.3, 0, -1, -1;
  auto P4 = ConvexBody::polytope(N, Vec::Ones(6), Vec::Zero(4));
  auto C4 = ConvexBody::polytope(N, Vec::Ones(6), Vec::Zero(4), Field::Complex);
  for (const ConvexBody* body : {&P4, &C4}) {
    for (int trial = 0; trial < 5; ++trial) {
      Vec p(4), v(4);
      for (int i = 0; i < 4; ++i) {
        p(i) = 0.5 * U(rng);
        v(i) = U(rng);
      }
      double prev = kInf;
      for (int k = 1; k <= body->kdim(); ++k) {
        auto m = qk_norm(*body, p, v, k);
        CHECK(m.lower <= m.value);
        CHECK(m.value <= m.upper);
        CHECK(m.delta <= prev * (1 + 1e-6));
        prev = m.delta;
        if (body->field() == Field::Complex) CHECK(check_frame(m.frame, Field::Complex).j_residual < 1e-8);
      }
    }
  }
}

TEST_CASE("delta_k grows with the domain") {
  auto small = ConvexBody::ball(Vec::Zero(3), 1.0);
  Mat M = Mat::Identity(3, 3) / 4.0;
  auto big = ConvexBody::ellipsoid(Vec::Zero(3), M, Vec::Zero(3));
  auto cube = ConvexBody::cube(3, 1.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    Vec p = make_vec({U(rng), U(rng), U(rng)});
    Vec v = make_vec({U(rng), U(rng), U(rng)});
    for (int k = 1; k <= 3; ++k) {
      CHECK(delta_k(small, p, v, k).value <= delta_k(cube, p, v, k).value * (1 + 1e-6));
      CHECK(delta_k(cube, p, v, k).value <= delta_k(big, p, v, k).value * (1 + 1e-6));
    }
  }
}

TEST_CASE("optimizer value dominates a brute-force frame sweep") {
  auto cube = ConvexBody::cube(3, 1.0);
  auto E = ellipsoid3();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  for (const ConvexBody* body : {&cube, &E}) {
    for (int trial = 0; trial < 3; ++trial) {
      Vec p = make_vec({U(rng), 0.5 * U(rng), 0.3 * U(rng)});
      Vec v = make_vec({U(rng), U(rng), U(rng)});
      if (!body->contains(p)) continue;
      const double opt = delta_k(*body, p, v, 2).value;
      const double brute = brute_delta2(*body, p, v, 10000, 100 + trial);
      CHECK(opt >= brute * (1 - 1e-6));
    }
  }
}

TEST_CASE("ball slices away from k = d reach the line value") {
  // A k-plane through p containing u and orthogonal to the rest of p has
  // the chord's offset |p.u|, so delta^(k) = sqrt(1 - |p|^2 + (p.u)^2) - |p.u|.
  auto B = ConvexBody::ball(Vec::Zero(4), 1.0);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> G;
  for (int trial = 0; trial < 8; ++trial) {
    Vec p(4), v(4);
    for (int j = 0; j < 4; ++j) p(j) = G(rng), v(j) = G(rng);
    p *= 0.8 / p.norm() * (trial + 1) / 8.0;
    const Vec u = v.normalized();
    const double a = std::abs(p.dot(u));
    const double exact = std::sqrt(1 - p.squaredNorm() + a * a) - a;
    for (int k = 1; k <= 3; ++k) {
      const DeltaResult d = delta_k(B, p, v, k);
      CHECK(d.value == doctest::Approx(exact).epsilon(1e-9));
      CHECK(d.value <= d.line_value * (1 + 1e-9));
      if (k > 1) CHECK(d.restart_spread == 0.0);
    }
  }
  // The certified exit never applies when k = d would disagree with the line.
  const Vec p = make_vec({0.5, 0, 0, 0});
  CHECK(delta_k(B, p, unit(4, 1), 4).value == doctest::Approx(0.5));
  CHECK(delta_k(B, p, unit(4, 1), 3).value == doctest::Approx(std::sqrt(0.75)));
}

TEST_CASE("optimizer result is independent of the worker count") {
  auto E = ellipsoid3();
  Settings one, four;
  four.workers = 4;
  Vec p = make_vec({0.3, 0.2, -0.1});
  Vec v = make_vec({1, 1, 1});
  auto a = delta_k(E, p, v, 2, one), b = delta_k(E, p, v, 2, four);
  CHECK(a.value == b.value);
  CHECK((a.frame - b.frame).norm() == 0.0);
}

TEST_CASE("minimal metric on the halfspace") {
  CHECK(minimal_metric_halfspace(make_vec({1, 0, 0}), unit(3, 0)) == 0.5);
  CHECK(minimal_metric_halfspace(make_vec({1, 0, 0}), unit(3, 1)) == 0.0);
  CHECK(minimal_metric_halfspace(make_vec({0.25, 3, -1}), make_vec({1, 1, 1})) == 2.0);
  CHECK_THROWS_AS(minimal_metric_halfspace(make_vec({0, 1, 1}), unit(3, 0)), PreconditionError);

  auto H = ConvexBody::halfspace(3, make_vec({1, 0, 0}));
  Sandwich sw = minimal_sandwich(H, make_vec({1, 0, 0}), unit(3, 0));
  CHECK(sw.lower == doctest::Approx(0.5));
  CHECK(sw.upper == doctest::Approx(1.0));
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  sw = minimal_sandwich(B, Vec::Zero(3), unit(3, 0));
  CHECK(sw.lower == doctest::Approx(0.5));
  CHECK(sw.upper == doctest::Approx(1.0));
  sw = minimal_sandwich(B, Vec::Zero(3), Vec::Zero(3));
  CHECK(sw.upper == 0.0);
  CHECK_THROWS_AS(minimal_sandwich(ConvexBody::cube(2), Vec::Zero(2), unit(2, 0)), PreconditionError);
}

TEST_CASE("quasi-normals") {
  auto disk = ConvexBody::ball(Vec::Zero(2), 1.0);
  QuasiNormal q = quasi_normal_at(disk, make_vec({1, 0}));
  CHECK((q.n - make_vec({-1, 0})).norm() < 1e-15);
  CHECK(q.r == 1.0);
  CHECK(q.delta == 1.0);
  q = quasi_normal_at(ConvexBody::cube(2), make_vec({1, 1}));
  CHECK((q.n + make_vec({1, 1}).normalized()).norm() < 1e-15);
  CHECK(q.r == doctest::Approx(std::sqrt(2.0)));
  CHECK(q.delta == 1.0);
  Mat M = Mat::Zero(2, 2);
  M(0, 0) = 0.25;
  M(1, 1) = 1.0;
  auto E = ConvexBody::ellipsoid(Vec::Zero(2), M, Vec::Zero(2));
  q = quasi_normal_at(E, make_vec({2, 0}));
  CHECK(q.r == 2.0);
  CHECK(q.delta == doctest::Approx(1.0));
  CHECK(E.boundary_distance(q.x + q.r * q.n).value >= q.delta - 1e-9);
  CHECK_THROWS_AS(quasi_normal_at(disk, make_vec({0.5, 0})), PreconditionError);
}

TEST_CASE("decomposition sample on the disk") {
  auto disk = ConvexBody::ball(Vec::Zero(2), 1.0);
  QuasiNormal q = quasi_normal_at(disk, make_vec({-1, 0}));
  auto r = decomposition_sample(disk, q, 0.1, 1.0, unit(2, 1), 1);
  CHECK(r.delta_n == doctest::Approx(0.1));
  CHECK(r.delta_v0 == doctest::Approx(std::sqrt(1 - 0.81)));
  CHECK(r.delta_v0 == doctest::Approx(0.43589).epsilon(1e-5));
  CHECK(r.harmonic_ratio >= 1.0 - 1e-12);
  CHECK(r.split_ratio >= 1.0 - 1e-12);
  CHECK_THROWS_AS(decomposition_sample(disk, q, 0.1, 1.0, make_vec({1, 1}), 1), PreconditionError);
}

TEST_CASE("decomposition audit ratios are bounded on the ball") {
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  auto rep = decomposition_audit(B, 2, 40, 5);
  CHECK(rep.samples == 40);
  CHECK(rep.min_harmonic_ratio >= 1.0 - 1e-9);
  CHECK(std::isfinite(rep.max_min_ratio));
  CHECK(std::isfinite(rep.split_constant));
  CHECK(rep.split_constant >= 1.0);
}
