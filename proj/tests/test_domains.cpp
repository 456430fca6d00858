#include <doctest.h>

#include "qhyp/domains.hpp"

#include <cmath>
#include <random>

using namespace qhyp;

namespace {

ConvexBody unit_disk() { return ConvexBody::ball(Vec::Zero(2), 1.0); }
ConvexBody square() { return ConvexBody::cube(2, 1.0); }
ConvexBody ellipse_4_1() {
  Mat M = Mat::Zero(2, 2);
  M(0, 0) = 0.25;
  M(1, 1) = 1.0;
  return ConvexBody::ellipsoid(Vec::Zero(2), M, Vec::Zero(2));
}

// { x1^4/1 + x2^4 < 1 }, a body without closed-form oracles.
ConvexBody quartic_ball() {
  SublevelSet s;
  s.g = [](const Vec& x) { return std::pow(x(0), 4) + std::pow(x(1), 4) - 1.0; };
  s.bounding_center = Vec::Zero(2);
  s.bounding_radius = 1.5;
  return ConvexBody::sublevel(s, Vec::Zero(2));
}

std::vector<ConvexBody> all_variants() {
  Mat N(3, 2);
  N << -1, 0, 0, -1, 1, 1;
  return {unit_disk(),
          square(),
          ellipse_4_1(),
          quartic_ball(),
          ConvexBody::pball(1.0, 1.0, Vec::Zero(2), Vec::Zero(2)),
          ConvexBody::pball(3.0, 1.0, Vec::Zero(2), Vec::Zero(2)),
          ConvexBody::polytope(N, make_vec({0.0, 0.0, 1.0}), make_vec({0.25, 0.25}))};
}

}  // namespace

TEST_CASE("complex structure squares to minus identity") {
  for (int i = 0; i < 6; ++i) {
    Vec e = unit(6, i);
    CHECK((apply_J(apply_J(e)) + e).norm() == 0.0);
  }
  CHECK_THROWS_AS(apply_J(Vec::Zero(3)), InputError);
}

TEST_CASE("membership") {
  CHECK(unit_disk().contains(make_vec({0, 0})));
  CHECK_FALSE(unit_disk().contains(make_vec({1, 0})));
  CHECK(square().contains(make_vec({0.5, -0.99})));
  CHECK_THROWS_AS(unit_disk().contains(Vec::Zero(3)), InputError);
}

TEST_CASE("ray hits") {
  CHECK(unit_disk().ray_hit(Vec::Zero(2), unit(2, 0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(square().ray_hit(Vec::Zero(2), make_vec({1, 1})) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  auto H = ConvexBody::halfspace(2, make_vec({1, 0}));
  CHECK(H.ray_hit(make_vec({1, 0}), -unit(2, 0)) == 1.0);
  CHECK(std::isinf(H.ray_hit(make_vec({1, 0}), unit(2, 0))));
  CHECK_THROWS_AS(unit_disk().ray_hit(make_vec({2, 0}), unit(2, 0)), PreconditionError);
  CHECK_THROWS_AS(Ray(Vec::Zero(2), Vec::Zero(2)), InputError);
  Ray r(Vec::Zero(2), make_vec({3, 4}));
  CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
}

TEST_CASE("ray hit brackets the boundary on 100 random rays per variant") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto& body : all_variants()) {
    CAPTURE(body.kind());
    for (int i = 0; i < 100; ++i) {
      Vec p = body.base_point() + 0.3 * make_vec({U(rng), U(rng)});
      if (!body.contains(p)) continue;
      Vec u = make_vec({U(rng), U(rng)}).normalized();
      double t = body.ray_hit(p, u);
      CHECK(body.contains(p + t * (1 - 1e-9) * u));
      CHECK_FALSE(body.contains(p + t * (1 + 1e-9) * u));
    }
  }
}

TEST_CASE("ray hit scales with the body") {
  const double c = 2.5;
  Vec p = make_vec({0.1, -0.2});
  Mat A = c * Mat::Identity(2, 2);
  for (const auto& body : all_variants()) {
    if (!body.contains(p)) continue;
    CAPTURE(body.kind());
    ConvexBody big = body.transformed(A, p - c * p);
    for (const auto& u : sphere_lattice(2, 12)) {
      double t = body.ray_hit(p, u), T = big.ray_hit(p, u);
      CHECK(std::abs(T - c * t) <= 2e-10 * c * t);
    }
  }
}

TEST_CASE("boundary distance closed forms") {
  CHECK(unit_disk().boundary_distance(make_vec({0.3, 0})).value == doctest::Approx(0.7));
  CHECK(square().boundary_distance(make_vec({0.2, -0.5})).value == doctest::Approx(0.5));
  CHECK(ellipse_4_1().boundary_distance(Vec::Zero(2)).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(square().boundary_distance(make_vec({1.5, 0})), PreconditionError);
}

TEST_CASE("ellipsoid boundary distance matches brute force over boundary samples") {
  auto E = ellipse_4_1();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vec p = make_vec({1.6 * U(rng), 0.8 * U(rng)});
    if (!E.contains(p)) continue;
    double brute = kInf;
    for (int i = 0; i < 10000; ++i) {
      double a = 2 * M_PI * i / 10000.0;
      brute = std::min(brute, (make_vec({2 * std::cos(a), std::sin(a)}) - p).norm());
    }
    double d = E.boundary_distance(p).value;
    CHECK(d <= brute + 1e-12);
    CHECK(d >= brute - 2e-3 * 2.0 * M_PI / 10000.0 * 2.0 - 1e-6);
  }
}

TEST_CASE("ball slices match the chord and disk formulas") {
  // Slice of a ball of radius r through p by the plane p + span(F): a disk of
  // radius sqrt(r^2 - |p - proj|^2) centred at the projection of the center.
  std::mt19937_64 rng(31);
  for (double r : {0.5, 1.0, 3.0}) {
    auto B = ConvexBody::ball(Vec::Zero(3), r);
    for (int i = 0; i < 20; ++i) {
      Vec p = 0.6 * r * Vec::Random(3) / std::sqrt(3.0);
      Mat F = orthonormalize(Mat::Random(3, 1 + i % 2));
      if (i % 5 == 0) F.col(0) = (F.col(0) - F.col(0).dot(p) * p / p.squaredNorm()).normalized();
      F = orthonormalize(F);
      const Vec centre = p - F * (F.transpose() * p);
      const double rho = std::sqrt(r * r - centre.squaredNorm());
      const double oracle = rho - (p - centre).norm();
      CHECK(B.plane_slice_distance(p, F).value == doctest::Approx(oracle).epsilon(1e-10));
    }
    // Tangential line next to the boundary: half-chord sqrt(2 r h - h^2).
    const double h = r * std::ldexp(1.0, -14);
    Vec p = make_vec({r - h, 0, 0});
    Mat F = Mat::Zero(3, 1);
    F(1, 0) = 1.0;
    CHECK(B.plane_slice_distance(p, F).value == doctest::Approx(std::sqrt(2 * r * h - h * h)).epsilon(1e-10));
  }
}

TEST_CASE("sampled boundary distance brackets the closed form") {
  Mat M = Mat::Zero(2, 2);
  M(0, 0) = 0.25;
  M(1, 1) = 1.0;
  SublevelSet s;
  s.g = [M](const Vec& x) { return x.dot(M * x) - 1.0; };
  s.bounding_center = Vec::Zero(2);
  s.bounding_radius = 2.0;
  auto sampled = ConvexBody::sublevel(s, Vec::Zero(2));
  auto exact = ellipse_4_1();
  for (Vec p : {make_vec({0, 0}), make_vec({1.2, 0.3}), make_vec({-0.5, -0.6})}) {
    Bracket b = sampled.boundary_distance(p);
    double e = exact.boundary_distance(p).value;
    CHECK(b.lower <= e + 1e-9);
    CHECK(b.upper >= e - 1e-9);
    CHECK(b.value == doctest::Approx(e).epsilon(1e-6));
  }
}

TEST_CASE("line distance") {
  CHECK(unit_disk().line_distance(make_vec({0.3, 0}), unit(2, 1)).value ==
        doctest::Approx(std::sqrt(1 - 0.09)));
  CHECK(square().line_distance(make_vec({0.9, 0}), unit(2, 0)).value == doctest::Approx(0.1));
  auto cdisk = ConvexBody::ball(Vec::Zero(2), 1.0, Field::Complex);
  CHECK(cdisk.line_distance(make_vec({0.5, 0}), make_vec({0.3, -2})).value == doctest::Approx(0.5));
  CHECK_THROWS_AS(square().line_distance(Vec::Zero(2), Vec::Zero(2)), PreconditionError);
}

TEST_CASE("complex line distance never exceeds the real one") {
  Mat N(5, 4);
  N << 1, 0, 0, 0, -1, 0.2, 0, 0, 0, 0, 1, 0.3, 0, -1, 0, -1, 0.3, 0.3, -0.4, 0.5;
  Vec b = make_vec({1, 1, 1, 1, 1});
  auto creal = ConvexBody::polytope(N, b, Vec::Zero(4), Field::Real);
  auto ccplx = ConvexBody::polytope(N, b, Vec::Zero(4), Field::Complex);
  SublevelSet s;
  s.g = [](const Vec& x) { return std::pow(x(0), 4) + x(1) * x(1) + std::pow(x(2), 4) + x(3) * x(3) - 1; };
  s.bounding_center = Vec::Zero(4);
  s.bounding_radius = 2.0;
  auto sreal = ConvexBody::sublevel(s, Vec::Zero(4), Field::Real);
  auto scplx = ConvexBody::sublevel(s, Vec::Zero(4), Field::Complex);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> G;
  for (int i = 0; i < 20; ++i) {
    Vec p(4), v(4);
    for (int j = 0; j < 4; ++j) {
      p(j) = 0.2 * G(rng);
      v(j) = G(rng);
    }
    if (creal.contains(p))
      CHECK(ccplx.line_distance(p, v).value <= creal.line_distance(p, v).value + 1e-12);
    if (sreal.contains(p))
      CHECK(scplx.line_distance(p, v).value <= sreal.line_distance(p, v).value * (1 + 1e-9));
  }
}

TEST_CASE("complex theta search agrees with the closed-form slice") {
  Mat M = Mat::Identity(4, 4);
  M(0, 0) = 0.5;
  M(3, 3) = 2.0;
  SublevelSet s;
  s.g = [M](const Vec& x) { return x.dot(M * x) - 1.0; };
  s.bounding_center = Vec::Zero(4);
  s.bounding_radius = 2.0;
  auto sampled = ConvexBody::sublevel(s, Vec::Zero(4), Field::Complex);
  auto exact = ConvexBody::ellipsoid(Vec::Zero(4), M, Vec::Zero(4), Field::Complex);
  Vec p = make_vec({0.2, -0.1, 0.3, 0.05});
  Vec v = make_vec({1, 0.5, -0.3, 0.8});
  CHECK(sampled.line_distance(p, v).value == doctest::Approx(exact.line_distance(p, v).value).epsilon(1e-7));
}

TEST_CASE("plane slice distance") {
  auto B3 = ConvexBody::ball(Vec::Zero(3), 1.0);
  Mat F(3, 2);
  F << 1, 0, 0, 0.6, 0, 0.8;
  CHECK(B3.plane_slice_distance(Vec::Zero(3), F).value == doctest::Approx(1.0));
  CHECK(square().plane_slice_distance(make_vec({0.5, 0.5}), Mat::Identity(2, 2)).value == doctest::Approx(0.5));

  // Halfspace slice in R^3 through (1,0,0) spanned by e1, e2: analytic p1 / max|u1| = 1.
  auto H = ConvexBody::halfspace(3, make_vec({1, 0, 0}));
  Mat E12 = Mat::Zero(3, 2);
  E12(0, 0) = 1;
  E12(1, 1) = 1;
  double sampled = kInf;
  for (const auto& d : sphere_lattice(2, 512))
    sampled = std::min(sampled, H.ray_hit(make_vec({1, 0, 0}), E12 * d));
  CHECK(sampled == doctest::Approx(1.0));
  CHECK(H.plane_slice_distance(make_vec({1, 0, 0}), E12).value == doctest::Approx(1.0));
}

TEST_CASE("boundary distance is the minimum of line distances") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto& body : all_variants()) {
    CAPTURE(body.kind());
    Vec p = body.base_point() + 0.2 * make_vec({U(rng), U(rng)});
    if (!body.contains(p)) continue;
    Bracket bd = body.boundary_distance(p);
    double best = kInf;
    for (const auto& u : sphere_lattice(2, 2048)) best = std::min(best, body.line_distance(p, u).value);
    CHECK(best >= bd.lower - 1e-9);
    CHECK(best <= bd.upper * (1 + 2e-6) + 1e-9);
  }
}

TEST_CASE("outer normals support the body") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto& body : all_variants()) {
    CAPTURE(body.kind());
    for (const auto& d : sphere_lattice(2, 16)) {
      Vec x = body.boundary_point(d);
      CHECK(body.on_boundary(x));
      for (const auto& n : body.outer_normals(x)) {
        CHECK(n.norm() == doctest::Approx(1.0));
        for (int i = 0; i < 50; ++i) {
          Vec y = body.base_point() + 0.9 * make_vec({U(rng), U(rng)});
          if (body.contains(y)) CHECK(n.dot(y - x) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("affine images preserve membership") {
  Mat A(2, 2);
  A << 2, 1, 0, 0.5;
  Vec b = make_vec({0.3, -1});
  for (const auto& body : all_variants()) {
    CAPTURE(body.kind());
    auto img = body.transformed(A, b);
    for (const auto& d : sphere_lattice(2, 8)) {
      Vec x = body.base_point() + 0.5 * d;
      CHECK(img.contains(A * x + b) == body.contains(x));
    }
  }
}

TEST_CASE("construction validation") {
  CHECK_THROWS_AS(ConvexBody::ball(Vec::Zero(2), -1), InputError);
  Mat N(1, 2);
  N << 1, 0;
  CHECK_THROWS_AS(ConvexBody::polytope(N, make_vec({1}), Vec::Zero(2)), InputError);
  Mat Z = Mat::Zero(2, 2);
  CHECK_THROWS_AS(ConvexBody::polytope(Z, make_vec({1, 1}), Vec::Zero(2)), InputError);
  Mat M(2, 2);
  M << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(ConvexBody::ellipsoid(Vec::Zero(2), M, Vec::Zero(2)), InputError);
  CHECK_THROWS_AS(ConvexBody::pball(1.0, 1.0, Vec::Zero(2), make_vec({1, 0})), InputError);
  CHECK_THROWS_AS(ConvexBody::ball(Vec::Zero(3), 1.0, Field::Complex), InputError);
}

TEST_CASE("midpoint convexity sampling") {
  CHECK(quartic_ball().check_convexity(200, 1).violations == 0);
  SublevelSet s;
  s.g = [](const Vec& x) {
    return std::min(std::max(std::abs(x(0)) - 1.0, std::abs(x(1)) - 0.1),
                    std::max(std::abs(x(1)) - 1.0, std::abs(x(0)) - 0.1));
  };
  s.bounding_center = Vec::Zero(2);
  s.bounding_radius = 1.5;
  auto cross = ConvexBody::sublevel(s, Vec::Zero(2));
  CHECK(cross.check_convexity(500, 1).violations > 0);
}
