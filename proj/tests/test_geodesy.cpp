#include <doctest.h>

#include "qhyp/geodesy.hpp"

#include <cmath>
#include <random>

using namespace qhyp;

namespace {

ConvexBody disk() { return ConvexBody::ball(Vec::Zero(2), 1.0); }

ConvexBody random_polygon(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 2 * M_PI);
  const int m = 7;
  Mat N(m, 2);
  Vec b(m);
  for (int i = 0; i < m; ++i) {
    const double a = 2 * M_PI * i / m + 0.3 * std::sin(U(rng));
    N(i, 0) = std::cos(a);
    N(i, 1) = std::sin(a);
    b(i) = 1.0 + 0.2 * std::cos(U(rng));
  }
  return ConvexBody::polytope(N, b, Vec::Zero(2));
}

Vec random_point(const ConvexBody& body, std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> U(-spread, spread);
  while (true) {
    Vec p = make_vec({U(rng), U(rng)});
    if (body.contains(p)) return p;
  }
}

}  // namespace

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre(4, x, w);
  double s0 = 0, s7 = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    s0 += w[i];
    s7 += w[i] * std::pow(x[i], 7);
  }
  CHECK(s0 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s7 == doctest::Approx(1.0 / 8).epsilon(1e-14));
}

TEST_CASE("radial path length on the ball is log 10") {
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  PolylinePath path{{Vec::Zero(3), make_vec({0.9, 0, 0})}};
  // Independent value: integral of 1/(1-t) over [0, 0.9].
  const double oracle = std::log(10.0);
  CHECK(oracle == doctest::Approx(2.302585).epsilon(1e-6));
  LengthResult r = path_length_qk(B, path, 3);
  CHECK(r.value == doctest::Approx(oracle).epsilon(1e-5));
  CHECK(path_length_qk(B, PolylinePath{{make_vec({0.2, 0.1, 0})}}, 3).value == 0.0);
}

TEST_CASE("path length is reversal symmetric") {
  auto sq = ConvexBody::cube(2);
  PolylinePath path{{make_vec({-0.5, 0.2}), make_vec({0.1, 0.7}), make_vec({0.8, -0.3})}};
  PolylinePath rev{{path.vertices.rbegin(), path.vertices.rend()}};
  for (int k : {1, 2}) {
    const double a = path_length_qk(sq, path, k).value, b = path_length_qk(sq, rev, k).value;
    CHECK(std::abs(a - b) <= 1e-12 * a);
  }
  CHECK_THROWS_AS(path_length_qk(sq, PolylinePath{{make_vec({0, 0}), make_vec({2, 0})}}, 1), PreconditionError);
}

TEST_CASE("hyperplane lower bounds") {
  auto H = ConvexBody::halfspace(2, make_vec({1, 0}));
  Hyperplane wall{Vec::Zero(2), -unit(2, 0)};
  CHECK(hyperplane_lower_bound(H, make_vec({1, 0}), make_vec({std::exp(1.0), 0}), wall) == doctest::Approx(1.0));
  CHECK(hyperplane_lower_bound(H, make_vec({1, 0}), make_vec({1, 5}), wall) == 0.0);
  auto D = disk();
  Hyperplane tangent{make_vec({1, 0}), unit(2, 0)};
  CHECK(hyperplane_lower_bound(D, Vec::Zero(2), make_vec({0.9, 0}), tangent) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
  Hyperplane cutting{make_vec({0.5, 0}), unit(2, 0)};
  CHECK_THROWS_AS(hyperplane_lower_bound(D, Vec::Zero(2), make_vec({0.4, 0}), cutting), PreconditionError);
}

TEST_CASE("distance on the ball along a radius") {
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  DistanceResult d = distance_qk(B, Vec::Zero(3), make_vec({0.9, 0, 0}), 3);
  CHECK(d.lower <= d.upper);
  CHECK(d.upper == doctest::Approx(std::log(10.0)).epsilon(0.01));
  CHECK(d.lower == doctest::Approx(std::log(10.0)).epsilon(1e-9));
  CHECK((d.upper - d.lower) / d.upper < 0.01);
  for (size_t i = 1; i < d.round_upper.size(); ++i) CHECK(d.round_upper[i] <= d.round_upper[i - 1]);
  DistanceResult z = distance_qk(B, make_vec({0.1, 0.2, 0}), make_vec({0.1, 0.2, 0}), 2);
  CHECK(z.upper == 0.0);
  CHECK(z.lower == 0.0);
  CHECK_THROWS_AS(distance_qk(ConvexBody::halfspace(2, make_vec({1, 0})), make_vec({1, 0}), make_vec({2, 0}), 1),
                  PreconditionError);
}

TEST_CASE("distance is symmetric and satisfies the triangle inequality") {
  auto D = disk();
  auto P = random_polygon(3);
  std::mt19937_64 rng(17);
  for (const ConvexBody* body : {&D, &P}) {
    for (int trial = 0; trial < 3; ++trial) {
      Vec p = random_point(*body, rng, 0.8), q = random_point(*body, rng, 0.8), r = random_point(*body, rng, 0.8);
      auto pq = distance_qk(*body, p, q, 1), qp = distance_qk(*body, q, p, 1);
      CHECK(std::abs(pq.upper - qp.upper) <= 2e-4 * pq.upper);
      auto qr = distance_qk(*body, q, r, 1), pr = distance_qk(*body, p, r, 1);
      CHECK(pq.upper + qr.upper >= pr.upper - 3e-4 * body->scale());
      for (const auto* res : {&pq, &qp, &qr, &pr}) CHECK(res->lower <= res->upper);
    }
  }
}

TEST_CASE("Hilbert distance") {
  auto D = disk();
  CHECK(hilbert_distance(D, Vec::Zero(2), make_vec({0.5, 0})) == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-12));
  CHECK(hilbert_distance(D, Vec::Zero(2), make_vec({0.5, 0})) == doctest::Approx(0.549306).epsilon(1e-6));
  for (double r : {0.1, 0.5, 0.9})
    CHECK(std::abs(hilbert_distance(D, Vec::Zero(2), make_vec({r, 0})) - std::atanh(r)) < 1e-9);
  CHECK(hilbert_distance(D, make_vec({0.2, 0.1}), make_vec({0.2, 0.1})) == 0.0);

  // Projective invariance under an affine map.
  Mat A(2, 2);
  A << 1.5, 0.4, -0.2, 0.7;
  Vec b = make_vec({0.3, -0.8});
  auto P = random_polygon(5);
  std::mt19937_64 rng(21);
  for (const ConvexBody* body : {&D, &P}) {
    auto img = body->transformed(A, b);
    for (int i = 0; i < 10; ++i) {
      Vec p = random_point(*body, rng, 0.7), q = random_point(*body, rng, 0.7);
      CHECK(std::abs(hilbert_distance(*body, p, q) - hilbert_distance(img, A * p + b, A * q + b)) < 1e-9);
    }
  }
  // Triangle inequality on random triples.
  for (const ConvexBody* body : {&D, &P}) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      Vec p = random_point(*body, rng, 0.9), q = random_point(*body, rng, 0.9), r = random_point(*body, rng, 0.9);
      worst = std::max(worst, hilbert_distance(*body, p, r) - hilbert_distance(*body, p, q) -
                                  hilbert_distance(*body, q, r));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("k = 1 distance is sandwiched by the Hilbert distance") {
  auto D = disk();
  std::mt19937_64 rng(23);
  for (int i = 0; i < 5; ++i) {
    Vec p = random_point(D, rng, 0.8), q = random_point(D, rng, 0.8);
    const double h = hilbert_distance(D, p, q);
    const DistanceResult d = distance_qk(D, p, q, 1);
    CHECK(h <= d.upper * (1 + 1e-3));
    CHECK(d.upper <= 2 * h * (1 + 2e-2));
  }
}

TEST_CASE("radial quasi-geodesics") {
  auto D = disk();
  RadialCurve c = radial_quasi_geodesic(D, make_vec({1, 0}), Vec::Zero(2), 1);
  CHECK(c.epsilon == doctest::Approx(1.0));
  CHECK((c.at(0.0) - Vec::Zero(2)).norm() == 0.0);
  CHECK((c.at(1.0) - make_vec({1 - std::exp(-1.0), 0})).norm() < 1e-15);
  RadialCurve sq = radial_quasi_geodesic(ConvexBody::cube(2), make_vec({1, 0}), Vec::Zero(2), 1);
  CHECK(sq.epsilon == doctest::Approx(1.0));
  CHECK_THROWS_AS(radial_quasi_geodesic(D, make_vec({0.5, 0}), Vec::Zero(2), 1), PreconditionError);
}

TEST_CASE("quasi-geodesic check") {
  auto D = disk();
  RadialCurve c = radial_quasi_geodesic(D, make_vec({1, 0}), Vec::Zero(2), 1);
  auto rep = quasi_geodesic_check(D, [&](double t) { return c.at(t); }, 0.0, 5.0, 1, 1.0 / c.epsilon, 0.0, 10, 1);
  CHECK(rep.pass);
  CHECK(rep.worst_margin_lower >= -1e-4);
  CHECK(rep.worst_margin_upper >= -1e-4);

  auto constant = quasi_geodesic_check(D, [](double) { return make_vec({0.3, 0.1}); }, 0.0, 1.0, 1, 1.0, 1.0, 5, 1);
  CHECK(constant.pass);
  CHECK(constant.failed == 0);
}
