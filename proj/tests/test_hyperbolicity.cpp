#include <doctest.h>

#include "qhyp/hyperbolicity.hpp"

#include <cmath>
#include <random>

using namespace qhyp;

namespace {

Mat col(std::initializer_list<double> xs) {
  Vec v = make_vec(xs);
  return Mat(v);
}

ConvexBody quartic_body() {
  SublevelSet set;
  set.g = [](const Vec& X) {
    return std::max({std::pow(X(1), 4) - X(0), X(0) - 2.0, std::abs(X(1)) - 1.1});
  };
  set.bounding_center = make_vec({1.0, 0.0});
  set.bounding_radius = 1.6;
  set.label = "quartic";
  return ConvexBody::sublevel(set, make_vec({1.0, 0.0}));
}

// {(x-1)^2 + y^4 < 1}: smooth, with quartic contact at (0,0) and (2,0).
ConvexBody quartic_cap() {
  SublevelSet set;
  set.g = [](const Vec& X) { return (X(0) - 1) * (X(0) - 1) + std::pow(X(1), 4) - 1.0; };
  set.bounding_center = make_vec({1.0, 0.0});
  set.bounding_radius = 1.5;
  set.label = "quartic cap";
  return ConvexBody::sublevel(set, make_vec({1.0, 0.0}));
}

ExpansionProfile synthetic(const std::vector<double>& t, const std::function<double(double)>& g) {
  ExpansionProfile p;
  p.t = t;
  for (double x : t) p.g.push_back(g(x));
  p.envelope = p.g;
  return p;
}

void check_monotone(const ExpansionProfile& p) {
  // t decreases along the grid, so g must not increase.
  for (size_t i = 1; i < p.g.size(); ++i) CHECK(p.g[i] <= p.g[i - 1] * (1 + 1e-9));
}

}  // namespace

TEST_CASE("dyadic grid") {
  auto g = dyadic_grid();
  REQUIRE(g.size() == 11);
  CHECK(g.front() == 1.0 / 16);
  CHECK(g.back() == std::ldexp(1.0, -14));
  CHECK_THROWS_AS(dyadic_grid(5, 4), InputError);
}

TEST_CASE("expansion profile examples") {
  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  auto prof = expansion_profile(D, make_vec({-1, 0}), Vec::Zero(2), col({0, 1}), {0.5, 0.02});
  // Chord half-length sqrt(1 - (1-t)^2).
  CHECK(prof.g[1] == doctest::Approx(std::sqrt(2 * 0.02 - 0.02 * 0.02)).epsilon(1e-9));
  CHECK(prof.g[1] == doctest::Approx(0.198997).epsilon(1e-6));

  auto sq = ConvexBody::cube(2);
  auto flat = expansion_profile(sq, make_vec({0, -1}), Vec::Zero(2), col({1, 0}), dyadic_grid());
  for (double g : flat.g) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));

  auto Q = quartic_body();
  auto quart = expansion_profile(Q, Vec::Zero(2), make_vec({1, 0}), col({0, 1}), {0.0016});
  CHECK(quart.g[0] == doctest::Approx(0.2).epsilon(1e-8));

  // A grid point of zero leaves x on the boundary and is rejected.
  auto rej = expansion_profile(D, make_vec({-1, 0}), Vec::Zero(2), col({0, 1}), {0.5, 0.0});
  CHECK(rej.g.size() == 1);
  CHECK(rej.rejected.size() == 1);
  CHECK_THROWS_AS(expansion_profile(D, make_vec({-1, 0}), Vec::Zero(2), col({0, 1}), {0.1, 0.2}), InputError);
}

TEST_CASE("fit recovers power laws") {
  const auto grid = dyadic_grid();
  for (double mu : {0.0, 0.25, 0.5, 1.0}) {
    auto fit = fit_expansion(synthetic(grid, [&](double t) { return 3.0 * std::pow(t, mu); }));
    CHECK(std::abs(fit.lambda - mu) < 1e-6);
    CHECK(fit.residual < 1e-9);
    CHECK(fit.C == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(fit_expansion(synthetic(grid, [](double) { return 1.0; })).verdict == Verdict::Flat);
  CHECK(fit_expansion(synthetic(grid, [](double t) { return std::sqrt(t); })).verdict == Verdict::Expanding);
  auto few = fit_expansion(synthetic({0.5, 0.25, 0.125}, [](double t) { return t; }));
  CHECK(few.verdict == Verdict::Inconclusive);
  // Oscillating data: large residual, inconclusive; C is still at least 1.
  auto wiggly = fit_expansion(synthetic(grid, [](double t) { return std::sqrt(t) * (1.5 + std::sin(40 * std::log(t))); }));
  CHECK(wiggly.C >= 1.0);
  CHECK(wiggly.verdict == Verdict::Inconclusive);
}

TEST_CASE("fitted exponents on the fixtures") {
  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  auto disk = fit_expansion(expansion_profile(D, make_vec({-1, 0}), Vec::Zero(2), col({0, 1}), dyadic_grid()));
  // Independent slope of log sqrt(2t - t^2) on the same grid.
  {
    auto oracle = fit_expansion(synthetic(dyadic_grid(), [](double t) { return std::sqrt(2 * t - t * t); }));
    CHECK(disk.lambda == doctest::Approx(oracle.lambda).epsilon(1e-9));
  }
  CHECK(disk.lambda >= 0.45);
  CHECK(disk.lambda <= 0.55);
  CHECK(disk.verdict == Verdict::Expanding);

  auto sq = ConvexBody::cube(2);
  auto flat = fit_expansion(expansion_profile(sq, make_vec({0, -1}), Vec::Zero(2), col({1, 0}), dyadic_grid()));
  CHECK(std::abs(flat.lambda) <= 0.02);
  CHECK(flat.verdict == Verdict::Flat);

  auto Q = quartic_body();
  auto quart = fit_expansion(expansion_profile(Q, Vec::Zero(2), make_vec({1, 0}), col({0, 1}), dyadic_grid()));
  CHECK(quart.lambda >= 0.23);
  CHECK(quart.lambda <= 0.27);
}

TEST_CASE("profiles are monotone and scale invariant") {
  auto D = ConvexBody::ball(Vec::Zero(3), 1.0);
  auto Q = quartic_body();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) {
    Vec d = Vec::Random(3);
    Vec x = D.boundary_point(d);
    Mat V = tangential_frame(x, 1, Field::Real, rng);
    auto p = expansion_profile(D, x, Vec::Zero(3), V, dyadic_grid());
    check_monotone(p);
    for (double c : {0.5, 3.0}) {
      auto scaled = ConvexBody::ball(Vec::Zero(3), c);
      auto ps = expansion_profile(scaled, c * x, Vec::Zero(3), V, dyadic_grid());
      for (size_t j = 0; j < p.g.size(); ++j) CHECK(std::abs(ps.g[j] - c * p.g[j]) <= 1e-12 * c);
      CHECK(fit_expansion(ps).lambda == doctest::Approx(fit_expansion(p).lambda).epsilon(1e-9));
    }
  }
  auto pq = expansion_profile(Q, Vec::Zero(2), make_vec({1, 0}), col({0, 1}), dyadic_grid());
  check_monotone(pq);
  Mat A = 2.5 * Mat::Identity(2, 2);
  auto big = Q.transformed(A, Vec::Zero(2));
  auto pb = expansion_profile(big, Vec::Zero(2), make_vec({2.5, 0}), col({0, 1}), dyadic_grid());
  for (size_t j = 0; j < pq.g.size(); ++j) CHECK(std::abs(pb.g[j] - 2.5 * pq.g[j]) <= 1e-6 * 2.5 * pq.g[j]);
}

TEST_CASE("tangential frames miss the body") {
  std::mt19937_64 rng(9);
  auto C = ConvexBody::cube(3);
  Vec x = make_vec({1, 0.3, -0.2});
  for (const auto& nu : C.outer_normals(x)) {
    Mat V = tangential_frame(nu, 2, Field::Real, rng);
    CHECK((V.transpose() * nu).norm() < 1e-12);
    CHECK((V.transpose() * V - Mat::Identity(2, 2)).norm() < 1e-12);
  }
  Vec nu = make_vec({1, 0, 0, 0});
  Mat W = tangential_frame(nu, 1, Field::Complex, rng);
  CHECK(W.cols() == 2);
  CHECK((W.transpose() * nu).norm() < 1e-12);
  CHECK((W.transpose() * apply_J(nu)).norm() < 1e-12);
  CHECK(check_frame(W, Field::Complex).j_residual < 1e-12);
  CHECK_THROWS_AS(tangential_frame(make_vec({1, 0}), 2, Field::Real, rng), PreconditionError);
}

TEST_CASE("expansion audits") {
  auto B = ConvexBody::ball(Vec::Zero(3), 1.0);
  AuditOptions opt;
  opt.boundary_points = 6;
  opt.frames_per_point = 2;
  for (int k : {1, 2}) {
    auto rep = expansion_audit(B, k, opt);
    CHECK(rep.verdict == "expansion holds (empirical)");
    CHECK(rep.family == "tangential");
    CHECK(rep.min_lambda == doctest::Approx(0.5).epsilon(0.05));
    CHECK(rep.max_C >= 1.0);
  }
  // With k equal to the dimension every slice is the whole body: g(t) = t.
  auto full = expansion_audit(B, 3, opt);
  CHECK(full.family == "all frames");
  CHECK(full.min_lambda == doctest::Approx(1.0).epsilon(1e-6));

  auto C = ConvexBody::cube(3);
  auto cube = expansion_audit(C, 1, opt);
  CHECK(cube.verdict == "flat witnesses found");
  CHECK(!cube.flat_witnesses.empty());
  CHECK(cube.min_lambda <= 0.05);
  CHECK(cube.min_lambda >= -0.02);

  AuditOptions qopt = opt;
  qopt.extra_points = {Vec::Zero(2)};
  // The truncated quartic body has flat sides; the smooth cap does not.
  CHECK(expansion_audit(quartic_body(), 1, opt).verdict == "flat witnesses found");
  auto quart = expansion_audit(quartic_cap(), 1, qopt);
  CHECK(quart.verdict == "expansion holds (empirical)");
  CHECK(quart.min_lambda == doctest::Approx(0.25).epsilon(0.03 / 0.25));
  CHECK(quart.entries.front().fit.lambda == quart.min_lambda);

  // Worker count does not change the report.
  Settings par;
  par.workers = 4;
  auto again = expansion_audit(C, 1, opt, par);
  CHECK(again.min_lambda == cube.min_lambda);
  CHECK(again.flat_witnesses == cube.flat_witnesses);
}

TEST_CASE("four-point delta") {
  // Path metric on a star tree with leaves at distances 1, 2, 3 from the hub.
  Mat T(4, 4);
  T << 0, 1, 2, 3,  //
      1, 0, 3, 4,   //
      2, 3, 0, 5,   //
      3, 4, 5, 0;
  CHECK(four_point_delta(T).delta == 0.0);

  // Four points on a circle of circumference 4 with arc-length metric.
  Mat Cy(4, 4);
  Cy << 0, 1, 2, 1,  //
      1, 0, 1, 2,    //
      2, 1, 0, 1,    //
      1, 2, 1, 0;
  // By hand with w = 0, x = 1, y = 2, z = 3:
  // (1|3)_0 = 1/2 (1 + 1 - 2) = 0, (1|2)_0 = 1/2 (1 + 2 - 1) = 1, (2|3)_0 = 1.
  CHECK(four_point_delta(Cy).delta == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  Mat P(9, 2);
  for (int i = 0; i < 9; ++i) P.row(i) = Vec::Random(2).transpose();
  Mat E(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) E(i, j) = (P.row(i) - P.row(j)).norm();
  const double base = four_point_delta(E).delta;
  // Relabeling.
  std::vector<int> perm{3, 1, 4, 0, 8, 5, 2, 7, 6};
  Mat Ep(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) Ep(i, j) = E(perm[i], perm[j]);
  CHECK(four_point_delta(Ep).delta == doctest::Approx(base).epsilon(1e-14));
  // Duplicating a point.
  Mat Ed(10, 10);
  Ed.topLeftCorner(9, 9) = E;
  Ed.row(9).head(9) = E.row(2);
  Ed.col(9).head(9) = E.col(2);
  Ed(9, 9) = 0.0;
  CHECK(four_point_delta(Ed).delta == doctest::Approx(base).epsilon(1e-14));

  Mat bad = E;
  bad(0, 1) += 0.1;
  CHECK_THROWS_AS(four_point_delta(bad), InputError);
  Mat diag = E;
  diag(0, 0) = 1.0;
  CHECK_THROWS_AS(four_point_delta(diag), InputError);

  // Sampled mode on a larger set stays below the exhaustive maximum.
  Mat big = Mat::Zero(50, 50);
  Mat Q(50, 2);
  for (int i = 0; i < 50; ++i) Q.row(i) = Vec::Random(2).transpose();
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) big(i, j) = (Q.row(i) - Q.row(j)).norm();
  auto sampled = four_point_delta(big, 11);
  CHECK(!sampled.exhaustive);
  CHECK(sampled.quadruples == 100000);
  CHECK(sampled.delta == four_point_delta(big, 11).delta);
}

TEST_CASE("Hilbert depth samples") {
  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  auto S = ConvexBody::cube(2);
  std::vector<double> disk, square;
  for (int j : {6, 8, 10}) {
    const double depth = std::ldexp(1.0, -j);
    auto hd = hilbert_depth_sample(D, depth, 30, 1);
    REQUIRE(hd.points.size() == 30);
    for (const auto& p : hd.points) CHECK(1.0 - p.norm() >= depth * (1 - 1e-12));
    disk.push_back(four_point_delta(hd.distances).delta);
    square.push_back(four_point_delta(hilbert_depth_sample(S, depth, 30, 1).distances).delta);
  }
  const double lo = *std::min_element(disk.begin(), disk.end()), hi = *std::max_element(disk.begin(), disk.end());
  CHECK(hi / lo < 1.2);
  CHECK(square[0] < square[1]);
  CHECK(square[1] < square[2]);
}

TEST_CASE("witness rectangles") {
  auto S = ConvexBody::cube(2);
  Mat V = col({0, 1});
  CHECK(default_witness_n(6.0) == static_cast<int>(std::ceil(2 * std::exp(13.0))));
  WitnessOptions o;
  o.n = default_witness_n(6.0);
  std::vector<double> gaps;
  for (double g : {2.0, 4.0, 6.0}) {
    o.a = 1.0;
    o.b = 1.0 + g;
    auto w = nonhyperbolicity_witness(S, make_vec({1, 0}), V, o);
    // On the square the normal side is certified by the face x_1 = 1:
    // |log(e^{-a} / e^{-b})| = b - a.
    CHECK(w.side_bounds[1] == doctest::Approx(g).epsilon(1e-6));
    CHECK(w.probe(0) == doctest::Approx(w.xa(0)));
    gaps.push_back(w.gap);
  }
  CHECK(gaps[1] - gaps[0] >= 2 * 0.5);
  CHECK(gaps[2] - gaps[1] >= 2 * 0.5);

  // Small n caps the gap at (1/2) log(n/2) from the top face.
  o.n = 8;
  o.b = 7.0;
  CHECK(nonhyperbolicity_witness(S, make_vec({1, 0}), V, o).gap == doctest::Approx(0.5 * std::log(4.0)).epsilon(1e-6));
  o.n = 2;
  CHECK_THROWS_AS(nonhyperbolicity_witness(S, make_vec({1, 0}), V, o), PreconditionError);

  auto D = ConvexBody::ball(Vec::Zero(2), 1.0);
  o.n = default_witness_n(6.0);
  std::vector<double> dg;
  for (double g : {2.0, 4.0, 6.0}) {
    o.b = 1.0 + g;
    auto w = nonhyperbolicity_witness(D, make_vec({1, 0}), V, o);
    CHECK(D.contains(w.pn_prime));
    dg.push_back(w.gap);
  }
  CHECK(*std::max_element(dg.begin(), dg.end()) <= 2 * *std::min_element(dg.begin(), dg.end()));
}

TEST_CASE("segment gap bound is sound") {
  // Brute-force check against the hyperplane bound at many points of the segment.
  auto S = ConvexBody::cube(2);
  Vec u = make_vec({0.5, 0.9});
  Vec a = make_vec({-0.9, -0.9}), b = make_vec({0.95, -0.5});
  const double lb = segment_gap_lower_bound(S, u, a, b, 64);
  double brute = kInf;
  for (int i = 0; i <= 2000; ++i) {
    Vec z = a + (i / 2000.0) * (b - a);
    brute = std::min(brute, lower_bound_sweep(S, u, z));
  }
  CHECK(lb <= brute + 1e-12);
  CHECK(lb >= 0.9 * brute);
}

TEST_CASE("polynomials") {
  PolynomialR y4 = PolynomialR::monomial(1, {4});
  CHECK(vanishing_order(y4) == 4);
  PolynomialR xy(2);
  xy.add_term({1, 1}, 1.0);
  xy.add_term({0, 3}, 1.0);
  CHECK(vanishing_order(xy) == 2);
  CHECK(vanishing_order(PolynomialR(3)) == kInfiniteOrder);
  CHECK(xy.norm() == 2.0);
  CHECK(PolynomialR(2).norm() == 0.0);
  CHECK(xy.degree() == 3);
  CHECK(xy.eval(make_vec({2, 3})) == doctest::Approx(6 + 27));

  // Restriction to the line y -> (y, 2y): 2y^2 + 8y^3.
  Mat W(2, 1);
  W << 1, 2;
  auto r = xy.restrict_to(W);
  CHECK(r.terms().at({2}) == doctest::Approx(2.0));
  CHECK(r.terms().at({3}) == doctest::Approx(8.0));
  for (double y : {-0.7, 0.3, 1.9}) CHECK(r.eval(make_vec({y})) == doctest::Approx(xy.eval(W * make_vec({y}))));
  CHECK((xy * xy).eval(make_vec({0.4, -1.2})) == doctest::Approx(std::pow(xy.eval(make_vec({0.4, -1.2})), 2)));
  CHECK_THROWS_AS(xy.add_term({1}, 1.0), InputError);
}

TEST_CASE("polynomial bounds") {
  PolynomialR x = PolynomialR::monomial(1, {1});
  for (double r : {0.1, 0.5, 1.0}) {
    auto b = polynomial_bounds_check(x, r, 1.0);
    CHECK(b.M_r == doctest::Approx(r));
    CHECK(b.A == doctest::Approx(1.0));
  }
  PolynomialR x2 = PolynomialR::monomial(1, {2});
  auto b2 = polynomial_bounds_check(x2, 0.5, 1.0);
  CHECK(b2.M_r == doctest::Approx(0.25));
  CHECK(std::pow(0.5, b2.L) * b2.M_R / b2.M_r == doctest::Approx(1.0));
  CHECK(b2.A == doctest::Approx(1.0));

  // max |x^2 - y^2| on the disk of radius r is r^2; ||P|| = 2.
  PolynomialR saddle(2);
  saddle.add_term({2, 0}, 1.0);
  saddle.add_term({0, 2}, -1.0);
  auto bs = polynomial_bounds_check(saddle, 0.5, 1.0, 3);
  CHECK(bs.M_r == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(bs.M_R == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(bs.A == doctest::Approx(std::max({1.0, 0.25 * 1.0 / 0.25, 0.25 / 0.5, 0.25 * 2 / 0.25, 0.25 / (0.5 * 2)})));

  PolynomialR shifted = x;
  shifted.add_term({0}, 1.0);
  CHECK_THROWS_AS(polynomial_bounds_check(shifted, 0.5, 1.0), PreconditionError);
  CHECK_THROWS_AS(polynomial_bounds_check(x, 0.5, 2.0), PreconditionError);

  auto a1 = polynomial_audit(2, 4, 50, 7, 1), a2 = polynomial_audit(2, 4, 50, 7, 2);
  CHECK(std::isfinite(a1.A));
  CHECK(a1.A >= 1.0);
  CHECK(std::abs(a1.A - a2.A) <= 0.1 * a1.A);
}

TEST_CASE("contact order of graph domains") {
  auto q = contact_order_graph_domain(PolynomialR::monomial(1, {4}), 1);
  CHECK(q.L == 4);
  CHECK(q.predicted_lambda == 0.25);
  CHECK(q.measured_lambda >= 0.23);
  CHECK(q.measured_lambda <= 0.27);

  PolynomialR sph(2);
  sph.add_term({2, 0}, 1.0);
  sph.add_term({0, 2}, 1.0);
  auto s = contact_order_graph_domain(sph, 1);
  CHECK(s.L == 2);
  CHECK(s.predicted_lambda == 0.5);
  CHECK(s.measured_lambda == doctest::Approx(0.5).epsilon(0.05));

  PolynomialR mixed(2);
  mixed.add_term({2, 0}, 1.0);
  mixed.add_term({0, 6}, 1.0);
  auto line = contact_order_graph_domain(mixed, 1);
  CHECK(line.L == 6);
  CHECK(std::abs(line.plane(0, 0)) < 1e-12);
  CHECK(line.measured_lambda == doctest::Approx(1.0 / 6).epsilon(0.05));
  // The whole (y1, y2)-plane: the restriction is f itself, of order 2.
  auto plane = contact_order_graph_domain(mixed, 2);
  CHECK(plane.L == 2);
  CHECK(plane.measured_lambda == doctest::Approx(0.5).epsilon(0.05));

  // A rotated quartic valley: the worst line is found off the axes.
  // (y1 - y2)^2 + (y1 + y2)^4.
  PolynomialR diff = PolynomialR::linear(make_vec({1.0, -1.0}));
  PolynomialR sum = PolynomialR::linear(make_vec({1.0, 1.0}));
  PolynomialR rot = diff * diff + sum * sum * sum * sum;
  auto r = contact_order_graph_domain(rot.scaled(0.1), 1, false);
  CHECK(r.L == 4);

  PolynomialR concave(1);
  concave.add_term({2}, -1.0);
  CHECK_THROWS_AS(contact_order_graph_domain(concave, 1), PreconditionError);
  PolynomialR bumpy(1);
  bumpy.add_term({2}, 1.0);
  bumpy.add_term({4}, -0.5);
  CHECK_THROWS_AS(contact_order_graph_domain(bumpy, 1), PreconditionError);
}
