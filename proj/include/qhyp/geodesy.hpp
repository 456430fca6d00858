#pragma once

#include "qhyp/metrics.hpp"

#include <functional>
#include <string>

namespace qhyp {

struct PolylinePath {
  std::vector<Vec> vertices;
};

struct LengthResult {
  double value = 0.0;
  double error = 0.0;  // sum of |coarse - fine| over accepted panels
  int panels = 0;
};

/// Integrated q^(k)-length of a polyline by adaptive Gauss-Legendre panels.
LengthResult path_length_qk(const ConvexBody& body, const PolylinePath& path, int k, const Settings& s = {});
LengthResult segment_length_qk(const ConvexBody& body, const Vec& a, const Vec& b, int k, const Settings& s = {});

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

/// Affine hyperplane through `point` with unit normal. For complex bodies the
/// K-hyperplane {z : <z - point, normal>_C = 0} is meant.
struct Hyperplane {
  Vec point;
  Vec normal;
};

double hyperplane_distance(const Hyperplane& H, const Vec& x, Field field);

/// |log(dist(q,H) / dist(p,H))|. Throws when H meets the body.
double hyperplane_lower_bound(const ConvexBody& body, const Vec& p, const Vec& q, const Hyperplane& H,
                              const Settings& s = {});

/// Supporting hyperplanes used by the lower-bound sweep for the pair (p, q).
std::vector<Hyperplane> supporting_hyperplanes(const ConvexBody& body, const Vec& p, const Vec& q,
                                               const Settings& s = {});

/// Best hyperplane or collinear-boundary-point lower bound for dist^(k)(p, q).
double lower_bound_sweep(const ConvexBody& body, const Vec& p, const Vec& q, const Settings& s = {});

struct DistanceResult {
  double upper = 0.0;
  double lower = 0.0;
  PolylinePath path;
  std::string candidate;
  std::vector<double> round_upper;  // running minimum after each vertex-doubling round
  std::vector<int> round_vertices;
};

DistanceResult distance_qk(const ConvexBody& body, const Vec& p, const Vec& q, int k, const Settings& s = {});

/// Cross-ratio distance on a bounded real body.
double hilbert_distance(const ConvexBody& body, const Vec& p, const Vec& q, const Settings& s = {});

struct RadialCurve {
  Vec x;  // boundary endpoint
  Vec p;  // starting interior point
  double epsilon = 0.0;
  Mat frame;
  bool degenerate = false;
  Vec at(double t) const { return x + std::exp(-t) * (p - x); }
};

/// t -> x + e^{-t}(p - x) with its quasi-geodesic constant.
RadialCurve radial_quasi_geodesic(const ConvexBody& body, const Vec& x, const Vec& p, int k,
                                  const Settings& s = {});

struct QuasiGeodesicPair {
  double s = 0.0;
  double t = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  double margin_upper = 0.0;  // A|t-s| + B - upper
  double margin_lower = 0.0;  // lower - (|t-s|/A - B)
  bool inconclusive = false;
  bool failed = false;
};

struct QuasiGeodesicReport {
  std::vector<QuasiGeodesicPair> pairs;
  double worst_margin_upper = kInf;
  double worst_margin_lower = kInf;
  int inconclusive = 0;
  int failed = 0;
  bool pass = true;
};

QuasiGeodesicReport quasi_geodesic_check(const ConvexBody& body, const std::function<Vec(double)>& curve,
                                         double t0, double t1, int k, double A, double B, int pairs,
                                         std::uint64_t seed, const Settings& s = {});

}  // namespace qhyp
