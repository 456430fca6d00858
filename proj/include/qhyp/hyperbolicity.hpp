#pragma once

#include "qhyp/geodesy.hpp"

#include <climits>
#include <map>
#include <random>
#include <string>

namespace qhyp {

/// t_j = 2^{-j} for j in [j_min, j_max]; strictly decreasing.
std::vector<double> dyadic_grid(int j_min = 4, int j_max = 14);

struct ExpansionProfile {
  Vec x;
  Vec p;
  Mat frame;
  std::vector<double> t;
  std::vector<double> g;         // raw slice distances
  std::vector<double> envelope;  // running max from small t to large t
  std::vector<std::string> rejected;
};

/// g(t) = dist(x_t, (x_t + V) ∩ ∂Ω) along x_t = (1 - t) x + t p.
ExpansionProfile expansion_profile(const ConvexBody& body, const Vec& x, const Vec& p, const Mat& frame,
                                   const std::vector<double>& grid, const Settings& s = {});

enum class Verdict { Expanding, Flat, Inconclusive };
std::string to_string(Verdict v);

struct ExpansionFit {
  double lambda = 0.0;
  double C = 1.0;
  double residual = 0.0;
  int points = 0;
  Verdict verdict = Verdict::Inconclusive;
};

inline constexpr double kLambdaMin = 0.05;
inline constexpr double kResidualCap = 0.1;

/// Least-squares slope of log g against log t, the smallest C with
/// g(s) <= C (s/t)^lambda g(t) on all grid pairs s < t, and a verdict.
ExpansionFit fit_expansion(const ExpansionProfile& profile, double lambda_min = kLambdaMin,
                           double residual_cap = kResidualCap);

struct AuditOptions {
  int boundary_points = 16;
  int frames_per_point = 4;
  int random_frames_per_point = 1;  // non-tangential family
  std::vector<double> grid = dyadic_grid();
  std::vector<Vec> extra_points;  // boundary points always included
  std::uint64_t seed = 1;
};

struct AuditEntry {
  Vec x;
  Mat frame;
  bool tangential = true;
  ExpansionFit fit;
};

struct ExpansionAudit {
  std::vector<AuditEntry> entries;
  double min_lambda = kInf;          // over `family`
  double max_C = 1.0;                // over `family`
  double min_lambda_random = kInf;   // non-tangential family
  std::vector<size_t> flat_witnesses;  // indices into entries
  int skipped = 0;
  std::string family;  // "tangential", or "all frames" when k equals the dimension
  std::string verdict;
};

/// Tangential frames satisfy (x + V) ∩ Ω = ∅ through a supporting hyperplane
/// at x; a separate family of random frames is reported alongside.
ExpansionAudit expansion_audit(const ConvexBody& body, int k, const AuditOptions& opt, const Settings& s = {});

/// Random K-frame of K-dimension k inside the (complex) tangent space of the
/// supporting hyperplane with outer normal nu.
Mat tangential_frame(const Vec& nu, int k, Field field, std::mt19937_64& rng);

// --- four-point condition -------------------------------------------------

struct FourPointResult {
  double delta = 0.0;
  long long quadruples = 0;
  bool exhaustive = true;
};

/// max over quadruples of min((x|y)_w, (y|z)_w) - (x|z)_w, clamped at zero.
FourPointResult four_point_delta(const Mat& D, std::uint64_t seed = 1);

/// The base point plus count - 1 random points reached by two Hilbert-straight
/// moves of length at most R(depth) = (1/2) log((2 - depth)/depth), keeping
/// only points of relative depth >= depth; with their Hilbert distances.
struct HilbertSample {
  std::vector<Vec> points;
  Mat distances;
};
HilbertSample hilbert_depth_sample(const ConvexBody& body, double depth, int count, std::uint64_t seed,
                                   const Settings& s = {});

// --- non-hyperbolicity witness ----------------------------------------------

struct WitnessOptions {
  double a = 1.0;
  double b = 3.0;
  int n = 0;           // 0 selects default_witness_n(b - a)
  int pieces = 64;     // per side, for the certified gap
};

/// Smallest n keeping the tangential cap (1/2) log(n/2) above the normal gap.
int default_witness_n(double gap);

struct WitnessRectangle {
  Vec x;
  Vec normal;
  Mat frame;
  double a = 0.0, b = 0.0;
  int n = 0;
  Vec xa, xb, pn, pn_prime, y, y_prime, probe;
  double side_bounds[3] = {0.0, 0.0, 0.0};  // [xa,xb], [xb,p'n], [p'n,pn]
  double gap = 0.0;                          // min of side_bounds
};

/// Quasi-geodesic rectangle from a boundary point x and frame V with the
/// certified lower bound on the distance from the probe point on [pn, xa] to
/// the other three sides.
WitnessRectangle nonhyperbolicity_witness(const ConvexBody& body, const Vec& x, const Mat& frame,
                                          const WitnessOptions& opt, const Settings& s = {});

/// Certified lower bound on inf over z in [a, b] of dist^(k)(u, z).
double segment_gap_lower_bound(const ConvexBody& body, const Vec& u, const Vec& a, const Vec& b, int pieces,
                               const Settings& s = {});

// --- polynomials -------------------------------------------------------------

inline constexpr int kInfiniteOrder = INT_MAX;

class PolynomialR {
 public:
  using Index = std::vector<int>;

  explicit PolynomialR(int dim = 1) : dim_(dim) {}
  static PolynomialR monomial(int dim, const Index& alpha, double c = 1.0);
  static PolynomialR linear(const Vec& coeffs);

  int dim() const { return dim_; }
  int degree() const;
  const std::map<Index, double>& terms() const { return terms_; }
  void add_term(const Index& alpha, double c);

  double eval(const Vec& x) const;
  /// Sum of |c_alpha|.
  double norm() const;
  /// Smallest |alpha| with |c_alpha| > tol; kInfiniteOrder for zero.
  int vanishing_order(double tol = 1e-12) const;
  PolynomialR homogeneous_part(int degree) const;

  PolynomialR operator+(const PolynomialR& o) const;
  PolynomialR operator*(const PolynomialR& o) const;
  PolynomialR scaled(double c) const;
  /// y -> P(W y) for a dim x m matrix W.
  PolynomialR restrict_to(const Mat& W) const;

 private:
  int dim_;
  std::map<Index, double> terms_;
};

int vanishing_order(const PolynomialR& P, double tol = 1e-12);

/// max |P| over the closed ball of radius rho: lattice sampling on spheres and
/// pattern-search refinement. The seed rotates the lattice.
double max_on_ball(const PolynomialR& P, double rho, std::uint64_t seed = 0);

struct PolynomialBounds {
  double M_r = 0.0;
  double M_R = 0.0;
  double norm = 0.0;
  int L = 0;
  double A = 1.0;  // smallest A making the four inequalities hold
};

PolynomialBounds polynomial_bounds_check(const PolynomialR& P, double r, double R, std::uint64_t seed = 0);

struct PolynomialAudit {
  double A = 1.0;
  int polynomials = 0;
};

/// Random polynomials of degree <= L in d variables with P(0) = 0 (drawn from
/// poly_seed) checked at r in {1/4, 1/2} with R = 1 (maxima sampled with
/// sampling_seed).
PolynomialAudit polynomial_audit(int d, int L, int count, std::uint64_t poly_seed, std::uint64_t sampling_seed);

struct ContactOrder {
  int L = 0;               // kInfiniteOrder when f vanishes on a k-plane
  double predicted_lambda = 0.0;
  Mat plane;               // m x k basis of the worst plane in y-space
  double measured_lambda = 0.0;
  bool measured = false;
};

/// Graph domain {x > f(y), x < 2, |y_i| < 1.1} in R^{1+m}.
ConvexBody graph_domain(const PolynomialR& f);

/// Worst contact order of k-planes in y-space through 0 and the predicted
/// decay exponent 1/L; optionally measured on the graph domain.
ContactOrder contact_order_graph_domain(const PolynomialR& f, int k, bool measure = true,
                                        const Settings& s = {});

}  // namespace qhyp
