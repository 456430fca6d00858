#pragma once

#include "qhyp/domains.hpp"

namespace qhyp {

/// Orthonormal frame; in the complex case columns come in pairs (w, Jw).
struct FrameCheck {
  double gram_error = 0.0;
  double j_residual = 0.0;
};
FrameCheck check_frame(const Mat& frame, Field field);

/// Unit vector spanning the same K-line as v with a fixed sign/phase, so that
/// every nonzero multiple of v yields the same direction.
Vec canonical_direction(const Vec& v, Field field);

/// Frame [u, (Ju), w_1, (Jw_1), ...] of K-dimension k spanned by u and the
/// leading columns of `extra` (projected and orthonormalized).
Mat complete_frame(const Vec& u, const Mat& extra, int k, Field field);

/// Orthonormal basis of the orthogonal complement of span(frame), J-paired
/// in the complex case.
Mat frame_complement(const Mat& frame, Field field);

struct DeltaResult {
  double value = 0.0;  // +inf when some admissible slice never leaves the body
  Mat frame;
  double line_value = 0.0;     // delta^(1), an upper bound for delta^(k)
  double restart_spread = 0.0; // best minus worst restart, relative to best
  int starts = 0;
  int evaluations = 0;
};

/// sup over K-subspaces V of K-dimension k containing v of the distance from
/// p to the boundary of the slice p + V.
DeltaResult delta_k(const ConvexBody& body, const Vec& p, const Vec& v, int k, const Settings& s = {});

struct MetricValue {
  double value = 0.0;
  double delta = 0.0;
  Mat frame;
  double lower = 0.0;
  double upper = 0.0;
  double restart_spread = 0.0;
};

MetricValue qk_norm(const ConvexBody& body, const Vec& p, const Vec& v, int k, const Settings& s = {});

/// |v_1| / (2 p_1) on {x_1 > 0}.
double minimal_metric_halfspace(const Vec& p, const Vec& v);

struct Sandwich {
  double lower = 0.0;
  double upper = 0.0;
};
/// (q^(2)/2, q^(2)): bounds for the minimal metric of a real convex body, d >= 3.
Sandwich minimal_sandwich(const ConvexBody& body, const Vec& p, const Vec& v, const Settings& s = {});

struct QuasiNormal {
  Vec x;
  Vec n;
  double r = 0.0;
  double delta = 0.0;
};

/// Unit vector from a boundary point toward the base point, with the depth of
/// the base point.
QuasiNormal quasi_normal_at(const ConvexBody& body, const Vec& x, const Settings& s = {});

/// One evaluation at p = x + t n, v = s n + v0 with v0 tangent at x.
struct DecompositionSample {
  double t = 0.0;
  double s = 0.0;
  double delta_n = 0.0;   // delta(p; n)
  double delta_v0 = 0.0;  // delta(p; v0)
  double delta_v = 0.0;   // delta(p; v)
  double q_sn = 0.0;      // q^(k)(p; s n)
  double q_v0 = 0.0;      // q^(k)(p; v0)
  double q_v = 0.0;       // q^(k)(p; v)
  // delta(p;v) over the harmonic combination |v| / (|s|/delta_n + |v0|/delta_v0);
  // at least 1 by convexity of the gauge.
  double harmonic_ratio = 0.0;
  // delta(p;v) over min{|v|/|s| delta_n, |v|/|v0| delta_v0}; bounded above.
  double min_ratio = 0.0;
  // (q(s n) + q(v0)) / q(v); lies in [1/C, C].
  double split_ratio = 0.0;
};

/// True when the K-line x + K v0 misses the body (sampled along the line).
bool tangent_line_misses(const ConvexBody& body, const Vec& x, const Vec& v0, const Settings& s = {});

DecompositionSample decomposition_sample(const ConvexBody& body, const QuasiNormal& qn, double t, double s,
                                         const Vec& v0, int k, const Settings& st = {});

struct DecompositionReport {
  int samples = 0;
  int skipped = 0;
  double min_harmonic_ratio = kInf;
  double max_min_ratio = 0.0;
  double max_split_ratio = 0.0;
  double min_split_ratio = kInf;
  /// Empirical two-sided constant: max of the split ratio and its reciprocal.
  double split_constant = 0.0;
  std::vector<DecompositionSample> records;
};

/// Samples boundary points, depths, and tangent directions and reports the
/// realized decomposition ratios.
DecompositionReport decomposition_audit(const ConvexBody& body, int k, int samples, std::uint64_t seed,
                                        const Settings& s = {});

}  // namespace qhyp
