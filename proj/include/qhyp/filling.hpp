#pragma once

#include "qhyp/common.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

// Model metrics on M x (0,1] with M the circle R/Z, star curves made of
// vertical and horizontal pieces at the levels e^{-k T0}, and the surgery that
// fills a star curve with regions of bounded diameter.

namespace qhyp {

/// A point (x, t) of M x (0,1]. x is an unwrapped coordinate on R; the point
/// of M is x mod 1.
struct ModelPoint {
  double x = 0.0;
  double t = 1.0;
};

/// Closed polyline: segments are straight in (x, t) coordinates.
using ModelPath = std::vector<ModelPoint>;

struct ModelMetric {
  std::string name;
  double C1 = 1.0, C2 = 1.0, C3 = 1.0, lambda = 1.0;
  /// ||(v, w)|| at (x, t).
  std::function<double(double x, double t, double v, double w)> norm;
};

/// |v|/t + |w|/t with all four constants equal to 1.
ModelMetric builtin_model_metric();
/// sqrt(v^2 + w^2)/t: C1 = 1, C2 = sqrt 2, C3 = 1, lambda = 1.
ModelMetric euclidean_model_metric();
/// |v|/t^mu + |w|/t: C1 = C2 = C3 = 1, lambda = mu.
ModelMetric power_model_metric(double mu);

struct ConditionReport {
  // Largest relative violation of each inequality; <= 0 means it holds.
  double a = -kInf, b = -kInf, c = -kInf;
  int samples = 0;
};

/// Samples the vertical bound (a), the splitting bound (b) and the expansion
/// bound (c) at random points.
ConditionReport check_conditions(const ModelMetric& metric, int samples = 1000, std::uint64_t seed = 1);

struct FillingConstants {
  double T0 = 0.0;
  double L = 0.0;
  double R = 0.0;
  double diam_num = 0.0;  // net estimate of diam(M x [e^{-T0}, 1])
  double R_terms[4] = {0, 0, 0, 0};  // 2, 2C1(C1C2 + T0), diam_num, 9L/2
};

FillingConstants derive_constants(const ModelMetric& metric);

inline double level_height(int k, double T0) { return std::exp(-k * T0); }

/// Integrated length of a polyline.
double path_length(const ModelMetric& metric, const ModelPath& path);

struct ModelDistance {
  double lower = 0.0;
  double upper = 0.0;
  ModelPath path;  // realizes `upper`
};

/// Lower bound |log(s/t)|/(C1 C2); upper bound from vertical-horizontal-
/// vertical paths, optionally refined by coordinate descent on the vertices.
ModelDistance model_distance(const ModelMetric& metric, ModelPoint a, ModelPoint b, bool refine = true);

// --- star curves --------------------------------------------------------------

enum class PieceKind { Vertical, Horizontal };

/// Vertical: at x, between levels `level` and `level + 1`; `down` runs from
/// e^{-level T0} to e^{-(level+1) T0}. Horizontal: at `level` along `path`
/// (unwrapped x values).
struct Piece {
  PieceKind kind = PieceKind::Horizontal;
  int level = 0;
  double x = 0.0;
  bool down = true;
  std::vector<double> path;

  static Piece vertical(double x, int level, bool down);
  static Piece horizontal(int level, std::vector<double> path);

  ModelPoint start(double T0) const;
  ModelPoint end(double T0) const;
  Piece reversed() const;
  bool operator==(const Piece& o) const = default;
};

struct StarCurve {
  std::vector<Piece> word;  // cyclic
  int N() const { return static_cast<int>(word.size()); }
};

/// Wrapped distance between two points of M.
double circle_gap(double x, double y);

double piece_length(const ModelMetric& metric, const Piece& p, double T0);
double star_length(const ModelMetric& metric, const StarCurve& c, double T0);
/// Deepest level reached by the curve.
int star_depth(const StarCurve& c);

/// Throws InputError naming the first broken invariant: closure, levels,
/// horizontal lengths <= L + 1e-9.
void validate_star(const ModelMetric& metric, const StarCurve& c, const FillingConstants& k);

StarCurve reverse(const StarCurve& c);
/// The polyline traced by the curve.
ModelPath star_to_path(const StarCurve& c, double T0);

struct NormalizeReport {
  bool already_star = false;
  double length_in = 0.0;        // L_I of the input
  double length_mid = 0.0;       // L_I after reconnecting arcs
  int arcs_first = 0;            // arcs of the reconnection step
  int arcs_second = 0;           // arcs of the snapping step
  double N_bound = 0.0;          // (1 + L_I)(2 + 2 C1 C2 / T0) with L_I = length_mid
  bool length_ok = false;        // length_mid <= length_in + 1
  bool N_ok = false;
  int regions = 0;               // regions between input and output (Area accounting)
  double max_region_diameter = 0.0;
};

struct Normalized {
  StarCurve star;
  NormalizeReport report;
};

/// Two steps: cut the closed polyline into equal arcs of length <= 1 and
/// replace each by a shortest vertical-horizontal-vertical path when that is
/// not longer; cut the result again and snap each arc to the level just above
/// it, joining consecutive levels with vertical stacks. A polyline that is
/// already a star curve is returned piece for piece.
Normalized normalize_to_star(const ModelMetric& metric, const ModelPath& curve, const FillingConstants& k);

/// The star curve spelled by an H/V polyline, if there is one.
std::optional<StarCurve> as_star_curve(const ModelMetric& metric, const ModelPath& curve, const FillingConstants& k);

// --- surgery ------------------------------------------------------------------

struct SurgeryStep {
  std::string tag;  // "1", "2", "3a", "3b", "base"
  int depth = 0;    // h before the step
  int N_before = 0, N_after = 0;
  int position = 0;  // first replaced index in the word before the step
  int removed = 0;   // number of replaced pieces (cyclically from position)
  std::vector<Piece> added;
  int triangles = 0;
  std::vector<double> diameters;  // one per region
  std::vector<std::vector<Piece>> regions;  // closed boundary loops
};

struct FillingCertificate {
  int triangles = 0;
  int N_input = 0;
  double R = 0.0;
  double final_diameter = 0.0;
  std::vector<SurgeryStep> log;
};

/// Fills the curve case by case; throws InternalCheckError if a region is not
/// certified to have diameter <= R or the triangle count exceeds N.
FillingCertificate reduce_and_fill(const ModelMetric& metric, const StarCurve& star, const FillingConstants& k);

/// Replays the log on the input word: each step must reproduce the next word,
/// every region must be a closed loop, and the last word must close.
bool replay_certificate(const StarCurve& input, const FillingCertificate& cert, double T0, std::string* why = nullptr);

/// Random closed star curve with 4 <= N <= max_N.
StarCurve random_star_curve(const ModelMetric& metric, const FillingConstants& k, int max_N, std::uint64_t seed);

/// Random closed polyline with integrated length close to `target`.
ModelPath random_closed_path(const ModelMetric& metric, double target, std::uint64_t seed);

struct IsoperimetricSample {
  double length = 0.0;
  int triangles = 0;
  int star_N = 0;
};

struct IsoperimetricAudit {
  std::vector<IsoperimetricSample> samples;
  double A = 0.0, B = 0.0;  // triangles <= A L + B on every sample
  double slope = 0.0, intercept = 0.0;  // least squares
  double residual_corr = 0.0;            // corr(residual, L^2)
  bool linear = false;                   // |residual_corr| < 0.1
};

IsoperimetricAudit isoperimetric_audit(const ModelMetric& metric, int n_trials, double min_length,
                                       double max_length, std::uint64_t seed = 1, int workers = 1);

/// Regions needed to fill the curve: normalization regions plus surgery.
int filling_triangles(const ModelMetric& metric, const ModelPath& curve, const FillingConstants& k);

}  // namespace qhyp
