#pragma once

#include "qhyp/filling.hpp"
#include "qhyp/hyperbolicity.hpp"

#include <json.hpp>

#include <set>
#include <string>

// JSON ingestion of domains, polynomials, star curves and option blocks, and
// JSON serialization of results. Parsers reject unknown keys by name.

namespace qhyp {

using Json = nlohmann::json;

/// Parses text; malformed JSON becomes an InputError.
Json parse_json_text(const std::string& text, const std::string& what);

/// Throws InputError naming the first key of `obj` outside `allowed`.
void require_known_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where);

/// Domain file: {"type": polytope | ellipsoid | pball | halfspace | ball |
/// cube | graph | polynomial_sublevel, "field": real | complex, "dim": d, ...}.
/// Vectors are real coordinates (length 2d for complex bodies).
ConvexBody domain_from_json(const Json& j);
ConvexBody parse_domain(const std::string& text);

/// {"coeffs": {"(i,j,...)": c}} with an optional "dim".
PolynomialR polynomial_from_json(const Json& j);
Json to_json(const PolynomialR& P);

Vec vec_from_json(const Json& j, const std::string& key);
Json to_json(const Vec& v);
/// Columns as arrays.
Json frame_to_json(const Mat& m);
Mat frame_from_json(const Json& j, const std::string& key);

/// 16 hex digits identifying a frame (FNV-1a over its entries).
std::string frame_hash(const Mat& frame);

Json to_json(const MetricValue& m);
Json to_json(const DistanceResult& d);
Json to_json(const ExpansionFit& f);
Json to_json(const ExpansionAudit& a);
Json to_json(const WitnessRectangle& w);

Json to_json(const Piece& p);
Piece piece_from_json(const Json& j);
Json to_json(const StarCurve& c);
StarCurve star_from_json(const Json& j);
Json to_json(const FillingCertificate& c, bool with_regions = true);
Json to_json(const FillingConstants& k);
Json to_json(const IsoperimetricAudit& a);

ModelMetric model_metric_from_json(const Json& j);

}  // namespace qhyp
