#include "qhyp/io.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

namespace qhyp {

namespace {

const Json& need(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw InputError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

double number(const Json& v, const std::string& key) {
  if (!v.is_number()) throw InputError("key '" + key + "' must be a number");
  return v.get<double>();
}

int integer(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) throw InputError("key '" + key + "' must be an integer");
  return v.get<int>();
}

Mat rows_from_json(const Json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw InputError("key '" + key + "' must be a non-empty array of rows");
  const size_t cols = j.at(0).is_array() ? j.at(0).size() : 0;
  if (cols == 0) throw InputError("key '" + key + "' must be a non-empty array of rows");
  Mat M(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    const Json& row = j.at(r);
    if (!row.is_array() || row.size() != cols) throw InputError("key '" + key + "' has rows of different lengths");
    for (size_t c = 0; c < cols; ++c) M(r, c) = number(row.at(c), key);
  }
  return M;
}

Field field_from(const Json& j) {
  if (!j.contains("field")) return Field::Real;
  const Json& f = j.at("field");
  if (f == "real") return Field::Real;
  if (f == "complex") return Field::Complex;
  throw InputError("key 'field' must be \"real\" or \"complex\"");
}

void check_dim(const Json& j, int real_dim, Field field) {
  if (!j.contains("dim")) return;
  const int d = integer(j.at("dim"), "dim");
  const int expect = field == Field::Complex ? real_dim / 2 : real_dim;
  if (d != expect)
    throw InputError("key 'dim' is " + std::to_string(d) + " but the coordinates give " + std::to_string(expect));
}

std::vector<int> parse_index(const std::string& key) {
  std::string s = key;
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  if (s.size() < 2 || s.front() != '(' || s.back() != ')')
    throw InputError("coefficient key '" + key + "' must look like \"(i,j,...)\"");
  std::vector<int> out;
  std::stringstream ss(s.substr(1, s.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw InputError("coefficient key '" + key + "' must hold non-negative integers");
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw InputError("coefficient key '" + key + "' is empty");
  return out;
}

Field parse_field(const Json& j) { return field_from(j); }

}  // namespace

Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + " is not valid JSON: " + e.what());
  }
}

void require_known_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw InputError(where + ": unknown key '" + key + "'");
}

Vec vec_from_json(const Json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw InputError("key '" + key + "' must be a non-empty array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = number(j.at(i), key);
  return v;
}

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json frame_to_json(const Mat& m) {
  Json a = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(to_json(Vec(m.col(c))));
  return a;
}

Mat frame_from_json(const Json& j, const std::string& key) { return rows_from_json(j, key).transpose(); }

std::string frame_hash(const Mat& frame) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    double v = frame.data()[i];
    if (v == 0.0) v = 0.0;  // fold -0
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

PolynomialR polynomial_from_json(const Json& j) {
  require_known_keys(j, {"coeffs", "dim"}, "polynomial");
  const Json& c = need(j, "coeffs", "polynomial");
  if (!c.is_object() || c.empty()) throw InputError("key 'coeffs' must be a non-empty object");
  int dim = j.contains("dim") ? integer(j.at("dim"), "dim") : -1;
  std::vector<std::pair<std::vector<int>, double>> terms;
  for (const auto& [key, value] : c.items()) {
    auto idx = parse_index(key);
    if (dim < 0) dim = static_cast<int>(idx.size());
    if (static_cast<int>(idx.size()) != dim)
      throw InputError("coefficient key '" + key + "' has " + std::to_string(idx.size()) + " entries, expected " +
                       std::to_string(dim));
    terms.emplace_back(std::move(idx), number(value, key));
  }
  PolynomialR P(dim);
  for (auto& [idx, v] : terms) P.add_term(idx, v);
  return P;
}

Json to_json(const PolynomialR& P) {
  Json c = Json::object();
  for (const auto& [alpha, v] : P.terms()) {
    std::string key = "(";
    for (size_t i = 0; i < alpha.size(); ++i) key += (i ? "," : "") + std::to_string(alpha[i]);
    c[key + ")"] = v;
  }
  return {{"dim", P.dim()}, {"coeffs", c}};
}

ConvexBody domain_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("domain must be a JSON object");
  const Json& type = need(j, "type", "domain");
  if (!type.is_string()) throw InputError("key 'type' must be a string");
  const std::string t = type.get<std::string>();
  const std::string where = "domain of type " + t;
  const Field field = parse_field(j);
  auto base_or = [&](const Vec& fallback) { return j.contains("base_point") ? vec_from_json(j.at("base_point"), "base_point") : fallback; };

  if (t == "polytope") {
    require_known_keys(j, {"type", "field", "dim", "normals", "offsets", "base_point"}, where);
    Mat A = rows_from_json(need(j, "normals", where), "normals");
    Vec b = vec_from_json(need(j, "offsets", where), "offsets");
    Vec p = vec_from_json(need(j, "base_point", where), "base_point");
    check_dim(j, static_cast<int>(A.cols()), field);
    return ConvexBody::polytope(A, b, p, field);
  }
  if (t == "ellipsoid") {
    require_known_keys(j, {"type", "field", "dim", "center", "matrix", "base_point"}, where);
    Vec c = vec_from_json(need(j, "center", where), "center");
    Mat M = rows_from_json(need(j, "matrix", where), "matrix");
    check_dim(j, static_cast<int>(c.size()), field);
    return ConvexBody::ellipsoid(c, M, base_or(c), field);
  }
  if (t == "ball") {
    require_known_keys(j, {"type", "field", "dim", "center", "radius"}, where);
    Vec c;
    if (j.contains("center")) {
      c = vec_from_json(j.at("center"), "center");
    } else {
      const int d = integer(need(j, "dim", where), "dim");
      if (d < 1) throw InputError("key 'dim' must be positive");
      c = Vec::Zero(field == Field::Complex ? 2 * d : d);
    }
    check_dim(j, static_cast<int>(c.size()), field);
    return ConvexBody::ball(c, j.contains("radius") ? number(j.at("radius"), "radius") : 1.0, field);
  }
  if (t == "pball") {
    require_known_keys(j, {"type", "field", "dim", "p", "scale", "center", "base_point"}, where);
    const Json& pj = need(j, "p", where);
    const double p = pj.is_string() && pj == "inf" ? kInf : number(pj, "p");
    Vec c = vec_from_json(need(j, "center", where), "center");
    check_dim(j, static_cast<int>(c.size()), field);
    return ConvexBody::pball(p, j.contains("scale") ? number(j.at("scale"), "scale") : 1.0, c, base_or(c), field);
  }
  if (t == "cube") {
    require_known_keys(j, {"type", "field", "dim", "half_width"}, where);
    if (field != Field::Real) throw InputError("cube domains are real");
    const int d = integer(need(j, "dim", where), "dim");
    if (d < 1) throw InputError("key 'dim' must be positive");
    return ConvexBody::cube(d, j.contains("half_width") ? number(j.at("half_width"), "half_width") : 1.0);
  }
  if (t == "halfspace") {
    require_known_keys(j, {"type", "field", "dim", "base_point"}, where);
    const int d = integer(need(j, "dim", where), "dim");
    if (d < 1) throw InputError("key 'dim' must be positive");
    const int n = field == Field::Complex ? 2 * d : d;
    return ConvexBody::halfspace(n, base_or(unit(n, 0)), field);
  }
  if (t == "graph") {
    require_known_keys(j, {"type", "field", "dim", "coeffs"}, where);
    if (field != Field::Real) throw InputError("graph domains are real");
    const PolynomialR f = polynomial_from_json(Json{{"coeffs", need(j, "coeffs", where)}});
    check_dim(j, f.dim() + 1, field);
    return graph_domain(f);
  }
  if (t == "polynomial_sublevel") {
    require_known_keys(j, {"type", "field", "dim", "coeffs", "bounding_center", "bounding_radius", "base_point"},
                       where);
    Json pj{{"coeffs", need(j, "coeffs", where)}};
    if (j.contains("dim")) pj["dim"] = j.at("dim");
    const PolynomialR P = polynomial_from_json(pj);
    SublevelSet set;
    set.g = [P](const Vec& x) { return P.eval(x); };
    set.bounding_center = j.contains("bounding_center") ? vec_from_json(j.at("bounding_center"), "bounding_center")
                                                        : Vec::Zero(P.dim());
    set.bounding_radius = number(need(j, "bounding_radius", where), "bounding_radius");
    set.label = "polynomial_sublevel";
    return ConvexBody::sublevel(set, vec_from_json(need(j, "base_point", where), "base_point"), field);
  }
  throw InputError("key 'type' has unknown value \"" + t + "\"");
}

ConvexBody parse_domain(const std::string& text) { return domain_from_json(parse_json_text(text, "domain")); }

Json to_json(const MetricValue& m) {
  return {{"value", m.value},   {"delta", m.delta},
          {"lower", m.lower},   {"upper", m.upper},
          {"frame", frame_to_json(m.frame)}, {"restart_spread", m.restart_spread}};
}

Json to_json(const DistanceResult& d) {
  Json path = Json::array();
  for (const Vec& v : d.path.vertices) path.push_back(to_json(v));
  return {{"upper", d.upper}, {"lower", d.lower}, {"candidate", d.candidate}, {"path", path},
          {"round_upper", d.round_upper}, {"round_vertices", d.round_vertices}};
}

Json to_json(const ExpansionFit& f) {
  return {{"lambda", f.lambda}, {"C", f.C}, {"residual", f.residual}, {"points", f.points},
          {"verdict", to_string(f.verdict)}};
}

namespace {
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
}  // namespace

Json to_json(const ExpansionAudit& a) {
  Json entries = Json::array();
  for (const auto& e : a.entries) {
    Json row = to_json(e.fit);
    row["x"] = to_json(e.x);
    row["frame"] = frame_to_json(e.frame);
    row["frame_hash"] = frame_hash(e.frame);
    row["tangential"] = e.tangential;
    entries.push_back(row);
  }
  return {{"family", a.family},
          {"verdict", a.verdict},
          {"min_lambda", finite_or_null(a.min_lambda)},
          {"max_C", a.max_C},
          {"min_lambda_random", finite_or_null(a.min_lambda_random)},
          {"flat_witnesses", a.flat_witnesses},
          {"skipped", a.skipped},
          {"entries", entries}};
}

Json to_json(const WitnessRectangle& w) {
  return {{"x", to_json(w.x)},
          {"normal", to_json(w.normal)},
          {"frame", frame_to_json(w.frame)},
          {"a", w.a},
          {"b", w.b},
          {"n", w.n},
          {"xa", to_json(w.xa)},
          {"xb", to_json(w.xb)},
          {"pn", to_json(w.pn)},
          {"pn_prime", to_json(w.pn_prime)},
          {"y", to_json(w.y)},
          {"y_prime", to_json(w.y_prime)},
          {"probe", to_json(w.probe)},
          {"side_bounds", {w.side_bounds[0], w.side_bounds[1], w.side_bounds[2]}},
          {"gap", w.gap}};
}

Json to_json(const Piece& p) {
  if (p.kind == PieceKind::Vertical) return {{"type", "V"}, {"x", p.x}, {"level", p.level}, {"dir", p.down ? "down" : "up"}};
  return {{"type", "H"}, {"level", p.level}, {"path", p.path}};
}

Piece piece_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("star curve pieces must be objects");
  const Json& type = need(j, "type", "piece");
  if (type == "V") {
    require_known_keys(j, {"type", "x", "level", "dir"}, "vertical piece");
    const Json& dir = need(j, "dir", "vertical piece");
    if (dir != "up" && dir != "down") throw InputError("key 'dir' must be \"up\" or \"down\"");
    return Piece::vertical(number(need(j, "x", "vertical piece"), "x"), integer(need(j, "level", "vertical piece"), "level"),
                           dir == "down");
  }
  if (type == "H") {
    require_known_keys(j, {"type", "level", "path"}, "horizontal piece");
    const Json& path = need(j, "path", "horizontal piece");
    if (!path.is_array()) throw InputError("key 'path' must be an array of numbers");
    std::vector<double> xs;
    for (const Json& x : path) xs.push_back(number(x, "path"));
    return Piece::horizontal(integer(need(j, "level", "horizontal piece"), "level"), xs);
  }
  throw InputError("key 'type' of a piece must be \"V\" or \"H\"");
}

Json to_json(const StarCurve& c) {
  Json a = Json::array();
  for (const Piece& p : c.word) a.push_back(to_json(p));
  return a;
}

StarCurve star_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("a star curve is a JSON array of pieces");
  StarCurve c;
  for (const Json& p : j) c.word.push_back(piece_from_json(p));
  return c;
}

Json to_json(const FillingCertificate& c, bool with_regions) {
  Json log = Json::array();
  for (const SurgeryStep& st : c.log) {
    Json row{{"case", st.tag},           {"depth", st.depth},       {"N_before", st.N_before},
             {"N_after", st.N_after},    {"position", st.position}, {"removed", st.removed},
             {"added", to_json(StarCurve{st.added})}, {"triangles", st.triangles}, {"diameters", st.diameters}};
    if (with_regions) {
      Json regions = Json::array();
      for (const auto& r : st.regions) regions.push_back(to_json(StarCurve{r}));
      row["regions"] = regions;
    }
    log.push_back(row);
  }
  return {{"triangles", c.triangles}, {"N", c.N_input}, {"R", c.R}, {"final_diameter", c.final_diameter}, {"log", log}};
}

Json to_json(const FillingConstants& k) {
  return {{"T0", k.T0},
          {"L", k.L},
          {"R", k.R},
          {"diam_num", k.diam_num},
          {"R_terms", {k.R_terms[0], k.R_terms[1], k.R_terms[2], k.R_terms[3]}}};
}

Json to_json(const IsoperimetricAudit& a) {
  Json samples = Json::array();
  for (const auto& s : a.samples) samples.push_back({{"length", s.length}, {"triangles", s.triangles}, {"N", s.star_N}});
  return {{"A", a.A},
          {"B", finite_or_null(a.B)},
          {"slope", a.slope},
          {"intercept", a.intercept},
          {"residual_corr", a.residual_corr},
          {"linear", a.linear},
          {"samples", samples}};
}

ModelMetric model_metric_from_json(const Json& j) {
  require_known_keys(j, {"name", "mu"}, "model metric");
  const std::string name = j.contains("name") ? j.at("name").get<std::string>() : "builtin";
  if (name == "builtin") return builtin_model_metric();
  if (name == "euclidean") return euclidean_model_metric();
  if (name == "power") return power_model_metric(j.contains("mu") ? number(j.at("mu"), "mu") : 0.5);
  throw InputError("key 'name' of the model metric must be builtin, euclidean or power");
}

}  // namespace qhyp
