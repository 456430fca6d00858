#include "qhyp/qhyp.h"

#include "qhyp/io.hpp"

#include <cstring>
#include <new>

struct qhyp_domain {
  qhyp::ConvexBody body;
};

struct qhyp_config {
  qhyp::Settings settings;
};

namespace {

using qhyp::Json;

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

qhyp_status fail(qhyp_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
qhyp_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return QHYP_OK;
  } catch (const qhyp::Error& e) {
    return fail(static_cast<qhyp_status>(e.kind()), e.what());
  } catch (const Json::exception& e) {
    return fail(QHYP_INPUT_ERROR, e.what());
  } catch (const std::exception& e) {
    return fail(QHYP_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(QHYP_INTERNAL_ERROR, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw qhyp::InputError(std::string(what) + " must not be null");
}

Json request_object(const char* request) {
  if (!request || !*request) return Json::object();
  return qhyp::parse_json_text(request, "request");
}

qhyp::Settings settings_of(const qhyp_config* cfg) { return cfg ? cfg->settings : qhyp::Settings{}; }

qhyp::Vec point(const Json& req, const char* key, const qhyp::ConvexBody& body) {
  if (!req.contains(key)) throw qhyp::InputError(std::string("request: missing key '") + key + "'");
  qhyp::Vec v = qhyp::vec_from_json(req.at(key), key);
  if (v.size() != body.real_dim())
    throw qhyp::InputError(std::string("key '") + key + "' has " + std::to_string(v.size()) +
                           " coordinates, the domain has " + std::to_string(body.real_dim()));
  return v;
}

template <class T>
T get_or(const Json& req, const char* key, T fallback) {
  if (!req.contains(key)) return fallback;
  try {
    return req.at(key).get<T>();
  } catch (const Json::exception&) {
    throw qhyp::InputError(std::string("key '") + key + "' has the wrong type");
  }
}

int get_k(const Json& req, const qhyp::ConvexBody& body, int fallback) {
  const int k = get_or<int>(req, "k", fallback);
  if (k < 1 || k > body.kdim())
    throw qhyp::InputError("key 'k' must lie in [1, " + std::to_string(body.kdim()) + "]");
  return k;
}

void emit(char** out, const Json& j) {
  require(out != nullptr, "output pointer");
  *out = dup_string(j.dump());
}

struct StarRun {
  std::uint64_t seed = 0;
  int N = 0;
  int triangles = 0;
  double max_diameter = 0.0;
  bool replay = false;
};

}  // namespace

extern "C" {

const char* qhyp_version(void) { return qhyp::kVersion; }

const char* qhyp_last_error(void) { return g_last_error.c_str(); }

void qhyp_string_free(char* s) { std::free(s); }

qhyp_config* qhyp_config_new(void) { return new (std::nothrow) qhyp_config{}; }

void qhyp_config_free(qhyp_config* cfg) { delete cfg; }

qhyp_status qhyp_config_set(qhyp_config* cfg, const char* name, double value) {
  return guarded([&] {
    require(cfg && name, "config and name");
    cfg->settings.set(name, value);
  });
}

qhyp_status qhyp_config_set_seed(qhyp_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "config");
    cfg->settings.seed = seed;
  });
}

qhyp_status qhyp_config_json(const qhyp_config* cfg, char** out) {
  return guarded([&] {
    const qhyp::Settings s = settings_of(cfg);
    emit(out, Json{{"seed", s.seed},
                   {"tol_ray", s.tol_ray},
                   {"tol_opt", s.tol_opt},
                   {"restarts", s.restarts},
                   {"theta_grid", s.theta_grid},
                   {"sphere_samples_per_k", s.sphere_samples_per_k},
                   {"quad_order", s.quad_order},
                   {"quad_tol", s.quad_tol},
                   {"dist_tol", s.dist_tol},
                   {"max_vertices", s.max_vertices}});
  });
}

qhyp_status qhyp_domain_parse(const char* json, qhyp_domain** out) {
  return guarded([&] {
    require(json && out, "json and output pointer");
    *out = nullptr;
    *out = new qhyp_domain{qhyp::parse_domain(json)};
  });
}

void qhyp_domain_free(qhyp_domain* dom) { delete dom; }

qhyp_status qhyp_domain_info(const qhyp_domain* dom, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const auto& b = dom->body;
    emit(out, Json{{"kind", b.kind()},
                   {"field", qhyp::to_string(b.field())},
                   {"dim", b.kdim()},
                   {"real_dim", b.real_dim()},
                   {"bounded", b.bounded()},
                   {"base_point", qhyp::to_json(b.base_point())}});
  });
}

qhyp_status qhyp_domain_contains(const qhyp_domain* dom, const double* x, size_t n, int* inside) {
  return guarded([&] {
    require(dom && x && inside, "domain, point and output pointer");
    if (static_cast<long>(n) != dom->body.real_dim())
      throw qhyp::InputError("point has " + std::to_string(n) + " coordinates, the domain has " +
                             std::to_string(dom->body.real_dim()));
    *inside = dom->body.contains(Eigen::Map<const qhyp::Vec>(x, static_cast<Eigen::Index>(n))) ? 1 : 0;
  });
}

qhyp_status qhyp_metric(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const Json req = request_object(request);
    qhyp::require_known_keys(req, {"p", "v", "k"}, "metric request");
    const auto& b = dom->body;
    const qhyp::Vec p = point(req, "p", b), v = point(req, "v", b);
    const int k = get_k(req, b, 1);
    if (!b.contains(p)) throw qhyp::PreconditionError("p lies outside the domain");
    Json r = qhyp::to_json(qhyp::qk_norm(b, p, v, k, settings_of(cfg)));
    r["k"] = k;
    emit(out, r);
  });
}

qhyp_status qhyp_distance(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const Json req = request_object(request);
    qhyp::require_known_keys(req, {"p", "q", "k"}, "distance request");
    const auto& b = dom->body;
    const qhyp::Vec p = point(req, "p", b), q = point(req, "q", b);
    const int k = get_k(req, b, 1);
    if (!b.contains(p) || !b.contains(q)) throw qhyp::PreconditionError("p and q must lie inside the domain");
    Json r = qhyp::to_json(qhyp::distance_qk(b, p, q, k, settings_of(cfg)));
    r["k"] = k;
    emit(out, r);
  });
}

qhyp_status qhyp_hilbert(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const Json req = request_object(request);
    qhyp::require_known_keys(req, {"p", "q"}, "hilbert request");
    const auto& b = dom->body;
    const qhyp::Vec p = point(req, "p", b), q = point(req, "q", b);
    if (!b.contains(p) || !b.contains(q)) throw qhyp::PreconditionError("p and q must lie inside the domain");
    emit(out, Json{{"value", qhyp::hilbert_distance(b, p, q, settings_of(cfg))}});
  });
}

qhyp_status qhyp_expansion(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const Json req = request_object(request);
    qhyp::require_known_keys(req,
                             {"k", "boundary_points", "frames_per_point", "random_frames_per_point", "j_min",
                              "j_max", "extra_points"},
                             "expansion request");
    const auto& b = dom->body;
    const qhyp::Settings s = settings_of(cfg);
    qhyp::AuditOptions opt;
    opt.boundary_points = get_or<int>(req, "boundary_points", opt.boundary_points);
    opt.frames_per_point = get_or<int>(req, "frames_per_point", opt.frames_per_point);
    opt.random_frames_per_point = get_or<int>(req, "random_frames_per_point", opt.random_frames_per_point);
    const int j_min = get_or<int>(req, "j_min", 4), j_max = get_or<int>(req, "j_max", 14);
    if (j_min < 0 || j_max <= j_min) throw qhyp::InputError("keys 'j_min' and 'j_max' need 0 <= j_min < j_max");
    opt.grid = qhyp::dyadic_grid(j_min, j_max);
    if (req.contains("extra_points")) {
      const Json& ex = req.at("extra_points");
      if (!ex.is_array()) throw qhyp::InputError("key 'extra_points' must be an array of points");
      for (const Json& x : ex) {
        qhyp::Vec v = qhyp::vec_from_json(x, "extra_points");
        if (v.size() != b.real_dim()) throw qhyp::InputError("key 'extra_points' has a point of the wrong length");
        opt.extra_points.push_back(v);
      }
    }
    opt.seed = s.seed;
    const int k = get_k(req, b, 1);
    Json r = qhyp::to_json(qhyp::expansion_audit(b, k, opt, s));
    r["k"] = k;
    r["grid"] = {{"j_min", j_min}, {"j_max", j_max}};
    emit(out, r);
  });
}

qhyp_status qhyp_delta4(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const Json req = request_object(request);
    qhyp::require_known_keys(req, {"depths", "count"}, "delta4 request");
    const qhyp::Settings s = settings_of(cfg);
    const auto js = get_or<std::vector<int>>(req, "depths", {6, 8, 10});
    const int count = get_or<int>(req, "count", 30);
    if (count < 4) throw qhyp::InputError("key 'count' must be at least 4");
    Json rows = Json::array();
    for (int j : js) {
      if (j < 1 || j > 40) throw qhyp::InputError("key 'depths' holds exponents j in [1, 40] for depth 2^-j");
      const double depth = std::ldexp(1.0, -j);
      const auto sample = qhyp::hilbert_depth_sample(dom->body, depth, count, s.seed, s);
      const auto fp = qhyp::four_point_delta(sample.distances, s.seed);
      rows.push_back({{"j", j},
                      {"depth", depth},
                      {"delta", fp.delta},
                      {"points", static_cast<int>(sample.points.size())},
                      {"quadruples", fp.quadruples},
                      {"exhaustive", fp.exhaustive}});
    }
    emit(out, Json{{"rows", rows}, {"count", count}});
  });
}

qhyp_status qhyp_witness(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    require(dom, "domain");
    const Json req = request_object(request);
    qhyp::require_known_keys(req, {"k", "a", "gaps", "n", "pieces", "x", "frame"}, "witness request");
    const auto& b = dom->body;
    const qhyp::Settings s = settings_of(cfg);
    const int k = get_k(req, b, 1);
    const auto gaps = get_or<std::vector<double>>(req, "gaps", {2.0, 4.0, 6.0});
    if (gaps.empty()) throw qhyp::InputError("key 'gaps' must be non-empty");
    for (double g : gaps)
      if (!(g > 0)) throw qhyp::InputError("key 'gaps' must hold positive values");
    qhyp::WitnessOptions o;
    o.a = get_or<double>(req, "a", 1.0);
    o.pieces = get_or<int>(req, "pieces", o.pieces);
    o.n = get_or<int>(req, "n", qhyp::default_witness_n(*std::max_element(gaps.begin(), gaps.end())));

    const qhyp::Vec x = req.contains("x") ? point(req, "x", b) : b.boundary_point(qhyp::unit(b.real_dim(), 0), s);
    qhyp::Mat frame;
    if (req.contains("frame")) {
      frame = qhyp::frame_from_json(req.at("frame"), "frame");
      if (frame.rows() != b.real_dim()) throw qhyp::InputError("key 'frame' has columns of the wrong length");
    } else {
      const auto normals = b.outer_normals(x, s);
      if (normals.empty()) throw qhyp::PreconditionError("no supporting hyperplane found at x");
      std::mt19937_64 rng(s.seed);
      frame = qhyp::tangential_frame(normals.front(), k, b.field(), rng);
    }

    Json rects = Json::array();
    std::vector<double> found;
    for (double g : gaps) {
      o.b = o.a + g;
      const auto w = qhyp::nonhyperbolicity_witness(b, x, frame, o, s);
      found.push_back(w.gap);
      rects.push_back(qhyp::to_json(w));
    }
    bool increasing = true;
    for (size_t i = 1; i < found.size(); ++i) increasing = increasing && found[i] > found[i - 1];
    const double lo = *std::min_element(found.begin(), found.end());
    const double hi = *std::max_element(found.begin(), found.end());
    emit(out, Json{{"k", k},
                   {"gaps", gaps},
                   {"increasing", increasing},
                   {"spread_ratio", lo > 0 ? Json(hi / lo) : Json(nullptr)},
                   {"rectangles", rects}});
  });
}

qhyp_status qhyp_filling(const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    const Json req = request_object(request);
    qhyp::require_known_keys(req,
                             {"metric", "trials", "max_N", "audit_trials", "min_length", "max_length",
                              "certificates"},
                             "filling request");
    const qhyp::Settings s = settings_of(cfg);
    const qhyp::ModelMetric m = qhyp::model_metric_from_json(req.contains("metric") ? req.at("metric") : Json::object());
    const int trials = get_or<int>(req, "trials", 200);
    const int max_N = get_or<int>(req, "max_N", 60);
    const int audit_trials = get_or<int>(req, "audit_trials", 100);
    const double min_length = get_or<double>(req, "min_length", 5.0);
    const double max_length = get_or<double>(req, "max_length", 100.0);
    const bool with_certs = get_or<bool>(req, "certificates", false);
    if (trials < 0 || audit_trials < 0) throw qhyp::InputError("keys 'trials' and 'audit_trials' must be non-negative");
    if (max_N < 4) throw qhyp::InputError("key 'max_N' must be at least 4");
    if (!(min_length > 0) || !(max_length > min_length))
      throw qhyp::InputError("keys 'min_length' and 'max_length' need 0 < min_length < max_length");

    const auto conditions = qhyp::check_conditions(m, 1000, s.seed);
    const auto k = qhyp::derive_constants(m);

    std::vector<StarRun> runs(trials);
    std::vector<Json> certs(with_certs ? trials : 0);
    qhyp::parallel_for(trials, s.workers, [&](int i) {
      StarRun& r = runs[i];
      r.seed = s.seed + static_cast<std::uint64_t>(i);
      const auto star = qhyp::random_star_curve(m, k, max_N, r.seed);
      const auto cert = qhyp::reduce_and_fill(m, star, k);
      r.N = star.N();
      r.triangles = cert.triangles;
      r.max_diameter = cert.final_diameter;
      for (const auto& st : cert.log)
        for (double d : st.diameters) r.max_diameter = std::max(r.max_diameter, d);
      r.replay = qhyp::replay_certificate(star, cert, k.T0);
      if (with_certs) certs[i] = Json{{"star", qhyp::to_json(star)}, {"certificate", qhyp::to_json(cert, false)}};
    });

    Json rows = Json::array();
    int within = 0;
    double worst_ratio = 0.0, worst_diameter = 0.0;
    for (int i = 0; i < trials; ++i) {
      const StarRun& r = runs[i];
      const bool ok = r.triangles <= r.N && r.max_diameter <= k.R && r.replay;
      within += ok ? 1 : 0;
      worst_ratio = std::max(worst_ratio, static_cast<double>(r.triangles) / r.N);
      worst_diameter = std::max(worst_diameter, r.max_diameter);
      Json row{{"seed", r.seed}, {"N", r.N},           {"triangles", r.triangles},
               {"max_diameter", r.max_diameter}, {"replay", r.replay}, {"ok", ok}};
      if (with_certs) row["detail"] = certs[i];
      rows.push_back(row);
    }

    Json result{{"metric", {{"name", m.name}, {"C1", m.C1}, {"C2", m.C2}, {"C3", m.C3}, {"lambda", m.lambda}}},
                {"conditions", {{"a", conditions.a}, {"b", conditions.b}, {"c", conditions.c}, {"samples", conditions.samples}}},
                {"constants", qhyp::to_json(k)},
                {"trials", trials},
                {"within_bound", within},
                {"worst_triangle_ratio", worst_ratio},
                {"worst_diameter", worst_diameter},
                {"summary", within == trials ? std::string("all certificates ≤ N(σ)")
                                             : std::to_string(trials - within) + " certificates exceed N(σ) or R"},
                {"curves", rows}};
    if (audit_trials > 0)
      result["audit"] = qhyp::to_json(qhyp::isoperimetric_audit(m, audit_trials, min_length, max_length, s.seed, s.workers));
    emit(out, result);
  });
}

qhyp_status qhyp_fill_star(const qhyp_config* cfg, const char* request, char** out) {
  return guarded([&] {
    (void)cfg;
    const Json req = request_object(request);
    qhyp::require_known_keys(req, {"metric", "star"}, "fill_star request");
    const qhyp::ModelMetric m = qhyp::model_metric_from_json(req.contains("metric") ? req.at("metric") : Json::object());
    if (!req.contains("star")) throw qhyp::InputError("fill_star request: missing key 'star'");
    const auto star = qhyp::star_from_json(req.at("star"));
    const auto k = qhyp::derive_constants(m);
    qhyp::validate_star(m, star, k);
    const auto cert = qhyp::reduce_and_fill(m, star, k);
    std::string why;
    const bool replay = qhyp::replay_certificate(star, cert, k.T0, &why);
    Json r{{"constants", qhyp::to_json(k)},
           {"N", star.N()},
           {"length", qhyp::star_length(m, star, k.T0)},
           {"certificate", qhyp::to_json(cert)},
           {"replay", replay}};
    if (!replay) r["replay_error"] = why;
    emit(out, r);
  });
}

}  // extern "C"
