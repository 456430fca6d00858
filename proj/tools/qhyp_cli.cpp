// Command-line front end. Talks to the toolkit only through the C interface.

#include "qhyp/qhyp.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

void check(qhyp_status st) {
  if (st != QHYP_OK) throw Failure(static_cast<int>(st), qhyp_last_error());
}

// Usage: take(qhyp_call(..., &out), &out); `out` is read only after the call.
Json take(qhyp_status st, char** text) {
  check(st);
  std::unique_ptr<char, void (*)(char*)> guard(*text, qhyp_string_free);
  *text = nullptr;
  return Json::parse(guard.get());
}

struct ConfigHandle {
  qhyp_config* p = qhyp_config_new();
  ~ConfigHandle() { qhyp_config_free(p); }
};

struct DomainHandle {
  qhyp_domain* p = nullptr;
  ~DomainHandle() { qhyp_domain_free(p); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure(2, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure(2, "cannot write " + path.string());
  out << text;
}

std::string num(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string cell(const Json& v) {
  if (v.is_null()) return "nan";
  if (v.is_number_float()) return num(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + cell(v[i]);
    return s;
  }
  return v.dump();
}

struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct Run {
  std::string command;
  Json inputs = Json::object();
  Json result;
  std::vector<Table> tables;
  std::vector<std::pair<std::string, std::string>> input_files;  // name, raw text
};

struct Common {
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::vector<std::string> tols;
  std::string out_dir;
  std::string format = "json";
  bool format_given = false;
};

std::string render_delimited(const Run& run, const Json& header, bool csv) {
  std::ostringstream os;
  os << "# qhyp " << qhyp_version() << " " << run.command << "\n";
  os << "# config " << header.dump() << "\n";
  for (size_t t = 0; t < run.tables.size(); ++t) {
    const Table& tab = run.tables[t];
    if (t) os << (csv ? "\n" : "\n\n");
    os << "# " << tab.title << "\n";
    if (!csv) os << "# ";
    for (size_t c = 0; c < tab.columns.size(); ++c) os << (c ? (csv ? "," : " ") : "") << tab.columns[c];
    os << "\n";
    for (const auto& row : tab.rows) {
      for (size_t c = 0; c < row.size(); ++c) {
        std::string v = row[c];
        if (csv && v.find_first_of(",\"") != std::string::npos) v = "\"" + v + "\"";
        if (!csv && v.find(' ') != std::string::npos) v = "\"" + v + "\"";
        os << (c ? (csv ? "," : " ") : "") << v;
      }
      os << "\n";
    }
  }
  return os.str();
}

void finish(const Run& run, const Common& common, const Json& config) {
  Json doc{{"tool", "qhyp"},
           {"version", qhyp_version()},
           {"command", run.command},
           {"config", config},
           {"inputs", run.inputs},
           {"result", run.result}};
  const std::string json_text = doc.dump(2) + "\n";
  std::string text = json_text;
  if (common.format == "csv") text = render_delimited(run, config, true);
  if (common.format == "gnuplot") text = render_delimited(run, config, false);
  std::cout << text;

  if (common.out_dir.empty()) return;
  const fs::path dir(common.out_dir);
  std::error_code ec;
  fs::create_directories(dir / "inputs", ec);
  if (ec) throw Failure(2, "cannot create " + (dir / "inputs").string() + ": " + ec.message());
  write_file(dir / (run.command + ".json"), json_text);
  if (common.format == "csv") write_file(dir / (run.command + ".csv"), text);
  if (common.format == "gnuplot") write_file(dir / (run.command + ".dat"), text);
  for (const auto& [name, raw] : run.input_files) write_file(dir / "inputs" / name, raw);
  write_file(dir / "inputs" / "request.json",
             Json{{"command", run.command}, {"config", config}, {"inputs", run.inputs}}.dump(2) + "\n");
}

Json vec_json(const std::vector<double>& v) { return Json(v); }

// --- subcommands ------------------------------------------------------------

void load_domain(const std::string& path, DomainHandle& dom, Run& run, const std::string& key = "domain") {
  const std::string text = read_file(path);
  check(qhyp_domain_parse(text.c_str(), &dom.p));
  Json parsed = Json::parse(text);
  if (run.inputs.contains(key)) {
    run.inputs[key].push_back(parsed);
  } else {
    run.inputs[key] = parsed;
  }
  run.input_files.emplace_back(fs::path(path).filename().string(), text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical toolkit for k-quasihyperbolic metrics on convex domains and model-metric filling"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(qhyp_version()));

  Common common;
  app.add_option("--seed", common.seed, "64-bit seed");
  app.add_option("--workers", common.workers, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--tol", common.tols, "Tolerance override NAME=VALUE (repeatable)");
  app.add_option("--out", common.out_dir, "Directory receiving outputs and a copy of the inputs");
  app.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"json", "csv", "gnuplot"}));

  std::string domain_path;
  std::vector<std::string> domain_paths;
  int k = 1;
  std::vector<double> p, v, q;

  auto* metric = app.add_subcommand("metric", "q^(k)(p; v) with its bracket and frame");
  metric->add_option("--domain", domain_path, "Domain JSON file")->required();
  metric->add_option("--k", k, "K-dimension of the slices");
  metric->add_option("--p", p, "Base point, comma separated")->delimiter(',')->required();
  metric->add_option("--v", v, "Tangent vector, comma separated")->delimiter(',')->required();

  auto* dist = app.add_subcommand("dist", "Upper and lower bounds on dist^(k)(p, q)");
  dist->add_option("--domain", domain_path, "Domain JSON file")->required();
  dist->add_option("--k", k, "K-dimension of the slices");
  dist->add_option("--p", p, "First point")->delimiter(',')->required();
  dist->add_option("--q", q, "Second point")->delimiter(',')->required();

  auto* hilbert = app.add_subcommand("hilbert", "Hilbert distance on a bounded real domain");
  hilbert->add_option("--domain", domain_path, "Domain JSON file")->required();
  hilbert->add_option("--p", p, "First point")->delimiter(',')->required();
  hilbert->add_option("--q", q, "Second point")->delimiter(',')->required();

  int boundary_points = 16, frames_per_point = 4, random_frames = 1, j_min = 4, j_max = 14;
  std::vector<std::string> extra_points;
  auto add_expansion_options = [&](CLI::App* sub) {
    sub->add_option("--domain", domain_path, "Domain JSON file")->required();
    sub->add_option("--k", k, "K-dimension of the frames");
    sub->add_option("--boundary-points", boundary_points, "Sampled boundary points");
    sub->add_option("--frames-per-point", frames_per_point, "Tangential frames per boundary point");
    sub->add_option("--random-frames", random_frames, "Unrestricted random frames per boundary point");
    sub->add_option("--j-min", j_min, "Coarsest depth 2^-j");
    sub->add_option("--j-max", j_max, "Finest depth 2^-j");
    sub->add_option("--extra-point", extra_points, "Boundary point always audited, comma separated (repeatable)");
  };
  auto* expansion = app.add_subcommand("expansion", "Expansion audit of slice distances near the boundary");
  add_expansion_options(expansion);
  auto* report = app.add_subcommand("report", "Expansion audit as a CSV table (same options as expansion)");
  add_expansion_options(report);

  std::vector<int> depths{6, 8, 10};
  int count = 30;
  auto* delta4 = app.add_subcommand("delta4", "Four-point delta of Hilbert samples at several depths");
  delta4->add_option("--domain", domain_paths, "Domain JSON file (repeatable)")->required();
  delta4->add_option("--k", k, "Accepted for uniformity; the samples use the Hilbert distance");
  delta4->add_option("--depths", depths, "Exponents j of the depths 2^-j")->delimiter(',');
  delta4->add_option("--count", count, "Points per sample");

  double a = 1.0;
  std::vector<double> gaps{2.0, 4.0, 6.0};
  std::optional<int> n;
  int pieces = 64;
  std::vector<double> witness_x;
  auto* witness = app.add_subcommand("witness", "Quasi-geodesic rectangles with certified slimness gaps");
  witness->add_option("--domain", domain_path, "Domain JSON file")->required();
  witness->add_option("--k", k, "K-dimension");
  witness->add_option("--a", a, "Start parameter of the rectangle");
  witness->add_option("--gaps", gaps, "Values of b - a")->delimiter(',');
  witness->add_option("--n", n, "Tangential parameter (default from the largest gap)");
  witness->add_option("--pieces", pieces, "Pieces per side for the certified gap");
  witness->add_option("--x", witness_x, "Boundary point (default: hit along e1)")->delimiter(',');

  std::string metric_name = "builtin";
  double mu = 0.5, min_length = 5.0, max_length = 100.0;
  int trials = 200, max_N = 60, audit_trials = 100;
  bool certificates = false;
  auto* filling = app.add_subcommand("filling", "Filling certificates for random star curves and the isoperimetric audit");
  filling->add_option("--metric", metric_name, "Model metric")->check(CLI::IsMember({"builtin", "euclidean", "power"}));
  filling->add_option("--mu", mu, "Exponent of the power metric");
  filling->add_option("--trials", trials, "Random star curves");
  filling->add_option("--max-N", max_N, "Largest word length");
  filling->add_option("--audit-trials", audit_trials, "Closed curves in the isoperimetric audit (0 skips it)");
  filling->add_option("--min-length", min_length, "Shortest audit curve");
  filling->add_option("--max-length", max_length, "Longest audit curve");
  filling->add_flag("--certificates", certificates, "Include every certificate in the JSON output");

  std::string star_path;
  auto* fill_star = app.add_subcommand("fill-star", "Certificate for one star curve read from JSON");
  fill_star->add_option("--star", star_path, "Star curve JSON file (array of V/H pieces)")->required();
  fill_star->add_option("--metric", metric_name, "Model metric")->check(CLI::IsMember({"builtin", "euclidean", "power"}));
  fill_star->add_option("--mu", mu, "Exponent of the power metric");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  for (auto* f : app.get_options())
    if (f->get_name() == "--format" && f->count() > 0) common.format_given = true;

  try {
    ConfigHandle cfg;
    if (!cfg.p) throw Failure(4, "out of memory");
    if (common.seed) check(qhyp_config_set_seed(cfg.p, *common.seed));
    check(qhyp_config_set(cfg.p, "workers", common.workers));
    for (const std::string& t : common.tols) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Failure(2, "--tol expects NAME=VALUE, got '" + t + "'");
      double value = 0.0;
      const std::string rhs = t.substr(eq + 1);
      auto r = std::from_chars(rhs.data(), rhs.data() + rhs.size(), value);
      if (r.ec != std::errc() || r.ptr != rhs.data() + rhs.size())
        throw Failure(2, "--tol value for '" + t.substr(0, eq) + "' is not a number");
      check(qhyp_config_set(cfg.p, t.substr(0, eq).c_str(), value));
    }
    char* cfg_text = nullptr;
    const Json config = take(qhyp_config_json(cfg.p, &cfg_text), &cfg_text);

    Run run;
    char* out = nullptr;

    if (metric->parsed()) {
      run.command = "metric";
      DomainHandle dom;
      load_domain(domain_path, dom, run);
      run.inputs["request"] = {{"p", vec_json(p)}, {"v", vec_json(v)}, {"k", k}};
      run.result = take(qhyp_metric(dom.p, cfg.p, run.inputs["request"].dump().c_str(), &out), &out);
      Table t{"metric", {"k", "value", "lower", "upper", "delta"}, {}};
      const Json& r = run.result;
      t.rows.push_back({cell(r["k"]), cell(r["value"]), cell(r["lower"]), cell(r["upper"]), cell(r["delta"])});
      run.tables.push_back(t);
    } else if (dist->parsed()) {
      run.command = "dist";
      DomainHandle dom;
      load_domain(domain_path, dom, run);
      run.inputs["request"] = {{"p", vec_json(p)}, {"q", vec_json(q)}, {"k", k}};
      run.result = take(qhyp_distance(dom.p, cfg.p, run.inputs["request"].dump().c_str(), &out), &out);
      const Json& r = run.result;
      run.tables.push_back({"distance", {"k", "lower", "upper", "candidate"},
                            {{cell(r["k"]), cell(r["lower"]), cell(r["upper"]), cell(r["candidate"])}}});
      Table rounds{"refinement rounds", {"vertices", "upper"}, {}};
      for (size_t i = 0; i < r["round_upper"].size(); ++i)
        rounds.rows.push_back({cell(r["round_vertices"][i]), cell(r["round_upper"][i])});
      run.tables.push_back(rounds);
    } else if (hilbert->parsed()) {
      run.command = "hilbert";
      DomainHandle dom;
      load_domain(domain_path, dom, run);
      run.inputs["request"] = {{"p", vec_json(p)}, {"q", vec_json(q)}};
      run.result = take(qhyp_hilbert(dom.p, cfg.p, run.inputs["request"].dump().c_str(), &out), &out);
      run.tables.push_back({"hilbert", {"value"}, {{cell(run.result["value"])}}});
    } else if (expansion->parsed() || report->parsed()) {
      run.command = expansion->parsed() ? "expansion" : "report";
      if (report->parsed() && !common.format_given) common.format = "csv";
      DomainHandle dom;
      load_domain(domain_path, dom, run);
      Json req{{"k", k},
               {"boundary_points", boundary_points},
               {"frames_per_point", frames_per_point},
               {"random_frames_per_point", random_frames},
               {"j_min", j_min},
               {"j_max", j_max}};
      if (!extra_points.empty()) {
        Json pts = Json::array();
        for (const std::string& s : extra_points) {
          std::vector<double> xs;
          std::stringstream ss(s);
          std::string item;
          while (std::getline(ss, item, ',')) {
            double val = 0.0;
            auto r = std::from_chars(item.data(), item.data() + item.size(), val);
            if (r.ec != std::errc() || r.ptr != item.data() + item.size())
              throw Failure(2, "--extra-point expects comma separated numbers, got '" + s + "'");
            xs.push_back(val);
          }
          pts.push_back(xs);
        }
        req["extra_points"] = pts;
      }
      run.inputs["request"] = req;
      run.result = take(qhyp_expansion(dom.p, cfg.p, req.dump().c_str(), &out), &out);
      Table tan{"tangential frames (" + run.result["family"].get<std::string>() + "); verdict: " +
                    run.result["verdict"].get<std::string>(),
                {"x", "V-hash", "lambda", "C", "residual", "verdict"}, {}};
      Table rnd{"random frames", {"x", "V-hash", "lambda", "C", "residual", "verdict"}, {}};
      for (const Json& e : run.result["entries"]) {
        std::vector<std::string> row{cell(e["x"]),  cell(e["frame_hash"]), cell(e["lambda"]),
                                     cell(e["C"]), cell(e["residual"]),   cell(e["verdict"])};
        (e["tangential"].get<bool>() ? tan : rnd).rows.push_back(row);
      }
      run.tables.push_back(tan);
      if (!rnd.rows.empty()) run.tables.push_back(rnd);
    } else if (delta4->parsed()) {
      run.command = "delta4";
      run.inputs["domain"] = Json::array();
      run.inputs["request"] = {{"depths", depths}, {"count", count}};
      run.result = {{"tables", Json::array()}};
      for (const std::string& path : domain_paths) {
        DomainHandle dom;
        load_domain(path, dom, run);
        Json r = take(qhyp_delta4(dom.p, cfg.p, run.inputs["request"].dump().c_str(), &out), &out);
        const std::string name = fs::path(path).filename().string();
        r["domain"] = name;
        Table t{name, {"j", "depth", "delta", "quadruples"}, {}};
        for (const Json& row : r["rows"])
          t.rows.push_back({cell(row["j"]), cell(row["depth"]), cell(row["delta"]), cell(row["quadruples"])});
        run.tables.push_back(t);
        run.result["tables"].push_back(r);
      }
    } else if (witness->parsed()) {
      run.command = "witness";
      DomainHandle dom;
      load_domain(domain_path, dom, run);
      Json req{{"k", k}, {"a", a}, {"gaps", gaps}, {"pieces", pieces}};
      if (n) req["n"] = *n;
      if (!witness_x.empty()) req["x"] = witness_x;
      run.inputs["request"] = req;
      run.result = take(qhyp_witness(dom.p, cfg.p, req.dump().c_str(), &out), &out);
      Table t{"rectangles; increasing: " + std::string(run.result["increasing"].get<bool>() ? "yes" : "no"),
              {"b_minus_a", "a", "b", "n", "side_ab", "side_normal", "side_top", "gap"}, {}};
      for (const Json& w : run.result["rectangles"])
        t.rows.push_back({num(w["b"].get<double>() - w["a"].get<double>()), cell(w["a"]), cell(w["b"]), cell(w["n"]),
                          cell(w["side_bounds"][0]), cell(w["side_bounds"][1]), cell(w["side_bounds"][2]),
                          cell(w["gap"])});
      run.tables.push_back(t);
    } else if (filling->parsed()) {
      run.command = "filling";
      Json req{{"metric", {{"name", metric_name}, {"mu", mu}}},
               {"trials", trials},
               {"max_N", max_N},
               {"audit_trials", audit_trials},
               {"min_length", min_length},
               {"max_length", max_length},
               {"certificates", certificates}};
      run.inputs["request"] = req;
      run.result = take(qhyp_filling(cfg.p, req.dump().c_str(), &out), &out);
      const Json& r = run.result;
      std::cerr << r["summary"].get<std::string>() << " (" << r["within_bound"] << "/" << r["trials"] << ")\n";
      Table t{"certificates; " + r["summary"].get<std::string>(),
              {"seed", "N", "triangles", "max_diameter", "replay", "ok"}, {}};
      for (const Json& c : r["curves"])
        t.rows.push_back({cell(c["seed"]), cell(c["N"]), cell(c["triangles"]), cell(c["max_diameter"]),
                          cell(c["replay"]), cell(c["ok"])});
      run.tables.push_back(t);
      if (r.contains("audit")) {
        Table au{"isoperimetric audit; A = " + cell(r["audit"]["A"]) + ", B = " + cell(r["audit"]["B"]) +
                     ", residual correlation with L^2 = " + cell(r["audit"]["residual_corr"]),
                 {"length", "triangles", "N"}, {}};
        for (const Json& s : r["audit"]["samples"])
          au.rows.push_back({cell(s["length"]), cell(s["triangles"]), cell(s["N"])});
        run.tables.push_back(au);
      }
    } else if (fill_star->parsed()) {
      run.command = "fill-star";
      const std::string text = read_file(star_path);
      Json star;
      try {
        star = Json::parse(text);
      } catch (const Json::parse_error& e) {
        throw Failure(2, "star file is not valid JSON: " + std::string(e.what()));
      }
      run.input_files.emplace_back(fs::path(star_path).filename().string(), text);
      Json req{{"metric", {{"name", metric_name}, {"mu", mu}}}, {"star", star}};
      run.inputs["request"] = req;
      run.result = take(qhyp_fill_star(cfg.p, req.dump().c_str(), &out), &out);
      Table t{"surgery log", {"step", "case", "depth", "N_before", "N_after", "triangles"}, {}};
      int i = 0;
      for (const Json& st : run.result["certificate"]["log"])
        t.rows.push_back({std::to_string(i++), cell(st["case"]), cell(st["depth"]), cell(st["N_before"]),
                          cell(st["N_after"]), cell(st["triangles"])});
      run.tables.push_back(t);
    }

    finish(run, common, config);
    return 0;
  } catch (const Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
