#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gramstab/cli.hpp"
#include "gramstab/systems.hpp"

namespace gramstab::cli {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::kConfig, msg); }

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      fail("unknown key '" + item.key() + "' in " + where);
    }
  }
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t get_seed(const json& obj, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    fail(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows,
                      const std::string& what) {
  if (rows.empty() || rows.front().empty()) fail(what + " is empty");
  const size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) fail(what + " has ragged rows");
    for (size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (!m.allFinite()) fail(what + " has non-finite entries");
  return m;
}

// Row-major nested arrays; a flat array is read as a column vector.
Matrix inline_matrix(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) fail(what + " must be a non-empty array");
  std::vector<std::vector<double>> rows;
  for (const json& row : v) {
    if (row.is_number()) {
      rows.push_back({row.get<double>()});
    } else if (row.is_array()) {
      std::vector<double> r;
      for (const json& x : row) {
        if (!x.is_number()) fail(what + " entries must be numbers");
        r.push_back(x.get<double>());
      }
      rows.push_back(std::move(r));
    } else {
      fail(what + " rows must be arrays of numbers");
    }
  }
  return rows_to_matrix(rows, what);
}

// Whitespace-delimited text, one row per line; blank lines and lines starting
// with '#' are skipped.
Matrix file_matrix(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + what + " file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> r;
    std::string token;
    while (ls >> token) {
      try {
        size_t used = 0;
        r.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        fail("bad number '" + token + "' in " + path.string());
      }
    }
    rows.push_back(std::move(r));
  }
  return rows_to_matrix(rows, what);
}

Matrix matrix_field(const json& sys, const char* key, const char* file_key,
                    const std::filesystem::path& base_dir) {
  const bool has_inline = sys.contains(key);
  const bool has_file = sys.contains(file_key);
  if (has_inline == has_file) {
    fail(std::string("system needs exactly one of '") + key + "' and '" + file_key + "'");
  }
  if (has_inline) return inline_matrix(sys.at(key), key);
  const json& p = sys.at(file_key);
  if (!p.is_string()) fail(std::string("'") + file_key + "' must be a path string");
  std::filesystem::path path(p.get<std::string>());
  if (path.is_relative()) path = base_dir / path;
  return file_matrix(path, key);
}

SystemModel parse_system(const json& sys, const std::filesystem::path& base_dir) {
  if (!sys.is_object()) fail("'system' must be an object");
  if (!sys.contains("kind") || !sys.at("kind").is_string()) {
    fail("'system.kind' must be a string");
  }
  const std::string kind = sys.at("kind").get<std::string>();

  if (kind == "matrices") {
    reject_unknown(sys, {"kind", "name", "a", "a_file", "b", "b_file", "T"}, "system");
    SystemModel model;
    model.a = matrix_field(sys, "a", "a_file", base_dir);
    model.b = matrix_field(sys, "b", "b_file", base_dir);
    model.name = sys.value("name", std::string("matrices"));
    model.suggested_horizon = get_number(sys, "T", 1.0);
    model.validate();
    return model;
  }
  if (kind == "random") {
    reject_unknown(sys, {"kind", "n", "m", "seed"}, "system");
    const int n = get_int(sys, "n", 4);
    const int m = get_int(sys, "m", std::max(1, (n + 1) / 2));
    return random_observable_system(n, m, get_seed(sys, "seed", 0));
  }

  reject_unknown(sys, {"kind", "n", "stiffness", "support", "scale"}, "system");
  SystemParams params;
  params.n = get_int(sys, "n", params.n);
  params.stiffness = get_number(sys, "stiffness", params.stiffness);
  params.scale = get_number(sys, "scale", params.scale);
  if (sys.contains("support")) {
    const json& s = sys.at("support");
    if (!s.is_array()) fail("'system.support' must be an array of node indices");
    for (const json& i : s) {
      if (!i.is_number_integer()) fail("'system.support' entries must be integers");
      params.support.push_back(i.get<int>());
    }
  }
  SystemKind parsed;
  try {
    parsed = parse_system_kind(kind);
  } catch (const Error&) {
    fail("unknown system kind '" + kind + "'");
  }
  return build_system(parsed, params);
}

Tolerances parse_tolerances(const json& t) {
  if (!t.is_object()) fail("'tolerances' must be an object");
  reject_unknown(t, {"riccati", "conjugation", "psd_gap", "integral_riccati",
                     "representation", "decay", "route"},
                 "tolerances");
  Tolerances out;
  out.riccati = get_number(t, "riccati", out.riccati);
  out.conjugation = get_number(t, "conjugation", out.conjugation);
  out.psd_gap = get_number(t, "psd_gap", out.psd_gap);
  out.integral_riccati = get_number(t, "integral_riccati", out.integral_riccati);
  out.representation = get_number(t, "representation", out.representation);
  out.decay = get_number(t, "decay", out.decay);
  out.route = get_number(t, "route", out.route);
  for (double v : {out.riccati, out.conjugation, out.psd_gap, out.integral_riccati,
                   out.representation, out.decay, out.route}) {
    if (!(v > 0.0)) fail("tolerances must be positive");
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("configuration must be a JSON object");
  reject_unknown(doc,
                 {"system", "omega", "T", "quadrature_order", "panel_phase", "step",
                  "horizon", "integrator", "x0", "tolerances", "omegas", "seed",
                  "cond_guard", "observability_ratio", "draws", "decay_states",
                  "decay_samples"},
                 "configuration");
  if (!doc.contains("system")) fail("missing 'system'");

  RunConfig cfg;
  cfg.system = parse_system(doc.at("system"), base_dir);

  StabilizerConfig& st = cfg.stabilizer;
  st.omega = get_number(doc, "omega", st.omega);
  st.horizon = get_number(doc, "T", cfg.system.suggested_horizon);
  st.quadrature_order = get_int(doc, "quadrature_order", st.quadrature_order);
  st.panel_phase = get_number(doc, "panel_phase", st.panel_phase);
  st.cond_guard = get_number(doc, "cond_guard", st.cond_guard);
  st.observability_ratio = get_number(doc, "observability_ratio", st.observability_ratio);
  if (!(st.omega > 0.0)) fail("'omega' must be positive");
  if (!(st.horizon > 0.0)) fail("'T' must be positive");
  if (st.quadrature_order < 4) fail("'quadrature_order' must be at least 4");
  if (doc.contains("step")) {
    st.step = get_number(doc, "step", 0.0);
    if (!(st.step > 0.0)) fail("'step' must be positive");
  }
  st.validate();

  if (doc.contains("horizon")) {
    const double h = get_number(doc, "horizon", 0.0);
    if (!(h >= 0.0)) fail("'horizon' must be non-negative");
    cfg.horizon = h;
  }
  if (doc.contains("integrator")) {
    const json& v = doc.at("integrator");
    const std::string name = v.is_string() ? v.get<std::string>() : "";
    if (name == "rk4") {
      cfg.integrator = StepMode::kRk4;
    } else if (name == "exact") {
      cfg.integrator = StepMode::kExact;
    } else {
      fail("'integrator' must be \"rk4\" or \"exact\"");
    }
  }
  if (doc.contains("x0")) {
    const Matrix x = inline_matrix(doc.at("x0"), "x0");
    if (x.cols() != 1 || x.rows() != cfg.system.state_dim()) {
      fail("'x0' must have one entry per state component");
    }
    cfg.x0 = Vector(x.col(0));
  }
  if (doc.contains("tolerances")) cfg.tolerances = parse_tolerances(doc.at("tolerances"));
  if (doc.contains("omegas")) {
    const json& w = doc.at("omegas");
    if (!w.is_array() || w.empty()) fail("'omegas' must be a non-empty array");
    for (const json& v : w) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) {
        fail("'omegas' entries must be positive numbers");
      }
      cfg.omegas.push_back(v.get<double>());
    }
    std::sort(cfg.omegas.begin(), cfg.omegas.end());
  }
  cfg.seed = get_seed(doc, "seed", cfg.seed);
  cfg.draws = get_int(doc, "draws", cfg.draws);
  cfg.decay_states = get_int(doc, "decay_states", cfg.decay_states);
  cfg.decay_samples = get_int(doc, "decay_samples", cfg.decay_samples);
  if (cfg.draws < 0 || cfg.decay_states < 0) fail("'draws' and 'decay_states' must be >= 0");
  if (cfg.decay_samples < 10) fail("'decay_samples' must be at least 10");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open configuration " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

}  // namespace gramstab::cli
