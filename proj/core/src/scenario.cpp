#include "twophase/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "twophase/error.hpp"

namespace twophase {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ValidationError(field, -1, what);
}

void require_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number_or(const json& obj, const char* key, const std::string& path, double fallback) {
  return obj.contains(key) ? number(obj.at(key), join(path, key)) : fallback;
}

double positive(const json& obj, const char* key, const std::string& path, double fallback) {
  const double v = number_or(obj, key, path, fallback);
  if (!(v > 0.0)) fail(join(path, key), "must be positive");
  return v;
}

int positive_int(const json& obj, const char* key, const std::string& path, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  if (!j.is_number_integer() && !(j.is_number() && j.get<double>() == std::floor(j.get<double>())))
    fail(join(path, key), "expected an integer");
  const double v = j.get<double>();
  if (!(v >= 1.0) || v > 1e8) fail(join(path, key), "must be a positive integer");
  return static_cast<int>(v);
}

std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::pair<double, double> range(const json& j, const std::string& path) {
  const auto v = number_list(j, path);
  if (v.size() != 2 || v[0] > v[1]) fail(path, "expected [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

Coefficient coefficient(const json& j, const std::string& path) {
  if (j.is_number()) return Coefficient::constant(j.get<double>());
  if (!j.is_object()) fail(path, "expected a number or an object");
  if (j.contains("constant")) {
    require_keys(j, path, {"constant"});
    return Coefficient::constant(number(j.at("constant"), join(path, "constant")));
  }
  if (j.contains("table")) {
    require_keys(j, path, {"table"});
    const json& t = j.at("table");
    if (!t.is_array() || t.empty()) fail(join(path, "table"), "expected a non-empty array of [s, v]");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto p = number_list(t[i], join(path, "table") + "[" + std::to_string(i) + "]");
      if (p.size() != 2) fail(join(path, "table") + "[" + std::to_string(i) + "]", "expected [s, v]");
      pts.emplace_back(p[0], p[1]);
    }
    return Coefficient::step_table(std::move(pts));
  }
  if (j.contains("expression")) {
    const json& e = j.at("expression");
    if (!e.is_string()) fail(join(path, "expression"), "expected a name");
    const std::string name = e.get<std::string>();
    if (name == "exp_decay") {
      require_keys(j, path, {"expression", "amplitude", "rate", "offset"});
      return Coefficient::exp_decay(number_or(j, "amplitude", path, 1.0), number_or(j, "rate", path, 1.0),
                                    number_or(j, "offset", path, 0.0));
    }
    if (name == "indicator") {
      require_keys(j, path, {"expression", "lo", "hi", "value"});
      if (!j.contains("lo") || !j.contains("hi")) fail(path, "indicator needs lo and hi");
      return Coefficient::indicator(number(j.at("lo"), join(path, "lo")), number(j.at("hi"), join(path, "hi")),
                                    number_or(j, "value", path, 1.0));
    }
    if (name == "linear") {
      require_keys(j, path, {"expression", "intercept", "slope"});
      return Coefficient::linear(number_or(j, "intercept", path, 0.0), number_or(j, "slope", path, 0.0));
    }
    fail(join(path, "expression"), "unknown expression '" + name + "'");
  }
  fail(path, "expected one of constant, table, expression");
}

KernelRegion region(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a region name");
  const auto s = j.get<std::string>();
  if (s == "s_gt_y") return KernelRegion::s_gt_y;
  if (s == "s_ge_y") return KernelRegion::s_ge_y;
  if (s == "s_lt_y") return KernelRegion::s_lt_y;
  if (s == "box") return KernelRegion::box;
  fail(path, "unknown region '" + s + "'");
}

KernelSpec kernel(const json& j) {
  const std::string path = "kernel";
  if (!j.is_object()) fail(path, "expected an object");
  if (!j.contains("form") || !j.at("form").is_string()) fail("kernel.form", "required string");
  const auto form = j.at("form").get<std::string>();
  KernelSpec k;
  if (form == "constant") {
    require_keys(j, path, {"form", "value", "scale", "dominator"});
    k = KernelSpec::constant(number_or(j, "value", path, 1.0));
  } else if (form == "product") {
    require_keys(j, path, {"form", "s_factor", "y_factor", "scale", "dominator"});
    if (!j.contains("s_factor") || !j.contains("y_factor")) fail(path, "product needs s_factor and y_factor");
    k = KernelSpec::product(coefficient(j.at("s_factor"), "kernel.s_factor"),
                            coefficient(j.at("y_factor"), "kernel.y_factor"));
  } else if (form == "table") {
    require_keys(j, path, {"form", "values", "scale", "dominator"});
    if (!j.contains("values") || !j.at("values").is_array()) fail("kernel.values", "required matrix");
    KernelSpec::Table t;
    for (std::size_t i = 0; i < j.at("values").size(); ++i)
      t.values.push_back(number_list(j.at("values")[i], "kernel.values[" + std::to_string(i) + "]"));
    k.form = std::move(t);
  } else if (form == "indicator") {
    require_keys(j, path, {"form", "region", "s_range", "y_range", "value", "scale", "dominator"});
    KernelSpec::Indicator ind;
    ind.region = j.contains("region") ? region(j.at("region"), "kernel.region") : KernelRegion::box;
    if (j.contains("s_range")) ind.s_range = range(j.at("s_range"), "kernel.s_range");
    if (j.contains("y_range")) ind.y_range = range(j.at("y_range"), "kernel.y_range");
    if (ind.region == KernelRegion::box && (!j.contains("s_range") || !j.contains("y_range")))
      fail(path, "box region needs s_range and y_range");
    ind.value = number_or(j, "value", path, 1.0);
    k.form = ind;
  } else {
    fail("kernel.form", "unknown form '" + form + "'");
  }
  k.scale = number_or(j, "scale", path, 1.0);
  if (!(k.scale >= 0.0)) fail("kernel.scale", "must be nonnegative");
  if (j.contains("dominator")) k.dominator = coefficient(j.at("dominator"), "kernel.dominator");
  return k;
}

void apply_override(json& doc, const std::string& key, double value) {
  json* node = &doc;
  std::string rest = key;
  while (true) {
    const auto dot = rest.find('.');
    const std::string head = rest.substr(0, dot);
    if (head.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (!node->is_object()) throw ConfigError("override '" + key + "' does not address an object field");
    if (dot == std::string::npos) {
      (*node)[head] = value;
      return;
    }
    node = &(*node)[head];
    if (node->is_null()) *node = json::object();
    rest = rest.substr(dot + 1);
  }
}

int line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

Scenario parse_scenario_text(const std::string& text, const Overrides& overrides,
                             const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    if (const auto p = msg.find("]: "); p != std::string::npos) msg = msg.substr(p + 3);
    throw ConfigError(origin + ":" + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": parse error: " + msg);
  }
  for (const auto& [key, value] : overrides) apply_override(doc, key, value);

  require_keys(doc, "", {"name", "domain", "coefficients", "kernel", "run", "spectral", "outputs"});
  Scenario sc;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) fail("name", "expected a string");
    sc.name = doc.at("name").get<std::string>();
  } else if (!origin.empty() && origin.front() != '<') {
    sc.name = std::filesystem::path(origin).stem().string();
  }

  if (!doc.contains("domain")) fail("domain", "required");
  {
    const json& d = doc.at("domain");
    require_keys(d, "domain", {"kind", "m", "smax", "length", "n"});
    if (!d.contains("kind") || !d.at("kind").is_string()) fail("domain.kind", "required string");
    const auto kind = d.at("kind").get<std::string>();
    if (kind == "finite") {
      sc.domain.kind = DomainKind::finite;
      if (d.contains("smax")) fail("domain.smax", "not allowed on a finite domain");
      const char* key = d.contains("m") ? "m" : "length";
      if (!d.contains(key)) fail("domain.m", "required for a finite domain");
      sc.domain.length = positive(d, key, "domain", 1.0);
    } else if (kind == "truncated_infinite") {
      sc.domain.kind = DomainKind::truncated_infinite;
      if (d.contains("m")) fail("domain.m", "not allowed on a truncated domain");
      const char* key = d.contains("smax") ? "smax" : "length";
      if (!d.contains(key)) fail("domain.smax", "required for a truncated infinite domain");
      sc.domain.length = positive(d, key, "domain", 1.0);
    } else {
      fail("domain.kind", "expected finite or truncated_infinite");
    }
    sc.n = positive_int(d, "n", "domain", 200);
    if (sc.n < 2) fail("domain.n", "need at least 2 cells");
  }

  if (doc.contains("coefficients")) {
    const json& c = doc.at("coefficients");
    require_keys(c, "coefficients", {"gamma1", "gamma2", "mu", "c1", "c2", "gamma0"});
    auto& p = sc.coefficients;
    if (c.contains("gamma1")) p.gamma1 = coefficient(c.at("gamma1"), "coefficients.gamma1");
    if (c.contains("gamma2")) p.gamma2 = coefficient(c.at("gamma2"), "coefficients.gamma2");
    if (c.contains("mu")) p.mu = coefficient(c.at("mu"), "coefficients.mu");
    if (c.contains("c1")) p.c1 = coefficient(c.at("c1"), "coefficients.c1");
    if (c.contains("c2")) p.c2 = coefficient(c.at("c2"), "coefficients.c2");
    if (c.contains("gamma0")) p.gamma0 = number(c.at("gamma0"), "coefficients.gamma0");
  }

  if (doc.contains("kernel")) sc.kernel = kernel(doc.at("kernel"));

  if (doc.contains("run")) {
    const json& r = doc.at("run");
    require_keys(r, "run", {"dt", "T", "record_every", "u0"});
    sc.run.dt = positive(r, "dt", "run", sc.run.dt);
    sc.run.T = number_or(r, "T", "run", sc.run.T);
    if (!(sc.run.T >= 0.0) || !std::isfinite(sc.run.T)) fail("run.T", "must be nonnegative");
    sc.run.record_every = positive_int(r, "record_every", "run", sc.run.record_every);
    if (r.contains("u0")) {
      const json& u = r.at("u0");
      if (u.is_string()) {
        if (u.get<std::string>() != "default") fail("run.u0", "expected \"default\" or {u1, u2}");
      } else {
        require_keys(u, "run.u0", {"u1", "u2"});
        const Coefficient u1 = u.contains("u1") ? coefficient(u.at("u1"), "run.u0.u1") : Coefficient::constant(0.0);
        const Coefficient u2 = u.contains("u2") ? coefficient(u.at("u2"), "run.u0.u2") : Coefficient::constant(0.0);
        sc.run.u0 = std::pair{u1, u2};
      }
    }
  }

  if (doc.contains("spectral")) {
    const json& s = doc.at("spectral");
    require_keys(s, "spectral", {"tol", "shift0", "max_iterations", "smax_list", "probe_lambdas"});
    sc.spectral.tol = positive(s, "tol", "spectral", sc.spectral.tol);
    if (s.contains("shift0")) sc.spectral.shift0 = number(s.at("shift0"), "spectral.shift0");
    sc.spectral.max_iterations = positive_int(s, "max_iterations", "spectral", sc.spectral.max_iterations);
    if (s.contains("smax_list")) {
      sc.spectral.smax_list = number_list(s.at("smax_list"), "spectral.smax_list");
      for (std::size_t i = 0; i < sc.spectral.smax_list.size(); ++i) {
        if (!(sc.spectral.smax_list[i] > 0.0))
          fail("spectral.smax_list[" + std::to_string(i) + "]", "must be positive");
        if (i > 0 && !(sc.spectral.smax_list[i] > sc.spectral.smax_list[i - 1]))
          fail("spectral.smax_list", "must be strictly increasing");
      }
    }
    if (s.contains("probe_lambdas")) sc.spectral.probe_lambdas = number_list(s.at("probe_lambdas"), "spectral.probe_lambdas");
  }

  if (doc.contains("outputs")) {
    const json& o = doc.at("outputs");
    require_keys(o, "outputs", {"directory", "profile_times", "export_matrix"});
    if (o.contains("directory")) {
      if (!o.at("directory").is_string() || o.at("directory").get<std::string>().empty())
        fail("outputs.directory", "expected a non-empty string");
      sc.outputs.directory = o.at("directory").get<std::string>();
    }
    if (o.contains("profile_times")) sc.outputs.profile_times = number_list(o.at("profile_times"), "outputs.profile_times");
    if (o.contains("export_matrix")) {
      if (!o.at("export_matrix").is_boolean()) fail("outputs.export_matrix", "expected a boolean");
      sc.outputs.export_matrix = o.at("export_matrix").get<bool>();
    }
  }

  // Model invariants are checked on the actual grid so errors name the offending field.
  const SizeGrid grid = sc.grid();
  (void)sample_params(sc.coefficients, grid);
  (void)build_kernel(sc.kernel, grid);
  if (sc.run.u0) {
    for (int i = 0; i < grid.size(); ++i) {
      const double a = sc.run.u0->first(grid.center(i));
      const double b = sc.run.u0->second(grid.center(i));
      if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0)
        throw ValidationError("run.u0", i, "initial data must be finite and nonnegative");
    }
  }

  sc.canonical = doc.dump(2);
  return sc;
}

Scenario parse_scenario(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), overrides, path.string());
}

}  // namespace twophase
