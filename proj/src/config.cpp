#include "paroc/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "paroc/errors.hpp"

namespace paroc {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Ordered key-value view of one config text. Keys are unique; lookup marks
/// the key as consumed so leftovers can be reported as unknown.
class KvBlock {
 public:
  explicit KvBlock(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (std::size_t hash = line.find('#'); hash != std::string::npos)
        line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected 'key = value', got '" + t + "'");
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": empty key");
      if (!kv_.emplace(key, val).second)
        throw ConfigError("config: duplicate key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return kv_.contains(key); }

  std::string take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end())
      throw ConfigError("config: missing required key '" + key + "'");
    consumed_.insert(key);
    return it->second;
  }

  std::string take_or(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    return take(key);
  }

  void reject_unconsumed() const {
    for (const auto& [key, val] : kv_)
      if (!consumed_.contains(key))
        throw ConfigError("config: unknown key '" + key + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
};

double parse_real(const std::string& key, const std::string& text) {
  const char* b = text.data();
  const char* e = b + text.size();
  double v = 0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw ConfigError("config: key '" + key + "': expected a number, got '" +
                      text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const char* b = text.data();
  const char* e = b + text.size();
  long long v = 0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw ConfigError("config: key '" + key + "': expected an integer, got '" +
                      text + "'");
  return v;
}

std::vector<double> parse_reals(const std::string& key,
                                const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(parse_real(key, tok));
  return out;
}

void require_schema_and_kind(KvBlock& kv, const std::string& want_kind) {
  const std::string schema = kv.take("schema");
  if (schema != "1")
    throw ConfigError("config: unsupported schema '" + schema +
                      "' (this build reads schema 1)");
  const std::string kind = kv.take("kind");
  if (kind != want_kind)
    throw ConfigError("config: expected kind = " + want_kind + ", got '" +
                      kind + "'");
}

ScalarFn2 parse_fn(const std::string& key, const std::string& text,
                   VarSet allowed) {
  try {
    return ScalarFn2::parse(text, allowed);
  } catch (const ParseError& e) {
    throw ConfigError("config: key '" + key + "': " + e.what());
  }
}

ProblemSpec problem_from_kv(KvBlock& kv, const std::string& base_dir) {
  require_schema_and_kind(kv, "problem");

  ProblemSpec spec;
  const std::string dk = kv.take("domain.kind");
  const std::vector<double> bounds =
      parse_reals("domain.bounds", kv.take("domain.bounds"));
  if (dk == "interval") {
    if (bounds.size() != 2)
      throw ConfigError("config: domain.bounds: interval wants two numbers");
    spec.domain = SpatialDomain::interval(bounds[0], bounds[1]);
  } else if (dk == "rectangle") {
    if (bounds.size() != 4)
      throw ConfigError("config: domain.bounds: rectangle wants four numbers");
    spec.domain =
        SpatialDomain::rectangle(bounds[0], bounds[1], bounds[2], bounds[3]);
  } else {
    throw ConfigError("config: domain.kind must be interval or rectangle, got '" +
                      dk + "'");
  }

  spec.horizon = parse_real("time.T", kv.take("time.T"));

  spec.coeffs.a11 = parse_fn("coeffs.a", kv.take("coeffs.a"), spec.vars_space());
  if (spec.domain.dim() == 2) {
    spec.coeffs.a22 = kv.has("coeffs.a22")
                          ? parse_fn("coeffs.a22", kv.take("coeffs.a22"),
                                     spec.vars_space())
                          : spec.coeffs.a11;
    if (kv.has("coeffs.a12"))
      spec.coeffs.a12 =
          parse_fn("coeffs.a12", kv.take("coeffs.a12"), spec.vars_space());
  } else if (kv.has("coeffs.a12") || kv.has("coeffs.a22")) {
    throw ConfigError("config: coeffs.a12/a22 only apply to rectangles");
  }

  spec.L = parse_fn("functions.L", kv.take("functions.L"), spec.vars_full());
  spec.f = parse_fn("functions.f", kv.take("functions.f"), spec.vars_f());
  spec.g = parse_fn("functions.g", kv.take("functions.g"), spec.vars_full());
  spec.y0 = parse_fn("init.y0", kv.take("init.y0"), spec.vars_space());

  const std::string wline = kv.take("parameter.w");
  std::istringstream ws(wline);
  std::string wkind;
  ws >> wkind;
  std::string rest =
      wkind.size() < wline.size() ? trim(wline.substr(wkind.size()))
                                  : std::string();
  if (wkind == "constant") {
    spec.w_ref = WSpec::constant_w(parse_real("parameter.w", rest));
  } else if (wkind == "expression") {
    spec.w_ref = WSpec::expression_w(
        parse_fn("parameter.w", rest, spec.vars_data()));
  } else if (wkind == "grid") {
    if (rest.empty())
      throw ConfigError("config: parameter.w: grid wants a file path");
    std::filesystem::path p(rest);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    spec.w_ref = WSpec::grid_w(p.lexically_normal().string());
  } else {
    throw ConfigError(
        "config: parameter.w must start with constant, expression or grid, "
        "got '" +
        wkind + "'");
  }

  kv.reject_unconsumed();
  spec.validate();
  return spec;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

ProblemSpec parse_problem_text(const std::string& text,
                               const std::string& base_dir) {
  KvBlock kv(text);
  return problem_from_kv(kv, base_dir);
}

std::string problem_to_text(const ProblemSpec& spec) {
  std::string s = "schema = 1\nkind = problem\n";
  if (spec.domain.dim() == 1) {
    s += "domain.kind = interval\n";
    s += "domain.bounds = " + format_double(spec.domain.lo[0]) + " " +
         format_double(spec.domain.hi[0]) + "\n";
  } else {
    s += "domain.kind = rectangle\n";
    s += "domain.bounds = " + format_double(spec.domain.lo[0]) + " " +
         format_double(spec.domain.hi[0]) + " " +
         format_double(spec.domain.lo[1]) + " " +
         format_double(spec.domain.hi[1]) + "\n";
  }
  s += "time.T = " + format_double(spec.horizon) + "\n";
  s += "coeffs.a = " + spec.coeffs.a11.to_string() + "\n";
  if (spec.domain.dim() == 2) {
    if (spec.coeffs.a22.to_string() != spec.coeffs.a11.to_string())
      s += "coeffs.a22 = " + spec.coeffs.a22.to_string() + "\n";
    if (!spec.coeffs.a12.empty())
      s += "coeffs.a12 = " + spec.coeffs.a12.to_string() + "\n";
  }
  s += "functions.L = " + spec.L.to_string() + "\n";
  s += "functions.f = " + spec.f.to_string() + "\n";
  s += "functions.g = " + spec.g.to_string() + "\n";
  s += "init.y0 = " + spec.y0.to_string() + "\n";
  switch (spec.w_ref.kind) {
    case WSpec::Kind::constant:
      s += "parameter.w = constant " + format_double(spec.w_ref.value) + "\n";
      break;
    case WSpec::Kind::expression:
      s += "parameter.w = expression " + spec.w_ref.expr.to_string() + "\n";
      break;
    case WSpec::Kind::grid:
      s += "parameter.w = grid " + spec.w_ref.path + "\n";
      break;
  }
  return s;
}

RunConfig load_config(const std::string& path) {
  const std::filesystem::path file(path);
  const std::string base_dir =
      file.has_parent_path() ? file.parent_path().string() : std::string(".");
  KvBlock kv(read_file(path));

  RunConfig rc;
  const std::string kind = kv.take_or("kind", "");
  if (kind == "problem") {
    KvBlock fresh(read_file(path));
    rc.spec = problem_from_kv(fresh, base_dir);
    rc.problem_text = problem_to_text(rc.spec);
    return rc;
  }
  if (kind != "run")
    throw ConfigError("config: expected kind = problem or run, got '" + kind +
                      "'");

  const std::string schema = kv.take("schema");
  if (schema != "1")
    throw ConfigError("config: unsupported schema '" + schema +
                      "' (this build reads schema 1)");

  std::filesystem::path prob(kv.take("problem"));
  if (prob.is_relative()) prob = std::filesystem::path(base_dir) / prob;
  {
    KvBlock pkv(read_file(prob.lexically_normal().string()));
    rc.spec = problem_from_kv(pkv, prob.parent_path().string());
    rc.problem_text = problem_to_text(rc.spec);
  }

  rc.nx = static_cast<int>(parse_integer("mesh.nx", kv.take("mesh.nx")));
  rc.nt = static_cast<int>(parse_integer("mesh.nt", kv.take("mesh.nt")));
  if (rc.nx < 1 || rc.nt < 1)
    throw ConfigError("config: mesh.nx and mesh.nt must be at least 1");

  if (kv.has("seed")) {
    const long long s = parse_integer("seed", kv.take("seed"));
    if (s < 0) throw ConfigError("config: seed must be nonnegative");
    rc.seed = static_cast<std::uint64_t>(s);
  }
  rc.out_dir = kv.take_or("out", rc.out_dir);

  if (kv.has("solver.ncp")) {
    const std::string n = kv.take("solver.ncp");
    if (n == "min")
      rc.ncp.kind = NcpKind::min;
    else if (n == "fischer_burmeister")
      rc.ncp.kind = NcpKind::fischer_burmeister;
    else
      throw ConfigError(
          "config: solver.ncp must be min or fischer_burmeister, got '" + n +
          "'");
  }
  if (kv.has("solver.kkt_tol"))
    rc.ncp.kkt_tol = parse_real("solver.kkt_tol", kv.take("solver.kkt_tol"));
  if (kv.has("solver.max_outer"))
    rc.ncp.max_outer = static_cast<int>(
        parse_integer("solver.max_outer", kv.take("solver.max_outer")));
  if (kv.has("solver.c"))
    rc.ncp.c = parse_real("solver.c", kv.take("solver.c"));
  rc.ncp.validate();

  if (kv.has("sweep.radii"))
    rc.sweep_radii = parse_reals("sweep.radii", kv.take("sweep.radii"));
  if (kv.has("sweep.threads")) {
    rc.threads = static_cast<int>(
        parse_integer("sweep.threads", kv.take("sweep.threads")));
    if (rc.threads < 0)
      throw ConfigError("config: sweep.threads must be nonnegative");
  }

  kv.reject_unconsumed();
  return rc;
}

}  // namespace paroc
