#include "paroc/cli.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "paroc/config.hpp"
#include "paroc/errors.hpp"
#include "paroc/kkt.hpp"
#include "paroc/oracle.hpp"
#include "paroc/sosc.hpp"
#include "paroc/stability.hpp"

namespace paroc {

namespace {

constexpr int kOk = 0;
constexpr int kConfigFail = 1;
constexpr int kSolverFail = 2;
constexpr int kPartialSweep = 3;
constexpr int kVerifyFail = 4;

struct CmdArgs {
  std::string config;
  std::string out;
  std::string mesh;
  std::string warm;
  std::uint64_t seed = 0;
  std::string recipe;  // mms only
};

void add_common(CLI::App* cmd, CmdArgs& a, bool config_required) {
  auto* c = cmd->add_option("--config", a.config,
                            "problem or run config file (schema 1)");
  if (config_required) c->required();
  cmd->add_option("--out", a.out, "output directory (overrides the config)");
  cmd->add_option("--seed", a.seed, "seed (overrides the config)");
  cmd->add_option("--mesh", a.mesh, "mesh as NX,NT (overrides the config)");
  cmd->add_option("--warm", a.warm,
                  "directory holding a saved point (y/u/phi/e .field files)");
}

std::pair<int, int> parse_mesh_flag(const std::string& s) {
  const std::size_t comma = s.find(',');
  if (comma == std::string::npos)
    throw ConfigError("--mesh wants NX,NT, got '" + s + "'");
  auto num = [&](std::string part) {
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size() || v < 1)
      throw ConfigError("--mesh wants positive integers, got '" + s + "'");
    return v;
  };
  return {num(s.substr(0, comma)), num(s.substr(comma + 1))};
}

RunConfig resolve(const CLI::App* cmd, const CmdArgs& a) {
  RunConfig rc = load_config(a.config);
  if (cmd->count("--mesh")) {
    auto [nx, nt] = parse_mesh_flag(a.mesh);
    rc.nx = nx;
    rc.nt = nt;
  }
  if (cmd->count("--seed")) rc.seed = a.seed;
  if (cmd->count("--out")) rc.out_dir = a.out;
  return rc;
}

nlohmann::ordered_json meta_json(const RunConfig& rc) {
  nlohmann::ordered_json m;
  m["version"] = kVersion;
  m["seed"] = rc.seed;
  m["mesh"] = {{"nx", rc.nx}, {"nt", rc.nt}};
  m["solver"] = {
      {"ncp", rc.ncp.kind == NcpKind::min ? "min" : "fischer_burmeister"},
      {"c", rc.ncp.c},
      {"kkt_tol", rc.ncp.kkt_tol},
      {"max_outer", rc.ncp.max_outer}};
  m["config"] = rc.problem_text;
  return m;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  os << text;
}

nlohmann::ordered_json residuals_json(const KktResiduals& r) {
  return {{"state", r.state},
          {"adjoint", r.adjoint},
          {"stat", r.stat},
          {"comp", r.comp}};
}

int cmd_solve(const CLI::App* cmd, const CmdArgs& a) {
  RunConfig rc = resolve(cmd, a);
  auto mesh = rc.spec.make_mesh(rc.nx, rc.nt);
  GridField w = rc.spec.w_ref.materialize(mesh);

  KktPoint warm;
  const bool has_warm = cmd->count("--warm") > 0;
  if (has_warm) warm = load_kkt_point(rc.spec, a.warm, mesh, w);

  OcpReport rep;
  KktPoint pt = solve_ocp(rc.spec, w, rc.ncp, &rep, has_warm ? &warm : nullptr);
  save_kkt_point(pt, rc.out_dir);

  nlohmann::ordered_json j = meta_json(rc);
  j["status"] = to_string(rep.status);
  j["iters"] = rep.iters;
  j["j"] = rep.j_trace.back();
  j["gamma0"] = {{"nominal", rep.gamma0_nominal}, {"final", rep.gamma0_final}};
  j["residuals"] = residuals_json(pt.res);
  j["message"] = rep.message;
  write_text(std::filesystem::path(rc.out_dir) / "solve.json", j.dump(2) + "\n");

  std::cout << "solve: status=" << to_string(rep.status)
            << " iters=" << rep.iters
            << " j=" << format_double(rep.j_trace.back()) << " out="
            << rc.out_dir << "\n";
  return rep.status == OcpStatus::converged ? kOk : kSolverFail;
}

int cmd_sweep(const CLI::App* cmd, const CmdArgs& a) {
  RunConfig rc = resolve(cmd, a);
  auto mesh = rc.spec.make_mesh(rc.nx, rc.nt);
  GridField w = rc.spec.w_ref.materialize(mesh);

  SweepPlan plan = default_sweep_plan(mesh, rc.seed);
  if (!rc.sweep_radii.empty()) {
    plan.radii = rc.sweep_radii;
    plan.validate();
  }

  SweepResult res = perturbation_sweep(rc.spec, w, plan, rc.ncp, rc.threads);

  nlohmann::ordered_json j = meta_json(rc);
  j["report"] = nlohmann::ordered_json::parse(res.to_json());
  const std::filesystem::path out(rc.out_dir);
  write_text(out / "sweep.json", j.dump(2) + "\n");
  write_text(out / "sweep.csv", res.to_csv());
  write_text(out / "slopes.csv", sweep_slopes_csv(res));

  int valid = 0;
  for (const SweepRecord& r : res.records) valid += r.valid ? 1 : 0;
  std::cout << "sweep: " << valid << "/" << res.records.size()
            << " records valid, k_hat=" << format_double(res.k_hat)
            << " k_hat_adjoint=" << format_double(res.k_hat_adjoint)
            << " out=" << rc.out_dir << "\n";
  if (valid != static_cast<int>(res.records.size())) {
    std::cerr << "sweep: only " << valid << " of " << res.records.size()
              << " records valid\n";
    return kPartialSweep;
  }
  return kOk;
}

int cmd_sosc(const CLI::App* cmd, const CmdArgs& a) {
  RunConfig rc = resolve(cmd, a);
  auto mesh = rc.spec.make_mesh(rc.nx, rc.nt);
  GridField w = rc.spec.w_ref.materialize(mesh);

  KktPoint pt = cmd->count("--warm")
                    ? load_kkt_point(rc.spec, a.warm, mesh, w)
                    : solve_ocp(rc.spec, w, rc.ncp);
  CoercivityReport cr = coercivity(rc.spec, pt, w);

  nlohmann::ordered_json j = meta_json(rc);
  j["report"] = nlohmann::ordered_json::parse(cr.to_json());
  write_text(std::filesystem::path(rc.out_dir) / "sosc.json", j.dump(2) + "\n");

  std::cout << "sosc: alpha=" << format_double(cr.alpha)
            << " rho=" << format_double(cr.rho)
            << " verdict=" << to_string(cr.verdict) << " method="
            << to_string(cr.method) << "\n";
  return cr.verdict == CoercivityVerdict::holds ? kOk : kVerifyFail;
}

int cmd_verify(const CLI::App* cmd, const CmdArgs& a) {
  RunConfig rc = resolve(cmd, a);
  if (!cmd->count("--warm"))
    throw ConfigError("verify wants --warm pointing at a saved point");
  auto mesh = rc.spec.make_mesh(rc.nx, rc.nt);
  GridField w = rc.spec.w_ref.materialize(mesh);

  KktPoint pt = load_kkt_point(rc.spec, a.warm, mesh, w);
  const double gamma0 = h4_margin(rc.spec, pt, w);
  CoercivityReport cr = coercivity(rc.spec, pt, w);

  double max_eg = 0;
  double min_e = 0;
  for (int n = 1; n <= mesh->nt(); ++n)
    for (int i = 0; i < mesh->n_space(); ++i) {
      EvalPoint p = mesh->point(i, n);
      p.y = pt.y.at(n, i);
      p.u = pt.u.at(n, i);
      p.w = w.at(n, i);
      const double e = pt.e.at(n, i);
      max_eg = std::max(max_eg, std::abs(e * rc.spec.g.value(p)));
      min_e = std::min(min_e, e);
    }

  // The exact discrete-equation defect of a sampled continuous solution is
  // first order in tau and second order in h, observed factor about 0.16;
  // 0.5 leaves headroom without accepting garbage. Algebraic rows hold
  // exactly for both solved and sampled points.
  const double thr_pde = 0.5 * (mesh->tau() + mesh->h() * mesh->h());
  const double thr_alg = 1e-6;
  const bool pass = pt.res.state <= thr_pde && pt.res.adjoint <= thr_pde &&
                    pt.res.stat <= thr_alg && pt.res.comp <= thr_alg &&
                    max_eg <= 1e-9 && min_e >= -1e-9 && gamma0 > 0;

  nlohmann::ordered_json j = meta_json(rc);
  j["residuals"] = residuals_json(pt.res);
  j["thresholds"] = {{"pde", thr_pde}, {"algebraic", thr_alg}};
  j["gamma0"] = gamma0;
  j["max_abs_eg"] = max_eg;
  j["min_e"] = min_e;
  j["coercivity"] = nlohmann::ordered_json::parse(cr.to_json());
  j["pass"] = pass;
  write_text(std::filesystem::path(rc.out_dir) / "verify.json",
             j.dump(2) + "\n");

  std::cout << "verify: state=" << format_double(pt.res.state)
            << " adjoint=" << format_double(pt.res.adjoint)
            << " stat=" << format_double(pt.res.stat)
            << " comp=" << format_double(pt.res.comp) << "\n";
  std::cout << "verify: gamma0=" << format_double(gamma0)
            << " alpha=" << format_double(cr.alpha)
            << " rho=" << format_double(cr.rho) << " "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kOk : kVerifyFail;
}

int cmd_gradcheck(const CLI::App* cmd, const CmdArgs& a) {
  RunConfig rc = resolve(cmd, a);
  auto mesh = rc.spec.make_mesh(rc.nx, rc.nt);
  GridField w = rc.spec.w_ref.materialize(mesh);

  GridField u = cmd->count("--warm")
                    ? GridField::load(
                          (std::filesystem::path(a.warm) / "u.field").string(),
                          mesh)
                    : GridField(mesh, 0.0);
  GradCheckResult r = fd_gradient_check(rc.spec, u, w, 5, 1e-5, rc.seed);

  nlohmann::ordered_json j = meta_json(rc);
  j["max_rel_error"] = r.max_rel_error;
  j["directions"] = r.directions;
  j["step"] = r.step;
  j["min_margin"] = r.min_margin;
  const bool pass = r.max_rel_error <= 1e-4;
  j["pass"] = pass;
  write_text(std::filesystem::path(rc.out_dir) / "gradcheck.json",
             j.dump(2) + "\n");

  std::cout << "gradcheck: max_rel_error=" << format_double(r.max_rel_error)
            << " min_margin=" << format_double(r.min_margin) << " "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kOk : kVerifyFail;
}

int cmd_mms(const CLI::App* cmd, const CmdArgs& a) {
  Recipe recipe;
  if (a.recipe == "lq_inactive")
    recipe = Recipe::lq_inactive;
  else if (a.recipe == "lq_active_band")
    recipe = Recipe::lq_active_band;
  else if (a.recipe == "semilinear_band")
    recipe = Recipe::semilinear_band;
  else
    throw ConfigError(
        "mms: recipe must be lq_inactive, lq_active_band or semilinear_band, "
        "got '" +
        a.recipe + "'");

  int nx = 16, nt = 16;
  if (cmd->count("--mesh")) std::tie(nx, nt) = parse_mesh_flag(a.mesh);
  const std::string out = cmd->count("--out") ? a.out : std::string("out");

  auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), nx, nt,
                                      1.0);
  ManufacturedCase mc = build_manufactured(recipe, mesh);
  KktPoint pt = mc.exact_point();

  save_kkt_point(pt, out);
  mc.w_ref.save((std::filesystem::path(out) / "w.field").string());

  // Export references the sampled parameter file next to the config, so the
  // directory is a self-contained problem other commands can consume.
  ProblemSpec exported = mc.spec;
  exported.w_ref = WSpec::grid_w("w.field");
  write_text(std::filesystem::path(out) / "problem.cfg",
             problem_to_text(exported));

  RunConfig echo;
  echo.spec = exported;
  echo.problem_text = problem_to_text(exported);
  echo.nx = nx;
  echo.nt = nt;
  echo.seed = cmd->count("--seed") ? a.seed : 0;
  nlohmann::ordered_json j = meta_json(echo);
  j["recipe"] = a.recipe;
  j["residuals"] = residuals_json(pt.res);
  int active = 0;
  for (std::uint8_t m : mc.active) active += m;
  j["active_nodes"] = active;
  write_text(std::filesystem::path(out) / "mms.json", j.dump(2) + "\n");

  std::cout << "mms: recipe=" << a.recipe << " mesh=" << nx << "," << nt
            << " out=" << out << "\n";
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Parametric parabolic optimal control toolkit"};
  app.require_subcommand(1);

  CmdArgs a_solve, a_sweep, a_sosc, a_verify, a_grad, a_mms;
  CLI::App* solve = app.add_subcommand(
      "solve", "solve the optimality system and save the point");
  add_common(solve, a_solve, true);
  CLI::App* sweep = app.add_subcommand(
      "sweep", "perturb the parameter and tabulate solution distances");
  add_common(sweep, a_sweep, true);
  CLI::App* sosc = app.add_subcommand(
      "sosc", "estimate the smallest curvature of the reduced quadratic form");
  add_common(sosc, a_sosc, true);
  CLI::App* verify = app.add_subcommand(
      "verify", "check a saved point against the optimality conditions");
  add_common(verify, a_verify, true);
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "compare the adjoint gradient with finite differences");
  add_common(grad, a_grad, true);
  CLI::App* mms = app.add_subcommand(
      "mms", "export a manufactured problem with its exact fields");
  mms->add_option("recipe", a_mms.recipe,
                  "lq_inactive | lq_active_band | semilinear_band")
      ->required();
  add_common(mms, a_mms, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFail;
  }

  try {
    if (solve->parsed()) return cmd_solve(solve, a_solve);
    if (sweep->parsed()) return cmd_sweep(sweep, a_sweep);
    if (sosc->parsed()) return cmd_sosc(sosc, a_sosc);
    if (verify->parsed()) return cmd_verify(verify, a_verify);
    if (grad->parsed()) return cmd_gradcheck(grad, a_grad);
    if (mms->parsed()) return cmd_mms(mms, a_mms);
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverFail;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFail;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigFail;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kSolverFail;
  }
  return kConfigFail;
}

}  // namespace paroc
