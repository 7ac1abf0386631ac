// Acceptance gate: ten independent checks covering solver exactness, adjoint
// consistency, discretization orders, oracle agreement, curvature analysis,
// perturbation stability, growth, complementarity and reproducibility. Each
// check prints one PASS/FAIL line; the exit code is the failure count.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "paroc/cli.hpp"
#include "paroc/config.hpp"
#include "paroc/kkt.hpp"
#include "paroc/norms.hpp"
#include "paroc/oracle.hpp"
#include "paroc/pde.hpp"
#include "paroc/rng.hpp"
#include "paroc/sosc.hpp"
#include "paroc/stability.hpp"

using namespace paroc;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Gate {
  int failures = 0;

  void line(int idx, bool pass, const char* name, const std::string& detail) {
    std::printf("[%2d] %s %s (%s)\n", idx, pass ? "PASS" : "FAIL", name,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
};

struct ConvergedPoint {
  ProblemSpec spec;
  KktPoint pt;
  GridField w;
  std::string origin;
};

std::vector<ConvergedPoint> g_points;
std::vector<const SweepResult*> g_sweeps;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

double loglog_slope(const std::vector<double>& xs,
                    const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < n; ++k) {
    const double lx = std::log(xs[k]), ly = std::log(ys[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string fmt(double v) { return format_double(v); }

/// Semilinear benchmark: reaction y*(w^2 + t^4 + x^2), mixed constraint
/// u + w <= 0, control target pushing into the constraint on half the
/// domain.
ProblemSpec example_fixture() {
  ProblemSpec s;
  s.domain = SpatialDomain::interval(0, 1);
  s.horizon = 1.0;
  s.coeffs = EllipticCoefficients::isotropic(ScalarFn2::constant(1.0), 1);
  s.y0 = ScalarFn2::parse("0", s.vars_space());
  s.L = ScalarFn2::parse(
      "0.5*y^2 + 0.5*(u - 1.5*sin(6.283185307179586*x))^2", s.vars_full());
  s.f = ScalarFn2::parse("y*(w^2 + t^4 + x^2)", s.vars_f());
  s.g = ScalarFn2::parse("u + w", s.vars_full());
  s.w_ref = WSpec::constant_w(0.0);
  return s;
}

std::string example_fixture_text() {
  return problem_to_text(example_fixture());
}

// --- 1: solver exactness on the banded manufactured case -------------------

void criterion_1(Gate& gate) {
  const double t0 = now_seconds();
  auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), 16, 16,
                                      1.0);
  ManufacturedCase mc = build_manufactured(Recipe::lq_active_band, mesh);
  OcpReport rep;
  KktPoint pt = solve_ocp(mc.spec, mc.w_ref, {}, &rep);
  const double dt = now_seconds() - t0;

  const auto mask = classify_active(mc.spec, pt.y, pt.u, mc.w_ref, 1e-8);
  const bool pass = rep.status == OcpStatus::converged &&
                    pt.res.max_norm() <= 1e-9 && mask == mc.active &&
                    dt < 10.0;
  gate.line(1, pass, "solver exactness",
            "max residual " + fmt(pt.res.max_norm()) + ", active set " +
                (mask == mc.active ? "exact" : "WRONG") + ", " + fmt(dt) +
                " s");
  if (rep.status == OcpStatus::converged)
    g_points.push_back({mc.spec, pt, mc.w_ref, "banded manufactured solve"});
}

// --- 2: adjoint identity and gradient consistency ---------------------------

void criterion_2(Gate& gate) {
  ProblemSpec spec = example_fixture();
  auto mesh = spec.make_mesh(12, 12);
  GridField w = spec.w_ref.materialize(mesh);
  GridField u0(mesh, -0.5);
  GridField ybar = solve_state(spec, u0, w);
  LinearizedMap map(spec, ybar, w);

  Rng rng(123);
  double max_rel = 0;
  for (int k = 0; k < 20; ++k) {
    GridField v(mesh), r(mesh);
    for (double& x : v.raw()) x = rng.uniform(-1, 1);
    for (double& x : r.raw()) x = rng.uniform(-1, 1);
    const double lhs = l2q_inner(map.forward(v), r);
    const double rhs = l2q_inner(v, map.transpose(r));
    const double rel =
        std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-30});
    max_rel = std::max(max_rel, rel);
  }

  auto small = spec.make_mesh(6, 6);
  GridField ws = spec.w_ref.materialize(small);
  GridField us(small, -0.5);
  GradCheckResult gc = fd_gradient_check(spec, us, ws, 5, 1e-5, 7);

  const bool pass = max_rel <= 1e-12 && gc.max_rel_error <= 1e-5;
  gate.line(2, pass, "adjoint correctness",
            "transpose identity " + fmt(max_rel) + ", gradient error " +
                fmt(gc.max_rel_error));
}

// --- 3: discretization orders ----------------------------------------------

double heat_linf_error(int nx, int nt) {
  ProblemSpec s;
  s.domain = SpatialDomain::interval(0, 1);
  s.horizon = 0.1;
  s.coeffs = EllipticCoefficients::isotropic(ScalarFn2::constant(1.0), 1);
  s.y0 = ScalarFn2::parse("sin(3.141592653589793*x)", s.vars_space());
  s.L = ScalarFn2::parse("0", s.vars_full());
  s.f = ScalarFn2::parse("0", s.vars_f());
  s.g = ScalarFn2::parse("u - 1", s.vars_full());
  s.w_ref = WSpec::constant_w(0.0);

  auto mesh = s.make_mesh(nx, nt);
  GridField u(mesh), w(mesh);
  GridField y = solve_state(s, u, w);
  double err = 0;
  for (int n = 0; n <= nt; ++n)
    for (int i = 0; i < mesh->n_space(); ++i) {
      const double exact = std::exp(-kPi * kPi * mesh->time(n)) *
                           std::sin(kPi * mesh->x_of(i));
      err = std::max(err, std::abs(y.at(n, i) - exact));
    }
  return err;
}

void criterion_3(Gate& gate) {
  std::vector<double> taus, terrs;
  for (int nt : {32, 64, 128}) {
    taus.push_back(0.1 / nt);
    terrs.push_back(heat_linf_error(256, nt));
  }
  const double heat_t = loglog_slope(taus, terrs);

  std::vector<double> hs, herrs;
  for (int nx : {8, 16, 32}) {
    hs.push_back(1.0 / (nx + 1));
    herrs.push_back(heat_linf_error(nx, 8000));
  }
  const double heat_h = loglog_slope(hs, herrs);

  auto kkt_resid = [](int nx, int nt) {
    auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), nx, nt,
                                        1.0);
    ManufacturedCase mc = build_manufactured(Recipe::semilinear_band, mesh);
    return mc.exact_point().res;
  };
  std::vector<double> ktaus, kst, kad;
  for (int nt : {8, 16, 32}) {
    KktResiduals r = kkt_resid(128, nt);
    ktaus.push_back(1.0 / nt);
    kst.push_back(r.state);
    kad.push_back(r.adjoint);
  }
  const double kkt_t = std::min(loglog_slope(ktaus, kst),
                                loglog_slope(ktaus, kad));
  std::vector<double> khs, khst, khad;
  for (int nx : {8, 16, 32}) {
    KktResiduals r = kkt_resid(nx, 2048);
    khs.push_back(1.0 / (nx + 1));
    khst.push_back(r.state);
    khad.push_back(r.adjoint);
  }
  const double kkt_h = std::min(loglog_slope(khs, khst),
                                loglog_slope(khs, khad));

  const bool pass = heat_t >= 0.9 && heat_h >= 1.8 && kkt_t >= 0.9 &&
                    kkt_h >= 1.8;
  gate.line(3, pass, "convergence orders",
            "heat tau " + fmt(heat_t) + ", heat h " + fmt(heat_h) +
                ", kkt tau " + fmt(kkt_t) + ", kkt h " + fmt(kkt_h));
}

// --- 4: agreement with the brute-force oracle -------------------------------

void criterion_4(Gate& gate) {
  bool pass = true;
  std::string worst = "all matched";
  double worst_gap = 0;
  for (Recipe recipe : {Recipe::lq_inactive, Recipe::lq_active_band}) {
    for (int nx : {1, 2, 3}) {
      for (int nt : {1, 2, 3}) {
        auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), nx,
                                            nt, 1.0);
        ManufacturedCase mc = build_manufactured(recipe, mesh, 8.0);
        OcpReport rep;
        KktPoint pt = solve_ocp(mc.spec, mc.w_ref, {}, &rep);
        BruteForceResult bf = brute_force_small(mc.spec, mc.w_ref, 20, 1);

        const double js = objective(mc.spec, pt.y, pt.u, mc.w_ref);
        const double rel =
            std::abs(js - bf.j) / std::max(1.0, std::abs(bf.j));
        const auto ms = classify_active(mc.spec, pt.y, pt.u, mc.w_ref, 1e-8);
        const auto mb = classify_active(mc.spec, bf.y, bf.u, mc.w_ref, 1e-8);
        const bool ok = rep.status == OcpStatus::converged && rel <= 1e-6 &&
                        js <= bf.j + 1e-6 && ms == mb;
        if (!ok) pass = false;
        if (rel > worst_gap) {
          worst_gap = rel;
          worst = "worst rel gap " + fmt(rel) + " at " + std::to_string(nx) +
                  "x" + std::to_string(nt);
        }
        if (rep.status == OcpStatus::converged)
          g_points.push_back({mc.spec, pt, mc.w_ref, "small instance"});
      }
    }
  }
  gate.line(4, pass, "oracle equivalence", worst);
}

// --- 5: curvature machinery -------------------------------------------------

void criterion_5(Gate& gate) {
  auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), 8, 8,
                                      1.0);
  ManufacturedCase mc = build_manufactured(Recipe::lq_inactive, mesh);
  KktPoint pt = solve_ocp(mc.spec, mc.w_ref);
  CoercivityReport dense = coercivity(mc.spec, pt, mc.w_ref);
  CoercivityReport lz = coercivity(mc.spec, pt, mc.w_ref, 1);
  const double agree = std::abs(dense.alpha - lz.alpha) /
                       std::max(1.0, std::abs(dense.alpha));

  ProblemSpec neg = mc.spec;
  neg.L = ScalarFn2::parse("0.5*y^2 - 0.5*u^2", neg.vars_full());
  KktPoint zeros{GridField(mesh), GridField(mesh), GridField(mesh),
                 GridField(mesh), {}};
  CoercivityReport bad = coercivity(neg, zeros, mc.w_ref);

  const bool pass = dense.method == CoercivityMethod::dense &&
                    lz.method == CoercivityMethod::lanczos &&
                    dense.verdict == CoercivityVerdict::holds &&
                    dense.alpha >= 1.0 - 1e-10 && dense.rho == 1.0 &&
                    agree <= 1e-8 && bad.rho == -1.0 && bad.alpha < 0 &&
                    bad.verdict == CoercivityVerdict::fails;
  gate.line(5, pass, "curvature analysis",
            "alpha " + fmt(dense.alpha) + ", rho " + fmt(dense.rho) +
                ", path agreement " + fmt(agree) + ", negative control alpha " +
                fmt(bad.alpha));
}

// --- 6: perturbation stability on the semilinear benchmark ------------------

SweepResult g_sweep6;

void criterion_6(Gate& gate) {
  const double t0 = now_seconds();
  ProblemSpec spec = example_fixture();
  auto mesh = spec.make_mesh(16, 16);
  GridField w = spec.w_ref.materialize(mesh);
  SweepPlan plan = default_sweep_plan(mesh, 20240901u);
  g_sweep6 = perturbation_sweep(spec, w, plan);
  const double dt = now_seconds() - t0;
  g_sweeps.push_back(&g_sweep6);
  g_points.push_back({spec, g_sweep6.base, w, "benchmark sweep base"});

  bool slopes_ok = true;
  double lo = 2, hi = 0;
  for (const DirectionSlopes& s : g_sweep6.slopes) {
    for (double v : {s.u, s.y, s.phi, s.e}) {
      if (!std::isfinite(v) || v < 0.9 || v > 1.1) slopes_ok = false;
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const RadiusAggregate& a = g_sweep6.per_radius[3];
  const RadiusAggregate& b = g_sweep6.per_radius[4];
  auto within2 = [](double x, double y) {
    return x > 0 && y > 0 && std::max(x, y) / std::min(x, y) <= 2.0;
  };
  const bool khat_ok = within2(a.k_hat, b.k_hat) &&
                       within2(a.k_hat_adjoint, b.k_hat_adjoint);
  int valid = 0;
  for (const SweepRecord& r : g_sweep6.records) valid += r.valid ? 1 : 0;

  const bool pass = valid == 15 && slopes_ok && khat_ok &&
                    g_sweep6.hypotheses_met && dt < 300.0;
  gate.line(6, pass, "stability sweep",
            "slopes in [" + fmt(lo) + ", " + fmt(hi) + "], k_hat " +
                fmt(a.k_hat) + " vs " + fmt(b.k_hat) + ", " + fmt(dt) + " s");
}

// --- 7: multiplier stability and its linear closed form ---------------------

SweepResult g_sweep7;

double m1_at_radius(const SweepResult& res, std::size_t ri) {
  double m = 0;
  const std::size_t nr = res.radii.size();
  for (std::size_t di = 0; di < res.direction_names.size(); ++di) {
    const SweepRecord& r = res.records[di * nr + ri];
    if (r.valid) m = std::max(m, r.de_l2 / (r.du_l2 + r.radius));
  }
  return m;
}

void criterion_7(Gate& gate) {
  const double m1a = m1_at_radius(g_sweep6, 3);
  const double m1b = m1_at_radius(g_sweep6, 4);
  const bool factor2 =
      m1a > 0 && m1b > 0 && std::max(m1a, m1b) / std::min(m1a, m1b) <= 2.0;

  auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), 16, 16,
                                      1.0);
  ManufacturedCase mc = build_manufactured(Recipe::lq_active_band, mesh);
  OcpReport rep;
  KktPoint base = solve_ocp(mc.spec, mc.w_ref, {}, &rep);

  SweepPlan plan;
  plan.directions.push_back({"plus", GridField(mesh, 1.0)});
  plan.directions.push_back({"minus", GridField(mesh, -1.0)});
  plan.radii = {0.004, 0.002, 0.001};
  g_sweep7 = perturbation_sweep(mc.spec, mc.w_ref, plan);
  g_sweeps.push_back(&g_sweep7);
  g_points.push_back({mc.spec, g_sweep7.base, mc.w_ref, "banded sweep base"});
  const double m1 = multiplier_stability_check(g_sweep7).m1;

  // Closed form on the frozen active set: active rows pin du = 0, inactive
  // rows give du = dphi, and dphi = -S^T S (du + dw); one dense solve yields
  // the exact linear response to a unit parameter shift.
  const int ns = mesh->n_space();
  const int N = ns * mesh->nt();
  LinearizedMap map(mc.spec, base.y, mc.w_ref);
  Eigen::MatrixXd S(N, N);
  GridField unit(mesh);
  for (int j = 0; j < N; ++j) {
    unit.at(1 + j / ns, j % ns) = 1.0;
    GridField img = map.forward(unit);
    for (int k = 0; k < N; ++k) S(k, j) = img.at(1 + k / ns, k % ns);
    unit.at(1 + j / ns, j % ns) = 0.0;
  }
  const auto mask = classify_active(mc.spec, base.y, base.u, mc.w_ref, 1e-8);
  Eigen::MatrixXd StS = S.transpose() * S;
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(N, N);
  for (int j = 0; j < N; ++j)
    if (mask[static_cast<std::size_t>(ns) + j] == 0) sys.col(j) += StS.col(j);
  Eigen::VectorXd dphi =
      sys.partialPivLu().solve(Eigen::VectorXd(-StS.rowwise().sum()));
  double nu2 = 0, ne2 = 0;
  for (int j = 0; j < N; ++j) {
    if (mask[static_cast<std::size_t>(ns) + j] != 0)
      ne2 += dphi[j] * dphi[j];
    else
      nu2 += dphi[j] * dphi[j];
  }
  const double cw = mesh->cell_weight();
  const double m1_closed =
      std::sqrt(cw * ne2) / (std::sqrt(cw * nu2) + 1.0);
  const double rel = std::abs(m1 - m1_closed) / m1_closed;

  const bool pass = factor2 && rel <= 0.05;
  gate.line(7, pass, "multiplier stability",
            "m1 per radius " + fmt(m1a) + " vs " + fmt(m1b) + ", closed form " +
                fmt(m1_closed) + " vs measured " + fmt(m1) + " (rel " +
                fmt(rel) + ")");
}

// --- 8: quadratic growth -----------------------------------------------------

void criterion_8(Gate& gate) {
  auto mesh = std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), 10, 10,
                                      1.0);
  ManufacturedCase mc = build_manufactured(Recipe::lq_active_band, mesh);
  OcpReport rep;
  KktPoint base = solve_ocp(mc.spec, mc.w_ref, {}, &rep);
  const double alpha = coercivity(mc.spec, base, mc.w_ref).alpha;

  GrowthCheckResult gc = growth_check(mc.spec, base, mc.w_ref, 1e-2, 200, 5);

  KktPoint off = base;
  for (double& v : off.u.raw()) v -= 0.3;
  off.y = solve_state(mc.spec, off.u, mc.w_ref);
  GrowthCheckResult bad = growth_check(mc.spec, off, mc.w_ref, 0.01, 50, 5);

  const bool pass = gc.violations == 0 && gc.kappa_hat >= 0.45 * alpha &&
                    bad.violations > 0;
  gate.line(8, pass, "quadratic growth",
            "kappa " + fmt(gc.kappa_hat) + " vs 0.45*alpha " +
                fmt(0.45 * alpha) + ", violations " +
                std::to_string(gc.violations) + ", negative control " +
                std::to_string(bad.violations));
}

// --- 9: complementarity and positivity across the suite ----------------------

void criterion_9(Gate& gate) {
  double max_eg = 0, min_e = 0, min_gap = 0;
  for (const ConvergedPoint& cp : g_points) {
    const MeshQ& m = cp.pt.y.mesh();
    for (int n = 1; n <= m.nt(); ++n)
      for (int i = 0; i < m.n_space(); ++i) {
        EvalPoint p = m.point(i, n);
        p.y = cp.pt.y.at(n, i);
        p.u = cp.pt.u.at(n, i);
        p.w = cp.w.at(n, i);
        const double e = cp.pt.e.at(n, i);
        max_eg = std::max(max_eg, std::abs(e * cp.spec.g.value(p)));
        min_e = std::min(min_e, e);
      }
  }
  int gap_records = 0;
  for (const SweepResult* res : g_sweeps)
    for (const SweepRecord& r : res->records)
      if (r.valid) {
        min_gap = std::min(min_gap, r.lagrangian_gap);
        ++gap_records;
      }

  const bool pass = max_eg <= 1e-9 && min_e >= -1e-9 && min_gap >= -1e-10 &&
                    !g_points.empty() && gap_records > 0;
  gate.line(9, pass, "complementarity and positivity",
            "max |e*g| " + fmt(max_eg) + ", min e " + fmt(min_e) +
                ", min gap " + fmt(min_gap) + " over " +
                std::to_string(g_points.size()) + " points, " +
                std::to_string(gap_records) + " records");
}

// --- 10: byte-level reproducibility of the batch sweep -----------------------

int quiet_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("paroc");
  for (const std::string& s : args) argv.push_back(s.c_str());
  std::ostringstream sink;
  std::streambuf* old_out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(sink.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void criterion_10(Gate& gate) {
  auto dir = std::filesystem::temp_directory_path() / "paroc_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "problem.cfg", std::ios::binary);
    os << example_fixture_text();
  }
  {
    std::ofstream os(dir / "run.cfg", std::ios::binary);
    os << "schema = 1\nkind = run\nproblem = problem.cfg\nmesh.nx = 8\n"
          "mesh.nt = 8\nseed = 123\n";
  }

  const int c1 = quiet_cli({"sweep", "--config", (dir / "run.cfg").string(),
                            "--out", (dir / "r1").string()});
  const int c2 = quiet_cli({"sweep", "--config", (dir / "run.cfg").string(),
                            "--out", (dir / "r2").string()});

  bool same = true;
  for (const char* f : {"sweep.json", "sweep.csv", "slopes.csv"}) {
    const std::string a = slurp(dir / "r1" / f);
    if (a.empty() || a != slurp(dir / "r2" / f)) same = false;
  }
  const bool pass = c1 == 0 && c2 == 0 && same;
  gate.line(10, pass, "reproducibility",
            std::string("exit codes ") + std::to_string(c1) + "/" +
                std::to_string(c2) + ", outputs " +
                (same ? "byte-identical" : "DIFFER"));
}

}  // namespace

int main() {
  Gate gate;
  void (*checks[])(Gate&) = {criterion_1, criterion_2, criterion_3,
                             criterion_4, criterion_5, criterion_6,
                             criterion_7, criterion_8, criterion_9,
                             criterion_10};
  int idx = 0;
  for (auto* check : checks) {
    const double t0 = now_seconds();
    check(gate);
    std::fprintf(stderr, "  criterion %d: %.2f s\n", ++idx,
                 now_seconds() - t0);
  }
  std::printf("acceptance: %d/10 passed\n", 10 - gate.failures);
  return gate.failures;
}
