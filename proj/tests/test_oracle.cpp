#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "paroc/norms.hpp"
#include "paroc/oracle.hpp"
#include "paroc/rng.hpp"

using namespace paroc;

namespace {

std::shared_ptr<const MeshQ> unit_mesh(int nx, int nt, double T = 1.0) {
  return std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), nx, nt, T);
}

ProblemSpec simple_spec(const std::string& l_text, const std::string& f_text,
                        const std::string& g_text,
                        const std::string& y0_text = "0") {
  ProblemSpec s;
  s.domain = SpatialDomain::interval(0, 1);
  s.horizon = 1.0;
  s.coeffs = EllipticCoefficients::isotropic(ScalarFn2::constant(1.0), 1);
  s.y0 = ScalarFn2::parse(y0_text, s.vars_space());
  s.L = ScalarFn2::parse(l_text, s.vars_full());
  s.f = ScalarFn2::parse(f_text, s.vars_f());
  s.g = ScalarFn2::parse(g_text, s.vars_full());
  s.w_ref = WSpec::constant_w(0.0);
  return s;
}

GridField random_field(std::shared_ptr<const MeshQ> m, std::uint64_t seed,
                       double lo = -1, double hi = 1) {
  GridField f(m);
  Rng rng(seed);
  for (double& v : f.raw()) v = rng.uniform(lo, hi);
  return f;
}

double lsq_slope(const std::vector<double>& hs, const std::vector<double>& es) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(hs.size());
  for (int k = 0; k < n; ++k) {
    const double lx = std::log(hs[k]), ly = std::log(es[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("manufactured construction rejects inconsistent requests") {
  auto rect = std::make_shared<MeshQ>(
      SpatialDomain::rectangle(0, 1, 0, 1), 4, 4, 1.0);
  CHECK_THROWS_AS(build_manufactured(Recipe::lq_inactive, rect), ConfigError);

  auto wide = std::make_shared<MeshQ>(SpatialDomain::interval(0, 2), 8, 4, 1.0);
  CHECK_THROWS_AS(build_manufactured(Recipe::lq_inactive, wide), ConfigError);

  auto mesh = unit_mesh(8, 4);
  CHECK_THROWS_AS(build_manufactured(Recipe::lq_active_band, mesh, -2.0),
                  ConfigError);
  CHECK_THROWS_AS(build_manufactured(Recipe::lq_active_band, mesh, 0.0),
                  ConfigError);
  CHECK_THROWS_AS(build_manufactured(Recipe::semilinear_band, nullptr),
                  ConfigError);
}

TEST_CASE("manufactured state and adjoint residuals shrink at the scheme order") {
  // Algebraic rows stay at zero while the PDE rows follow the truncation
  // error of the stepping, first order in tau and second order in h. No
  // solver runs here, so even coarse ladders sit in the asymptotic regime.
  std::vector<double> taus, r_tau, hs, r_h;
  for (int nt : {8, 16, 32}) {
    auto mesh = unit_mesh(128, nt);
    ManufacturedCase mc = build_manufactured(Recipe::semilinear_band, mesh);
    KktPoint pt = mc.exact_point();
    CHECK(pt.res.stat <= 1e-12);
    CHECK(pt.res.comp <= 1e-12);
    taus.push_back(mesh->tau());
    r_tau.push_back(pt.res.state + pt.res.adjoint);
  }
  const double slope_tau = lsq_slope(taus, r_tau);
  CAPTURE(slope_tau);
  CHECK(slope_tau >= 0.9);
  CHECK(slope_tau <= 1.2);

  for (int nx : {8, 16, 32}) {
    auto mesh = unit_mesh(nx, 2048);
    ManufacturedCase mc = build_manufactured(Recipe::semilinear_band, mesh);
    KktPoint pt = mc.exact_point();
    hs.push_back(mesh->h());
    r_h.push_back(pt.res.state + pt.res.adjoint);
  }
  const double slope_h = lsq_slope(hs, r_h);
  CAPTURE(slope_h);
  CHECK(slope_h >= 1.8);
  CHECK(slope_h <= 2.2);
}

TEST_CASE("gradient check accepts smooth problems and rejects boundary contact") {
  auto mesh = unit_mesh(12, 10);
  GridField w = random_field(mesh, 3, -0.3, 0.3);

  SUBCASE("quadratic cost, linear state") {
    ProblemSpec s = simple_spec("0.5*(y - x)^2 + 0.5*(u - 0.2)^2", "0",
                                "u - 1000000", "x*(1 - x)");
    GridField u = random_field(mesh, 4, -0.2, 0.2);
    GradCheckResult r = fd_gradient_check(s, u, w);
    CHECK(r.max_rel_error <= 1e-8);
    CHECK(r.min_margin > 0);
    CHECK(r.directions == 5);
  }

  SUBCASE("semilinear state equation") {
    ProblemSpec s = simple_spec("0.5*(y - x)^2 + 0.5*u^2",
                                "y*(w^2 + t^4 + x^2)", "u - 1000000",
                                "x*(1 - x)");
    GridField u = random_field(mesh, 5, -0.2, 0.2);
    GradCheckResult r = fd_gradient_check(s, u, w);
    CHECK(r.max_rel_error <= 1e-5);
  }

  SUBCASE("flat cost has a zero gradient on both sides") {
    ProblemSpec s = simple_spec("1", "0", "u - 1000000");
    GridField u(mesh);
    GradCheckResult r = fd_gradient_check(s, u, w);
    CHECK(r.max_rel_error <= 1e-12);
  }

  SUBCASE("probes across the constraint boundary are refused") {
    ProblemSpec s = simple_spec("0.5*y^2 + 0.5*u^2", "0", "u - 0.0000001");
    GridField u(mesh);
    CHECK_THROWS_AS(fd_gradient_check(s, u, w, 3, 1e-4, 7), Error);
  }

  SUBCASE("parameter validation") {
    ProblemSpec s = simple_spec("0.5*y^2 + 0.5*u^2", "0", "u - 1");
    GridField u(mesh);
    CHECK_THROWS_AS(fd_gradient_check(s, u, w, 0), ConfigError);
    CHECK_THROWS_AS(fd_gradient_check(s, u, w, 3, 0.0), ConfigError);
  }
}

TEST_CASE("feasibility projection lands on the correct side of the boundary") {
  EvalPoint p;
  p.w = 0.3;
  ScalarFn2 g = ScalarFn2::parse("u + w", {Var::x, Var::t, Var::y, Var::u,
                                           Var::w});
  SUBCASE("linear edge") {
    const double u = project_control_feasible(g, p, 0.5, -1.0);
    CHECK(std::abs(u + 0.3) <= 1e-12);
    p.u = u;
    CHECK(g.value(p) <= 0);
  }
  SUBCASE("feasible candidates pass through unchanged") {
    CHECK(project_control_feasible(g, p, -0.7, -1.0) == -0.7);
  }
  SUBCASE("cubic edge") {
    ScalarFn2 gc = ScalarFn2::parse("u^3 - 1 + w", {Var::u, Var::w});
    p.w = 0.0;
    const double u = project_control_feasible(gc, p, 3.0, 0.0);
    CHECK(std::abs(u - 1.0) <= 1e-9);
    p.u = u;
    CHECK(gc.value(p) <= 0);
  }
  SUBCASE("infeasible anchor is a hard error") {
    CHECK_THROWS_AS(project_control_feasible(g, p, 0.5, 0.4), SolverError);
  }
  SUBCASE("anchor search walks against the margin") {
    p.w = 0.3;
    const double a = find_feasible_anchor(g, p, 5.0);
    p.u = a;
    CHECK(g.value(p) <= 0);
    CHECK(find_feasible_anchor(g, p, -9.0) == -9.0);
  }
}

TEST_CASE("brute force agrees with the full KKT solve on tiny instances") {
  auto mesh = unit_mesh(2, 3);
  ManufacturedCase mc =
      build_manufactured(Recipe::lq_active_band, mesh, 8.0);
  BruteForceResult bf = brute_force_small(mc.spec, mc.w_ref);
  OcpReport rep;
  KktPoint pt = solve_ocp(mc.spec, mc.w_ref, {}, &rep);
  REQUIRE(rep.status == OcpStatus::converged);

  CHECK(std::abs(bf.j - rep.j_trace.back()) <=
        1e-9 * (1.0 + std::abs(bf.j)));
  double du = 0;
  for (int n = 1; n <= mesh->nt(); ++n)
    for (int i = 0; i < mesh->n_space(); ++i)
      du = std::max(du, std::abs(bf.u.at(n, i) - pt.u.at(n, i)));
  CHECK(du <= 1e-6);

  auto m1 = classify_active(mc.spec, bf.y, bf.u, mc.w_ref, 1e-6);
  auto m2 = classify_active(mc.spec, pt.y, pt.u, mc.w_ref, 1e-6);
  CHECK(m1 == m2);

  SUBCASE("instance size cap and start count are validated") {
    auto big = unit_mesh(2, 7);
    GridField wbig(big);
    ProblemSpec s = simple_spec("0.5*y^2 + 0.5*u^2", "0", "u - 1");
    CHECK_THROWS_AS(brute_force_small(s, wbig), ConfigError);
    GridField wok(mesh);
    CHECK_THROWS_AS(brute_force_small(s, wok, 0), ConfigError);
  }
}

TEST_CASE("brute force finds interior optima to tight stationarity") {
  auto mesh = unit_mesh(3, 4);
  ProblemSpec s = simple_spec("0.5*(y - x)^2 + 0.5*(u + 0.1)^2", "0",
                              "u - 1000000");
  GridField w = random_field(mesh, 11, -0.2, 0.2);
  BruteForceResult bf = brute_force_small(s, w, 6, 2);
  CHECK(bf.stationarity <= 1e-11);
  CHECK(bf.failed_starts == 0);

  OcpReport rep;
  KktPoint pt = solve_ocp(s, w, {}, &rep);
  REQUIRE(rep.status == OcpStatus::converged);
  double du = 0;
  for (int n = 1; n <= mesh->nt(); ++n)
    for (int i = 0; i < mesh->n_space(); ++i)
      du = std::max(du, std::abs(bf.u.at(n, i) - pt.u.at(n, i)));
  CHECK(du <= 1e-7);
}
