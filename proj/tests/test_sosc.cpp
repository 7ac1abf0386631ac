#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>

#include "doctest.h"
#include "paroc/norms.hpp"
#include "paroc/oracle.hpp"
#include "paroc/rng.hpp"
#include "paroc/sosc.hpp"

using namespace paroc;

namespace {

std::shared_ptr<const MeshQ> unit_mesh(int nx, int nt, double T = 1.0) {
  return std::make_shared<MeshQ>(SpatialDomain::interval(0, 1), nx, nt, T);
}

ProblemSpec simple_spec(const std::string& l_text, const std::string& f_text,
                        const std::string& g_text) {
  ProblemSpec s;
  s.domain = SpatialDomain::interval(0, 1);
  s.horizon = 1.0;
  s.coeffs = EllipticCoefficients::isotropic(ScalarFn2::constant(1.0), 1);
  s.y0 = ScalarFn2::parse("0", s.vars_space());
  s.L = ScalarFn2::parse(l_text, s.vars_full());
  s.f = ScalarFn2::parse(f_text, s.vars_f());
  s.g = ScalarFn2::parse(g_text, s.vars_full());
  s.w_ref = WSpec::constant_w(0.0);
  return s;
}

KktPoint zero_point(std::shared_ptr<const MeshQ> m) {
  return {GridField(m), GridField(m), GridField(m), GridField(m), {}};
}

GridField random_field(std::shared_ptr<const MeshQ> m, std::uint64_t seed,
                       double lo = -1, double hi = 1) {
  GridField f(m);
  Rng rng(seed);
  for (int n = 1; n <= m->nt(); ++n)
    for (int i = 0; i < m->n_space(); ++i) f.at(n, i) = rng.uniform(lo, hi);
  return f;
}

// A fixture with a genuine y-u cross term and a curved state so every block
// of the quadratic form is exercised.
struct CrossFixture {
  ProblemSpec spec;
  std::shared_ptr<const MeshQ> mesh;
  KktPoint pt;
  GridField w;
};

CrossFixture cross_fixture(int nx, int nt) {
  CrossFixture fx{simple_spec("0.5*(y - x)^2 + 0.5*u^2 + 0.2*y*u",
                              "0.3*y^3", "u - 1000000"),
                  unit_mesh(nx, nt),
                  {},
                  {}};
  fx.pt = zero_point(fx.mesh);
  fx.pt.y = GridField::sample(
      fx.mesh, ScalarFn2::parse("0.4*sin(3.141592653589793*x)*(1 + t)",
                                {Var::x, Var::t}));
  fx.pt.phi = GridField::sample(
      fx.mesh,
      ScalarFn2::parse("0.3*x*(1 - x)*(2 - t)", {Var::x, Var::t}));
  fx.w = GridField(fx.mesh, 0.1);
  return fx;
}

}  // namespace

TEST_CASE("quadratic form is symmetric and homogeneous of degree two") {
  CrossFixture fx = cross_fixture(6, 5);
  QuadraticForm form(fx.spec, fx.pt, fx.w);

  GridField a = random_field(fx.mesh, 1);
  GridField b = random_field(fx.mesh, 2);
  const double lhs = l2q_inner(a, form.apply(b));
  const double rhs = l2q_inner(form.apply(a), b);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));

  GridField sum(fx.mesh), diff(fx.mesh);
  for (std::size_t k = 0; k < sum.raw().size(); ++k) {
    sum.raw()[k] = a.raw()[k] + b.raw()[k];
    diff.raw()[k] = a.raw()[k] - b.raw()[k];
  }
  const double parallelogram = form(sum) + form(diff);
  CHECK(parallelogram ==
        doctest::Approx(2 * form(a) + 2 * form(b)).epsilon(1e-10));

  GridField scaled(fx.mesh);
  for (std::size_t k = 0; k < scaled.raw().size(); ++k)
    scaled.raw()[k] = 3.0 * a.raw()[k];
  CHECK(form(scaled) == doctest::Approx(9.0 * form(a)).epsilon(1e-12));
}

TEST_CASE("unit control curvature gives a unit coercivity floor") {
  auto mesh = unit_mesh(8, 6);
  ManufacturedCase mc = build_manufactured(Recipe::lq_inactive, mesh);
  KktPoint pt = mc.exact_point();
  CoercivityReport rep = coercivity(mc.spec, pt, mc.w_ref);

  CHECK(rep.method == CoercivityMethod::dense);
  CHECK(rep.rho == 1.0);
  CHECK(rep.alpha >= 1.0 - 1e-10);
  CHECK(rep.alpha <= 1.5);
  CHECK(rep.verdict == CoercivityVerdict::holds);
  CHECK(field_norm(rep.witness_v, NormKind::L2Q) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // The witness is an eigenvector of the matrix-free form.
  QuadraticForm form(mc.spec, pt, mc.w_ref);
  GridField hv = form.apply(rep.witness_v);
  double resid = 0;
  for (int n = 1; n <= mesh->nt(); ++n)
    for (int i = 0; i < mesh->n_space(); ++i)
      resid = std::max(resid, std::abs(hv.at(n, i) -
                                       rep.alpha * rep.witness_v.at(n, i)));
  CHECK(resid <= 1e-8);
}

TEST_CASE("negative control curvature is reported as a failure") {
  auto mesh = unit_mesh(6, 6);
  ProblemSpec s = simple_spec("0.5*y^2 - 0.5*u^2", "0", "u - 1000000");
  KktPoint pt = zero_point(mesh);
  GridField w(mesh);
  CoercivityReport rep = coercivity(s, pt, w);
  CHECK(rep.rho == -1.0);
  CHECK(rep.alpha < 0.0);
  CHECK(rep.verdict == CoercivityVerdict::fails);

  // Legendre necessity: a one-level oscillating direction barely moves the
  // state, so the negative pointwise weight dominates the quadratic form.
  QuadraticForm form(s, pt, w);
  GridField v(mesh);
  for (int i = 0; i < mesh->n_space(); ++i)
    v.at(3, i) = (i % 2 == 0) ? 1.0 : -1.0;
  CHECK(form(v) < 0.0);
}

TEST_CASE("dense and Lanczos paths agree on the same operator") {
  CrossFixture fx = cross_fixture(6, 10);
  CoercivityReport dense = coercivity(fx.spec, fx.pt, fx.w);
  CoercivityReport lz = coercivity(fx.spec, fx.pt, fx.w, 1);
  CHECK(dense.method == CoercivityMethod::dense);
  CHECK(lz.method == CoercivityMethod::lanczos);
  CHECK(lz.iterations > 1);
  CHECK(dense.alpha ==
        doctest::Approx(lz.alpha).epsilon(1e-8).scale(
            std::max(1.0, std::abs(dense.alpha))));

  QuadraticForm form(fx.spec, fx.pt, fx.w);
  for (const CoercivityReport* r : {&dense, &lz}) {
    GridField hv = form.apply(r->witness_v);
    double resid = 0;
    for (int n = 1; n <= fx.mesh->nt(); ++n)
      for (int i = 0; i < fx.mesh->n_space(); ++i)
        resid = std::max(resid,
                         std::abs(hv.at(n, i) - r->alpha * r->witness_v.at(n, i)));
    CHECK(resid <= 1e-6);
  }
}

TEST_CASE("multiplier shifts move the estimate exactly through g_uu") {
  auto mesh = unit_mesh(5, 6);
  ProblemSpec s = simple_spec("0.5*(y - x)^2 + 0.5*u^2", "0", "u^2 - 10");
  KktPoint pt = zero_point(mesh);
  GridField w(mesh);

  CoercivityReport base = coercivity(s, pt, w);
  GridField zero(mesh);
  CoercivityReport same =
      coercivity_under_multiplier_perturbation(s, pt, w, zero);
  CHECK(same.alpha == base.alpha);
  CHECK(same.rho == base.rho);
  CHECK(same.verdict == base.verdict);

  // g_uu = 2, so a unit multiplier shift adds exactly 2 Id to the Hessian.
  GridField one(mesh);
  for (int n = 1; n <= mesh->nt(); ++n)
    for (int i = 0; i < mesh->n_space(); ++i) one.at(n, i) = 1.0;
  CoercivityReport up = coercivity_under_multiplier_perturbation(s, pt, w, one);
  CHECK(up.alpha == doctest::Approx(base.alpha + 2.0).epsilon(1e-10));
  CHECK(up.rho == doctest::Approx(base.rho + 2.0).epsilon(1e-14));

  SUBCASE("a linear constraint is invisible to the curvature") {
    ProblemSpec lin = simple_spec("0.5*(y - x)^2 + 0.5*u^2", "0", "u + w");
    CoercivityReport b0 = coercivity(lin, pt, w);
    GridField big(mesh, 5.0);
    CoercivityReport b1 =
        coercivity_under_multiplier_perturbation(lin, pt, w, big);
    CHECK(b0.alpha == b1.alpha);
    CHECK(b0.rho == b1.rho);
  }

  SUBCASE("mismatched perturbation mesh is rejected") {
    GridField other(unit_mesh(5, 7));
    CHECK_THROWS_AS(
        coercivity_under_multiplier_perturbation(s, pt, w, other), Error);
  }
}

TEST_CASE("report serializes deterministically") {
  auto mesh = unit_mesh(4, 4);
  ManufacturedCase mc = build_manufactured(Recipe::lq_inactive, mesh);
  KktPoint pt = mc.exact_point();
  CoercivityReport a = coercivity(mc.spec, pt, mc.w_ref);
  CoercivityReport b = coercivity(mc.spec, pt, mc.w_ref);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_json().find("\"alpha\"") != std::string::npos);
  CHECK(a.to_json().find("\"verdict\"") != std::string::npos);
}
