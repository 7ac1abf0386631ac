#include "paroc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlohmann/json.hpp"
#include "paroc/rng.hpp"

namespace paroc {

WSpec WSpec::constant_w(double c) {
  WSpec w;
  w.kind = Kind::constant;
  w.value = c;
  return w;
}

WSpec WSpec::expression_w(ScalarFn2 e) {
  WSpec w;
  w.kind = Kind::expression;
  w.expr = std::move(e);
  return w;
}

WSpec WSpec::grid_w(std::string p) {
  WSpec w;
  w.kind = Kind::grid;
  w.path = std::move(p);
  return w;
}

GridField WSpec::materialize(std::shared_ptr<const MeshQ> mesh) const {
  switch (kind) {
    case Kind::constant:
      return GridField(std::move(mesh), value);
    case Kind::expression:
      return GridField::sample(std::move(mesh), expr);
    case Kind::grid:
      return GridField::load(path, std::move(mesh));
  }
  throw Error("WSpec: bad kind");
}

VarSet ProblemSpec::vars_space() const {
  VarSet s{Var::x};
  if (domain.dim() == 2) s.add(Var::x2);
  return s;
}

VarSet ProblemSpec::vars_data() const { return vars_space().add(Var::t); }

VarSet ProblemSpec::vars_f() const {
  return vars_data().add(Var::y).add(Var::w);
}

VarSet ProblemSpec::vars_full() const { return vars_f().add(Var::u); }

void ProblemSpec::validate() const {
  domain.validate();
  coeffs.validate(domain.dim());
  if (!(horizon > 0)) throw ConfigError("time horizon must be positive");
  if (y0.empty() || L.empty() || f.empty() || g.empty())
    throw ConfigError("problem requires y0, L, f and g");
  if (!y0.used_vars().subset_of(vars_space()))
    throw ConfigError("y0 may depend on spatial coordinates only");
  if (!f.used_vars().subset_of(vars_f()))
    throw ConfigError("f may not depend on the control");
  if (!L.used_vars().subset_of(vars_full()) ||
      !g.used_vars().subset_of(vars_full()))
    throw ConfigError("L and g may depend on x, t, y, u, w only");

  // Compatibility of the initial state with the Dirichlet boundary, sampled
  // along each face.
  const int kFaceSamples = 33;
  double worst = 0;
  auto check = [&](double x, double x2) {
    EvalPoint p;
    p.x = x;
    p.x2 = x2;
    worst = std::max(worst, std::abs(y0.value(p)));
  };
  if (domain.dim() == 1) {
    check(domain.lo[0], 0);
    check(domain.hi[0], 0);
  } else {
    for (int k = 0; k < kFaceSamples; ++k) {
      const double s = static_cast<double>(k) / (kFaceSamples - 1);
      const double x = domain.lo[0] + s * domain.length(0);
      const double x2 = domain.lo[1] + s * domain.length(1);
      check(x, domain.lo[1]);
      check(x, domain.hi[1]);
      check(domain.lo[0], x2);
      check(domain.hi[0], x2);
    }
  }
  if (worst > 1e-8)
    throw ConfigError("y0 does not vanish on the boundary (max |y0| = " +
                      format_double(worst) + ")");
}

std::shared_ptr<const MeshQ> ProblemSpec::make_mesh(int nx, int nt) const {
  return std::make_shared<MeshQ>(domain, nx, nt, horizon);
}

// ----------------------------------------------------------------------------

EllipticityAudit audit_h1(const ProblemSpec& spec, int probes,
                          std::uint64_t seed) {
  EllipticityAudit out;
  out.probes = probes;
  out.seed = seed;
  Rng rng(seed);
  const SpatialDomain& d = spec.domain;
  double alpha = std::numeric_limits<double>::infinity();

  auto quad_min = [&](double x, double x2) {
    EvalPoint p;
    p.x = x;
    p.x2 = x2;
    if (d.dim() == 1) return spec.coeffs.a11.value(p);
    const double a11 = spec.coeffs.a11.value(p);
    const double a22 = spec.coeffs.a22.value(p);
    const double a12 = spec.coeffs.a12.empty() ? 0.0 : spec.coeffs.a12.value(p);
    // Smallest eigenvalue of the 2x2 symmetric coefficient matrix: the exact
    // min over unit directions.
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::hypot(0.5 * (a11 - a22), a12);
    return mean - rad;
  };

  // Corners first (extrema often sit there), then random interior points.
  if (d.dim() == 1) {
    alpha = std::min(alpha, quad_min(d.lo[0], 0));
    alpha = std::min(alpha, quad_min(d.hi[0], 0));
  } else {
    for (double x : {d.lo[0], d.hi[0]})
      for (double x2 : {d.lo[1], d.hi[1]}) alpha = std::min(alpha, quad_min(x, x2));
  }
  for (int k = 0; k < probes; ++k) {
    const double x = rng.uniform(d.lo[0], d.hi[0]);
    const double x2 = d.dim() == 2 ? rng.uniform(d.lo[1], d.hi[1]) : 0.0;
    alpha = std::min(alpha, quad_min(x, x2));
  }
  out.alpha = alpha;
  out.pass = alpha > 0 && std::isfinite(alpha);
  return out;
}

namespace {

struct QuotientTracker {
  double v = 0, d1 = 0, d2 = 0;
  // Maxima observed after the first half of the probe budget, to flag
  // quotients that keep growing under refinement.
  double v_half = -1, d1_half = -1, d2_half = -1;

  void snapshot() {
    v_half = v;
    d1_half = d1;
    d2_half = d2;
  }
  static bool grew(double later, double half) {
    return half >= 0 && later > 2.0 * half + 1e-9;
  }
};

void push_rows(std::vector<LipschitzSample>& rows, const std::string& base,
               const QuotientTracker& q) {
  rows.push_back({base, q.v, QuotientTracker::grew(q.v, q.v_half)});
  rows.push_back({base + "_d1", q.d1, QuotientTracker::grew(q.d1, q.d1_half)});
  rows.push_back({base + "_d2", q.d2, QuotientTracker::grew(q.d2, q.d2_half)});
}

}  // namespace

SmoothnessAudit audit_h2_h3(const ProblemSpec& spec, double bound_M,
                            int probes, std::uint64_t seed) {
  SmoothnessAudit out;
  out.bound_M = bound_M;
  out.probes = probes;
  out.seed = seed;
  Rng rng(seed);
  const SpatialDomain& d = spec.domain;
  const double M = bound_M;

  auto random_xt = [&](EvalPoint& p) {
    p.x = rng.uniform(d.lo[0], d.hi[0]);
    p.x2 = d.dim() == 2 ? rng.uniform(d.lo[1], d.hi[1]) : 0.0;
    p.t = rng.uniform(0.0, spec.horizon);
  };

  QuotientTracker qf, qL, qg;
  double c_f = std::numeric_limits<double>::infinity();
  double f_at_zero = 0;

  const int total = 2 * probes;
  for (int k = 0; k < total; ++k) {
    if (k == probes) {
      qf.snapshot();
      qL.snapshot();
      qg.snapshot();
    }
    EvalPoint p1;
    random_xt(p1);
    EvalPoint p2 = p1;  // same (x,t); the hypotheses fix the base point
    p1.y = rng.uniform(-M, M);
    p1.u = rng.uniform(-M, M);
    p1.w = rng.uniform(-M, M);
    p2.y = rng.uniform(-M, M);
    p2.u = rng.uniform(-M, M);
    p2.w = rng.uniform(-M, M);

    const Value2 f1 = spec.f.eval(p1), f2 = spec.f.eval(p2);
    const Value2 L1 = spec.L.eval(p1), L2 = spec.L.eval(p2);
    const Value2 g1 = spec.g.eval(p1), g2 = spec.g.eval(p2);

    c_f = std::min({c_f, f1.dy, f2.dy});
    {
      EvalPoint pz = p1;
      pz.y = 0;
      f_at_zero = std::max(f_at_zero, std::abs(spec.f.value(pz)));
    }

    const double sf = std::abs(p1.y - p2.y) + std::abs(p1.w - p2.w);
    if (sf > 1e-12) {
      qf.v = std::max(qf.v, std::abs(f1.v - f2.v) / sf);
      qf.d1 = std::max(qf.d1, (std::abs(f1.dy - f2.dy) +
                               std::abs(f1.dw - f2.dw)) /
                                  sf);
      qf.d2 = std::max(qf.d2, (std::abs(f1.dyy - f2.dyy) +
                               std::abs(f1.dyw - f2.dyw) +
                               std::abs(f1.dww - f2.dww)) /
                                  sf);
    }
    const double s3 = sf + std::abs(p1.u - p2.u);
    if (s3 > 1e-12) {
      auto scan = [&](const Value2& a, const Value2& b, QuotientTracker& q) {
        q.v = std::max(q.v, std::abs(a.v - b.v) / s3);
        q.d1 = std::max(q.d1, (std::abs(a.dy - b.dy) + std::abs(a.du - b.du) +
                               std::abs(a.dw - b.dw)) /
                                  s3);
        q.d2 = std::max(
            q.d2, (std::abs(a.dyy - b.dyy) + std::abs(a.dyu - b.dyu) +
                   std::abs(a.dyw - b.dyw) + std::abs(a.duu - b.duu) +
                   std::abs(a.duw - b.duw) + std::abs(a.dww - b.dww)) /
                      s3);
      };
      scan(L1, L2, qL);
      scan(g1, g2, qg);
    }
  }

  out.c_f = c_f;
  out.f_vanishes_at_zero = f_at_zero <= 1e-10;
  push_rows(out.samples, "k_fM", qf);
  push_rows(out.samples, "k_LM", qL);
  push_rows(out.samples, "k_gM", qg);

  auto rows_ok = [&](const std::string& base) {
    for (const auto& r : out.samples)
      if (r.name.rfind(base, 0) == 0 && (!std::isfinite(r.value) || r.diverging))
        return false;
    return true;
  };
  out.h2_pass = rows_ok("k_fM") && out.f_vanishes_at_zero && std::isfinite(c_f);
  out.h3_pass = rows_ok("k_LM") && rows_ok("k_gM");
  return out;
}

double audit_h4(const ProblemSpec& spec, const GridField& y,
                const GridField& u, const GridField& w) {
  require_same_mesh(y, u, "audit_h4");
  require_same_mesh(y, w, "audit_h4");
  const MeshQ& m = y.mesh();
  double margin = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = y.at(n, i);
      p.u = u.at(n, i);
      p.w = w.at(n, i);
      margin = std::min(margin, std::abs(spec.g.eval(p).du));
    }
  return margin;
}

std::string AuditReport::to_json() const {
  nlohmann::ordered_json j;
  j["h1"] = {{"alpha", h1.alpha},
             {"pass", h1.pass},
             {"probes", h1.probes},
             {"seed", h1.seed}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : h23.samples)
    rows.push_back({{"name", s.name},
                    {"value", s.value},
                    {"diverging", s.diverging}});
  j["h2_h3"] = {{"c_f", h23.c_f},
                {"bound_M", h23.bound_M},
                {"probes", h23.probes},
                {"seed", h23.seed},
                {"f_vanishes_at_zero", h23.f_vanishes_at_zero},
                {"samples", rows},
                {"h2_pass", h23.h2_pass},
                {"h3_pass", h23.h3_pass}};
  j["h4"] = {{"evaluated", h4_evaluated},
             {"gamma0", h4_evaluated ? gamma0 : 0.0},
             {"pass", h4_pass}};
  return j.dump(2);
}

double objective(const ProblemSpec& spec, const GridField& y,
                 const GridField& u, const GridField& w) {
  require_same_mesh(y, u, "objective");
  require_same_mesh(y, w, "objective");
  const MeshQ& m = y.mesh();
  double sum = 0;
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = y.at(n, i);
      p.u = u.at(n, i);
      p.w = w.at(n, i);
      sum += spec.L.value(p);
    }
  return m.cell_weight() * sum;
}

std::vector<std::uint8_t> classify_active(const ProblemSpec& spec,
                                          const GridField& y,
                                          const GridField& u,
                                          const GridField& w, double tol) {
  require_same_mesh(y, u, "classify_active");
  require_same_mesh(y, w, "classify_active");
  const MeshQ& m = y.mesh();
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(m.n_space()) * (m.nt() + 1), 0);
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = y.at(n, i);
      p.u = u.at(n, i);
      p.w = w.at(n, i);
      mask[static_cast<std::size_t>(n) * m.n_space() + i] =
          std::abs(spec.g.value(p)) <= tol ? 1 : 0;
    }
  return mask;
}

AuditReport run_audits(const ProblemSpec& spec, double bound_M, int probes,
                       std::uint64_t seed, const GridField* y,
                       const GridField* u, const GridField* w) {
  AuditReport r;
  r.h1 = audit_h1(spec, probes, seed);
  r.h23 = audit_h2_h3(spec, bound_M, probes, seed + 1);
  if (y && u && w) {
    r.h4_evaluated = true;
    r.gamma0 = audit_h4(spec, *y, *u, *w);
    r.h4_pass = r.gamma0 > 0;
  }
  return r;
}

}  // namespace paroc
