#include "paroc/kkt.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "paroc/errors.hpp"
#include "paroc/operators.hpp"

namespace paroc {

namespace {

// Pointwise reformulation value for the pair a = e, b = -c*g. Zero exactly
// when e >= 0, g <= 0 and e*g = 0.
double ncp_value(NcpKind kind, double a, double b) {
  if (kind == NcpKind::min) return std::min(a, b);
  return std::hypot(a, b) - a - b;
}

// One generalized derivative (da, db). Ties in the min form take the
// multiplier branch; the Fischer-Burmeister kink at the origin takes the
// symmetric element. Both choices are fixed so reruns are bit-identical.
void ncp_slopes(NcpKind kind, double a, double b, double* da, double* db) {
  if (kind == NcpKind::min) {
    if (a <= b) {
      *da = 1;
      *db = 0;
    } else {
      *da = 0;
      *db = 1;
    }
    return;
  }
  double r = std::hypot(a, b);
  if (r == 0) {
    *da = *db = 1.0 / std::numbers::sqrt2 - 1.0;
    return;
  }
  *da = a / r - 1.0;
  *db = b / r - 1.0;
}

KktResiduals residuals_impl(const ProblemSpec& spec, const DiscreteOperator& A,
                            const GridField& y, const GridField& u,
                            const GridField& phi, const GridField& e,
                            const GridField& w, NcpKind kind) {
  const MeshQ& m = y.mesh();
  const int ns = m.n_space();
  const int nt = m.nt();
  const double tau = m.tau();
  std::vector<double> Ay(ns), Ap(ns);
  double ss = 0, sa = 0, st = 0, comp = 0;
  for (int n = 1; n <= nt; ++n) {
    A.apply(y.level(n), Ay);
    A.apply(phi.level(n), Ap);
    for (int i = 0; i < ns; ++i) {
      EvalPoint p = m.point(i, n);
      p.y = y.at(n, i);
      p.u = u.at(n, i);
      p.w = w.at(n, i);
      Value2 fv = spec.f.eval(p);
      Value2 Lv = spec.L.eval(p);
      Value2 gv = spec.g.eval(p);
      const double ev = e.at(n, i);
      const double ph = phi.at(n, i);
      const double ph_next = n < nt ? phi.at(n + 1, i) : 0.0;
      const double rs =
          (p.y - y.at(n - 1, i)) / tau + Ay[i] + fv.v - p.u - p.w;
      const double ra =
          (ph - ph_next) / tau + Ap[i] + fv.dy * ph + Lv.dy + ev * gv.dy;
      const double rt = Lv.du - ph + ev * gv.du;
      ss += rs * rs;
      sa += ra * ra;
      st += rt * rt;
      comp = std::max(comp, std::abs(ncp_value(kind, ev, -gv.v)));
    }
  }
  KktResiduals out;
  out.state = std::sqrt(m.cell_weight() * ss);
  out.adjoint = std::sqrt(m.cell_weight() * sa);
  out.stat = std::sqrt(m.cell_weight() * st);
  out.comp = comp;
  return out;
}

// Shared context of one solve_ocp run. The Newton unknown is one flat vector
// with four blocks per time level, ordered [y u phi e]; levels are 1..nt and
// the initial state enters through the fixed level-0 values.
struct OcpContext {
  const ProblemSpec& spec;
  const GridField& w;
  const MeshQ& m;
  const DiscreteOperator& A;
  NcpConfig cfg;
  std::vector<double> y_init;

  int ns() const { return m.n_space(); }
  int nt() const { return m.nt(); }
  int unknowns() const { return 4 * ns() * nt(); }
  int off(int n) const { return (n - 1) * 4 * ns(); }
};

void unpack(const OcpContext& c, const Eigen::VectorXd& z, KktPoint& pt) {
  const int ns = c.ns();
  for (int i = 0; i < ns; ++i) {
    pt.y.at(0, i) = c.y_init[i];
    pt.u.at(0, i) = 0;
    pt.phi.at(0, i) = 0;
    pt.e.at(0, i) = 0;
  }
  for (int n = 1; n <= c.nt(); ++n) {
    const int off = c.off(n);
    for (int i = 0; i < ns; ++i) {
      pt.y.at(n, i) = z[off + i];
      pt.u.at(n, i) = z[off + ns + i];
      pt.phi.at(n, i) = z[off + 2 * ns + i];
      pt.e.at(n, i) = z[off + 3 * ns + i];
    }
  }
}

void pack(const OcpContext& c, const KktPoint& pt, Eigen::VectorXd& z) {
  const int ns = c.ns();
  for (int n = 1; n <= c.nt(); ++n) {
    const int off = c.off(n);
    for (int i = 0; i < ns; ++i) {
      z[off + i] = pt.y.at(n, i);
      z[off + ns + i] = pt.u.at(n, i);
      z[off + 2 * ns + i] = pt.phi.at(n, i);
      z[off + 3 * ns + i] = pt.e.at(n, i);
    }
  }
}

// Scaled residual used by the Newton iteration: the state and adjoint rows
// keep their stepped (tau-multiplied) form so the Jacobian blocks coincide
// with the step matrices factored by the linear solver.
void eval_F(const OcpContext& c, const Eigen::VectorXd& z, Eigen::VectorXd& F) {
  const int ns = c.ns();
  const double tau = c.m.tau();
  std::vector<double> Ay(ns), Ap(ns);
  for (int n = 1; n <= c.nt(); ++n) {
    const int off = c.off(n);
    const double* yn = z.data() + off;
    const double* un = z.data() + off + ns;
    const double* pn = z.data() + off + 2 * ns;
    const double* en = z.data() + off + 3 * ns;
    c.A.apply(std::span<const double>(yn, ns), Ay);
    c.A.apply(std::span<const double>(pn, ns), Ap);
    for (int i = 0; i < ns; ++i) {
      EvalPoint p = c.m.point(i, n);
      p.y = yn[i];
      p.u = un[i];
      p.w = c.w.at(n, i);
      Value2 fv = c.spec.f.eval(p);
      Value2 Lv = c.spec.L.eval(p);
      Value2 gv = c.spec.g.eval(p);
      const double y_prev = n >= 2 ? z[off - 4 * ns + i] : c.y_init[i];
      const double p_next = n < c.nt() ? z[off + 6 * ns + i] : 0.0;
      F[off + i] = yn[i] - y_prev + tau * (Ay[i] + fv.v - un[i] - p.w);
      F[off + ns + i] = Lv.du - pn[i] + en[i] * gv.du;
      F[off + 2 * ns + i] =
          pn[i] - p_next + tau * (Ap[i] + fv.dy * pn[i] + Lv.dy + en[i] * gv.dy);
      F[off + 3 * ns + i] = ncp_value(c.cfg.kind, en[i], -c.cfg.c * gv.v);
    }
  }
}

void assemble_J(const OcpContext& c, const Eigen::VectorXd& z,
                Eigen::SparseMatrix<double>& J) {
  const int ns = c.ns();
  const double tau = c.m.tau();
  const Eigen::SparseMatrix<double>& Am = c.A.matrix();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(c.nt()) *
               (2 * Am.nonZeros() + 14 * ns));
  for (int n = 1; n <= c.nt(); ++n) {
    const int off = c.off(n);
    const int ry = off, ru = off + ns, rp = off + 2 * ns, re = off + 3 * ns;
    for (int k = 0; k < Am.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(Am, k); it; ++it) {
        trip.emplace_back(ry + static_cast<int>(it.row()),
                          ry + static_cast<int>(it.col()), tau * it.value());
        trip.emplace_back(rp + static_cast<int>(it.row()),
                          rp + static_cast<int>(it.col()), tau * it.value());
      }
    for (int i = 0; i < ns; ++i) {
      EvalPoint p = c.m.point(i, n);
      p.y = z[ry + i];
      p.u = z[ru + i];
      p.w = c.w.at(n, i);
      Value2 fv = c.spec.f.eval(p);
      Value2 Lv = c.spec.L.eval(p);
      Value2 gv = c.spec.g.eval(p);
      const double e = z[re + i];

      trip.emplace_back(ry + i, ry + i, 1.0 + tau * fv.dy);
      if (n >= 2) trip.emplace_back(ry + i, off - 4 * ns + i, -1.0);
      trip.emplace_back(ry + i, ru + i, -tau);

      trip.emplace_back(rp + i, rp + i, 1.0 + tau * fv.dy);
      if (n < c.nt()) trip.emplace_back(rp + i, off + 6 * ns + i, -1.0);
      const double ady = fv.dyy * z[rp + i] + Lv.dyy + e * gv.dyy;
      if (ady != 0) trip.emplace_back(rp + i, ry + i, tau * ady);
      const double adu = Lv.dyu + e * gv.dyu;
      if (adu != 0) trip.emplace_back(rp + i, ru + i, tau * adu);
      if (gv.dy != 0) trip.emplace_back(rp + i, re + i, tau * gv.dy);

      const double sdy = Lv.dyu + e * gv.dyu;
      if (sdy != 0) trip.emplace_back(ru + i, ry + i, sdy);
      const double sdu = Lv.duu + e * gv.duu;
      if (sdu != 0) trip.emplace_back(ru + i, ru + i, sdu);
      trip.emplace_back(ru + i, rp + i, -1.0);
      if (gv.du != 0) trip.emplace_back(ru + i, re + i, gv.du);

      double da = 0, db = 0;
      ncp_slopes(c.cfg.kind, e, -c.cfg.c * gv.v, &da, &db);
      if (da != 0) trip.emplace_back(re + i, re + i, da);
      const double scale = -c.cfg.c * db;
      if (scale * gv.dy != 0) trip.emplace_back(re + i, ry + i, scale * gv.dy);
      if (scale * gv.du != 0) trip.emplace_back(re + i, ru + i, scale * gv.du);
    }
  }
  J.resize(c.unknowns(), c.unknowns());
  J.setFromTriplets(trip.begin(), trip.end());
}

double margin_of(const OcpContext& c, const KktPoint& pt) {
  return audit_h4(c.spec, pt.y, pt.u, c.w);
}

}  // namespace

void NcpConfig::validate() const {
  if (!(c > 0)) throw ConfigError("NcpConfig: c must be positive");
  if (!(kkt_tol > 0)) throw ConfigError("NcpConfig: kkt_tol must be positive");
  if (max_outer < 1) throw ConfigError("NcpConfig: max_outer must be >= 1");
  if (!(ls_backtrack > 0 && ls_backtrack < 1))
    throw ConfigError("NcpConfig: ls_backtrack must lie in (0,1)");
  if (!(ls_min_step > 0 && ls_min_step < 1))
    throw ConfigError("NcpConfig: ls_min_step must lie in (0,1)");
}

const char* to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::converged:
      return "converged";
    case OcpStatus::max_iters:
      return "max_iters";
    case OcpStatus::line_search_stall:
      return "line_search_stall";
    case OcpStatus::h4_margin:
      return "h4_margin";
  }
  return "unknown";
}

GridField recover_multiplier(const ProblemSpec& spec, const GridField& y,
                             const GridField& u, const GridField& w,
                             const GridField& phi) {
  require_same_mesh(y, u, "recover_multiplier");
  require_same_mesh(y, w, "recover_multiplier");
  require_same_mesh(y, phi, "recover_multiplier");
  const MeshQ& m = y.mesh();
  GridField e(y.mesh_ptr());
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = y.at(n, i);
      p.u = u.at(n, i);
      p.w = w.at(n, i);
      const double gu = spec.g.eval(p).du;
      if (std::abs(gu) < 1e-12)
        throw Error("recover_multiplier: |g_u| below 1e-12 at node " +
                    std::to_string(i) + ", level " + std::to_string(n));
      e.at(n, i) = (phi.at(n, i) - spec.L.eval(p).du) / gu;
    }
  return e;
}

KktResiduals kkt_residuals(const ProblemSpec& spec, const KktPoint& pt,
                           const GridField& w, NcpKind kind) {
  require_same_mesh(pt.y, pt.u, "kkt_residuals");
  require_same_mesh(pt.y, pt.phi, "kkt_residuals");
  require_same_mesh(pt.y, pt.e, "kkt_residuals");
  require_same_mesh(pt.y, w, "kkt_residuals");
  DiscreteOperator A = assemble_operator(pt.y.mesh_ptr(), spec.coeffs);
  return residuals_impl(spec, A, pt.y, pt.u, pt.phi, pt.e, w, kind);
}

double h4_margin(const ProblemSpec& spec, const KktPoint& pt,
                 const GridField& w) {
  return audit_h4(spec, pt.y, pt.u, w);
}

KktPoint solve_ocp(const ProblemSpec& spec, const GridField& w,
                   const NcpConfig& cfg, OcpReport* report,
                   const KktPoint* warm) {
  cfg.validate();
  spec.validate();
  const MeshQ& m = w.mesh();
  DiscreteOperator A = assemble_operator(w.mesh_ptr(), spec.coeffs);
  OcpContext ctx{spec, w, m, A, cfg, {}};
  ctx.y_init.resize(m.n_space());
  for (int i = 0; i < m.n_space(); ++i)
    ctx.y_init[i] = spec.y0.value(m.point(i, 0));

  KktPoint pt{GridField(w.mesh_ptr()), GridField(w.mesh_ptr()),
              GridField(w.mesh_ptr()), GridField(w.mesh_ptr()), {}};
  Eigen::VectorXd z(ctx.unknowns());
  if (warm) {
    require_same_mesh(warm->y, w, "solve_ocp warm start");
    require_same_mesh(warm->u, w, "solve_ocp warm start");
    require_same_mesh(warm->phi, w, "solve_ocp warm start");
    require_same_mesh(warm->e, w, "solve_ocp warm start");
    pack(ctx, *warm, z);
  } else {
    GridField u0(w.mesh_ptr());
    GridField y0 = solve_state(spec, u0, w);
    GridField e0(w.mesh_ptr());
    GridField phi0 = solve_adjoint(spec, y0, u0, w, e0);
    GridField er = recover_multiplier(spec, y0, u0, w, phi0);
    for (double& v : er.raw()) v = std::max(0.0, v);
    KktPoint start{std::move(y0), std::move(u0), std::move(phi0),
                   std::move(er), {}};
    pack(ctx, start, z);
  }

  OcpReport rep;
  unpack(ctx, z, pt);
  rep.gamma0_nominal = margin_of(ctx, pt);
  rep.gamma0_final = rep.gamma0_nominal;
  rep.j_trace.push_back(objective(spec, pt.y, pt.u, w));

  Eigen::VectorXd F(ctx.unknowns()), Ft(ctx.unknowns());
  Eigen::SparseMatrix<double> J;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool done = false;
  for (int outer = 0; outer < cfg.max_outer && !done; ++outer) {
    pt.res = residuals_impl(spec, A, pt.y, pt.u, pt.phi, pt.e, w, cfg.kind);
    if (pt.res.all_below(cfg.kkt_tol)) {
      rep.status = OcpStatus::converged;
      done = true;
      break;
    }
    const double margin = margin_of(ctx, pt);
    rep.gamma0_final = margin;
    if (margin < 0.5 * rep.gamma0_nominal) {
      rep.status = OcpStatus::h4_margin;
      rep.message = "control margin fell below half its starting value";
      done = true;
      break;
    }

    eval_F(ctx, z, F);
    const double m0 = 0.5 * F.squaredNorm();
    assemble_J(ctx, z, J);
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw SolverError("solve_ocp: singular optimality Jacobian at outer " +
                        std::to_string(outer));
    Eigen::VectorXd delta = lu.solve(-F);
    if (!delta.allFinite())
      throw SolverError("solve_ocp: non-finite Newton direction at outer " +
                        std::to_string(outer));

    bool accepted = false;
    for (double s = 1.0; s >= cfg.ls_min_step; s *= cfg.ls_backtrack) {
      Eigen::VectorXd zt = z + s * delta;
      eval_F(ctx, zt, Ft);
      const double mt = 0.5 * Ft.squaredNorm();
      if (std::isfinite(mt) && mt < m0) {
        z = std::move(zt);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.status = OcpStatus::line_search_stall;
      rep.message = "no step down to 2^-20 reduced the merit";
      done = true;
      break;
    }
    ++rep.iters;
    unpack(ctx, z, pt);
    rep.j_trace.push_back(objective(spec, pt.y, pt.u, w));
  }

  if (!done) {
    pt.res = residuals_impl(spec, A, pt.y, pt.u, pt.phi, pt.e, w, cfg.kind);
    if (pt.res.all_below(cfg.kkt_tol)) {
      rep.status = OcpStatus::converged;
    } else {
      rep.status = OcpStatus::max_iters;
      rep.message = "residual " + format_double(pt.res.max_norm()) +
                    " above tolerance after " + std::to_string(cfg.max_outer) +
                    " iterations";
    }
  }
  rep.gamma0_final = margin_of(ctx, pt);

  if (report) {
    *report = std::move(rep);
  } else if (rep.status != OcpStatus::converged) {
    throw SolverError(std::string("solve_ocp: ") + to_string(rep.status) +
                      (rep.message.empty() ? "" : ": " + rep.message));
  }
  return pt;
}

void save_kkt_point(const KktPoint& pt, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  pt.y.save((base / "y.field").string());
  pt.u.save((base / "u.field").string());
  pt.phi.save((base / "phi.field").string());
  pt.e.save((base / "e.field").string());
}

KktPoint load_kkt_point(const ProblemSpec& spec, const std::string& dir,
                        std::shared_ptr<const MeshQ> mesh,
                        const GridField& w) {
  const std::filesystem::path base(dir);
  KktPoint pt;
  pt.y = GridField::load((base / "y.field").string(), mesh);
  pt.u = GridField::load((base / "u.field").string(), mesh);
  pt.phi = GridField::load((base / "phi.field").string(), mesh);
  pt.e = GridField::load((base / "e.field").string(), mesh);
  pt.res = kkt_residuals(spec, pt, w);
  return pt;
}

}  // namespace paroc
