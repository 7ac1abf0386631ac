#include "paroc/pde.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "paroc/norms.hpp"

namespace paroc {
namespace {

constexpr double kNewtonRelTol = 1e-12;
constexpr int kNewtonMaxIters = 25;
const double kMinDamping = std::ldexp(1.0, -20);

Eigen::SparseMatrix<double> step_matrix_base(const DiscreteOperator& a,
                                             double tau) {
  Eigen::SparseMatrix<double> m = tau * a.matrix();
  for (int i = 0; i < m.rows(); ++i) m.coeffRef(i, i) += 1.0;
  return m;
}

Eigen::Map<const Eigen::VectorXd> as_vec(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

}  // namespace

GridField solve_state(const ProblemSpec& spec, const GridField& u,
                      const GridField& w, SolveReport* report) {
  require_same_mesh(u, w, "solve_state");
  const auto t0 = std::chrono::steady_clock::now();
  const auto& mesh = u.mesh_ptr();
  const MeshQ& m = *mesh;
  const int ns = m.n_space();
  const double tau = m.tau();
  const DiscreteOperator a = assemble_operator(mesh, spec.coeffs);
  const Eigen::SparseMatrix<double> base = step_matrix_base(a, tau);

  GridField y(mesh);
  for (int i = 0; i < ns; ++i) y.at(0, i) = spec.y0.value(m.point(i, 0));

  long long total_iters = 0;
  int max_iters = 0;
  double worst_rel = 0;

  Eigen::VectorXd yn(ns), rhs(ns), fy(ns), fres(ns), cand(ns), fcand(ns);
  auto eval_residual = [&](int n, const Eigen::VectorXd& z,
                           Eigen::VectorXd& out, Eigen::VectorXd* slope) {
    out = z + tau * (a.matrix() * z) - rhs;
    for (int i = 0; i < ns; ++i) {
      EvalPoint p = m.point(i, n);
      p.y = z[i];
      p.w = w.at(n, i);
      if (slope) {
        const Value2 fv = spec.f.eval(p);
        out[i] += tau * fv.v;
        (*slope)[i] = fv.dy;
      } else {
        out[i] += tau * spec.f.value(p);
      }
    }
  };

  for (int n = 1; n <= m.nt(); ++n) {
    for (int i = 0; i < ns; ++i) {
      rhs[i] = y.at(n - 1, i) + tau * (u.at(n, i) + w.at(n, i));
      yn[i] = y.at(n - 1, i);
    }
    const double tol = kNewtonRelTol * (1.0 + rhs.norm());
    eval_residual(n, yn, fres, &fy);
    double rnorm = fres.norm();
    if (!std::isfinite(rnorm))
      throw SolverError("state solve: non-finite residual at step " +
                        std::to_string(n));

    int it = 0;
    while (rnorm > tol) {
      if (++it > kNewtonMaxIters)
        throw SolverError("state Newton did not converge at step " +
                          std::to_string(n) + " (residual " +
                          format_double(rnorm) + ")");
      Eigen::SparseMatrix<double> jac = base;
      for (int i = 0; i < ns; ++i) jac.coeffRef(i, i) += tau * fy[i];
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> fact(jac);
      if (fact.info() != Eigen::Success)
        throw SolverError("singular state step matrix at step " +
                          std::to_string(n));
      const Eigen::VectorXd delta = fact.solve(-fres);

      bool accepted = false;
      for (double s = 1.0; s >= kMinDamping; s *= 0.5) {
        cand = yn + s * delta;
        eval_residual(n, cand, fcand, nullptr);
        const double cnorm = fcand.norm();
        if (std::isfinite(cnorm) && cnorm < rnorm) {
          yn = cand;
          fres = fcand;
          rnorm = cnorm;
          accepted = true;
          break;
        }
      }
      if (!accepted)
        throw SolverError("state Newton stalled at step " + std::to_string(n) +
                          " (residual " + format_double(rnorm) + ")");
      if (rnorm > tol) eval_residual(n, yn, fres, &fy);  // refresh slopes
    }

    total_iters += it;
    max_iters = std::max(max_iters, it);
    worst_rel = std::max(worst_rel, rnorm / (1.0 + rhs.norm()));
    for (int i = 0; i < ns; ++i) y.at(n, i) = yn[i];
  }

  if (report) {
    report->newton_iters_max = max_iters;
    report->newton_iters_mean = static_cast<double>(total_iters) / m.nt();
    report->final_residual = worst_rel;
    report->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  return y;
}

LinearizedMap::LinearizedMap(const ProblemSpec& spec, const GridField& ybar,
                             const GridField& wbar) {
  require_same_mesh(ybar, wbar, "LinearizedMap");
  mesh_ = ybar.mesh_ptr();
  const MeshQ& m = *mesh_;
  const int ns = m.n_space();
  const double tau = m.tau();
  const DiscreteOperator a = assemble_operator(mesh_, spec.coeffs);
  const Eigen::SparseMatrix<double> base = step_matrix_base(a, tau);

  fact_.reserve(m.nt());
  for (int n = 1; n <= m.nt(); ++n) {
    Eigen::SparseMatrix<double> mn = base;
    for (int i = 0; i < ns; ++i) {
      EvalPoint p = m.point(i, n);
      p.y = ybar.at(n, i);
      p.w = wbar.at(n, i);
      mn.coeffRef(i, i) += tau * spec.f.eval(p).dy;
    }
    auto f = std::make_unique<Factor>(mn);
    if (f->info() != Eigen::Success)
      throw SolverError("singular linearized step matrix at step " +
                        std::to_string(n));
    fact_.push_back(std::move(f));
  }
}

GridField LinearizedMap::forward(const GridField& v) const {
  if (!v.valid() || !v.mesh().same_as(*mesh_))
    throw Error("LinearizedMap::forward: field mesh mismatch");
  const MeshQ& m = *mesh_;
  const double tau = m.tau();
  GridField zeta(mesh_);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m.n_space());
  for (int n = 1; n <= m.nt(); ++n) {
    z = fact_[n - 1]->solve((z + tau * as_vec(v.level(n))).eval());
    auto row = zeta.level(n);
    for (int i = 0; i < m.n_space(); ++i) row[i] = z[i];
  }
  return zeta;
}

GridField LinearizedMap::transpose(const GridField& r) const {
  if (!r.valid() || !r.mesh().same_as(*mesh_))
    throw Error("LinearizedMap::transpose: field mesh mismatch");
  const MeshQ& m = *mesh_;
  const double tau = m.tau();
  GridField phi(mesh_);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(m.n_space());
  for (int n = m.nt(); n >= 1; --n) {
    p = fact_[n - 1]->solve((p + tau * as_vec(r.level(n))).eval());
    auto row = phi.level(n);
    for (int i = 0; i < m.n_space(); ++i) row[i] = p[i];
  }
  return phi;
}

GridField solve_linearized(const ProblemSpec& spec, const GridField& ybar,
                           const GridField& wbar, const GridField& v) {
  return LinearizedMap(spec, ybar, wbar).forward(v);
}

GridField solve_adjoint(const ProblemSpec& spec, const GridField& y,
                        const GridField& u, const GridField& w,
                        const GridField& e) {
  require_same_mesh(y, u, "solve_adjoint");
  require_same_mesh(y, w, "solve_adjoint");
  require_same_mesh(y, e, "solve_adjoint");
  const MeshQ& m = y.mesh();
  GridField q(y.mesh_ptr());
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = y.at(n, i);
      p.u = u.at(n, i);
      p.w = w.at(n, i);
      q.at(n, i) = -(spec.L.eval(p).dy + e.at(n, i) * spec.g.eval(p).dy);
    }
  return LinearizedMap(spec, y, w).transpose(q);
}

GridField solve_adjoint_with_source(const ProblemSpec& spec,
                                    const GridField& ybar,
                                    const GridField& wbar, const GridField& r) {
  return LinearizedMap(spec, ybar, wbar).transpose(r);
}

namespace {

/// W112 + LinfQ + L2Q of the parabolic graph part (dz/dt + Az), the
/// strongest norm the state displacement is measured in.
double state_gap_norm(const GridField& dz, const DiscreteOperator& a) {
  const MeshQ& m = dz.mesh();
  Eigen::VectorXd av(m.n_space());
  double graph2 = 0;
  for (int n = 1; n <= m.nt(); ++n) {
    a.apply(dz.level(n), {av.data(), static_cast<std::size_t>(av.size())});
    for (int i = 0; i < m.n_space(); ++i) {
      const double v = (dz.at(n, i) - dz.at(n - 1, i)) / m.tau() + av[i];
      graph2 += m.cell_weight() * v * v;
    }
  }
  return field_norm(dz, NormKind::W112, &a) + field_norm(dz, NormKind::LinfQ) +
         std::sqrt(graph2);
}

}  // namespace

LipschitzTable lipschitz_solution_map_check(
    const ProblemSpec& spec, const GridField& u, const GridField& w,
    std::span<const std::pair<GridField, GridField>> trials) {
  const GridField y = solve_state(spec, u, w);
  const DiscreteOperator a = assemble_operator(u.mesh_ptr(), spec.coeffs);

  LipschitzTable out;
  for (const auto& [tu, tw] : trials) {
    require_same_mesh(u, tu, "lipschitz_solution_map_check");
    require_same_mesh(w, tw, "lipschitz_solution_map_check");
    LipschitzTrialResult row;
    row.denom = field_norm(field_sub(tu, u), NormKind::LinfQ) +
                field_norm(field_sub(tw, w), NormKind::LinfQ);
    if (row.denom == 0) {
      row.skipped = true;
      out.rows.push_back(row);
      continue;
    }
    try {
      const GridField yt = solve_state(spec, tu, tw);
      row.dist_y = state_gap_norm(field_sub(yt, y), a);
      row.ratio = row.dist_y / row.denom;
      row.valid = true;
      out.max_ratio = std::max(out.max_ratio, row.ratio);
      ++out.valid_rows;
    } catch (const SolverError&) {
      row.valid = false;
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace paroc
