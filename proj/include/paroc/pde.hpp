#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "paroc/model.hpp"
#include "paroc/operators.hpp"

namespace paroc {

/// Per-run diagnostics of a forward state solve. final_residual is the worst
/// relative per-step Newton residual that was accepted; on return it is
/// always below the solver tolerance (non-convergence throws instead).
struct SolveReport {
  int newton_iters_max = 0;
  double newton_iters_mean = 0;
  double final_residual = 0;
  double wall_seconds = 0;
};

/// Backward-Euler solve of dy/dt + Ay + f(x,t,y,w) = u + w, y(0) = y0,
/// zero Dirichlet boundary. Each step solves the nonlinear system
/// (I + tau A)y^n + tau f(t_n, y^n, w^n) = y^{n-1} + tau(u^n + w^n) by
/// damped Newton to relative residual 1e-12.
GridField solve_state(const ProblemSpec& spec, const GridField& u,
                      const GridField& w, SolveReport* report = nullptr);

/// Linearization of the state stepping frozen at (ybar, wbar). The per-step
/// matrices M_n = I + tau A + tau diag(f_y) are symmetric and factored once;
/// the same factorizations drive the forward sweep and the backward
/// (transpose) sweep, which makes the discrete adjoint exact.
class LinearizedMap {
 public:
  LinearizedMap(const ProblemSpec& spec, const GridField& ybar,
                const GridField& wbar);

  const MeshQ& mesh() const { return *mesh_; }
  const std::shared_ptr<const MeshQ>& mesh_ptr() const { return mesh_; }

  /// zeta^0 = 0, M_n zeta^n = zeta^{n-1} + tau v^n for n = 1..nt.
  GridField forward(const GridField& v) const;

  /// The L2Q-adjoint of forward: <forward(v), r>_{L2Q} = <v, transpose(r)>
  /// holds to roundoff. Runs backward in time with a zero virtual level
  /// nt+1, so slot n pairs with the step-n stationarity condition.
  GridField transpose(const GridField& r) const;

 private:
  using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

  std::shared_ptr<const MeshQ> mesh_;
  std::vector<std::unique_ptr<Factor>> fact_;  // index n-1 holds step n
};

/// zeta solving dzeta/dt + A zeta + f_y(ybar) zeta = v, zeta(0) = 0.
GridField solve_linearized(const ProblemSpec& spec, const GridField& ybar,
                           const GridField& wbar, const GridField& v);

/// Adjoint state: -dphi/dt + A phi + f_y phi = -(L_y + e g_y), phi(T) = 0,
/// discretized as the exact transpose of the linearized state stepping.
GridField solve_adjoint(const ProblemSpec& spec, const GridField& y,
                        const GridField& u, const GridField& w,
                        const GridField& e);

/// Backward solve with a caller-supplied right-hand side r in place of
/// -(L_y + e g_y); this is exactly LinearizedMap::transpose.
GridField solve_adjoint_with_source(const ProblemSpec& spec,
                                    const GridField& ybar,
                                    const GridField& wbar, const GridField& r);

// --- Solution-map Lipschitz measurement ---------------------------------

struct LipschitzTrialResult {
  double denom = 0;   // ||u'-u||_LinfQ + ||w'-w||_LinfQ
  double dist_y = 0;  // state gap in W112 + LinfQ + parabolic-graph L2Q
  double ratio = 0;
  bool skipped = false;  // zero input distance, ratio undefined
  bool valid = false;    // forward solves succeeded
};

struct LipschitzTable {
  std::vector<LipschitzTrialResult> rows;
  double max_ratio = 0;
  int valid_rows = 0;
};

/// Solves the state equation at the base pair and at every trial pair and
/// tabulates the ratio of state displacement to input displacement. Failed
/// trial solves mark the row invalid instead of aborting the table.
LipschitzTable lipschitz_solution_map_check(
    const ProblemSpec& spec, const GridField& u, const GridField& w,
    std::span<const std::pair<GridField, GridField>> trials);

}  // namespace paroc
