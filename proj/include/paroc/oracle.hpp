#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "paroc/kkt.hpp"
#include "paroc/model.hpp"

namespace paroc {

/// Closed-form test problems: a quadratic cost with the constraint never
/// binding, the same with the constraint binding on a fixed space band, and
/// the banded case with a cubic reaction term.
enum class Recipe { lq_inactive, lq_active_band, semilinear_band };

/// Control problem constructed backwards from chosen exact fields, so the
/// discrete optimality system has known ground truth. The constraint is a
/// box edge g = u - 0.1 with unit control margin; a spatial band profile
/// decides where it binds; all closure terms are absorbed into the cost
/// shifts and the nominal parameter field. Stationarity and complementarity
/// hold exactly at the sampled fields; state and adjoint residuals shrink at
/// first order in tau and second order in h.
struct ManufacturedCase {
  ProblemSpec spec;
  std::shared_ptr<const MeshQ> mesh;
  GridField w_ref;
  GridField y_exact, u_exact, phi_exact, e_exact;
  /// Ground-truth activity of the constraint, level-major over levels 0..nt
  /// (level 0 is all zero, matching classify_active).
  std::vector<std::uint8_t> active;

  bool active_at(int n, int i) const {
    return active[static_cast<std::size_t>(n) * mesh->n_space() + i] != 0;
  }

  /// Exact fields bundled as a candidate point with freshly computed
  /// residuals.
  KktPoint exact_point() const;
};

/// `band_strength` scales the band profile; it must keep the profile
/// positive strictly inside (0.25, 0.75) or the construction is rejected,
/// because the recovered multiplier would be negative where the constraint
/// is supposed to bind. The mesh must discretize the unit interval.
ManufacturedCase build_manufactured(Recipe recipe,
                                    std::shared_ptr<const MeshQ> mesh,
                                    double band_strength = 4.0);

struct GradCheckResult {
  double max_rel_error = 0;
  int directions = 0;
  double step = 0;
  /// Smallest feasibility margin -g seen at any probe point.
  double min_margin = 0;
};

/// Compares the adjoint representation of the reduced gradient (multiplier
/// ignored, e = 0) against central finite differences of u -> J(y(u), u, w)
/// along random unit directions. Throws Error if any probe touches or
/// crosses the constraint boundary, since the reduced objective is only
/// smooth on the interior of the feasible set.
GradCheckResult fd_gradient_check(const ProblemSpec& spec, const GridField& u,
                                  const GridField& w, int directions = 5,
                                  double step = 1e-5, std::uint64_t seed = 7);

struct BruteForceResult {
  GridField u;
  GridField y;
  double j = 0;
  int best_start = 0;
  /// Max-norm of the projected gradient step at the returned point.
  double stationarity = 0;
  int failed_starts = 0;
};

/// Multistart projected gradient descent on the reduced objective, feasible
/// set handled by pointwise projection. Only for tiny instances (at most 12
/// control unknowns); deterministic for a fixed seed.
BruteForceResult brute_force_small(const ProblemSpec& spec, const GridField& w,
                                   int starts = 20, std::uint64_t seed = 1);

/// Pulls a control value back to the feasible side of g(x,t,y,.,w) <= 0 by
/// bisection between `cand` and the feasible `anchor`, then Newton-polishes
/// toward the boundary without leaving the feasible side. Returns `cand`
/// unchanged when it is already feasible. The fields of `p` other than u
/// must be filled by the caller.
double project_control_feasible(const ScalarFn2& g, EvalPoint p, double cand,
                                double anchor);

/// Finds a feasible control value starting from `from`, walking against the
/// sign of g_u with doubling steps. Throws SolverError after 60 doublings.
double find_feasible_anchor(const ScalarFn2& g, EvalPoint p, double from);

}  // namespace paroc
