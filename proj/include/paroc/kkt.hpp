#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "paroc/model.hpp"
#include "paroc/pde.hpp"

namespace paroc {

/// Reformulation used for the complementarity rows of the optimality system.
enum class NcpKind { min, fischer_burmeister };

struct NcpConfig {
  NcpKind kind = NcpKind::min;
  /// Scaling of the constraint inside the reformulation, min(e, -c*g).
  double c = 1.0;
  double kkt_tol = 1e-10;
  int max_outer = 50;
  double ls_backtrack = 0.5;
  double ls_min_step = 9.5367431640625e-7;  // 2^-20

  void validate() const;
};

/// First-order residuals of a candidate point. State and adjoint are measured
/// in L2 over the space-time cylinder after dividing the stepped equations by
/// tau, so they are discretizations of the continuous PDE defects. The
/// stationarity residual is an L2 norm as well; complementarity is a max norm
/// of the pointwise reformulation value.
struct KktResiduals {
  double state = 0;
  double adjoint = 0;
  double stat = 0;
  double comp = 0;

  double max_norm() const {
    return std::max(std::max(state, adjoint), std::max(stat, comp));
  }
  bool all_below(double tol) const { return max_norm() <= tol; }
};

struct KktPoint {
  GridField y, u, phi, e;
  KktResiduals res;
};

enum class OcpStatus { converged, max_iters, line_search_stall, h4_margin };

const char* to_string(OcpStatus s);

struct OcpReport {
  OcpStatus status = OcpStatus::max_iters;
  int iters = 0;
  /// Control margin min |g_u| at the starting point and at the last iterate.
  double gamma0_nominal = 0;
  double gamma0_final = 0;
  /// Objective value at the starting point and after each accepted step.
  std::vector<double> j_trace;
  std::string message;
};

/// Pointwise multiplier recovery e = (phi - L_u) / g_u on levels 1..nt.
/// Throws Error when |g_u| drops below 1e-12 anywhere.
GridField recover_multiplier(const ProblemSpec& spec, const GridField& y,
                             const GridField& u, const GridField& w,
                             const GridField& phi);

KktResiduals kkt_residuals(const ProblemSpec& spec, const KktPoint& pt,
                           const GridField& w, NcpKind kind = NcpKind::min);

/// Control margin min |g_u| along the trajectory of a candidate point.
double h4_margin(const ProblemSpec& spec, const KktPoint& pt,
                 const GridField& w);

/// Semismooth Newton on the full discrete optimality system, all four field
/// blocks solved simultaneously with a residual-norm line search. Cold start
/// from u = 0 unless `warm` is given. On a non-converged outcome the report
/// carries the status; without a report object the failure throws SolverError
/// so the degraded point cannot be consumed silently.
KktPoint solve_ocp(const ProblemSpec& spec, const GridField& w,
                   const NcpConfig& cfg = {}, OcpReport* report = nullptr,
                   const KktPoint* warm = nullptr);

/// Writes y/u/phi/e as four field files under `dir` (created if missing).
void save_kkt_point(const KktPoint& pt, const std::string& dir);

/// Reads the four field files back against an existing mesh. Residuals are
/// not stored in the files; the returned point carries freshly recomputed
/// ones with the default reformulation.
KktPoint load_kkt_point(const ProblemSpec& spec, const std::string& dir,
                        std::shared_ptr<const MeshQ> mesh, const GridField& w);

}  // namespace paroc
