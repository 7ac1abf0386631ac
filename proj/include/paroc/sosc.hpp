#pragma once

#include <memory>
#include <string>

#include "paroc/kkt.hpp"
#include "paroc/model.hpp"
#include "paroc/pde.hpp"

namespace paroc {

/// Reduced Hessian of the Lagrangian at a candidate point, acting on control
/// directions v through the linearized state map Z = S v:
///   H v = S^T(P Zv) + S^T(R v) + R Zv + Muu v
/// with the pointwise weights P = L_yy + e g_yy + phi f_yy,
/// R = L_yu + e g_yu and Muu = L_uu + e g_uu frozen at the point. apply() is
/// the L2Q-symmetric matrix-vector product; quadratic_form(v) = <v, Hv>.
class QuadraticForm {
 public:
  QuadraticForm(const ProblemSpec& spec, const KktPoint& pt,
                const GridField& w);

  const std::shared_ptr<const MeshQ>& mesh_ptr() const;

  GridField apply(const GridField& v) const;
  double operator()(const GridField& v) const;

  /// Pointwise control curvature weight Muu; its lattice minimum is the
  /// Legendre lower bound reported next to the coercivity estimate.
  const GridField& control_weight() const { return muu_; }

 private:
  LinearizedMap map_;
  GridField p_, r_, muu_;
};

enum class CoercivityMethod { dense, lanczos };
enum class CoercivityVerdict { holds, fails, indeterminate };

const char* to_string(CoercivityMethod m);
const char* to_string(CoercivityVerdict v);

struct CoercivityReport {
  /// Smallest eigenvalue of the reduced Hessian in the L2Q metric.
  double alpha = 0;
  /// Lattice minimum of the pointwise control curvature Muu.
  double rho = 0;
  GridField witness_v;
  CoercivityMethod method = CoercivityMethod::dense;
  CoercivityVerdict verdict = CoercivityVerdict::indeterminate;
  double alpha_tol = 0;
  int iterations = 0;

  std::string to_json() const;
};

/// Estimates the smallest reduced-Hessian eigenvalue. Instances with at most
/// `dense_cutoff` control unknowns are solved by a dense symmetric
/// eigendecomposition; larger ones by Lanczos with full reorthogonalization
/// on the matrix-free form. The verdict compares alpha against a tolerance
/// scaled by the Hessian magnitude: holds when alpha clears it, fails when
/// alpha is below its negative, indeterminate in between.
CoercivityReport coercivity(const ProblemSpec& spec, const KktPoint& pt,
                            const GridField& w, int dense_cutoff = 2000);

/// Re-runs the estimate with the multiplier field shifted by delta_e
/// (pointwise, levels 1..nt), leaving everything else frozen. delta_e must
/// keep e + delta_e nonnegative where it multiplies curvature that changes
/// sign; no check is made beyond mesh compatibility, since the caller is
/// exploring hypothetical multipliers.
CoercivityReport coercivity_under_multiplier_perturbation(
    const ProblemSpec& spec, const KktPoint& pt, const GridField& w,
    const GridField& delta_e, int dense_cutoff = 2000);

}  // namespace paroc
