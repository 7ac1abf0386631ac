#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "paroc/kkt.hpp"
#include "paroc/model.hpp"
#include "paroc/sosc.hpp"

namespace paroc {

struct SweepDirection {
  std::string name;
  GridField field;  // unit sup norm over levels 1..nt
};

/// A perturbation experiment: each direction is probed at every radius, so
/// the run produces directions x radii records in that (direction-major)
/// order.
struct SweepPlan {
  std::vector<SweepDirection> directions;
  std::vector<double> radii;  // strictly decreasing, all positive

  /// At least two directions with unique names and unit sup norm, at least
  /// three strictly decreasing radii. Throws ConfigError.
  void validate() const;
};

/// Constant, smooth low-mode, and seeded sign-flip directions at radii
/// 0.1 * 2^-k for k = 0..4.
SweepPlan default_sweep_plan(std::shared_ptr<const MeshQ> mesh,
                             std::uint64_t seed);

struct SweepRecord {
  std::string direction;
  double radius = 0;
  double du_l2 = 0, dy_w112 = 0, dphi_l2 = 0, de_l2 = 0;
  double ratio_u = 0, ratio_y = 0, ratio_phi = 0, ratio_e = 0;
  /// Nonnegativity defect of the base Lagrangian under the perturbed
  /// multiplier; negative values beyond roundoff indicate a complementarity
  /// failure at one of the two points.
  double lagrangian_gap = 0;
  int iters = 0;
  OcpStatus status = OcpStatus::max_iters;
  bool threw = false;
  bool valid = false;
  std::string message;

  std::string status_text() const;
};

struct DirectionSlopes {
  std::string direction;
  /// Log-log slope of each distance against the radius; NaN when fewer than
  /// two usable records or a distance vanishes.
  double u = 0, y = 0, phi = 0, e = 0;
  int points = 0;
};

struct RadiusAggregate {
  double radius = 0;
  double k_hat = 0;
  double k_hat_adjoint = 0;
  int valid_records = 0;
};

struct SweepResult {
  std::vector<std::string> direction_names;
  std::vector<double> radii;
  KktPoint base;
  double base_j = 0;
  double gamma0 = 0;
  CoercivityReport base_coercivity;
  /// Base solve converged, control margin positive, curvature verdict holds.
  bool hypotheses_met = false;
  std::vector<SweepRecord> records;  // plan order
  /// Peak primal response per unit radius, max over valid records of
  /// (dy_w112 + du_l2)/radius; the adjoint variant uses dphi_l2 + de_l2.
  double k_hat = 0;
  double k_hat_adjoint = 0;
  std::vector<DirectionSlopes> slopes;
  std::vector<RadiusAggregate> per_radius;

  /// Both serializations are byte-deterministic for identical inputs: no
  /// wall times, no pointers, shortest round-trip floats.
  std::string to_json() const;
  std::string to_csv() const;
};

/// Solves the base problem, then re-solves under w + radius*direction for
/// every plan entry, warm-starting from the base point. Records are merged
/// in plan order whatever the execution order; `threads` > 1 runs that many
/// re-solves concurrently. A failed base solve throws SolverError; failed
/// perturbed solves only invalidate their record.
SweepResult perturbation_sweep(const ProblemSpec& spec, const GridField& w,
                               const SweepPlan& plan, const NcpConfig& cfg = {},
                               int threads = 0);

/// Fitted slopes as CSV (direction,quantity,slope,points); undefined slopes
/// render as nan.
std::string sweep_slopes_csv(const SweepResult& result);

/// Writes sweep.json, sweep.csv and slopes.csv under `dir`.
void write_sweep_outputs(const SweepResult& result, const std::string& dir);

struct GrowthCheckResult {
  double kappa_hat = 0;
  double min_numerator = 0;
  int violations = 0;
  int samples = 0;
  double radius = 0;
};

/// Samples feasible controls in the sup-norm ball around the base control
/// and measures the objective growth J(y(u'), u') - J(base) against
/// ||u' - u_base||^2 in L2. kappa_hat is the smallest ratio; numerators
/// below -1e-10 count as violations of local optimality.
GrowthCheckResult growth_check(const ProblemSpec& spec, const KktPoint& base,
                               const GridField& w, double radius, int samples,
                               std::uint64_t seed);

/// Complementarity gap of the base point against a foreign multiplier:
/// -sum of cell_weight * e_other * g(base) over levels 1..nt. Nonnegative
/// up to solver tolerance when both points satisfy complementarity with the
/// same sign conventions.
double lagrangian_gap_check(const ProblemSpec& spec, const KktPoint& base,
                            const GridField& e_other, const GridField& w);

struct MultiplierStability {
  /// Peak multiplier and adjoint response per unit control movement plus
  /// radius, max over usable records of de/(du + radius) and dphi/(du +
  /// radius).
  double m1 = 0;
  double m2 = 0;
  int used_records = 0;
};

/// Needs at least three valid records with some movement; throws Error
/// otherwise.
MultiplierStability multiplier_stability_check(const SweepResult& result);

}  // namespace paroc
