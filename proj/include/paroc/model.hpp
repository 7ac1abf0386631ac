#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "paroc/domain.hpp"
#include "paroc/expr.hpp"
#include "paroc/mesh.hpp"

namespace paroc {

/// Nominal parameter descriptor: a constant, a space-time expression, or a
/// grid file. Materialized against the run mesh on demand.
struct WSpec {
  enum class Kind { constant, expression, grid };

  Kind kind = Kind::constant;
  double value = 0;
  ScalarFn2 expr;
  std::string path;

  static WSpec constant_w(double c);
  static WSpec expression_w(ScalarFn2 e);
  static WSpec grid_w(std::string p);

  GridField materialize(std::shared_ptr<const MeshQ> mesh) const;
};

/// Data of the parametric control problem
///   min J(y,u,w) = int_Q L(x,t,y,u,w)
///   s.t. dy/dt + A y + f(x,t,y,w) = u + w,   y = 0 on the boundary,
///        y(0) = y0,   g(x,t,y,u,w) <= 0 pointwise.
struct ProblemSpec {
  SpatialDomain domain;
  double horizon = 1.0;
  EllipticCoefficients coeffs;
  ScalarFn2 y0;  // x (and x2 on rectangles)
  ScalarFn2 L;   // x,t,y,u,w
  ScalarFn2 f;   // x,t,y,w  (no control dependence)
  ScalarFn2 g;   // x,t,y,u,w
  WSpec w_ref;

  VarSet vars_space() const;  // coordinates only
  VarSet vars_data() const;   // coordinates and t
  VarSet vars_f() const;      // + y, w
  VarSet vars_full() const;   // + u

  /// Shape and scope checks plus a sampled y0 = 0 boundary check.
  /// Throws ConfigError on violation.
  void validate() const;

  std::shared_ptr<const MeshQ> make_mesh(int nx, int nt) const;
};

// --- Hypothesis audits ------------------------------------------------------
//
// The audits produce sampled certificates: deterministic in (probes, seed),
// lower bounds sampled from below, Lipschitz constants from difference
// quotients. They are evidence, not proofs.

struct EllipticityAudit {
  double alpha = 0;  // sampled min of the coefficient quadratic form
  bool pass = false;
  int probes = 0;
  std::uint64_t seed = 0;
};

/// Samples min over x (random interior points plus corners) of the smallest
/// eigenvalue of the coefficient matrix.
EllipticityAudit audit_h1(const ProblemSpec& spec, int probes,
                          std::uint64_t seed);

struct LipschitzSample {
  std::string name;
  double value = 0;
  bool diverging = false;
};

struct SmoothnessAudit {
  double c_f = 0;  // sampled min of f_y over the probe box
  double bound_M = 0;
  int probes = 0;
  std::uint64_t seed = 0;
  bool f_vanishes_at_zero = true;  // max |f(x,t,0,w)| below tolerance
  std::vector<LipschitzSample> samples;
  bool h2_pass = false;
  bool h3_pass = false;
};

/// Difference-quotient scan of f, L, g over |y|,|u|,|w| <= M and (x,t) in
/// the closed cylinder. Rows k_fM/k_LM/k_gM hold the max sampled quotient of
/// the value difference; the _d1/_d2 rows cover first and second partials.
SmoothnessAudit audit_h2_h3(const ProblemSpec& spec, double bound_M,
                            int probes, std::uint64_t seed);

/// min |g_u| along a trajectory (levels 1..nt). This is the margin that
/// keeps the multiplier recovery e = (phi - L_u)/g_u well defined.
double audit_h4(const ProblemSpec& spec, const GridField& y,
                const GridField& u, const GridField& w);

struct AuditReport {
  EllipticityAudit h1;
  SmoothnessAudit h23;
  bool h4_evaluated = false;
  double gamma0 = 0;
  bool h4_pass = false;

  /// Deterministic key order and shortest-round-trip floats, so equal
  /// reports serialize to identical bytes.
  std::string to_json() const;
};

/// Runs H1-H3 always and H4 when trajectory fields are supplied.
AuditReport run_audits(const ProblemSpec& spec, double bound_M, int probes,
                       std::uint64_t seed, const GridField* y = nullptr,
                       const GridField* u = nullptr,
                       const GridField* w = nullptr);

/// Discrete running cost: sum of cell_weight * L over levels 1..nt.
double objective(const ProblemSpec& spec, const GridField& y,
                 const GridField& u, const GridField& w);

/// Pointwise activity classification of the mixed constraint: |g| <= tol at
/// levels 1..nt (level 0 is always inactive). Level-major layout.
std::vector<std::uint8_t> classify_active(const ProblemSpec& spec,
                                          const GridField& y,
                                          const GridField& u,
                                          const GridField& w, double tol);

}  // namespace paroc
