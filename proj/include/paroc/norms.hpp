#pragma once

#include "paroc/mesh.hpp"
#include "paroc/operators.hpp"

namespace paroc {

/// Discrete space-time norms. Quadrature weight is tau*h^d per lattice point;
/// all space-time sums and maxima run over levels 1..nt (the right-endpoint
/// rule backing the implicit Euler stepping), except C0V which also inspects
/// the initial level.
enum class NormKind {
  L2Q,    // (sum v^2 tau h^d)^(1/2)
  LinfQ,  // max |v|
  W112,   // ||dt v||_L2Q + ||A v||_L2Q + ||v||_L2Q
  C0V,    // max over all levels of the discrete H1_0 seminorm
  L2H1,   // (sum_n tau |v^n|_H1^2)^(1/2)
};

/// W112 requires the problem's elliptic operator; the H1 seminorms in C0V and
/// L2H1 are coefficient-free.
double field_norm(const GridField& f, NormKind kind,
                  const DiscreteOperator* op = nullptr);

double l2q_inner(const GridField& a, const GridField& b);
double l2q_norm(const GridField& a);

/// Discrete H1_0 seminorm of one time level: forward differences including
/// the gaps to the (zero) boundary values.
double h1_seminorm_level(const GridField& f, int n);

}  // namespace paroc
