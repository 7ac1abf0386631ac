#pragma once

#include "paroc/errors.hpp"
#include "paroc/expr.hpp"

namespace paroc {

/// Spatial domain: an interval (lo[0], hi[0]) or an axis-aligned rectangle
/// (lo[0], hi[0]) x (lo[1], hi[1]). Homogeneous Dirichlet boundary throughout.
struct SpatialDomain {
  enum class Kind { interval, rectangle };

  Kind kind = Kind::interval;
  double lo[2] = {0, 0};
  double hi[2] = {1, 1};

  static SpatialDomain interval(double a, double b);
  static SpatialDomain rectangle(double ax, double bx, double ay, double by);

  int dim() const { return kind == Kind::interval ? 1 : 2; }
  double length(int axis) const { return hi[axis] - lo[axis]; }
  void validate() const;
};

/// Symmetric diffusion coefficient table. On intervals only a11 = a(x) is
/// used. On rectangles a12 doubles as a21; an empty a12 means zero.
struct EllipticCoefficients {
  ScalarFn2 a11;
  ScalarFn2 a12;
  ScalarFn2 a22;

  static EllipticCoefficients isotropic(ScalarFn2 a, int dim);

  void validate(int dim) const;
};

}  // namespace paroc
