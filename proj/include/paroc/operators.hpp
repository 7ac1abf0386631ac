#pragma once

#include <Eigen/SparseCore>
#include <memory>
#include <span>

#include "paroc/domain.hpp"
#include "paroc/mesh.hpp"

namespace paroc {

/// Sparse discretization of A y = -sum_ij d_j(a_ij(x) d_i y) on the interior
/// lattice, homogeneous Dirichlet boundary. Flux form: axis terms use
/// midpoint coefficients a(x_{i+1/2}), the mixed term uses the centered
/// four-corner stencil. The assembled matrix is exactly symmetric because
/// every off-diagonal value is computed once and inserted in both triangles.
class DiscreteOperator {
 public:
  DiscreteOperator() = default;
  DiscreteOperator(std::shared_ptr<const MeshQ> mesh,
                   Eigen::SparseMatrix<double> m)
      : mesh_(std::move(mesh)), mat_(std::move(m)) {}

  bool valid() const { return mesh_ != nullptr; }
  const MeshQ& mesh() const { return *mesh_; }
  const std::shared_ptr<const MeshQ>& mesh_ptr() const { return mesh_; }
  const Eigen::SparseMatrix<double>& matrix() const { return mat_; }

  /// out = A * in for one time level (length n_space).
  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  std::shared_ptr<const MeshQ> mesh_;
  Eigen::SparseMatrix<double> mat_;
};

DiscreteOperator assemble_operator(std::shared_ptr<const MeshQ> mesh,
                                   const EllipticCoefficients& coeffs);

/// Unit-coefficient Laplacian on the same lattice (used for H1 seminorms and
/// as the positive-definiteness reference).
DiscreteOperator assemble_laplacian(std::shared_ptr<const MeshQ> mesh);

}  // namespace paroc
