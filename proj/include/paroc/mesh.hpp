#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "paroc/domain.hpp"
#include "paroc/expr.hpp"

namespace paroc {

/// Uniform tensor grid on Q = Omega x (0,T): nx interior nodes per spatial
/// axis (spacing h = L/(nx+1), boundary nodes excluded) and time levels
/// t_n = n*T/nt for n = 0..nt. All discrete quadrature, constraints and
/// residuals live on levels 1..nt; level 0 carries the initial state.
class MeshQ {
 public:
  MeshQ(const SpatialDomain& dom, int nx, int nt, double T);

  const SpatialDomain& domain() const { return dom_; }
  int dim() const { return dom_.dim(); }
  int nx() const { return nx_; }
  int nt() const { return nt_; }
  double horizon() const { return T_; }
  double h(int axis = 0) const { return h_[axis]; }
  double tau() const { return tau_; }

  /// Interior unknowns per time level: nx in 1D, nx^2 on rectangles.
  int n_space() const { return space_; }

  /// Quadrature weight of one lattice point: h (1D) or hx*hy (2D) times tau.
  double cell_weight() const { return cellw_; }
  double space_weight() const { return spacew_; }

  double time(int n) const { return (static_cast<double>(n) * T_) / nt_; }

  /// Flattened spatial index: i = iy*nx + ix on rectangles.
  int flat(int ix, int iy = 0) const { return iy * nx_ + ix; }
  double x_of(int i) const { return dom_.lo[0] + (i % nx_ + 1) * h_[0]; }
  double x2_of(int i) const {
    return dim() == 1 ? 0.0 : dom_.lo[1] + (i / nx_ + 1) * h_[1];
  }

  EvalPoint point(int i, int n) const {
    EvalPoint p;
    p.x = x_of(i);
    p.x2 = x2_of(i);
    p.t = time(n);
    return p;
  }

  bool same_as(const MeshQ& o) const;

 private:
  SpatialDomain dom_;
  int nx_, nt_, space_;
  double T_, tau_, h_[2], cellw_, spacew_;
};

/// Scalar lattice function: one value per interior node per time level
/// (levels 0..nt, stored level-major). Carries a shared mesh handle so norms
/// and solvers can check compatibility.
class GridField {
 public:
  GridField() = default;
  explicit GridField(std::shared_ptr<const MeshQ> mesh, double fill = 0.0);

  /// Samples a space-time function (no y/u/w dependence) at every lattice
  /// point including level 0.
  static GridField sample(std::shared_ptr<const MeshQ> mesh,
                          const ScalarFn2& f);

  const MeshQ& mesh() const { return *mesh_; }
  const std::shared_ptr<const MeshQ>& mesh_ptr() const { return mesh_; }
  bool valid() const { return mesh_ != nullptr; }

  double at(int n, int i) const { return v_[idx(n, i)]; }
  double& at(int n, int i) { return v_[idx(n, i)]; }
  std::span<const double> level(int n) const;
  std::span<double> level(int n);
  const std::vector<double>& raw() const { return v_; }
  std::vector<double>& raw() { return v_; }

  /// Text format: header "n_space nt h tau", then nt+1 rows of n_space
  /// shortest-round-trip floats. Bit-exact across save/load.
  void write(std::ostream& os) const;
  void save(const std::string& path) const;
  static GridField read(std::istream& is, std::shared_ptr<const MeshQ> mesh);
  static GridField load(const std::string& path,
                        std::shared_ptr<const MeshQ> mesh);

 private:
  std::size_t idx(int n, int i) const {
    return static_cast<std::size_t>(n) * mesh_->n_space() +
           static_cast<std::size_t>(i);
  }

  std::shared_ptr<const MeshQ> mesh_;
  std::vector<double> v_;
};

void require_same_mesh(const GridField& a, const GridField& b,
                       const char* what);

/// Elementwise a - b; meshes must match.
GridField field_sub(const GridField& a, const GridField& b);

}  // namespace paroc
