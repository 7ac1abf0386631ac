#include "paroc/operators.hpp"

#include <vector>

namespace paroc {

void DiscreteOperator::apply(std::span<const double> in,
                             std::span<double> out) const {
  Eigen::Map<const Eigen::VectorXd> vi(in.data(),
                                       static_cast<Eigen::Index>(in.size()));
  Eigen::Map<Eigen::VectorXd> vo(out.data(),
                                 static_cast<Eigen::Index>(out.size()));
  vo = mat_ * vi;
}

namespace {

using Trip = Eigen::Triplet<double>;

void assemble_1d(const MeshQ& m, const ScalarFn2& a, std::vector<Trip>& trips) {
  const double h = m.h(0);
  const double inv_h2 = 1.0 / (h * h);
  const double lo = m.domain().lo[0];
  const int nx = m.nx();
  // Edge k joins node k-1 and node k (node -1 and node nx are boundary).
  for (int k = 0; k <= nx; ++k) {
    EvalPoint p;
    p.x = lo + (k + 0.5) * h;
    const double w = a.value(p) * inv_h2;
    if (k - 1 >= 0) trips.emplace_back(k - 1, k - 1, w);
    if (k <= nx - 1) trips.emplace_back(k, k, w);
    if (k - 1 >= 0 && k <= nx - 1) {
      trips.emplace_back(k - 1, k, -w);
      trips.emplace_back(k, k - 1, -w);
    }
  }
}

void assemble_2d(const MeshQ& m, const EllipticCoefficients& c,
                 std::vector<Trip>& trips) {
  const int nx = m.nx();
  const double hx = m.h(0), hy = m.h(1);
  const double lox = m.domain().lo[0], loy = m.domain().lo[1];
  auto node_x = [&](int ix) { return lox + (ix + 1) * hx; };
  auto node_y = [&](int iy) { return loy + (iy + 1) * hy; };
  auto flat = [&](int ix, int iy) { return iy * nx + ix; };

  // a11: edges along the first axis, one row of nodes at a time.
  const double inv_hx2 = 1.0 / (hx * hx);
  for (int iy = 0; iy < nx; ++iy)
    for (int k = 0; k <= nx; ++k) {
      EvalPoint p;
      p.x = lox + (k + 0.5) * hx;
      p.x2 = node_y(iy);
      const double w = c.a11.value(p) * inv_hx2;
      if (k - 1 >= 0) trips.emplace_back(flat(k - 1, iy), flat(k - 1, iy), w);
      if (k <= nx - 1) trips.emplace_back(flat(k, iy), flat(k, iy), w);
      if (k - 1 >= 0 && k <= nx - 1) {
        trips.emplace_back(flat(k - 1, iy), flat(k, iy), -w);
        trips.emplace_back(flat(k, iy), flat(k - 1, iy), -w);
      }
    }

  // a22: edges along the second axis.
  const double inv_hy2 = 1.0 / (hy * hy);
  for (int ix = 0; ix < nx; ++ix)
    for (int k = 0; k <= nx; ++k) {
      EvalPoint p;
      p.x = node_x(ix);
      p.x2 = loy + (k + 0.5) * hy;
      const double w = c.a22.value(p) * inv_hy2;
      if (k - 1 >= 0) trips.emplace_back(flat(ix, k - 1), flat(ix, k - 1), w);
      if (k <= nx - 1) trips.emplace_back(flat(ix, k), flat(ix, k), w);
      if (k - 1 >= 0 && k <= nx - 1) {
        trips.emplace_back(flat(ix, k - 1), flat(ix, k), -w);
        trips.emplace_back(flat(ix, k), flat(ix, k - 1), -w);
      }
    }

  // Mixed term -d1(a12 d2 y) - d2(a12 d1 y): couples diagonal neighbours
  // only, with node-sampled coefficients. Couplings into boundary nodes drop
  // out because the boundary values vanish.
  if (c.a12.empty()) return;
  auto a12_at = [&](int ix, int iy) {
    EvalPoint p;
    p.x = node_x(ix);
    p.x2 = node_y(iy);
    return c.a12.value(p);
  };
  const double q = 1.0 / (4.0 * hx * hy);
  for (int iy = 0; iy < nx; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      // Upward-right neighbour (ix+1, iy+1).
      if (ix + 1 < nx && iy + 1 < nx) {
        const double v = -(a12_at(ix + 1, iy) + a12_at(ix, iy + 1)) * q;
        trips.emplace_back(flat(ix, iy), flat(ix + 1, iy + 1), v);
        trips.emplace_back(flat(ix + 1, iy + 1), flat(ix, iy), v);
      }
      // Downward-right neighbour (ix+1, iy-1).
      if (ix + 1 < nx && iy - 1 >= 0) {
        const double v = (a12_at(ix + 1, iy) + a12_at(ix, iy - 1)) * q;
        trips.emplace_back(flat(ix, iy), flat(ix + 1, iy - 1), v);
        trips.emplace_back(flat(ix + 1, iy - 1), flat(ix, iy), v);
      }
    }
}

}  // namespace

DiscreteOperator assemble_operator(std::shared_ptr<const MeshQ> mesh,
                                   const EllipticCoefficients& coeffs) {
  const MeshQ& m = *mesh;
  coeffs.validate(m.dim());
  std::vector<Trip> trips;
  trips.reserve(static_cast<std::size_t>(m.n_space()) * 9);
  if (m.dim() == 1)
    assemble_1d(m, coeffs.a11, trips);
  else
    assemble_2d(m, coeffs, trips);
  Eigen::SparseMatrix<double> mat(m.n_space(), m.n_space());
  mat.setFromTriplets(trips.begin(), trips.end());
  mat.makeCompressed();
  return DiscreteOperator(std::move(mesh), std::move(mat));
}

DiscreteOperator assemble_laplacian(std::shared_ptr<const MeshQ> mesh) {
  EllipticCoefficients unit =
      EllipticCoefficients::isotropic(ScalarFn2::constant(1.0), mesh->dim());
  return assemble_operator(std::move(mesh), unit);
}

}  // namespace paroc
