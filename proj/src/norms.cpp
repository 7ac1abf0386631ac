#include "paroc/norms.hpp"

#include <cmath>
#include <vector>

namespace paroc {

double l2q_inner(const GridField& a, const GridField& b) {
  require_same_mesh(a, b, "l2q_inner");
  const MeshQ& m = a.mesh();
  double s = 0;
  for (int n = 1; n <= m.nt(); ++n) {
    auto ra = a.level(n);
    auto rb = b.level(n);
    for (int i = 0; i < m.n_space(); ++i) s += ra[i] * rb[i];
  }
  return s * m.cell_weight();
}

double l2q_norm(const GridField& a) { return std::sqrt(l2q_inner(a, a)); }

double h1_seminorm_level(const GridField& f, int n) {
  const MeshQ& m = f.mesh();
  auto v = f.level(n);
  double s = 0;
  if (m.dim() == 1) {
    const double h = m.h(0);
    const int nx = m.nx();
    for (int k = 0; k <= nx; ++k) {
      const double left = k - 1 >= 0 ? v[k - 1] : 0.0;
      const double right = k <= nx - 1 ? v[k] : 0.0;
      const double d = (right - left) / h;
      s += d * d * h;
    }
    return std::sqrt(s);
  }
  const int nx = m.nx();
  const double hx = m.h(0), hy = m.h(1), w = hx * hy;
  auto val = [&](int ix, int iy) {
    return (ix < 0 || ix >= nx || iy < 0 || iy >= nx) ? 0.0 : v[iy * nx + ix];
  };
  for (int iy = 0; iy < nx; ++iy)
    for (int k = 0; k <= nx; ++k) {
      const double d = (val(k, iy) - val(k - 1, iy)) / hx;
      s += d * d * w;
    }
  for (int ix = 0; ix < nx; ++ix)
    for (int k = 0; k <= nx; ++k) {
      const double d = (val(ix, k) - val(ix, k - 1)) / hy;
      s += d * d * w;
    }
  return std::sqrt(s);
}

double field_norm(const GridField& f, NormKind kind,
                  const DiscreteOperator* op) {
  if (!f.valid()) throw Error("field_norm: empty field");
  const MeshQ& m = f.mesh();
  switch (kind) {
    case NormKind::L2Q:
      return l2q_norm(f);
    case NormKind::LinfQ: {
      double mx = 0;
      for (int n = 1; n <= m.nt(); ++n)
        for (double v : f.level(n)) mx = std::max(mx, std::abs(v));
      return mx;
    }
    case NormKind::W112: {
      if (!op || !op->valid())
        throw Error("field_norm: W112 needs the elliptic operator");
      if (!op->mesh().same_as(m))
        throw Error("field_norm: operator mesh does not match the field");
      const double tau = m.tau();
      double s_dt = 0, s_a = 0, s_v = 0;
      std::vector<double> tmp(static_cast<std::size_t>(m.n_space()));
      for (int n = 1; n <= m.nt(); ++n) {
        auto cur = f.level(n);
        auto prev = f.level(n - 1);
        op->apply(cur, tmp);
        for (int i = 0; i < m.n_space(); ++i) {
          const double dt = (cur[i] - prev[i]) / tau;
          s_dt += dt * dt;
          s_a += tmp[i] * tmp[i];
          s_v += cur[i] * cur[i];
        }
      }
      const double w = m.cell_weight();
      return std::sqrt(s_dt * w) + std::sqrt(s_a * w) + std::sqrt(s_v * w);
    }
    case NormKind::C0V: {
      double mx = 0;
      for (int n = 0; n <= m.nt(); ++n)
        mx = std::max(mx, h1_seminorm_level(f, n));
      return mx;
    }
    case NormKind::L2H1: {
      double s = 0;
      for (int n = 1; n <= m.nt(); ++n) {
        const double g = h1_seminorm_level(f, n);
        s += g * g;
      }
      return std::sqrt(s * m.tau());
    }
  }
  return 0;
}

}  // namespace paroc
