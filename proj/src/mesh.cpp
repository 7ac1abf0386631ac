#include "paroc/mesh.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace paroc {

SpatialDomain SpatialDomain::interval(double a, double b) {
  SpatialDomain d;
  d.kind = Kind::interval;
  d.lo[0] = a;
  d.hi[0] = b;
  d.validate();
  return d;
}

SpatialDomain SpatialDomain::rectangle(double ax, double bx, double ay,
                                       double by) {
  SpatialDomain d;
  d.kind = Kind::rectangle;
  d.lo[0] = ax;
  d.hi[0] = bx;
  d.lo[1] = ay;
  d.hi[1] = by;
  d.validate();
  return d;
}

void SpatialDomain::validate() const {
  for (int a = 0; a < dim(); ++a)
    if (!(hi[a] > lo[a]))
      throw ConfigError("domain bounds must satisfy lo < hi");
}

EllipticCoefficients EllipticCoefficients::isotropic(ScalarFn2 a, int dim) {
  EllipticCoefficients c;
  c.a11 = a;
  if (dim == 2) c.a22 = std::move(a);
  return c;
}

void EllipticCoefficients::validate(int dim) const {
  if (a11.empty()) throw ConfigError("coefficient a11 is required");
  if (dim == 1) {
    if (!a12.empty() || !a22.empty())
      throw ConfigError("interval domains take a single coefficient a(x)");
  } else if (a22.empty()) {
    throw ConfigError("rectangle domains require a22");
  }
}

MeshQ::MeshQ(const SpatialDomain& dom, int nx, int nt, double T)
    : dom_(dom), nx_(nx), nt_(nt), T_(T) {
  dom_.validate();
  if (nx < 1) throw ConfigError("mesh needs at least one interior node");
  if (nt < 1) throw ConfigError("mesh needs at least one time step");
  if (!(T > 0)) throw ConfigError("time horizon must be positive");
  h_[0] = dom_.length(0) / (nx_ + 1);
  h_[1] = dom_.dim() == 2 ? dom_.length(1) / (nx_ + 1) : 0.0;
  tau_ = T_ / nt_;
  space_ = dom_.dim() == 1 ? nx_ : nx_ * nx_;
  spacew_ = dom_.dim() == 1 ? h_[0] : h_[0] * h_[1];
  cellw_ = spacew_ * tau_;
}

bool MeshQ::same_as(const MeshQ& o) const {
  return dom_.kind == o.dom_.kind && nx_ == o.nx_ && nt_ == o.nt_ &&
         dom_.lo[0] == o.dom_.lo[0] && dom_.hi[0] == o.dom_.hi[0] &&
         dom_.lo[1] == o.dom_.lo[1] && dom_.hi[1] == o.dom_.hi[1] &&
         T_ == o.T_;
}

GridField::GridField(std::shared_ptr<const MeshQ> mesh, double fill)
    : mesh_(std::move(mesh)),
      v_(static_cast<std::size_t>(mesh_->n_space()) * (mesh_->nt() + 1),
         fill) {}

GridField GridField::sample(std::shared_ptr<const MeshQ> mesh,
                            const ScalarFn2& f) {
  GridField g(mesh);
  const MeshQ& m = *mesh;
  for (int n = 0; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) g.at(n, i) = f.value(m.point(i, n));
  return g;
}

std::span<const double> GridField::level(int n) const {
  return {v_.data() + idx(n, 0), static_cast<std::size_t>(mesh_->n_space())};
}

std::span<double> GridField::level(int n) {
  return {v_.data() + idx(n, 0), static_cast<std::size_t>(mesh_->n_space())};
}

void GridField::write(std::ostream& os) const {
  const MeshQ& m = *mesh_;
  os << m.n_space() << ' ' << m.nt() << ' ' << format_double(m.h(0)) << ' '
     << format_double(m.tau()) << '\n';
  for (int n = 0; n <= m.nt(); ++n) {
    auto row = level(n);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ' ';
      os << format_double(row[i]);
    }
    os << '\n';
  }
}

void GridField::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write(os);
  if (!os) throw Error("write to '" + path + "' failed");
}

namespace {

double parse_double_token(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) throw Error(std::string("field file: missing ") + what);
  double v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw Error(std::string("field file: malformed ") + what + " '" + tok +
                "'");
  return v;
}

bool close_rel(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

GridField GridField::read(std::istream& is,
                          std::shared_ptr<const MeshQ> mesh) {
  long long ns = 0, nt = 0;
  if (!(is >> ns >> nt)) throw Error("field file: malformed header");
  double h = parse_double_token(is, "header h");
  double tau = parse_double_token(is, "header tau");
  const MeshQ& m = *mesh;
  if (ns != m.n_space() || nt != m.nt())
    throw Error("field file does not match the mesh: got " +
                std::to_string(ns) + "x" + std::to_string(nt) + ", expected " +
                std::to_string(m.n_space()) + "x" + std::to_string(m.nt()));
  if (!close_rel(h, m.h(0)) || !close_rel(tau, m.tau()))
    throw Error("field file spacing does not match the mesh");
  GridField g(mesh);
  for (int n = 0; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i)
      g.at(n, i) = parse_double_token(is, "value");
  return g;
}

GridField GridField::load(const std::string& path,
                          std::shared_ptr<const MeshQ> mesh) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open field file '" + path + "'");
  return read(is, std::move(mesh));
}

void require_same_mesh(const GridField& a, const GridField& b,
                       const char* what) {
  if (!a.valid() || !b.valid() || !a.mesh().same_as(b.mesh()))
    throw Error(std::string(what) + ": fields live on different meshes");
}

GridField field_sub(const GridField& a, const GridField& b) {
  require_same_mesh(a, b, "field_sub");
  GridField d(a.mesh_ptr());
  for (std::size_t k = 0; k < d.raw().size(); ++k)
    d.raw()[k] = a.raw()[k] - b.raw()[k];
  return d;
}

}  // namespace paroc
