#include "paroc/sosc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>

#include "nlohmann/json.hpp"
#include "paroc/errors.hpp"
#include "paroc/norms.hpp"
#include "paroc/rng.hpp"

namespace paroc {

namespace {

GridField hadamard(const GridField& a, const GridField& b) {
  GridField out(a.mesh_ptr());
  for (std::size_t k = 0; k < out.raw().size(); ++k)
    out.raw()[k] = a.raw()[k] * b.raw()[k];
  return out;
}

void add_into(GridField& acc, const GridField& inc) {
  for (std::size_t k = 0; k < acc.raw().size(); ++k)
    acc.raw()[k] += inc.raw()[k];
}

struct LanczosOutcome {
  double theta_min = 0;
  double theta_max = 0;
  Eigen::VectorXd witness;
  int iters = 0;
};

// Symmetric Lanczos with full reorthogonalization (two passes against the
// whole basis each step). The operator is symmetric in the plain Euclidean
// product because the lattice quadrature weight is uniform.
LanczosOutcome lanczos_extreme(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& mul,
    int n, std::uint64_t seed) {
  const int kmax = std::min(n, 400);
  Eigen::MatrixXd V(n, kmax);
  std::vector<double> diag, off;
  Rng rng(seed);
  Eigen::VectorXd v(n), w(n), prev = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  v.normalize();
  double beta_prev = 0;

  LanczosOutcome out;
  for (int k = 0; k < kmax; ++k) {
    V.col(k) = v;
    mul(v, w);
    const double a = v.dot(w);
    diag.push_back(a);
    w -= a * v;
    if (k > 0) w -= beta_prev * prev;
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j <= k; ++j) w -= V.col(j).dot(w) * V.col(j);
    const double b = w.norm();

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int j = 0; j <= k; ++j) T(j, j) = diag[j];
    for (int j = 0; j + 1 <= k; ++j) T(j, j + 1) = T(j + 1, j) = off[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    out.theta_min = es.eigenvalues()[0];
    out.theta_max = es.eigenvalues()[k];
    out.witness = V.leftCols(k + 1) * es.eigenvectors().col(0);
    out.iters = k + 1;

    const double resid = std::abs(b * es.eigenvectors()(k, 0));
    const double scale = std::max(1.0, std::abs(out.theta_min));
    if (resid <= 1e-10 * scale || b <= 1e-14 * scale) break;

    off.push_back(b);
    prev = v;
    v = w / b;
    beta_prev = b;
  }
  return out;
}

}  // namespace

QuadraticForm::QuadraticForm(const ProblemSpec& spec, const KktPoint& pt,
                             const GridField& w)
    : map_(spec, pt.y, w),
      p_(pt.y.mesh_ptr()),
      r_(pt.y.mesh_ptr()),
      muu_(pt.y.mesh_ptr()) {
  require_same_mesh(pt.y, pt.u, "QuadraticForm");
  require_same_mesh(pt.y, pt.phi, "QuadraticForm");
  require_same_mesh(pt.y, pt.e, "QuadraticForm");
  require_same_mesh(pt.y, w, "QuadraticForm");
  const MeshQ& m = pt.y.mesh();
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = pt.y.at(n, i);
      p.u = pt.u.at(n, i);
      p.w = w.at(n, i);
      const Value2 fv = spec.f.eval(p);
      const Value2 lv = spec.L.eval(p);
      const Value2 gv = spec.g.eval(p);
      const double e = pt.e.at(n, i);
      p_.at(n, i) = lv.dyy + e * gv.dyy + pt.phi.at(n, i) * fv.dyy;
      r_.at(n, i) = lv.dyu + e * gv.dyu;
      muu_.at(n, i) = lv.duu + e * gv.duu;
    }
}

const std::shared_ptr<const MeshQ>& QuadraticForm::mesh_ptr() const {
  return map_.mesh_ptr();
}

GridField QuadraticForm::apply(const GridField& v) const {
  require_same_mesh(v, p_, "QuadraticForm::apply");
  GridField z = map_.forward(v);
  GridField out = map_.transpose(hadamard(p_, z));
  add_into(out, map_.transpose(hadamard(r_, v)));
  add_into(out, hadamard(r_, z));
  add_into(out, hadamard(muu_, v));
  return out;
}

double QuadraticForm::operator()(const GridField& v) const {
  return l2q_inner(v, apply(v));
}

const char* to_string(CoercivityMethod m) {
  return m == CoercivityMethod::dense ? "dense" : "lanczos";
}

const char* to_string(CoercivityVerdict v) {
  switch (v) {
    case CoercivityVerdict::holds:
      return "holds";
    case CoercivityVerdict::fails:
      return "fails";
    case CoercivityVerdict::indeterminate:
      return "indeterminate";
  }
  return "unknown";
}

std::string CoercivityReport::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["rho"] = rho;
  j["alpha_tol"] = alpha_tol;
  j["method"] = to_string(method);
  j["verdict"] = to_string(verdict);
  j["iterations"] = iterations;
  return j.dump(2);
}

CoercivityReport coercivity(const ProblemSpec& spec, const KktPoint& pt,
                            const GridField& w, int dense_cutoff) {
  QuadraticForm form(spec, pt, w);
  const MeshQ& m = *form.mesh_ptr();
  const int ns = m.n_space();
  const int nt = m.nt();
  const int n = ns * nt;

  CoercivityReport rep;
  rep.rho = form.control_weight().at(1, 0);
  for (int lev = 1; lev <= nt; ++lev)
    for (int i = 0; i < ns; ++i)
      rep.rho = std::min(rep.rho, form.control_weight().at(lev, i));

  auto to_field = [&](const Eigen::VectorXd& x) {
    GridField f(form.mesh_ptr());
    for (int lev = 1; lev <= nt; ++lev)
      for (int i = 0; i < ns; ++i) f.at(lev, i) = x[(lev - 1) * ns + i];
    return f;
  };
  auto mul = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    GridField hv = form.apply(to_field(x));
    for (int lev = 1; lev <= nt; ++lev)
      for (int i = 0; i < ns; ++i) y[(lev - 1) * ns + i] = hv.at(lev, i);
  };

  double scale = 1.0;
  Eigen::VectorXd witness;
  if (n <= dense_cutoff) {
    rep.method = CoercivityMethod::dense;
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd col(n), unit = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      unit[j] = 1.0;
      mul(unit, col);
      H.col(j) = col;
      unit[j] = 0.0;
    }
    Eigen::MatrixXd Hs = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
    rep.alpha = es.eigenvalues()[0];
    scale = std::max(std::abs(es.eigenvalues()[0]),
                     std::abs(es.eigenvalues()[n - 1]));
    witness = es.eigenvectors().col(0);
    rep.iterations = 1;
  } else {
    rep.method = CoercivityMethod::lanczos;
    LanczosOutcome lz = lanczos_extreme(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { mul(x, y); }, n,
        20240901u);
    rep.alpha = lz.theta_min;
    scale = std::max(std::abs(lz.theta_min), std::abs(lz.theta_max));
    witness = lz.witness;
    rep.iterations = lz.iters;
  }

  rep.alpha_tol = 1e-8 * std::max(1.0, scale);
  if (rep.alpha >= rep.alpha_tol)
    rep.verdict = CoercivityVerdict::holds;
  else if (rep.alpha <= -rep.alpha_tol)
    rep.verdict = CoercivityVerdict::fails;
  else
    rep.verdict = CoercivityVerdict::indeterminate;

  rep.witness_v = to_field(witness);
  const double nrm = field_norm(rep.witness_v, NormKind::L2Q);
  if (nrm > 0)
    for (double& v : rep.witness_v.raw()) v /= nrm;
  return rep;
}

CoercivityReport coercivity_under_multiplier_perturbation(
    const ProblemSpec& spec, const KktPoint& pt, const GridField& w,
    const GridField& delta_e, int dense_cutoff) {
  require_same_mesh(pt.e, delta_e, "coercivity_under_multiplier_perturbation");
  KktPoint shifted = pt;
  for (std::size_t k = 0; k < shifted.e.raw().size(); ++k)
    shifted.e.raw()[k] += delta_e.raw()[k];
  return coercivity(spec, shifted, w, dense_cutoff);
}

}  // namespace paroc
