#include "paroc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <utility>

#include "nlohmann/json.hpp"
#include "paroc/errors.hpp"
#include "paroc/norms.hpp"
#include "paroc/operators.hpp"
#include "paroc/oracle.hpp"
#include "paroc/pde.hpp"
#include "paroc/rng.hpp"

namespace paroc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double sup_norm_levels(const GridField& f) {
  const MeshQ& m = f.mesh();
  double s = 0;
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i)
      s = std::max(s, std::abs(f.at(n, i)));
  return s;
}

double loglog_slope(const std::vector<double>& xs,
                    const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < n; ++k) {
    const double lx = std::log(xs[k]), ly = std::log(ys[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

nlohmann::ordered_json json_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void SweepPlan::validate() const {
  if (directions.size() < 2)
    throw ConfigError("SweepPlan: need at least two directions");
  if (radii.size() < 3) throw ConfigError("SweepPlan: need at least three radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0)) throw ConfigError("SweepPlan: radii must be positive");
    if (k > 0 && !(radii[k] < radii[k - 1]))
      throw ConfigError("SweepPlan: radii must be strictly decreasing");
  }
  std::set<std::string> names;
  for (const SweepDirection& d : directions) {
    if (d.name.empty()) throw ConfigError("SweepPlan: unnamed direction");
    if (!names.insert(d.name).second)
      throw ConfigError("SweepPlan: duplicate direction name '" + d.name + "'");
    if (!d.field.valid())
      throw ConfigError("SweepPlan: direction '" + d.name + "' has no field");
    const double s = sup_norm_levels(d.field);
    if (std::abs(s - 1.0) > 1e-12)
      throw ConfigError("SweepPlan: direction '" + d.name +
                        "' must have unit sup norm, got " + format_double(s));
  }
}

SweepPlan default_sweep_plan(std::shared_ptr<const MeshQ> mesh,
                             std::uint64_t seed) {
  if (!mesh) throw ConfigError("default_sweep_plan: mesh is required");
  const MeshQ& m = *mesh;
  SweepPlan plan;

  plan.directions.push_back({"const", GridField(mesh, 1.0)});

  GridField mode(mesh);
  double peak = 0;
  constexpr double kPi = 3.14159265358979323846;
  for (int n = 0; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      double v = std::sin(kPi * m.x_of(i)) *
                 std::sin(kPi * m.time(n) / m.horizon());
      if (m.dim() == 2) v *= std::sin(kPi * m.x2_of(i));
      mode.at(n, i) = v;
      if (n >= 1) peak = std::max(peak, std::abs(v));
    }
  for (double& v : mode.raw()) v /= peak;
  plan.directions.push_back({"mode11", std::move(mode)});

  GridField rad(mesh);
  Rng rng(seed);
  for (double& v : rad.raw()) v = rng.sign();
  plan.directions.push_back({"rademacher", std::move(rad)});

  plan.radii = {0.1, 0.05, 0.025, 0.0125, 0.00625};
  plan.validate();
  return plan;
}

std::string SweepRecord::status_text() const {
  return threw ? "exception" : to_string(status);
}

double lagrangian_gap_check(const ProblemSpec& spec, const KktPoint& base,
                            const GridField& e_other, const GridField& w) {
  require_same_mesh(base.y, e_other, "lagrangian_gap_check");
  require_same_mesh(base.y, w, "lagrangian_gap_check");
  const MeshQ& m = base.y.mesh();
  double acc = 0;
  for (int n = 1; n <= m.nt(); ++n)
    for (int i = 0; i < m.n_space(); ++i) {
      EvalPoint p = m.point(i, n);
      p.y = base.y.at(n, i);
      p.u = base.u.at(n, i);
      p.w = w.at(n, i);
      acc += e_other.at(n, i) * spec.g.value(p);
    }
  return -m.cell_weight() * acc;
}

SweepResult perturbation_sweep(const ProblemSpec& spec, const GridField& w,
                               const SweepPlan& plan, const NcpConfig& cfg,
                               int threads) {
  plan.validate();
  for (const SweepDirection& d : plan.directions)
    require_same_mesh(d.field, w, "perturbation_sweep");

  SweepResult out;
  for (const SweepDirection& d : plan.directions)
    out.direction_names.push_back(d.name);
  out.radii = plan.radii;

  OcpReport base_rep;
  out.base = solve_ocp(spec, w, cfg, &base_rep);
  if (base_rep.status != OcpStatus::converged)
    throw SolverError(std::string("perturbation_sweep: base solve ") +
                      to_string(base_rep.status));
  out.base_j = base_rep.j_trace.back();
  out.gamma0 = base_rep.gamma0_final;
  out.base_coercivity = coercivity(spec, out.base, w);
  out.hypotheses_met = out.gamma0 > 0 &&
                       out.base_coercivity.verdict == CoercivityVerdict::holds;

  DiscreteOperator A = assemble_operator(w.mesh_ptr(), spec.coeffs);

  auto run_one = [&](std::size_t di, std::size_t ri) {
    const SweepDirection& d = plan.directions[di];
    const double radius = plan.radii[ri];
    SweepRecord rec;
    rec.direction = d.name;
    rec.radius = radius;
    try {
      GridField wp = w;
      for (std::size_t k = 0; k < wp.raw().size(); ++k)
        wp.raw()[k] += radius * d.field.raw()[k];
      OcpReport rep;
      KktPoint pt = solve_ocp(spec, wp, cfg, &rep, &out.base);
      rec.status = rep.status;
      rec.iters = rep.iters;
      rec.message = rep.message;
      if (rep.status == OcpStatus::converged) {
        rec.du_l2 = l2q_norm(field_sub(pt.u, out.base.u));
        rec.dy_w112 = field_norm(field_sub(pt.y, out.base.y), NormKind::W112, &A);
        rec.dphi_l2 = l2q_norm(field_sub(pt.phi, out.base.phi));
        rec.de_l2 = l2q_norm(field_sub(pt.e, out.base.e));
        rec.ratio_u = rec.du_l2 / radius;
        rec.ratio_y = rec.dy_w112 / radius;
        rec.ratio_phi = rec.dphi_l2 / radius;
        rec.ratio_e = rec.de_l2 / radius;
        rec.lagrangian_gap = lagrangian_gap_check(spec, out.base, pt.e, w);
        rec.valid = std::isfinite(rec.du_l2 + rec.dy_w112 + rec.dphi_l2 +
                                  rec.de_l2 + rec.lagrangian_gap);
      }
    } catch (const Error& e) {
      rec.threw = true;
      rec.valid = false;
      rec.message = e.what();
    }
    return rec;
  };

  const std::size_t total = plan.directions.size() * plan.radii.size();
  out.records.resize(total);
  auto flat = [&](std::size_t di, std::size_t ri) {
    return di * plan.radii.size() + ri;
  };

  if (threads > 1) {
    std::vector<std::future<SweepRecord>> futs(total);
    std::size_t next = 0;
    while (next < total) {
      const std::size_t stop =
          std::min(total, next + static_cast<std::size_t>(threads));
      for (std::size_t k = next; k < stop; ++k) {
        const std::size_t di = k / plan.radii.size();
        const std::size_t ri = k % plan.radii.size();
        futs[k] = std::async(std::launch::async, run_one, di, ri);
      }
      for (std::size_t k = next; k < stop; ++k) out.records[k] = futs[k].get();
      next = stop;
    }
  } else {
    for (std::size_t di = 0; di < plan.directions.size(); ++di)
      for (std::size_t ri = 0; ri < plan.radii.size(); ++ri)
        out.records[flat(di, ri)] = run_one(di, ri);
  }

  out.k_hat = 0;
  out.k_hat_adjoint = 0;
  for (const SweepRecord& r : out.records) {
    if (!r.valid) continue;
    out.k_hat = std::max(out.k_hat, (r.dy_w112 + r.du_l2) / r.radius);
    out.k_hat_adjoint =
        std::max(out.k_hat_adjoint, (r.dphi_l2 + r.de_l2) / r.radius);
  }

  for (std::size_t di = 0; di < plan.directions.size(); ++di) {
    DirectionSlopes sl;
    sl.direction = plan.directions[di].name;
    sl.u = sl.y = sl.phi = sl.e = kNan;
    std::vector<double> rs, du, dy, dphi, de;
    for (std::size_t ri = 0; ri < plan.radii.size(); ++ri) {
      const SweepRecord& r = out.records[flat(di, ri)];
      if (!r.valid) continue;
      rs.push_back(r.radius);
      du.push_back(r.du_l2);
      dy.push_back(r.dy_w112);
      dphi.push_back(r.dphi_l2);
      de.push_back(r.de_l2);
    }
    sl.points = static_cast<int>(rs.size());
    auto fit = [&](const std::vector<double>& ys) {
      if (ys.size() < 2) return kNan;
      for (double v : ys)
        if (!(v > 0)) return kNan;
      return loglog_slope(rs, ys);
    };
    sl.u = fit(du);
    sl.y = fit(dy);
    sl.phi = fit(dphi);
    sl.e = fit(de);
    out.slopes.push_back(std::move(sl));
  }

  for (std::size_t ri = 0; ri < plan.radii.size(); ++ri) {
    RadiusAggregate agg;
    agg.radius = plan.radii[ri];
    for (std::size_t di = 0; di < plan.directions.size(); ++di) {
      const SweepRecord& r = out.records[flat(di, ri)];
      if (!r.valid) continue;
      ++agg.valid_records;
      agg.k_hat = std::max(agg.k_hat, (r.dy_w112 + r.du_l2) / r.radius);
      agg.k_hat_adjoint =
          std::max(agg.k_hat_adjoint, (r.dphi_l2 + r.de_l2) / r.radius);
    }
    out.per_radius.push_back(agg);
  }
  return out;
}

std::string SweepResult::to_json() const {
  nlohmann::ordered_json j;
  j["directions"] = direction_names;
  j["radii"] = radii;
  j["base"] = {
      {"j", base_j},
      {"gamma0", gamma0},
      {"residuals",
       {{"state", base.res.state},
        {"adjoint", base.res.adjoint},
        {"stat", base.res.stat},
        {"comp", base.res.comp}}},
      {"coercivity",
       {{"alpha", base_coercivity.alpha},
        {"rho", base_coercivity.rho},
        {"alpha_tol", base_coercivity.alpha_tol},
        {"method", to_string(base_coercivity.method)},
        {"verdict", to_string(base_coercivity.verdict)}}},
  };
  j["hypotheses_met"] = hypotheses_met;
  j["k_hat"] = k_hat;
  j["k_hat_adjoint"] = k_hat_adjoint;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const SweepRecord& r : records)
    recs.push_back({{"direction", r.direction},
                    {"radius", r.radius},
                    {"du_l2", r.du_l2},
                    {"dy_w112", r.dy_w112},
                    {"dphi_l2", r.dphi_l2},
                    {"de_l2", r.de_l2},
                    {"ratio_u", r.ratio_u},
                    {"ratio_y", r.ratio_y},
                    {"ratio_phi", r.ratio_phi},
                    {"ratio_e", r.ratio_e},
                    {"lagrangian_gap", r.lagrangian_gap},
                    {"iters", r.iters},
                    {"status", r.status_text()},
                    {"valid", r.valid},
                    {"message", r.message}});
  j["records"] = recs;
  nlohmann::ordered_json sls = nlohmann::ordered_json::array();
  for (const DirectionSlopes& s : slopes)
    sls.push_back({{"direction", s.direction},
                   {"du", json_or_null(s.u)},
                   {"dy", json_or_null(s.y)},
                   {"dphi", json_or_null(s.phi)},
                   {"de", json_or_null(s.e)},
                   {"points", s.points}});
  j["slopes"] = sls;
  nlohmann::ordered_json pr = nlohmann::ordered_json::array();
  for (const RadiusAggregate& a : per_radius)
    pr.push_back({{"radius", a.radius},
                  {"k_hat", a.k_hat},
                  {"k_hat_adjoint", a.k_hat_adjoint},
                  {"valid_records", a.valid_records}});
  j["per_radius"] = pr;
  return j.dump(2);
}

std::string SweepResult::to_csv() const {
  std::string s =
      "direction,radius,du_l2,dy_w112,dphi_l2,de_l2,ratio_u,ratio_y,"
      "ratio_phi,ratio_e,iters,status\n";
  for (const SweepRecord& r : records) {
    s += r.direction;
    s += ',';
    s += format_double(r.radius);
    s += ',';
    s += format_double(r.du_l2);
    s += ',';
    s += format_double(r.dy_w112);
    s += ',';
    s += format_double(r.dphi_l2);
    s += ',';
    s += format_double(r.de_l2);
    s += ',';
    s += format_double(r.ratio_u);
    s += ',';
    s += format_double(r.ratio_y);
    s += ',';
    s += format_double(r.ratio_phi);
    s += ',';
    s += format_double(r.ratio_e);
    s += ',';
    s += std::to_string(r.iters);
    s += ',';
    s += r.status_text();
    s += '\n';
  }
  return s;
}

std::string sweep_slopes_csv(const SweepResult& result) {
  std::string s = "direction,quantity,slope,points\n";
  for (const DirectionSlopes& d : result.slopes) {
    auto row = [&](const char* q, double v) {
      s += d.direction;
      s += ',';
      s += q;
      s += ',';
      s += std::isfinite(v) ? format_double(v) : "nan";
      s += ',';
      s += std::to_string(d.points);
      s += '\n';
    };
    row("du_l2", d.u);
    row("dy_w112", d.y);
    row("dphi_l2", d.phi);
    row("de_l2", d.e);
  }
  return s;
}

void write_sweep_outputs(const SweepResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream os(base / "sweep.json", std::ios::binary);
    os << result.to_json() << '\n';
  }
  {
    std::ofstream os(base / "sweep.csv", std::ios::binary);
    os << result.to_csv();
  }
  {
    std::ofstream os(base / "slopes.csv", std::ios::binary);
    os << sweep_slopes_csv(result);
  }
}

GrowthCheckResult growth_check(const ProblemSpec& spec, const KktPoint& base,
                               const GridField& w, double radius, int samples,
                               std::uint64_t seed) {
  require_same_mesh(base.y, w, "growth_check");
  if (!(radius > 0)) throw ConfigError("growth_check: radius must be positive");
  if (samples < 1) throw ConfigError("growth_check: samples must be >= 1");

  const MeshQ& m = base.y.mesh();
  const double base_j = objective(spec, base.y, base.u, w);

  GrowthCheckResult out;
  out.samples = samples;
  out.radius = radius;
  out.kappa_hat = std::numeric_limits<double>::infinity();
  out.min_numerator = std::numeric_limits<double>::infinity();

  Rng rng(seed);
  int usable = 0;
  for (int s = 0; s < samples; ++s) {
    GridField up(base.u.mesh_ptr());
    for (int n = 1; n <= m.nt(); ++n)
      for (int i = 0; i < m.n_space(); ++i) {
        EvalPoint p = m.point(i, n);
        p.y = base.y.at(n, i);
        p.w = w.at(n, i);
        const double cand =
            base.u.at(n, i) + rng.uniform(-radius, radius);
        const double anchor = find_feasible_anchor(spec.g, p, base.u.at(n, i));
        up.at(n, i) = project_control_feasible(spec.g, p, cand, anchor);
      }
    GridField dist = field_sub(up, base.u);
    const double denom2 = l2q_norm(dist) * l2q_norm(dist);
    GridField yp = solve_state(spec, up, w);
    const double numer = objective(spec, yp, up, w) - base_j;
    out.min_numerator = std::min(out.min_numerator, numer);
    if (numer < -1e-10) ++out.violations;
    if (denom2 > 0) {
      ++usable;
      out.kappa_hat = std::min(out.kappa_hat, numer / denom2);
    }
  }
  if (usable == 0)
    throw Error("growth_check: every sample collapsed onto the base control");
  return out;
}

MultiplierStability multiplier_stability_check(const SweepResult& result) {
  MultiplierStability out;
  for (const SweepRecord& r : result.records) {
    if (!r.valid) continue;
    if (r.du_l2 == 0 && r.dy_w112 == 0 && r.dphi_l2 == 0 && r.de_l2 == 0)
      continue;
    ++out.used_records;
    out.m1 = std::max(out.m1, r.de_l2 / (r.du_l2 + r.radius));
    out.m2 = std::max(out.m2, r.dphi_l2 / (r.du_l2 + r.radius));
  }
  if (out.used_records < 3)
    throw Error(
        "multiplier_stability_check: insufficient records with movement (" +
        std::to_string(out.used_records) + " < 3)");
  return out;
}

}  // namespace paroc
