#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gdeform/field_io.hpp"
#include "gdeform/gaussmap.hpp"

namespace gdeform {

using Params = std::map<std::string, double>;

inline double param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

/// h = (cos u, sin u, cos v, sin v)/sqrt(2).
inline SurfacePatch clifford_torus(const Grid2& g) {
  const double s = 1.0 / std::sqrt(2.0);
  return SurfacePatch::analytic("clifford_torus", g, 4, [s](double u, double v) {
    Jet jt;
    const double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
    jt.h = s * Eigen::Vector4d(cu, su, cv, sv);
    jt.hu = s * Eigen::Vector4d(-su, cu, 0, 0);
    jt.hv = s * Eigen::Vector4d(0, 0, -sv, cv);
    jt.huu = s * Eigen::Vector4d(-cu, -su, 0, 0);
    jt.huv = Eigen::Vector4d::Zero();
    jt.hvv = s * Eigen::Vector4d(0, 0, -cv, -sv);
    return jt;
  });
}

/// Radius profile r(u) = r0 + amp sin(freq u) of the rotational family.
struct RotationalProfile {
  double r0 = 1.0 / std::sqrt(2.0), amp = 0.0, freq = 1.0;

  double r(double u) const { return r0 + amp * std::sin(freq * u); }
  double dr(double u) const { return amp * freq * std::cos(freq * u); }
  double ddr(double u) const { return -amp * freq * freq * std::sin(freq * u); }
  double lambda(double u) const { return std::log(r(u)); }
  double dlambda(double u) const { return dr(u) / r(u); }

  // r^2 (1 - r^2) - r'^2; must stay positive for the isothermic reparametrization
  double discriminant(double u) const {
    const double x = r(u), dx = dr(u);
    return x * x * (1.0 - x * x) - dx * dx;
  }
};

/// Surface of revolution h = (rho cos sigma, rho sin sigma, r cos v, r sin v) with
/// rho = sqrt(1 - r^2) and sigma chosen so that E = G = r^2, hence lambda = ln r.
inline SurfacePatch rotational_isothermic(const Grid2& g, const RotationalProfile& prof) {
  if (!(prof.r0 > 0) || !(prof.freq > 0 || prof.amp == 0))
    throw DomainError("rotational profile needs r0 > 0 and freq > 0");
  // sigma is integrated from u = 0, so the profile must be admissible from there across the chart
  const double lo = std::min(g.u0, 0.0), hi = std::max(g.u1, 0.0);
  const int probes = 16 * g.nu;
  for (int k = 0; k <= probes; ++k) {
    const double u = lo + (hi - lo) * k / probes;
    const double r = prof.r(u);
    if (!(r > 0 && r < 1) || !(prof.discriminant(u) > 0))
      throw DomainError("profile violates the isothermic reparametrization (non-monotone arclength) at u=" +
                        std::to_string(u));
  }
  auto dsigma = [prof](double u) {
    const double r = prof.r(u);
    return std::sqrt(prof.discriminant(u)) / (1.0 - r * r);
  };
  return SurfacePatch::analytic("rotational_isothermic", g, 4, [prof, dsigma](double u, double v) {
    using boost::math::quadrature::gauss_kronrod;
    const double sigma = u == 0.0 ? 0.0 : gauss_kronrod<double, 31>::integrate(dsigma, 0.0, u, 8, 1e-14);
    const double r = prof.r(u), r1 = prof.dr(u), r2 = prof.ddr(u);
    const double rho = std::sqrt(1.0 - r * r);
    const double rho1 = -r * r1 / rho;
    const double rho2 = -(r1 * r1 + r * r2) / rho - r * r * r1 * r1 / (rho * rho * rho);
    const double N = prof.discriminant(u);
    const double N1 = 2 * r * r1 - 4 * r * r * r * r1 - 2 * r1 * r2;
    const double w = 1.0 - r * r;
    const double s1 = std::sqrt(N) / w;
    const double s2 = (N1 / (2 * std::sqrt(N)) * w + std::sqrt(N) * 2 * r * r1) / (w * w);
    const double cs = std::cos(sigma), ss = std::sin(sigma), cv = std::cos(v), sv = std::sin(v);
    Jet jt;
    jt.h = Eigen::Vector4d(rho * cs, rho * ss, r * cv, r * sv);
    jt.hu = Eigen::Vector4d(rho1 * cs - rho * s1 * ss, rho1 * ss + rho * s1 * cs, r1 * cv, r1 * sv);
    jt.hv = Eigen::Vector4d(0, 0, -r * sv, r * cv);
    jt.huu = Eigen::Vector4d(rho2 * cs - 2 * rho1 * s1 * ss - rho * s2 * ss - rho * s1 * s1 * cs,
                             rho2 * ss + 2 * rho1 * s1 * cs + rho * s2 * cs - rho * s1 * s1 * ss, r2 * cv, r2 * sv);
    jt.huv = Eigen::Vector4d(0, 0, -r1 * sv, r1 * cv);
    jt.hvv = Eigen::Vector4d(0, 0, -r * cv, -r * sv);
    return jt;
  });
}

/// Reads a point grid with columns u,v,x1..x_{n+1}. An optional t column must be constant.
inline SurfacePatch sampled_patch(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int uc = t.column("u"), vc = t.column("v"), tc = t.column("t");
  if (uc < 0 || vc < 0) throw IoError(path.string() + ": header needs u and v columns");
  if (tc >= 0)
    for (const auto& row : t.rows)
      if (row[tc] != t.rows.front()[tc]) throw IoError(path.string() + ": t column must be constant");
  std::vector<std::size_t> node;
  const Grid2 g = grid_from_table(t, uc, vc, node);
  std::vector<ScalarField> coords;
  for (int k = 1;; ++k) {
    const int c = t.column("x" + std::to_string(k));
    if (c < 0) break;
    ScalarField f(g);
    for (std::size_t r = 0; r < t.rows.size(); ++r) f.data()[node[r]] = t.rows[r][c];
    coords.push_back(std::move(f));
  }
  if (coords.size() < 4) throw IoError(path.string() + ": need columns x1..x4 at least");
  return SurfacePatch::sampled("sampled", coords);
}

inline RotationalProfile rotational_profile(const Params& p) {
  RotationalProfile prof;
  prof.r0 = param(p, "r0", prof.r0);
  prof.amp = param(p, "amp", prof.amp);
  prof.freq = param(p, "freq", prof.freq);
  return prof;
}

/// Catalog lookup by family name.
inline SurfacePatch catalog(const std::string& name, const Grid2& g, const Params& p = {},
                            const std::filesystem::path& csv = {}) {
  if (name == "clifford_torus") return clifford_torus(g);
  if (name == "rotational_isothermic") return rotational_isothermic(g, rotational_profile(p));
  if (name == "sampled") return sampled_patch(csv);
  throw ConfigError("unknown catalog surface '" + name + "'");
}

}  // namespace gdeform
