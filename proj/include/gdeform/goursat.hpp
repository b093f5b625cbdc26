#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "gdeform/grid.hpp"

namespace gdeform {

/// Coefficients of the operator  theta_uv - Gu theta_u - Gv theta_v + F theta.
struct GoursatCoefficients {
  ScalarField gamma_u;
  ScalarField gamma_v;
  ScalarField f;
};

/// Solves  theta_uv = Gu theta_u + Gv theta_v - F theta  with theta(u, v0) = a(u) and
/// theta(u0, v) = b(v) by marching cell by cell in causal order.
///
/// Each cell applies the integral form of the equation over [u_i,u_i+1] x [v_j,v_j+1]
/// with the right-hand side evaluated at the cell center by averaging the four corners.
/// The unknown corner enters that average, so the update is a fixed point; it is started
/// from the wave-equation predictor and corrected twice, which keeps the scheme O(h^2).
inline ScalarField solve_goursat(const GoursatCoefficients& c, std::span<const double> a,
                                 std::span<const double> b) {
  const Grid2& g = c.gamma_u.grid();
  if (!(c.gamma_v.grid() == g) || !(c.f.grid() == g)) throw DomainError("Goursat coefficients on different grids");
  if (static_cast<int>(a.size()) != g.nu || static_cast<int>(b.size()) != g.nv)
    throw DomainError("Goursat data must have nu values on v=v0 and nv values on u=u0");
  require_finite(c.gamma_u, "Goursat coefficient Gamma^u");
  require_finite(c.gamma_v, "Goursat coefficient Gamma^v");
  require_finite(c.f, "Goursat coefficient F");
  const double corner_scale = std::max({1.0, std::abs(a[0]), std::abs(b[0])});
  if (std::abs(a[0] - b[0]) > 1e-10 * corner_scale)
    throw DomainError("Goursat corner data incompatible: a(u0)=" + std::to_string(a[0]) +
                      " but b(v0)=" + std::to_string(b[0]));

  const double hu = g.hu(), hv = g.hv();
  ScalarField th(g);
  for (int i = 0; i < g.nu; ++i) th(i, 0) = a[i];
  for (int j = 0; j < g.nv; ++j) th(0, j) = b[j];

  for (int j = 0; j + 1 < g.nv; ++j) {
    for (int i = 0; i + 1 < g.nu; ++i) {
      auto avg = [&](const ScalarField& f) {
        return 0.25 * (f(i, j) + f(i + 1, j) + f(i, j + 1) + f(i + 1, j + 1));
      };
      const double gu = avg(c.gamma_u), gv = avg(c.gamma_v), ff = avg(c.f);
      const double tc = th(i, j), te = th(i + 1, j), tn = th(i, j + 1);
      double tne = te + tn - tc;
      for (int pass = 0; pass < 2; ++pass) {
        const double tu = ((te - tc) + (tne - tn)) / (2.0 * hu);
        const double tv = ((tn - tc) + (tne - te)) / (2.0 * hv);
        const double tm = 0.25 * (tc + te + tn + tne);
        tne = te + tn - tc + hu * hv * (gu * tu + gv * tv - ff * tm);
      }
      if (!std::isfinite(tne)) throw DomainError("Goursat marching produced a non-finite value", Node{i + 1, j + 1, 0});
      th(i + 1, j + 1) = tne;
    }
  }
  return th;
}

}  // namespace gdeform
