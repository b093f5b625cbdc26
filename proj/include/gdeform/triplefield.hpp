#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gdeform/calculus.hpp"
#include "gdeform/defdata.hpp"
#include "gdeform/gaussmap.hpp"
#include "gdeform/report.hpp"

namespace gdeform {

/// Tensor pair (D1, D2) and one-form phi on the chart, in the coordinate frame.
/// Elliptic triples are stored realified: D = [[Re t, -Im t], [Im t, Re t]]/sqrt(2),
/// the complex diagonal quantities are kept alongside.
struct TripleField {
  DatumKind kind = DatumKind::hyperbolic;
  Grid2 grid;
  Matrix2Field D1, D2;
  ScalarField phi_u, phi_v;
  Eigen::Matrix2d Jbar = Eigen::Matrix2d::Identity();

  // hyperbolic diagnostics
  ScalarField alpha, beta, tau1, tau2, theta1, theta2;
  // elliptic diagnostics
  ComplexField alpha_c, tau1_c, tau2_c, theta1_c, theta2_c, phi_zbar;

  // defect of the i = 2 relations for (phi_u, phi_v)
  ScalarField consistency;

  /// Same triple with the labels exchanged; phi changes sign.
  TripleField swapped() const {
    TripleField t = *this;
    std::swap(t.D1, t.D2);
    t.phi_u = phi_u.map([](double x) { return -x; });
    t.phi_v = phi_v.map([](double x) { return -x; });
    return t;
  }

  /// D1 -> -D1 together with phi -> -phi.
  TripleField flipped() const {
    TripleField t = *this;
    t.D1 = D1.map([](const Eigen::Matrix2d& m) { return Eigen::Matrix2d(-m); });
    t.phi_u = phi_u.map([](double x) { return -x; });
    t.phi_v = phi_v.map([](double x) { return -x; });
    return t;
  }
};

inline double default_triple_tol(const Grid2& g, double scale = 1.0) {
  return 100.0 * (g.hu() * g.hu() + g.hv() * g.hv()) * scale;
}

/// Hyperbolic triple from phi, psi: alpha = 2 + 1/phi, beta = 2 + 1/psi, tau the roots
/// of tau^2 - alpha tau + alpha/beta with tau1 the smaller one.
inline TripleField triple_from_fields(const ChartGeometry& geo, const ScalarField& phi, const ScalarField& psi) {
  const Grid2& g = geo.grid;
  TripleField t;
  t.kind = DatumKind::hyperbolic;
  t.grid = g;
  t.Jbar << 1, 0, 0, -1;
  t.alpha = ScalarField(g);
  t.beta = ScalarField(g);
  t.tau1 = ScalarField(g);
  t.tau2 = ScalarField(g);
  t.theta1 = ScalarField(g);
  t.theta2 = ScalarField(g);
  t.D1 = Matrix2Field(g);
  t.D2 = Matrix2Field(g);
  const double s = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const Node node{i, j, 0};
      const double a = 2.0 + 1.0 / phi(i, j), b = 2.0 + 1.0 / psi(i, j);
      if (!(a > 0) || !(b > 0) || !(a * b - 4 > 0))
        throw DomainError("triple needs alpha > 0, beta > 0 and alpha beta - 4 > 0 (alpha=" + format_double(a) +
                              ", beta=" + format_double(b) + ")",
                          node);
      const double disc = (a / b) * (a * b - 4);
      if (!(disc > 1e-24 * a * a)) throw DomainError("coalescent roots tau1 = tau2", node);
      const double r = std::sqrt(disc);
      const double t1 = 0.5 * (a - r), t2 = 0.5 * (a + r);
      if (!(t1 > 0)) throw DomainError("tau1 is not positive", node);
      t.alpha(i, j) = a;
      t.beta(i, j) = b;
      t.tau1(i, j) = t1;
      t.tau2(i, j) = t2;
      t.theta1(i, j) = std::sqrt(t1);
      t.theta2(i, j) = std::sqrt(t2);
      t.D1(i, j) << s * t.theta1(i, j), 0, 0, s / t.theta1(i, j);
      t.D2(i, j) << s * t.theta2(i, j), 0, 0, s / t.theta2(i, j);
    }
  const auto inv1 = t.tau1.map([](double x) { return 1.0 / x; });
  const auto inv2 = t.tau2.map([](double x) { return 1.0 / x; });
  const auto inv1_u = diff_u(inv1), inv2_u = diff_u(inv2), t1_v = diff_v(t.tau1), t2_v = diff_v(t.tau2);
  t.phi_u = ScalarField(g);
  t.phi_v = ScalarField(g);
  t.consistency = ScalarField(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double th = t.theta1.data()[n] * t.theta2.data()[n];
    const double Gu = geo.gamma_u.data()[n], Gv = geo.gamma_v.data()[n];
    const double pu = 0.5 * th * (inv1_u.data()[n] + 2 * (inv1.data()[n] - 1) * Gv);
    const double pv = (t1_v.data()[n] + 2 * (t.tau1.data()[n] - 1) * Gu) / (2 * th);
    t.phi_u.data()[n] = pu;
    t.phi_v.data()[n] = pv;
    const double ru = inv2_u.data()[n] + 2 * (inv2.data()[n] - 1) * Gv + 2 * pu / th;
    const double rv = t2_v.data()[n] + 2 * (t.tau2.data()[n] - 1) * Gu + 2 * pv * th;
    t.consistency.data()[n] = std::max(std::abs(ru), std::abs(rv));
  }
  return t;
}

inline TripleField triple_from_pair(const ChartGeometry& geo, const DeformationDatum& d) {
  if (d.kind != DatumKind::hyperbolic) throw DomainError("triple_from_pair needs a hyperbolic datum");
  return triple_from_fields(geo, d.phi, d.psi);
}

/// Elliptic triple from the transported phi: alpha = 2 + 1/phi with 0 < |alpha| < 2,
/// tau = (alpha/2)(1 -/+ i sqrt(4 - |alpha|^2)/|alpha|), |tau| = 1.
inline TripleField triple_from_zeta(const ChartGeometry& geo, const DeformationDatum& d) {
  if (d.kind != DatumKind::elliptic) throw DomainError("triple_from_zeta needs an elliptic datum");
  const Grid2& g = geo.grid;
  const Complex I(0, 1);
  TripleField t;
  t.kind = DatumKind::elliptic;
  t.grid = g;
  t.Jbar << 0, -1, 1, 0;
  t.alpha_c = ComplexField(g);
  t.tau1_c = ComplexField(g);
  t.tau2_c = ComplexField(g);
  t.theta1_c = ComplexField(g);
  t.theta2_c = ComplexField(g);
  t.D1 = Matrix2Field(g);
  t.D2 = Matrix2Field(g);
  const double s = 1.0 / std::sqrt(2.0);
  auto realify = [s](Complex th) {
    Eigen::Matrix2d m;
    m << th.real(), -th.imag(), th.imag(), th.real();
    return Eigen::Matrix2d(s * m);
  };
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const Node node{i, j, 0};
      const Complex a = 2.0 + 1.0 / d.phi_c(i, j);
      const double m = std::abs(a);
      if (!(m < 2.0)) throw DomainError("elliptic triple needs |alpha| < 2, got " + format_double(m), node);
      if (!(m > 1e-12)) throw DomainError("elliptic triple needs alpha != 0", node);
      const Complex k = I * std::sqrt(4.0 - m * m) / m;
      t.alpha_c(i, j) = a;
      t.tau1_c(i, j) = 0.5 * a * (1.0 - k);
      t.tau2_c(i, j) = 0.5 * a * (1.0 + k);
      t.theta1_c(i, j) = std::sqrt(t.tau1_c(i, j));
      t.theta2_c(i, j) = std::sqrt(t.tau2_c(i, j));
      t.D1(i, j) = realify(t.theta1_c(i, j));
      t.D2(i, j) = realify(t.theta2_c(i, j));
    }
  const auto t1u = diff_u(t.tau1_c), t1v = diff_v(t.tau1_c), t2u = diff_u(t.tau2_c), t2v = diff_v(t.tau2_c);
  t.phi_zbar = ComplexField(g);
  t.phi_u = ScalarField(g);
  t.phi_v = ScalarField(g);
  t.consistency = ScalarField(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Complex th = t.theta1_c.data()[n] * t.theta2_c.data()[n];
    const Complex gam = geo.gamma_c.data()[n];
    const Complex t1zb = 0.5 * (t1u.data()[n] + I * t1v.data()[n]);
    const Complex t2zb = 0.5 * (t2u.data()[n] + I * t2v.data()[n]);
    const Complex w = (t1zb + 2.0 * (t.tau1_c.data()[n] - 1.0) * gam) / (2.0 * th);
    t.phi_zbar.data()[n] = w;
    t.phi_u.data()[n] = 2 * w.real();
    t.phi_v.data()[n] = 2 * w.imag();
    t.consistency.data()[n] = std::abs(t2zb + 2.0 * (t.tau2_c.data()[n] - 1.0) * gam + 2.0 * w * th);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

namespace detail {

// nabla_a of the vector field with coordinate components X (a = 0: u, a = 1: v)
inline Field<Eigen::Vector2d> covariant_derivative(const ChartGeometry& geo, const Field<Eigen::Vector2d>& X, int a) {
  const Grid2& g = geo.grid;
  ScalarField x0 = X.map([](const Eigen::Vector2d& x) { return x(0); });
  ScalarField x1 = X.map([](const Eigen::Vector2d& x) { return x(1); });
  const auto d0 = a == 0 ? diff_u(x0) : diff_v(x0);
  const auto d1 = a == 0 ? diff_u(x1) : diff_v(x1);
  Field<Eigen::Vector2d> out(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Christoffel& c = geo.christoffel.data()[n];
    const Eigen::Vector2d& x = X.data()[n];
    Eigen::Vector2d r(d0.data()[n], d1.data()[n]);
    for (int k = 0; k < 2; ++k) r(k) += c.up[k](a, 0) * x(0) + c.up[k](a, 1) * x(1);
    out.data()[n] = r;
  }
  return out;
}

inline double metric_norm(const ChartGeometry& geo, std::size_t n, const Eigen::Vector2d& x) {
  Eigen::Matrix2d m;
  m << geo.E.data()[n], geo.F.data()[n], geo.F.data()[n], geo.G.data()[n];
  return std::sqrt(std::max(0.0, x.dot(m * x)));
}

}  // namespace detail

/// Right-hand side of the Ricci relation, d phi(du, dv) = <D2 du, D1 dv>' - <D1 du, D2 dv>'.
/// Elliptic triples evaluate it in the complex frame, where only <dz, dzbar> enters.
inline ScalarField ricci_rhs(const ChartGeometry& geo, const TripleField& t) {
  ScalarField out(geo.grid);
  for (std::size_t n = 0; n < geo.grid.size(); ++n) {
    if (t.kind == DatumKind::elliptic) {
      // D_k dz = theta_k dz / sqrt(2): d phi(dz, dzbar) = (theta2 conj(theta1) - theta1 conj(theta2)) F_c / 2,
      // and d phi(du, dv) = -2i d phi(dz, dzbar).
      const Complex th1 = t.theta1_c.data()[n], th2 = t.theta2_c.data()[n];
      out.data()[n] = 2.0 * std::imag(th2 * std::conj(th1)) * geo.f_c.data()[n];
    } else {
      Eigen::Matrix2d m;
      m << geo.E.data()[n], geo.F.data()[n], geo.F.data()[n], geo.G.data()[n];
      const Eigen::Matrix2d& A = t.D1.data()[n];
      const Eigen::Matrix2d& B = t.D2.data()[n];
      const Eigen::Matrix2d R = B.transpose() * m * A - A.transpose() * m * B;
      out.data()[n] = R(0, 1);
    }
  }
  return out;
}

/// Residuals of the structure equations of the triple and of the Hessian relation for gamma.
inline VerificationReport verify_triple(const ChartGeometry& geo, const TripleField& t, const SupportFunction& sf,
                                        double tol, int band = 2) {
  const Grid2& g = geo.grid;
  if (!(t.grid == g) || !(sf.gamma.grid() == g)) throw DomainError("triple, support and chart on different grids");
  VerificationReport rep;
  rep.title = "triple";
  const Eigen::Matrix2d Id = Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d& J = t.Jbar;

  // (a) determinants and membership in span{I, J}
  ScalarField det1(g), det2(g), span(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    det1.data()[n] = std::abs(t.D1.data()[n].determinant() - 0.5);
    det2.data()[n] = std::abs(t.D2.data()[n].determinant() - 0.5);
    double worst = 0;
    for (const Eigen::Matrix2d* D : {&t.D1.data()[n], &t.D2.data()[n]}) {
      const double x = (D->cwiseProduct(Id)).sum() / 2.0;
      const double y = (D->cwiseProduct(J)).sum() / J.squaredNorm();
      worst = std::max(worst, (*D - x * Id - y * J).norm());
    }
    span.data()[n] = worst;
  }
  rep.residual("a_det_D1", max_abs(det1), tol);
  rep.residual("a_det_D2", max_abs(det2), tol);
  rep.residual("a_span_I_J", max_abs(span), tol);

  // (b) nabla_u(D_i dv) - nabla_v(D_i du) = (-1)^j (phi_u D_j dv - phi_v D_j du)
  for (int i = 0; i < 2; ++i) {
    const Matrix2Field& Di = i == 0 ? t.D1 : t.D2;
    const Matrix2Field& Dj = i == 0 ? t.D2 : t.D1;
    const double sign = i == 0 ? 1.0 : -1.0;  // (-1)^j with j the other index
    const auto Xv = Di.map([](const Eigen::Matrix2d& m) { return Eigen::Vector2d(m.col(1)); });
    const auto Xu = Di.map([](const Eigen::Matrix2d& m) { return Eigen::Vector2d(m.col(0)); });
    const auto a = detail::covariant_derivative(geo, Xv, 0);
    const auto b = detail::covariant_derivative(geo, Xu, 1);
    ScalarField res(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Eigen::Vector2d rhs =
          sign * (t.phi_u.data()[n] * Dj.data()[n].col(1) - t.phi_v.data()[n] * Dj.data()[n].col(0));
      res.data()[n] = detail::metric_norm(geo, n, a.data()[n] - b.data()[n] - rhs);
    }
    rep.residual(i == 0 ? "b_codazzi_D1" : "b_codazzi_D2", max_abs(res, band), tol);
  }

  // (c) d phi(du, dv) = phi_v,u - phi_u,v
  {
    const auto dphi = zip(diff_u(t.phi_v), diff_v(t.phi_u), std::minus<>());
    const auto rhs = ricci_rhs(geo, t);
    rep.residual("c_ricci", max_abs(zip(dphi, rhs, std::minus<>()), band), tol);
  }

  // (d) D2^2 != +-D1^2
  {
    double mminus = INFINITY, mplus = INFINITY;
    Node nminus{}, nplus{};
    for (int j = 0; j < g.nv; ++j)
      for (int i = 0; i < g.nu; ++i) {
        const Eigen::Matrix2d a = t.D1(i, j) * t.D1(i, j), b = t.D2(i, j) * t.D2(i, j);
        const double x = (b - a).norm(), y = (b + a).norm();
        if (x < mminus) mminus = x, nminus = {i, j, 0};
        if (y < mplus) mplus = y, nplus = {i, j, 0};
      }
    rep.margin("d_margin_minus", mminus, tol, nminus);
    rep.margin("d_margin_plus", mplus, tol, nplus);
  }

  // Hessian relation (Hess gamma + gamma g) J = J^t (Hess gamma + gamma g), bilinear form
  {
    ScalarField res(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
      Eigen::Matrix2d m;
      m << geo.E.data()[n], geo.F.data()[n], geo.F.data()[n], geo.G.data()[n];
      const Eigen::Matrix2d B = sf.hess.data()[n] + sf.gamma.data()[n] * m;
      res.data()[n] = (J.transpose() * B - B * J).cwiseAbs().maxCoeff();
    }
    rep.residual("hessian_commutation", max_abs(res, band), tol);
  }

  rep.residual("phi_consistency_i2", max_abs(t.consistency, band), tol);
  return rep;
}

// ---------------------------------------------------------------------------
// Genuineness and composition frame
// ---------------------------------------------------------------------------

struct GenuinenessReport {
  bool genuine = false;
  DatumKind kind = DatumKind::hyperbolic;
  double min_margin = 0;  // hyperbolic: min over nodes of min(m1, m2); elliptic: realified rank margin
  Node node{};
  double m1_min = 0, m2_min = 0;
  double d_margin = 0;  // elliptic: min |tau1 + tau2| = |alpha|
  int non_genuine_nodes = 0;
  double tol = 0;
  std::string note;
};

inline GenuinenessReport genuineness(const TripleField& t, double tol = 1e-8) {
  GenuinenessReport r;
  r.kind = t.kind;
  r.tol = tol;
  r.min_margin = INFINITY;
  r.m1_min = r.m2_min = r.d_margin = INFINITY;
  const Grid2& g = t.grid;
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      if (t.kind == DatumKind::hyperbolic) {
        const double t1 = t.tau1(i, j), t2 = t.tau2(i, j);
        const double m1 = std::abs(t1 + t2 - 2.0), m2 = std::abs(1.0 / t1 + 1.0 / t2 - 2.0);
        r.m1_min = std::min(r.m1_min, m1);
        r.m2_min = std::min(r.m2_min, m2);
        const double m = std::min(m1, m2);
        if (!(m > tol)) ++r.non_genuine_nodes;
        if (m < r.min_margin) r.min_margin = m, r.node = {i, j, 0};
      } else {
        const Eigen::Matrix2d S = t.D1(i, j) * t.D1(i, j) + t.D2(i, j) * t.D2(i, j) - Eigen::Matrix2d::Identity();
        const double sv = Eigen::JacobiSVD<Eigen::Matrix2d>(S).singularValues()(1);
        if (sv < r.min_margin) r.min_margin = sv, r.node = {i, j, 0};
        r.d_margin = std::min(r.d_margin, std::abs(t.tau1_c(i, j) + t.tau2_c(i, j)));
      }
    }
  if (t.kind == DatumKind::hyperbolic) {
    r.genuine = r.non_genuine_nodes == 0;
  } else {
    r.genuine = true;
    r.note = "elliptic triples always give genuine deformations";
  }
  return r;
}

struct CompositionFrame {
  ScalarField a1, a2, angle;
  double identity_residual = 0;       // max || a1 D1 + a2 D2 - I ||
  double unit_residual = INFINITY;    // max |a1^2 + a2^2 - 1| over the composition locus
  int locus_nodes = 0;
};

/// a_i = sqrt(2) theta_i (1 - tau_j)/(tau_i - tau_j), the coefficients of a1 D1 + a2 D2 = I.
inline CompositionFrame composition_frame(const TripleField& t, double locus_tol = 1e-8) {
  if (t.kind != DatumKind::hyperbolic) throw DomainError("composition frame needs a hyperbolic triple");
  const Grid2& g = t.grid;
  CompositionFrame f;
  f.a1 = ScalarField(g);
  f.a2 = ScalarField(g);
  f.angle = ScalarField(g);
  double unit = 0;
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const double t1 = t.tau1(i, j), t2 = t.tau2(i, j);
      if (!(std::abs(t1 - t2) > 1e-12 * std::max(1.0, std::abs(t1)))) throw DomainError("theta1 = theta2", Node{i, j, 0});
      const double a1 = std::sqrt(2.0) * t.theta1(i, j) * (1 - t2) / (t1 - t2);
      const double a2 = std::sqrt(2.0) * t.theta2(i, j) * (1 - t1) / (t2 - t1);
      f.a1(i, j) = a1;
      f.a2(i, j) = a2;
      f.angle(i, j) = std::atan2(a2, a1);
      f.identity_residual = std::max(f.identity_residual,
                                     (a1 * t.D1(i, j) + a2 * t.D2(i, j) - Eigen::Matrix2d::Identity()).norm());
      const double m = std::min(std::abs(t1 + t2 - 2), std::abs(1 / t1 + 1 / t2 - 2));
      if (m <= locus_tol) {
        ++f.locus_nodes;
        unit = std::max(unit, std::abs(a1 * a1 + a2 * a2 - 1));
      }
    }
  if (f.locus_nodes) f.unit_residual = unit;
  return f;
}

/// Constant hyperbolic triple with prescribed roots, e.g. on the composition locus.
inline TripleField synthetic_triple(const Grid2& g, double tau1, double tau2) {
  if (!(tau1 > 0) || !(tau2 > 0)) throw DomainError("synthetic roots must be positive");
  if (tau1 == tau2) throw DomainError("theta1 = theta2");
  TripleField t;
  t.kind = DatumKind::hyperbolic;
  t.grid = g;
  t.Jbar << 1, 0, 0, -1;
  t.tau1 = ScalarField(g, tau1);
  t.tau2 = ScalarField(g, tau2);
  t.theta1 = ScalarField(g, std::sqrt(tau1));
  t.theta2 = ScalarField(g, std::sqrt(tau2));
  t.alpha = ScalarField(g, tau1 + tau2);
  t.beta = ScalarField(g, 1 / tau1 + 1 / tau2);
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2d d1, d2;
  d1 << s * std::sqrt(tau1), 0, 0, s / std::sqrt(tau1);
  d2 << s * std::sqrt(tau2), 0, 0, s / std::sqrt(tau2);
  t.D1 = Matrix2Field(g, d1);
  t.D2 = Matrix2Field(g, d2);
  t.phi_u = ScalarField(g, 0.0);
  t.phi_v = ScalarField(g, 0.0);
  t.consistency = ScalarField(g, 0.0);
  return t;
}

/// Recovers (phi, psi) = (1/(alpha - 2), 1/(beta - 2)) from the roots.
inline std::pair<ScalarField, ScalarField> pair_from_triple(const TripleField& t) {
  auto phi = zip(t.tau1, t.tau2, [](double a, double b) { return 1.0 / (a + b - 2.0); });
  auto psi = zip(t.tau1, t.tau2, [](double a, double b) { return 1.0 / (1.0 / a + 1.0 / b - 2.0); });
  return {phi, psi};
}

/// Transport defects beta_u + 2(beta - 2) Gamma^v and alpha_v + 2(alpha - 2) Gamma^u.
inline FieldMax transport_conservation(const ChartGeometry& geo, const TripleField& t, int band = 2) {
  const auto bu = diff_u(t.beta), av = diff_v(t.alpha);
  ScalarField res(geo.grid);
  for (std::size_t n = 0; n < geo.grid.size(); ++n)
    res.data()[n] = std::max(std::abs(bu.data()[n] + 2 * (t.beta.data()[n] - 2) * geo.gamma_v.data()[n]),
                             std::abs(av.data()[n] + 2 * (t.alpha.data()[n] - 2) * geo.gamma_u.data()[n]));
  return max_abs(res, band);
}

inline ordered_json to_json(const GenuinenessReport& r) {
  ordered_json j = ordered_json::object();
  j["genuine"] = r.genuine;
  j["kind"] = r.kind == DatumKind::hyperbolic ? "hyperbolic" : "elliptic";
  j["min_margin"] = r.min_margin;
  j["node"] = to_json(r.node);
  if (r.kind == DatumKind::hyperbolic) {
    j["m1_min"] = r.m1_min;
    j["m2_min"] = r.m2_min;
    j["non_genuine_nodes"] = r.non_genuine_nodes;
  } else {
    j["d_margin"] = r.d_margin;
  }
  j["tol"] = r.tol;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

}  // namespace gdeform
