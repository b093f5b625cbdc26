#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "gdeform/calculus.hpp"
#include "gdeform/field_io.hpp"
#include "gdeform/gaussmap.hpp"
#include "gdeform/goursat.hpp"

namespace gdeform {

// ---------------------------------------------------------------------------
// The operator Q
// ---------------------------------------------------------------------------

/// Q(theta) = theta_uv - Gamma^u theta_u - Gamma^v theta_v + F theta.
inline ScalarField q_apply(const ChartGeometry& geo, const ScalarField& th) {
  if (!(th.grid() == geo.grid)) throw DomainError("field and chart live on different grids");
  const auto tu = diff_u(th), tv = diff_v(th), tuv = diff_uv(th);
  ScalarField out(geo.grid);
  for (std::size_t n = 0; n < out.data().size(); ++n)
    out.data()[n] = tuv.data()[n] - geo.gamma_u.data()[n] * tu.data()[n] - geo.gamma_v.data()[n] * tv.data()[n] +
                    geo.F.data()[n] * th.data()[n];
  return out;
}

/// Complex form theta_{z zbar} - Gamma theta_z - conj(Gamma) theta_zbar + F theta,
/// with d_z = (d_u - i d_v)/2 realized by the real stencils.
inline ComplexField q_apply(const ChartGeometry& geo, const ComplexField& th) {
  if (!(th.grid() == geo.grid)) throw DomainError("field and chart live on different grids");
  const auto tu = diff_u(th), tv = diff_v(th), tuu = diff_uu(th), tvv = diff_vv(th);
  const Complex I(0, 1);
  ComplexField out(geo.grid);
  for (std::size_t n = 0; n < out.data().size(); ++n) {
    const Complex tz = 0.5 * (tu.data()[n] - I * tv.data()[n]);
    const Complex tzb = 0.5 * (tu.data()[n] + I * tv.data()[n]);
    const Complex gam = geo.gamma_c.data()[n];
    out.data()[n] = 0.25 * (tuu.data()[n] + tvv.data()[n]) - gam * tz - std::conj(gam) * tzb +
                    geo.f_c.data()[n] * th.data()[n];
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-variable data: U(u), V(v), nu(v), zeta(t)
// ---------------------------------------------------------------------------

class FunctionSpec {
 public:
  enum class Kind { constant, affine, poly, sine, c_minus_exp_m2lambda, half_c_minus_exp_m2lambda, table };

  static FunctionSpec constant(double c) { return FunctionSpec(Kind::constant, {c}); }
  static FunctionSpec affine(double a, double b) { return FunctionSpec(Kind::affine, {a, b}); }
  static FunctionSpec poly(std::vector<double> coeffs) { return FunctionSpec(Kind::poly, std::move(coeffs)); }
  /// a + b sin(k t)
  static FunctionSpec sine(double a, double b, double k) { return FunctionSpec(Kind::sine, {a, b, k}); }
  /// c - exp(-2 lambda) with E = exp(2 lambda) read from the chart along the sampled axis.
  static FunctionSpec c_minus_exp_m2lambda(double c) { return FunctionSpec(Kind::c_minus_exp_m2lambda, {c}); }
  /// (c - exp(-2 lambda))/2
  static FunctionSpec half_c_minus_exp_m2lambda(double c) {
    return FunctionSpec(Kind::half_c_minus_exp_m2lambda, {c});
  }
  /// Complex constant, for elliptic data.
  static FunctionSpec complex_constant(Complex c) {
    FunctionSpec s(Kind::constant, {c.real()});
    s.imag_ = {c.imag()};
    return s;
  }
  /// Tabulated samples with columns t,value[,imag]; linear interpolation in between.
  static FunctionSpec table(std::vector<double> t, std::vector<double> re, std::vector<double> im = {}) {
    if (t.size() < 2 || re.size() != t.size() || (!im.empty() && im.size() != t.size()))
      throw ConfigError("tabulated function needs at least two rows of equal length");
    if (!std::is_sorted(t.begin(), t.end()) || std::adjacent_find(t.begin(), t.end()) != t.end())
      throw ConfigError("tabulated function needs strictly increasing t");
    FunctionSpec s(Kind::table, {});
    s.t_ = std::move(t);
    s.re_ = std::move(re);
    s.imag_ = std::move(im);
    return s;
  }
  static FunctionSpec table_csv(const std::filesystem::path& path) {
    const CsvTable tab = read_csv(path);
    const int tc = tab.column("t"), vc = tab.column("value"), ic = tab.column("imag");
    if (tc < 0 || vc < 0) throw IoError(path.string() + ": header needs t and value columns");
    std::vector<double> t, re, im;
    for (const auto& row : tab.rows) {
      t.push_back(row[tc]);
      re.push_back(row[vc]);
      if (ic >= 0) im.push_back(row[ic]);
    }
    return table(std::move(t), std::move(re), std::move(im));
  }

  Kind kind() const { return kind_; }
  bool needs_lambda() const {
    return kind_ == Kind::c_minus_exp_m2lambda || kind_ == Kind::half_c_minus_exp_m2lambda;
  }

  /// Value at t; `e_m2lambda` is exp(-2 lambda) at the same point (used by the lambda builtins).
  Complex eval(double t, double e_m2lambda = 1.0) const {
    switch (kind_) {
      case Kind::constant: return {c_[0], imag_.empty() ? 0.0 : imag_[0]};
      case Kind::affine: return c_[0] + c_[1] * t;
      case Kind::poly: {
        double acc = 0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
        return acc;
      }
      case Kind::sine: return c_[0] + c_[1] * std::sin(c_[2] * t);
      case Kind::c_minus_exp_m2lambda: return c_[0] - e_m2lambda;
      case Kind::half_c_minus_exp_m2lambda: return 0.5 * (c_[0] - e_m2lambda);
      case Kind::table: {
        if (t < t_.front() - 1e-12 || t > t_.back() + 1e-12)
          throw DomainError("tabulated function evaluated outside [" + format_double(t_.front()) + ", " +
                            format_double(t_.back()) + "] at t=" + format_double(t));
        auto it = std::upper_bound(t_.begin(), t_.end(), t);
        std::size_t k = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
        k = std::min(k, t_.size() - 2);
        const double w = (t - t_[k]) / (t_[k + 1] - t_[k]);
        const double re = (1 - w) * re_[k] + w * re_[k + 1];
        const double im = imag_.empty() ? 0.0 : (1 - w) * imag_[k] + w * imag_[k + 1];
        return {re, im};
      }
    }
    return 0.0;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::constant: os << "constant"; break;
      case Kind::affine: os << "affine"; break;
      case Kind::poly: os << "poly"; break;
      case Kind::sine: os << "sine"; break;
      case Kind::c_minus_exp_m2lambda: os << "c_minus_exp_m2lambda"; break;
      case Kind::half_c_minus_exp_m2lambda: os << "half_c_minus_exp_m2lambda"; break;
      case Kind::table: os << "table(" << t_.size() << " rows)"; break;
    }
    for (std::size_t k = 0; k < c_.size(); ++k) os << (k ? "," : "(") << format_double(c_[k]) << (k + 1 == c_.size() ? ")" : "");
    return os.str();
  }

 private:
  FunctionSpec(Kind k, std::vector<double> c) : kind_(k), c_(std::move(c)) {}
  Kind kind_;
  std::vector<double> c_;
  std::vector<double> t_, re_, imag_;
};

/// Samples along the u axis (v = v0) or v axis (u = u0); lambda builtins read
/// exp(-2 lambda) from E on the u axis and from G on the v axis.
inline std::vector<Complex> sample_axis(const FunctionSpec& f, const ChartGeometry& geo, Axis axis) {
  const Grid2& g = geo.grid;
  const int n = axis == Axis::u ? g.nu : g.nv;
  std::vector<Complex> out(n);
  for (int k = 0; k < n; ++k) {
    const double t = axis == Axis::u ? g.u(k) : g.v(k);
    const double metric = axis == Axis::u ? geo.E(k, 0) : geo.G(0, k);
    out[k] = f.eval(t, 1.0 / metric);
    if (!std::isfinite(out[k].real()) || !std::isfinite(out[k].imag()))
      throw DomainError("function data not finite", axis == Axis::u ? Node{k, 0, 0} : Node{0, k, 0});
  }
  return out;
}

inline std::vector<double> real_parts(const std::vector<Complex>& z) {
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k].real();
  return out;
}

// ---------------------------------------------------------------------------
// Deformation data
// ---------------------------------------------------------------------------

enum class DatumKind { hyperbolic, elliptic };
enum class Branch { both_positive, phi_small, psi_small };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::both_positive: return "both_positive";
    case Branch::phi_small: return "phi_small";
    default: return "psi_small";
  }
}

/// How U and V enter the initial rows: `initial` sets phi(u,v0) = U and psi(u0,v) = V;
/// `metric` sets phi(u,v0) = U E and psi(u0,v) = V G.
enum class Normalization { initial, metric };

struct DeformationDatum {
  DatumKind kind = DatumKind::hyperbolic;
  Grid2 grid;
  double anchor_u = 0, anchor_v = 0;  // chart coordinates of the integration anchor
  Normalization normalization = Normalization::initial;
  std::vector<double> U, V;
  ScalarField phi, psi;
  Field<Branch> branch;
  std::vector<Complex> zeta;
  ComplexField phi_c;
  ScalarField rho;
  ScalarField q_rho;
  double transport_residual = 0;  // max of the transport equation defects (interior band)
  double margin = 0;              // smallest admissibility margin over nodes
  double cr_residual = 0;
  std::vector<std::string> warnings;
};

constexpr double kAdmissibilityMargin = 1e-8;

/// Per-node admissibility of a hyperbolic pair; returns the branch or throws naming the node.
inline Branch admissible_branch(double phi, double psi, const Node& node, double* margin = nullptr) {
  const double m_both = std::min(phi, psi);
  const double m_phi = std::min(2 * phi, -(2 * psi + 1) - 2 * phi);
  const double m_psi = std::min(2 * psi, -(2 * phi + 1) - 2 * psi);
  const double best = std::max({m_both, m_phi, m_psi});
  if (margin) *margin = best;
  if (m_both > kAdmissibilityMargin) return Branch::both_positive;
  if (m_phi > kAdmissibilityMargin) return Branch::phi_small;
  if (m_psi > kAdmissibilityMargin) return Branch::psi_small;
  std::ostringstream os;
  os << "admissibility fails with phi=" << format_double(phi) << ", psi=" << format_double(psi)
     << ": both_positive margin " << format_double(m_both) << ", phi_small margin " << format_double(m_phi)
     << ", psi_small margin " << format_double(m_psi);
  throw DomainError(os.str(), node);
}

/// Hyperbolic datum from U(u), V(v): transports phi in v and psi in u from the anchor lines.
inline DeformationDatum build_pair(const ChartGeometry& geo, const FunctionSpec& Uspec, const FunctionSpec& Vspec,
                                   Normalization norm = Normalization::initial) {
  const Grid2& g = geo.grid;
  DeformationDatum d;
  d.kind = DatumKind::hyperbolic;
  d.grid = g;
  d.anchor_u = g.u0;
  d.anchor_v = g.v0;
  d.normalization = norm;
  d.U = real_parts(sample_axis(Uspec, geo, Axis::u));
  d.V = real_parts(sample_axis(Vspec, geo, Axis::v));

  const auto Iu = cumint(geo.gamma_u, Axis::v, g.v0);
  const auto Iv = cumint(geo.gamma_v, Axis::u, g.u0);
  d.phi = ScalarField(g);
  d.psi = ScalarField(g);
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const double u0 = norm == Normalization::metric ? d.U[i] * geo.E(i, 0) : d.U[i];
      const double v0 = norm == Normalization::metric ? d.V[j] * geo.G(0, j) : d.V[j];
      d.phi(i, j) = u0 * std::exp(2.0 * Iu(i, j));
      d.psi(i, j) = v0 * std::exp(2.0 * Iv(i, j));
    }
  require_finite(d.phi, "phi");
  require_finite(d.psi, "psi");

  d.branch = Field<Branch>(g);
  d.rho = ScalarField(g);
  d.margin = INFINITY;
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      double m = 0;
      const Branch b = admissible_branch(d.phi(i, j), d.psi(i, j), Node{i, j, 0}, &m);
      d.margin = std::min(d.margin, m);
      d.branch(i, j) = b;
      const double s = 2.0 * (d.phi(i, j) + d.psi(i, j)) + 1.0;
      if (std::abs(s) < 1e-12) throw DomainError("2(phi+psi)+1 vanishes, rho is not differentiable", Node{i, j, 0});
      if ((b == Branch::both_positive) != (s > 0))
        throw DomainError("sign of 2(phi+psi)+1 inconsistent with the admissibility branch", Node{i, j, 0});
      d.rho(i, j) = std::sqrt(std::abs(s));
    }
  d.q_rho = q_apply(geo, d.rho);

  const auto phiv = diff_v(d.phi), psiu = diff_u(d.psi);
  double tr = 0;
  for (int j = 2; j < g.nv - 2; ++j)
    for (int i = 2; i < g.nu - 2; ++i) {
      tr = std::max(tr, std::abs(phiv(i, j) - 2 * geo.gamma_u(i, j) * d.phi(i, j)));
      tr = std::max(tr, std::abs(psiu(i, j) - 2 * geo.gamma_v(i, j) * d.psi(i, j)));
    }
  d.transport_residual = tr;
  return d;
}

/// Elliptic datum: zeta on the real axis v = v0, transported by phi_zbar = 2 Gamma phi,
/// i.e. phi_v = i phi_u - 4 i Gamma phi, with a Heun step in v. This initial value
/// problem is ill-posed, so only short marches on small charts are meaningful; growth
/// beyond 1e6 times the data scale is treated as leaving the chart.
inline DeformationDatum build_zeta(const ChartGeometry& geo, const FunctionSpec& zspec) {
  const Grid2& g = geo.grid;
  const Complex I(0, 1);
  DeformationDatum d;
  d.kind = DatumKind::elliptic;
  d.grid = g;
  d.anchor_u = g.u0;
  d.anchor_v = g.v0;
  d.zeta = sample_axis(zspec, geo, Axis::u);
  double scale = 0;
  for (const auto& z : d.zeta) scale = std::max(scale, std::abs(z));
  scale = std::max(scale, 1.0);

  const double hu = g.hu(), hv = g.hv();
  auto row_derivative = [&](const std::vector<Complex>& row) {
    std::vector<Complex> du(g.nu);
    du[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2 * hu);
    for (int i = 1; i < g.nu - 1; ++i) du[i] = (row[i + 1] - row[i - 1]) / (2 * hu);
    du[g.nu - 1] = (3.0 * row[g.nu - 1] - 4.0 * row[g.nu - 2] + row[g.nu - 3]) / (2 * hu);
    return du;
  };
  auto rhs = [&](const std::vector<Complex>& row, int j) {
    const auto du = row_derivative(row);
    std::vector<Complex> r(g.nu);
    for (int i = 0; i < g.nu; ++i) r[i] = I * du[i] - 4.0 * I * geo.gamma_c(i, j) * row[i];
    return r;
  };

  d.phi_c = ComplexField(g);
  std::vector<Complex> row = d.zeta;
  for (int i = 0; i < g.nu; ++i) d.phi_c(i, 0) = row[i];
  for (int j = 0; j + 1 < g.nv; ++j) {
    const auto k1 = rhs(row, j);
    std::vector<Complex> pred(g.nu);
    for (int i = 0; i < g.nu; ++i) pred[i] = row[i] + hv * k1[i];
    const auto k2 = rhs(pred, j + 1);
    for (int i = 0; i < g.nu; ++i) {
      row[i] += 0.5 * hv * (k1[i] + k2[i]);
      if (!std::isfinite(row[i].real()) || !std::isfinite(row[i].imag()) || std::abs(row[i]) > 1e6 * scale)
        throw DomainError("elliptic transport blows up; the march leaves the chart", Node{i, j + 1, 0});
      d.phi_c(i, j + 1) = row[i];
    }
  }

  d.rho = ScalarField(g);
  d.margin = INFINITY;
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const Complex p = d.phi_c(i, j);
      const double m_half = std::abs(p + 0.5);
      const double m_re = -(4.0 * p.real() + 1.0);
      if (m_half <= kAdmissibilityMargin)
        throw DomainError("elliptic admissibility fails: phi equals -1/2", Node{i, j, 0});
      if (m_re <= kAdmissibilityMargin)
        throw DomainError("elliptic admissibility fails: 4 Re(phi) + 1 = " + format_double(-m_re) + " is not negative",
                          Node{i, j, 0});
      d.margin = std::min({d.margin, m_half, m_re});
      d.rho(i, j) = std::sqrt(m_re);
    }
  ComplexField rc = d.rho.map([](double x) { return Complex(x, 0.0); });
  d.q_rho = q_apply(geo, rc).map([](const Complex& z) { return std::abs(z); });

  // discrete Cauchy-Riemann defect of the transported field near the axis
  const auto pu = diff_u(d.phi_c), pv = diff_v(d.phi_c);
  double cr = 0;
  for (int j = 0; j < std::min(3, g.nv); ++j)
    for (int i = 2; i < g.nu - 2; ++i) {
      const Complex dzb = 0.5 * (pu(i, j) + I * pv(i, j));
      cr = std::max(cr, std::abs(dzb - 2.0 * geo.gamma_c(i, j) * d.phi_c(i, j)));
    }
  d.cr_residual = cr;
  d.transport_residual = cr;
  const double cr_tol = 50.0 * (hu * hu + hv * hv) * scale;
  if (cr > cr_tol)
    d.warnings.push_back("Cauchy-Riemann defect near the real axis is " + format_double(cr) + " (> " +
                         format_double(cr_tol) + "); zeta may not be holomorphic");
  return d;
}

// ---------------------------------------------------------------------------
// Membership
// ---------------------------------------------------------------------------

inline double default_membership_tol(const Grid2& g, double scale) {
  return 50.0 * (g.hu() * g.hu() + g.hv() * g.hv()) * scale;
}

struct MembershipReport {
  bool pass = false;
  double max_residual = 0;
  Node node{};
  double tol = 0;
  int band = 2;
  std::vector<double> residual_profile;  // max |Q(rho)| per interior v-row
  int count_both_positive = 0, count_phi_small = 0, count_psi_small = 0;
};

/// Tests Q(rho) = 0 over the interior band. A non-positive tol selects the default
/// 50 (hu^2 + hv^2) max|rho|.
inline MembershipReport ch_membership(const DeformationDatum& d, double tol = 0.0, int band = 2) {
  MembershipReport r;
  r.band = band;
  double scale = 0;
  for (double x : d.rho.data()) scale = std::max(scale, std::abs(x));
  r.tol = tol > 0 ? tol : default_membership_tol(d.grid, scale);
  const FieldMax m = max_abs(d.q_rho, band);
  r.max_residual = m.value;
  r.node = m.node;
  r.pass = m.value <= r.tol;
  for (int j = band; j < d.grid.nv - band; ++j) {
    double row = 0;
    for (int i = band; i < d.grid.nu - band; ++i) row = std::max(row, std::abs(d.q_rho(i, j)));
    r.residual_profile.push_back(row);
  }
  if (d.kind == DatumKind::hyperbolic)
    for (Branch b : d.branch.data()) {
      if (b == Branch::both_positive) ++r.count_both_positive;
      else if (b == Branch::phi_small) ++r.count_phi_small;
      else ++r.count_psi_small;
    }
  return r;
}

// ---------------------------------------------------------------------------
// Support functions
// ---------------------------------------------------------------------------

struct SupportFunction {
  ScalarField gamma;
  Field<Eigen::Vector2d> grad_partial;  // (gamma_u, gamma_v)
  Field<Eigen::Vector2d> grad;          // contravariant g^{-1} d gamma
  Matrix2Field hess;                    // covariant Hessian, bilinear form
  ScalarField q;                        // Q(gamma)
};

/// Derivatives, gradient and Hessian of gamma by the chart stencils and connection.
/// order 4 selects the fourth-order stencils (used where the Hessian is differentiated again).
inline SupportFunction make_support(const ChartGeometry& geo, const ScalarField& gamma, int order = 2) {
  if (!(gamma.grid() == geo.grid)) throw DomainError("support function on a different grid");
  if (order != 2 && order != 4) throw ConfigError("stencil order must be 2 or 4");
  require_finite(gamma, "support function");
  SupportFunction s;
  s.gamma = gamma;
  const bool hi = order == 4;
  const auto gu = hi ? diff4_u(gamma) : diff_u(gamma), gv = hi ? diff4_v(gamma) : diff_v(gamma);
  const auto guu = hi ? diff4_uu(gamma) : diff_uu(gamma), guv = hi ? diff4_uv(gamma) : diff_uv(gamma),
             gvv = hi ? diff4_vv(gamma) : diff_vv(gamma);
  const Grid2& g = geo.grid;
  s.grad_partial = Field<Eigen::Vector2d>(g);
  s.grad = Field<Eigen::Vector2d>(g);
  s.hess = Matrix2Field(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Eigen::Vector2d d(gu.data()[n], gv.data()[n]);
    Eigen::Matrix2d second;
    second << guu.data()[n], guv.data()[n], guv.data()[n], gvv.data()[n];
    Eigen::Matrix2d met;
    met << geo.E.data()[n], geo.F.data()[n], geo.F.data()[n], geo.G.data()[n];
    s.grad_partial.data()[n] = d;
    s.grad.data()[n] = met.ldlt().solve(d);
    s.hess.data()[n] = covariant_hessian(geo.christoffel.data()[n], second, d);
  }
  s.q = q_apply(geo, gamma);
  return s;
}

/// Solves Q(gamma) = 0 with gamma = a on v = v0 and gamma = b on u = u0.
inline SupportFunction support_solve(const ChartGeometry& geo, std::span<const double> a, std::span<const double> b) {
  GoursatCoefficients c{geo.gamma_u, geo.gamma_v, geo.F};
  return make_support(geo, solve_goursat(c, a, b));
}

/// gamma = nu(v) exp(lambda(u, v)) with lambda = ln(E)/2.
inline ScalarField nu_exp_lambda(const ChartGeometry& geo, const FunctionSpec& nu) {
  const Grid2& g = geo.grid;
  ScalarField out(g);
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) out(i, j) = nu.eval(g.v(j)).real() * std::sqrt(geo.E(i, j));
  return out;
}

/// Goursat data reproducing nu(v) exp(lambda(u)) on isothermic charts.
inline SupportFunction support_from_nu_cauchy(const ChartGeometry& geo, const FunctionSpec& nu) {
  const Grid2& g = geo.grid;
  std::vector<double> a(g.nu), b(g.nv);
  const double nu0 = nu.eval(g.v0).real();
  for (int i = 0; i < g.nu; ++i) a[i] = nu0 * std::sqrt(geo.E(i, 0));
  for (int j = 0; j < g.nv; ++j) b[j] = nu.eval(g.v(j)).real() * std::sqrt(geo.E(0, j));
  return support_solve(geo, a, b);
}

struct SupportCheck {
  bool pass = false;
  double max_residual = 0;
  Node node{};
  double tol = 0;
};

inline SupportCheck support_check(const SupportFunction& s, double tol, int band = 2) {
  SupportCheck c;
  const FieldMax m = max_abs(s.q, band);
  c.max_residual = m.value;
  c.node = m.node;
  c.tol = tol;
  c.pass = m.value <= tol;
  return c;
}

}  // namespace gdeform
