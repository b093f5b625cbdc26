#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gdeform/calculus.hpp"
#include "gdeform/grid.hpp"

namespace gdeform {

/// Position and partial derivatives of h up to second order at one point.
struct Jet {
  Eigen::VectorXd h, hu, hv, huu, huv, hvv;
};

using JetFn = std::function<Jet(double u, double v)>;

/// A chart of the Gauss image h: grid -> S^n in R^{n+1}, stored as per-node jets.
class SurfacePatch {
 public:
  SurfacePatch() = default;

  /// Jets evaluated from closed-form derivatives.
  static SurfacePatch analytic(std::string name, const Grid2& g, int ambient, const JetFn& fn) {
    g.validate();
    SurfacePatch p;
    p.name_ = std::move(name);
    p.ambient_ = ambient;
    p.analytic_ = true;
    p.jets_ = Field<Jet>(g);
    for (int j = 0; j < g.nv; ++j)
      for (int i = 0; i < g.nu; ++i) {
        Jet jt = fn(g.u(i), g.v(j));
        if (jt.h.size() != ambient) throw DomainError("jet has wrong ambient dimension", Node{i, j, 0});
        p.jets_(i, j) = std::move(jt);
      }
    p.check();
    return p;
  }

  /// Jets from finite differences of sampled coordinate fields (one field per ambient axis).
  /// First derivatives are projected onto the tangent space of the sphere, since the
  /// difference quotients of points on S^n are only tangent up to O(h^2).
  static SurfacePatch sampled(std::string name, const std::vector<ScalarField>& coords) {
    if (coords.size() < 4) throw DomainError("sampled patch needs at least 4 ambient coordinates");
    const Grid2& g = coords.front().grid();
    g.validate();
    const int m = static_cast<int>(coords.size());
    std::vector<ScalarField> du, dv, duu, duv, dvv;
    for (const auto& c : coords) {
      if (!(c.grid() == g)) throw DomainError("sampled coordinates on different grids");
      require_finite(c, "sampled position");
      du.push_back(diff_u(c));
      dv.push_back(diff_v(c));
      duu.push_back(diff_uu(c));
      duv.push_back(diff_uv(c));
      dvv.push_back(diff_vv(c));
    }
    SurfacePatch p;
    p.name_ = std::move(name);
    p.ambient_ = m;
    p.analytic_ = false;
    p.jets_ = Field<Jet>(g);
    for (int j = 0; j < g.nv; ++j)
      for (int i = 0; i < g.nu; ++i) {
        Jet jt;
        auto gather = [&](const std::vector<ScalarField>& f) {
          Eigen::VectorXd x(m);
          for (int a = 0; a < m; ++a) x(a) = f[a](i, j);
          return x;
        };
        jt.h = gather(coords);
        jt.hu = gather(du);
        jt.hv = gather(dv);
        jt.huu = gather(duu);
        jt.huv = gather(duv);
        jt.hvv = gather(dvv);
        jt.hu -= jt.hu.dot(jt.h) * jt.h;
        jt.hv -= jt.hv.dot(jt.h) * jt.h;
        p.jets_(i, j) = std::move(jt);
      }
    p.check();
    return p;
  }

  const std::string& name() const { return name_; }
  const Grid2& grid() const { return jets_.grid(); }
  int ambient() const { return ambient_; }
  bool is_analytic() const { return analytic_; }
  double tolerance() const { return analytic_ ? 1e-10 : 1e-8; }
  const Jet& jet(int i, int j) const { return jets_(i, j); }
  const Field<Jet>& jets() const { return jets_; }

  /// Coordinate field h^a.
  ScalarField height(int a) const { return jets_.map([a](const Jet& jt) { return jt.h(a); }); }

  void check() const {
    const Grid2& g = grid();
    const double tol = tolerance();
    for (int j = 0; j < g.nv; ++j)
      for (int i = 0; i < g.nu; ++i) {
        const Jet& jt = jets_(i, j);
        if (!jt.h.allFinite() || !jt.hu.allFinite() || !jt.hv.allFinite() || !jt.huu.allFinite() ||
            !jt.huv.allFinite() || !jt.hvv.allFinite())
          throw DomainError("patch jet is not finite", Node{i, j, 0});
        if (std::abs(jt.h.norm() - 1.0) > tol) throw DomainError("patch leaves the unit sphere", Node{i, j, 0});
        if (std::abs(jt.hu.dot(jt.h)) > tol || std::abs(jt.hv.dot(jt.h)) > tol)
          throw DomainError("patch derivatives are not tangent to the sphere", Node{i, j, 0});
      }
  }

 private:
  std::string name_;
  int ambient_ = 0;
  bool analytic_ = true;
  Field<Jet> jets_;
};

/// Christoffel symbols of the induced metric: up[k](i,j) = Gamma^k_ij, indices 0 = u, 1 = v.
struct Christoffel {
  std::array<Eigen::Matrix2d, 2> up{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
};

/// Metric, connection and second fundamental form of h on the chart grid. A geometry
/// may also be assembled directly from coefficient fields, in which case no jets,
/// normals or second form are present.
struct ChartGeometry {
  Grid2 grid;
  int ambient = 0;
  bool analytic = true;
  Field<Jet> jets;
  ScalarField E, F, G;
  Field<Christoffel> christoffel;
  ScalarField gamma_u, gamma_v;  // Gamma^u_uv, Gamma^v_uv
  Field<Eigen::MatrixXd> normals;  // columns e_1..e_{n-2}
  std::vector<ScalarField> alpha_uu, alpha_uv, alpha_vv;
  ComplexField gamma_c;  // coefficient of the complex operator, nabla_dz dzbar = Gamma dz + conj(Gamma) dzbar
  ScalarField f_c;       // <dz, dzbar>

  bool has_jets() const { return !jets.data().empty(); }
  int normal_count() const { return static_cast<int>(alpha_uu.size()); }

  Eigen::Matrix2d metric(int i, int j) const {
    Eigen::Matrix2d g;
    g << E(i, j), F(i, j), F(i, j), G(i, j);
    return g;
  }

  Eigen::Matrix2d alpha(int a, int i, int j) const {
    Eigen::Matrix2d m;
    m << alpha_uu[a](i, j), alpha_uv[a](i, j), alpha_uv[a](i, j), alpha_vv[a](i, j);
    return m;
  }

  /// Geometry given only by its metric and connection coefficients.
  static ChartGeometry from_coefficients(const ScalarField& E, const ScalarField& F, const ScalarField& G,
                                         const Field<Christoffel>& chr) {
    ChartGeometry geo;
    geo.grid = E.grid();
    geo.ambient = 0;
    geo.E = E;
    geo.F = F;
    geo.G = G;
    geo.christoffel = chr;
    geo.derive_coefficients();
    for (int j = 0; j < geo.grid.nv; ++j)
      for (int i = 0; i < geo.grid.nu; ++i)
        if (geo.E(i, j) <= 0 || geo.G(i, j) <= 0 || geo.E(i, j) * geo.G(i, j) - geo.F(i, j) * geo.F(i, j) <= 0)
          throw DomainError("degenerate metric", Node{i, j, 0});
    return geo;
  }

  /// Euclidean coefficients: E = G = 1, F = 0, vanishing connection. The zeroth-order
  /// coefficient of the complex operator is set separately (0 by default), which
  /// gives the bare transport operators used for elliptic data.
  static ChartGeometry flat(const Grid2& g, double f_c_value = 0.0) {
    ChartGeometry geo =
        from_coefficients(ScalarField(g, 1.0), ScalarField(g, 0.0), ScalarField(g, 1.0), Field<Christoffel>(g));
    geo.f_c = ScalarField(g, f_c_value);
    return geo;
  }

  void derive_coefficients() {
    gamma_u = christoffel.map([](const Christoffel& c) { return c.up[0](0, 1); });
    gamma_v = christoffel.map([](const Christoffel& c) { return c.up[1](0, 1); });
    gamma_c = christoffel.map([](const Christoffel& c) {
      return Complex(0.25 * (c.up[0](0, 0) + c.up[0](1, 1)), 0.25 * (c.up[1](0, 0) + c.up[1](1, 1)));
    });
    f_c = zip(E, G, [](double e, double g) { return 0.25 * (e + g); });
  }
};

namespace detail {

// Generalized cross product in R^4: the unit vector orthogonal to three given ones,
// oriented so that det[x a b c] > 0.
inline Eigen::VectorXd cross4(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  Eigen::Matrix<double, 4, 3> m;
  m << a, b, c;
  Eigen::VectorXd x(4);
  for (int k = 0; k < 4; ++k) {
    Eigen::Matrix3d minor;
    int r = 0;
    for (int row = 0; row < 4; ++row)
      if (row != k) minor.row(r++) = m.row(row);
    x(k) = ((k % 2) ? -1.0 : 1.0) * minor.determinant();
  }
  return x;
}

inline Eigen::MatrixXd tangent_basis(const Jet& jt) {
  Eigen::MatrixXd q(jt.h.size(), 3);
  q << jt.h, jt.hu, jt.hv;
  return Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(jt.h.size(), 3);
}

}  // namespace detail

/// Computes metric, Christoffel symbols, normal frame and second form of the patch.
inline ChartGeometry build_geometry(const SurfacePatch& patch) {
  const Grid2& g = patch.grid();
  const int m = patch.ambient();
  const int nn = m - 3;
  if (nn < 1) throw DomainError("Gauss image must lie in S^n with n >= 3");
  ChartGeometry geo;
  geo.grid = g;
  geo.ambient = m;
  geo.analytic = patch.is_analytic();
  geo.jets = patch.jets();
  geo.E = ScalarField(g);
  geo.F = ScalarField(g);
  geo.G = ScalarField(g);
  geo.christoffel = Field<Christoffel>(g);
  geo.normals = Field<Eigen::MatrixXd>(g);
  geo.alpha_uu.assign(nn, ScalarField(g));
  geo.alpha_uv.assign(nn, ScalarField(g));
  geo.alpha_vv.assign(nn, ScalarField(g));

  // Ambient completion order for n >= 4, fixed once at the chart center.
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  if (nn > 1) {
    const Eigen::MatrixXd q = detail::tangent_basis(patch.jet(g.nu / 2, g.nv / 2));
    std::vector<double> res(m);
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd ek = Eigen::VectorXd::Unit(m, k);
      res[k] = (ek - q * (q.transpose() * ek)).norm();
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return res[a] > res[b]; });
  }

  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const Jet& jt = patch.jet(i, j);
      const double E = jt.hu.dot(jt.hu), F = jt.hu.dot(jt.hv), G = jt.hv.dot(jt.hv);
      if (!(E > 0) || !(G > 0) || !(E * G - F * F > 0)) throw DomainError("degenerate metric", Node{i, j, 0});
      geo.E(i, j) = E;
      geo.F(i, j) = F;
      geo.G(i, j) = G;

      Eigen::Matrix2d met;
      met << E, F, F, G;
      const Eigen::PartialPivLU<Eigen::Matrix2d> lu(met);
      const Eigen::VectorXd* second[2][2] = {{&jt.huu, &jt.huv}, {&jt.huv, &jt.hvv}};
      Christoffel& c = geo.christoffel(i, j);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const Eigen::Vector2d rhs(second[a][b]->dot(jt.hu), second[a][b]->dot(jt.hv));
          const Eigen::Vector2d gam = lu.solve(rhs);
          c.up[0](a, b) = gam(0);
          c.up[1](a, b) = gam(1);
        }

      Eigen::MatrixXd frame(m, nn);
      if (m == 4) {
        Eigen::VectorXd e = detail::cross4(jt.h, jt.hu, jt.hv);
        const double len = e.norm();
        if (!(len > 0)) throw DomainError("normal frame degenerates", Node{i, j, 0});
        frame.col(0) = e / len;
      } else {
        Eigen::MatrixXd basis = detail::tangent_basis(jt);
        int found = 0;
        for (int k : order) {
          if (found == nn) break;
          Eigen::VectorXd x = Eigen::VectorXd::Unit(m, k);
          for (int pass = 0; pass < 2; ++pass) {
            x -= basis * (basis.transpose() * x);
            if (found) x -= frame.leftCols(found) * (frame.leftCols(found).transpose() * x);
          }
          if (x.norm() < 1e-6) continue;
          frame.col(found++) = x.normalized();
        }
        if (found < nn) throw DomainError("normal frame degenerates", Node{i, j, 0});
      }
      geo.normals(i, j) = frame;
      for (int a = 0; a < nn; ++a) {
        geo.alpha_uu[a](i, j) = jt.huu.dot(frame.col(a));
        geo.alpha_uv[a](i, j) = jt.huv.dot(frame.col(a));
        geo.alpha_vv[a](i, j) = jt.hvv.dot(frame.col(a));
      }
    }
  geo.derive_coefficients();
  return geo;
}

// ---------------------------------------------------------------------------
// Conjugacy classification
// ---------------------------------------------------------------------------

enum class ConjugacyKind { hyperbolic, elliptic, parabolic, undetermined };

inline const char* to_string(ConjugacyKind k) {
  switch (k) {
    case ConjugacyKind::hyperbolic: return "hyperbolic";
    case ConjugacyKind::elliptic: return "elliptic";
    case ConjugacyKind::parabolic: return "parabolic";
    default: return "undetermined";
  }
}

inline double epsilon_of(ConjugacyKind k) {
  return k == ConjugacyKind::hyperbolic ? 1.0 : k == ConjugacyKind::elliptic ? -1.0 : 0.0;
}

struct ConjugacyStructure {
  ConjugacyKind kind = ConjugacyKind::undetermined;
  double epsilon = 0.0;
  Matrix2Field J;
  Field<ConjugacyKind> node_kind;
  Field<int> normal_dim;     // first normal space dimension per node
  double conjugacy_residual = 0.0;  // max |alpha(JX,Y) - alpha(X,JY)| relative to |alpha|
  double square_residual = 0.0;     // max ||J^2 - eps I||
  std::string note;
};

/// Makes the first nonzero entry among J(0,0), J(0,1), J(1,0) positive.
inline Eigen::Matrix2d fix_sign(Eigen::Matrix2d J) {
  const double lead[3] = {J(0, 0), J(0, 1), J(1, 0)};
  for (double x : lead)
    if (std::abs(x) > 1e-12) return x < 0 ? Eigen::Matrix2d(-J) : J;
  return J;
}

/// Per-node J with J^2 = eps I from the second-form moments; returns the node kind.
inline ConjugacyKind classify_node(const Eigen::MatrixXd& moments, Eigen::Matrix2d& J, int& dim) {
  // moments: (n-2) x 3 matrix with columns alpha_uu, 2 alpha_uv, alpha_vv
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(moments, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const double scale = moments.cwiseAbs().maxCoeff();
  dim = 0;
  if (scale > 1e-12)
    for (int k = 0; k < s.size(); ++k)
      if (s(k) > 1e-8 * s(0)) ++dim;
  J.setZero();
  if (dim >= 3) return ConjugacyKind::undetermined;
  if (dim == 2) {
    const Eigen::Vector3d nv = svd.matrixV().col(2);
    const double a = nv(0), c = nv(1), b = nv(2);
    const double disc = c * c - a * b;
    if (std::abs(disc) <= 1e-10 * (a * a + b * b + c * c)) {
      J << -c, a, -b, c;
      J = fix_sign(J);
      return ConjugacyKind::parabolic;
    }
    J << -c, a, -b, c;
    J /= std::sqrt(std::abs(disc));
    J = fix_sign(J);
    return disc > 0 ? ConjugacyKind::hyperbolic : ConjugacyKind::elliptic;
  }
  if (dim == 1) {
    // Rank-one first normal space: the relation leaves a pencil of solutions. The
    // coordinate-aligned ones are taken when the chart singles one out.
    const Eigen::Index r = [&] {
      Eigen::Index idx;
      moments.rowwise().norm().maxCoeff(&idx);
      return idx;
    }();
    const double auu = moments(r, 0), auv = 0.5 * moments(r, 1), avv = moments(r, 2);
    const double tiny = 1e-10 * scale;
    if (std::abs(auv) <= tiny) {
      J << 1, 0, 0, -1;
      return ConjugacyKind::hyperbolic;
    }
    if (std::abs(auu + avv) <= tiny) {
      J << 0, -1, 1, 0;
      J = fix_sign(J);
      return ConjugacyKind::elliptic;
    }
  }
  return ConjugacyKind::undetermined;
}

inline ConjugacyStructure classify(const ChartGeometry& geo) {
  const Grid2& g = geo.grid;
  const int nn = geo.normal_count();
  if (nn == 0) throw DomainError("classification needs the second fundamental form of h");
  ConjugacyStructure out;
  out.J = Matrix2Field(g, Eigen::Matrix2d::Zero());
  out.node_kind = Field<ConjugacyKind>(g, ConjugacyKind::undetermined);
  out.normal_dim = Field<int>(g, 0);
  bool uniform = true;
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      Eigen::MatrixXd mom(nn, 3);
      for (int a = 0; a < nn; ++a)
        mom.row(a) << geo.alpha_uu[a](i, j), 2.0 * geo.alpha_uv[a](i, j), geo.alpha_vv[a](i, j);
      Eigen::Matrix2d J;
      int dim = 0;
      const ConjugacyKind k = classify_node(mom, J, dim);
      if (dim >= 3) throw DomainError("first normal space of h has dimension 3", Node{i, j, 0});
      out.J(i, j) = J;
      out.node_kind(i, j) = k;
      out.normal_dim(i, j) = dim;
      if (k != out.node_kind(0, 0)) uniform = false;

      const double eps = epsilon_of(k);
      out.square_residual =
          std::max(out.square_residual, (J * J - eps * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff());
      if (k != ConjugacyKind::undetermined) {
        double scale = 1e-300, res = 0.0;
        for (int a = 0; a < nn; ++a) {
          const Eigen::Matrix2d al = geo.alpha(a, i, j);
          scale = std::max(scale, al.cwiseAbs().maxCoeff());
          res = std::max(res, (J.transpose() * al - al * J).cwiseAbs().maxCoeff());
        }
        out.conjugacy_residual = std::max(out.conjugacy_residual, res / scale);
      }
    }
  out.kind = uniform ? out.node_kind(0, 0) : ConjugacyKind::undetermined;
  out.epsilon = epsilon_of(out.kind);
  if (!uniform) {
    out.note = "node kinds differ across the chart";
  } else if (out.kind == ConjugacyKind::undetermined) {
    out.note = "first normal space has dimension < 2 and no conjugacy tensor is singled out";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Height functions
// ---------------------------------------------------------------------------

/// Covariant Hessian of a scalar with the given partial derivatives.
inline Eigen::Matrix2d covariant_hessian(const Christoffel& c, const Eigen::Matrix2d& second, const Eigen::Vector2d& grad) {
  Eigen::Matrix2d H;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) H(a, b) = second(a, b) - c.up[0](a, b) * grad(0) - c.up[1](a, b) * grad(1);
  return H;
}

/// Q applied to the height function h^a using the patch's own derivatives
/// (closed-form for analytic patches).
inline ScalarField height_q_analytic(const ChartGeometry& geo, int a) {
  if (!geo.has_jets()) throw DomainError("geometry carries no jets");
  ScalarField out(geo.grid);
  for (int j = 0; j < geo.grid.nv; ++j)
    for (int i = 0; i < geo.grid.nu; ++i) {
      const Jet& jt = geo.jets(i, j);
      out(i, j) = jt.huv(a) - geo.gamma_u(i, j) * jt.hu(a) - geo.gamma_v(i, j) * jt.hv(a) + geo.F(i, j) * jt.h(a);
    }
  return out;
}

/// Max over the band-interior of || B J - J^t B || with B = Hess_{h^a} + h^a g.
inline FieldMax hessian_commutation(const ChartGeometry& geo, const Matrix2Field& J, int a, int band = 2) {
  if (!geo.has_jets()) throw DomainError("geometry carries no jets");
  Field<double> res(geo.grid);
  for (int j = 0; j < geo.grid.nv; ++j)
    for (int i = 0; i < geo.grid.nu; ++i) {
      const Jet& jt = geo.jets(i, j);
      Eigen::Matrix2d second;
      second << jt.huu(a), jt.huv(a), jt.huv(a), jt.hvv(a);
      const Eigen::Matrix2d B = covariant_hessian(geo.christoffel(i, j), second, Eigen::Vector2d(jt.hu(a), jt.hv(a))) +
                                jt.h(a) * geo.metric(i, j);
      res(i, j) = (B * J(i, j) - J(i, j).transpose() * B).norm();
    }
  return max_abs(res, band);
}

}  // namespace gdeform
