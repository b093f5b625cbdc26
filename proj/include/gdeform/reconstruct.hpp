#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "gdeform/calculus.hpp"
#include "gdeform/defdata.hpp"
#include "gdeform/field_io.hpp"
#include "gdeform/gaussmap.hpp"
#include "gdeform/report.hpp"
#include "gdeform/triplefield.hpp"

namespace gdeform {

/// Immersion of the (u,v,t)-grid. Node index i + nu (j + nv k).
struct Immersion {
  std::string name;
  int m = 0;
  Grid2 grid;
  Grid1 tgrid;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::MatrixXd> tangent;  // m x 3: d/du, d/dv, d/dt
  std::vector<Eigen::MatrixXd> normal;   // m x q, orthonormal

  std::size_t size() const { return grid.size() * static_cast<std::size_t>(tgrid.nt); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.nu) * (j + static_cast<std::size_t>(grid.nv) * k);
  }
  Node node(std::size_t n) const {
    const int i = static_cast<int>(n % grid.nu);
    const int j = static_cast<int>((n / grid.nu) % grid.nv);
    const int k = static_cast<int>(n / grid.size());
    return {i, j, k};
  }
  Eigen::Matrix3d metric(std::size_t n) const { return tangent[n].transpose() * tangent[n]; }

  /// Frames of full rank and normals orthonormal and orthogonal to them.
  VerificationReport check() const {
    VerificationReport r;
    r.title = name + " sample";
    double rank = INFINITY, orth = 0;
    Node rn{}, on{};
    for (std::size_t n = 0; n < size(); ++n) {
      const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(tangent[n]).singularValues();
      const double ratio = s(s.size() - 1) / s(0);
      if (ratio < rank) rank = ratio, rn = node(n);
      const Eigen::MatrixXd& N = normal[n];
      const double e = std::max((N.transpose() * N - Eigen::MatrixXd::Identity(N.cols(), N.cols())).cwiseAbs().maxCoeff(),
                                (N.transpose() * tangent[n]).cwiseAbs().maxCoeff() / s(0));
      if (e > orth) orth = e, on = node(n);
    }
    r.margin("frame_rank_ratio", rank, 1e-8, rn);
    r.residual("normal_orthonormality", orth, 1e-8, on);
    return r;
  }
};

// ---------------------------------------------------------------------------
// f from (h, gamma)
// ---------------------------------------------------------------------------

struct FSample {
  Immersion f;
  std::vector<Eigen::Matrix2d> S;          // Hess + gamma g - t alpha^e, per 3D node
  std::vector<Eigen::Matrix2d> second;     // II_f on horizontal vectors, per 3D node
  std::vector<Eigen::MatrixXd> tangent_t;  // d/dt of the tangent frame (t-independent), per 2D node
  int second_sign = 1;                     // II_f = second_sign * (-S)
  double fd_residual = 0;                  // Weingarten cross-check with the chosen sign
  double fd_residual_other = 0;            // same with the opposite sign
  double min_abs_det_p = 0;
  int retries = 0;
  VerificationReport report;
};

namespace detail {

inline void fail_det(double d, const Node& n) {
  throw DomainError("parametrization singular: det P = " + format_double(d), n);
}

}  // namespace detail

/// f(y, t) = gamma h + h_* grad gamma + t e with e the unit normal of h in S^3.
/// The connection of f differentiates the Hessian of gamma once more, so gamma is
/// re-differentiated here with the fourth-order stencils.
inline FSample gauss_param_f(const ChartGeometry& geo, const SupportFunction& support, Grid1 tg,
                             const Eigen::Matrix2d& Jbar = Eigen::Matrix2d::Identity()) {
  if (!geo.has_jets()) throw DomainError("reconstruction needs the jets of h");
  if (geo.ambient != 4) throw DomainError("reconstruction is implemented for h into S^3 (ambient dimension 4)");
  if (tg.nt < 1) throw ConfigError("t-grid needs at least one node");
  const Grid2& g = geo.grid;
  if (!(support.gamma.grid() == g)) throw DomainError("support function on a different grid");
  const SupportFunction sf = make_support(geo, support.gamma, 4);

  FSample out;
  for (int attempt = 0;; ++attempt) {
    Node bad{};
    double bad_det = 0;
    bool ok = true;
    out.S.assign(g.size() * tg.nt, Eigen::Matrix2d::Zero());
    double mindet = INFINITY;
    for (int k = 0; k < tg.nt && ok; ++k)
      for (int j = 0; j < g.nv && ok; ++j)
        for (int i = 0; i < g.nu; ++i) {
          const std::size_t n2 = g.index(i, j);
          const Eigen::Matrix2d met = geo.metric(i, j);
          const Eigen::Matrix2d S = sf.hess.data()[n2] + sf.gamma.data()[n2] * met - tg.t(k) * geo.alpha(0, i, j);
          const double d = S.determinant() / met.determinant();
          mindet = std::min(mindet, std::abs(d));
          if (!(std::abs(d) > 1e-10)) {
            ok = false, bad = {i, j, k}, bad_det = d;
            break;
          }
          out.S[n2 + g.size() * k] = S;
        }
    if (ok) {
      out.min_abs_det_p = mindet;
      break;
    }
    if (attempt == 1) detail::fail_det(bad_det, bad);
    tg.t0 *= 0.5;
    tg.t1 *= 0.5;
    ++out.retries;
  }

  Immersion& f = out.f;
  f.name = "f";
  f.m = 4;
  f.grid = g;
  f.tgrid = tg;
  f.x.resize(f.size());
  f.tangent.resize(f.size());
  f.normal.resize(f.size());
  out.tangent_t.resize(g.size());
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const std::size_t n2 = g.index(i, j);
      const Jet& jt = geo.jets(i, j);
      const Eigen::VectorXd e = geo.normals(i, j).col(0);
      const Eigen::Matrix2d met = geo.metric(i, j);
      const Eigen::Matrix2d al = geo.alpha(0, i, j);
      const Eigen::Vector2d grad = sf.grad.data()[n2];
      Eigen::Matrix<double, Eigen::Dynamic, 2> hd(4, 2);
      hd << jt.hu, jt.hv;
      const Eigen::Vector2d c = al * grad;
      // e_a = -(g^{-1} alpha)^m_a h_m
      const Eigen::Matrix2d W = met.ldlt().solve(al);
      Eigen::MatrixXd dt = Eigen::MatrixXd::Zero(4, 3);
      dt.leftCols(2) = -hd * W;
      out.tangent_t[n2] = dt;
      for (int k = 0; k < tg.nt; ++k) {
        const std::size_t n = f.index(i, j, k);
        const double t = tg.t(k);
        const Eigen::Matrix2d P = met.ldlt().solve(out.S[n]);
        f.x[n] = sf.gamma.data()[n2] * jt.h + hd * grad + t * e;
        Eigen::MatrixXd T(4, 3);
        T.leftCols(2) = hd * P + e * c.transpose();
        T.col(2) = e;
        f.tangent[n] = T;
        f.normal[n] = jt.h;
      }
    }

  // Weingarten cross-check: II_FD(a, b) = -<dN/da, f_b> on the slice nearest t = 0
  const int k0 = tg.origin_index();
  Field<Eigen::VectorXd> N(g);
  for (std::size_t n2 = 0; n2 < g.size(); ++n2) N.data()[n2] = f.normal[n2 + g.size() * k0].col(0);
  const auto Nu = diff_u(N), Nv = diff_v(N);
  double rplus = 0, rminus = 0;
  for (int j = 2; j < g.nv - 2; ++j)
    for (int i = 2; i < g.nu - 2; ++i) {
      const std::size_t n2 = g.index(i, j), n = f.index(i, j, k0);
      Eigen::Matrix2d fd;
      for (int b = 0; b < 2; ++b) {
        fd(0, b) = -Nu(i, j).dot(f.tangent[n].col(b));
        fd(1, b) = -Nv(i, j).dot(f.tangent[n].col(b));
      }
      rplus = std::max(rplus, (fd + out.S[n]).cwiseAbs().maxCoeff());
      rminus = std::max(rminus, (fd - out.S[n]).cwiseAbs().maxCoeff());
      (void)n2;
    }
  out.second_sign = rplus <= rminus ? 1 : -1;
  out.fd_residual = std::min(rplus, rminus);
  out.fd_residual_other = std::max(rplus, rminus);
  out.second.resize(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) out.second[n] = -out.second_sign * out.S[n];

  VerificationReport& rep = out.report;
  rep.title = "f";
  rep.append(f.check());
  double sym = 0, comm = 0;
  Node cn{};
  for (std::size_t n = 0; n < f.size(); ++n) {
    sym = std::max(sym, (out.S[n] - out.S[n].transpose()).cwiseAbs().maxCoeff());
    const double c = (out.S[n] * Jbar - Jbar.transpose() * out.S[n]).cwiseAbs().maxCoeff();
    if (c > comm) comm = c, cn = f.node(n);
  }
  rep.residual("p_symmetry", sym, 1e-10);
  rep.info["second_sign"] = out.second_sign;
  rep.info["weingarten_fd_residual"] = out.fd_residual;
  rep.info["weingarten_fd_residual_opposite_sign"] = out.fd_residual_other;
  rep.info["min_abs_det_p"] = out.min_abs_det_p;
  rep.info["t_range"] = ordered_json::array({tg.t0, tg.t1});
  rep.info["t_range_retries"] = out.retries;
  rep.info["p_commutation"] = comm;
  rep.info["p_commutation_node"] = to_json(cn);
  rep.info["ruling"] = "unit normal of h in S^3";
  return out;
}

// ---------------------------------------------------------------------------
// Second fundamental form and normal connection of g
// ---------------------------------------------------------------------------

struct GData {
  std::vector<Eigen::Matrix3d> II1, II2;  // per 3D node, vanishing on the ruling
  Field<Eigen::Vector2d> phi;             // (phi_u, phi_v), constant along t
  double symmetry_residual = 0;
  double gauss_residual = 0;
  Node symmetry_node{}, gauss_node{};
};

/// alpha_g(X, Y) = sum <A D_i X, Y> xi_i with II^i = D_i^t II_f on horizontal vectors.
inline GData second_form_g(const TripleField& tr, const FSample& fs, double tol) {
  const Immersion& f = fs.f;
  if (!(tr.grid == f.grid)) throw DomainError("triple and f sample on different grids");
  GData gd;
  gd.II1.resize(f.size());
  gd.II2.resize(f.size());
  gd.phi = Field<Eigen::Vector2d>(f.grid);
  for (std::size_t n2 = 0; n2 < f.grid.size(); ++n2)
    gd.phi.data()[n2] = Eigen::Vector2d(tr.phi_u.data()[n2], tr.phi_v.data()[n2]);
  for (std::size_t n = 0; n < f.size(); ++n) {
    const std::size_t n2 = n % f.grid.size();
    const Eigen::Matrix2d& A = fs.second[n];
    double det_sum = 0;
    for (int i = 0; i < 2; ++i) {
      const Eigen::Matrix2d B = (i == 0 ? tr.D1 : tr.D2).data()[n2].transpose() * A;
      const double s = (B - B.transpose()).cwiseAbs().maxCoeff();
      if (s > gd.symmetry_residual) gd.symmetry_residual = s, gd.symmetry_node = f.node(n);
      const Eigen::Matrix2d Bs = 0.5 * (B + B.transpose());
      Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
      M.topLeftCorner<2, 2>() = Bs;
      (i == 0 ? gd.II1 : gd.II2)[n] = M;
      det_sum += B.determinant();
    }
    const double gres = std::abs(det_sum - A.determinant());
    if (gres > gd.gauss_residual) gd.gauss_residual = gres, gd.gauss_node = f.node(n);
  }
  if (gd.symmetry_residual > tol)
    throw DomainError("second form of g is not symmetric (residual " + format_double(gd.symmetry_residual) + ")",
                      gd.symmetry_node);
  return gd;
}

/// Data that re-integrates f itself: II^1 = II_f, II^2 = 0, phi = 0.
inline GData zero_deformation(const FSample& fs) {
  GData gd;
  const Immersion& f = fs.f;
  gd.II1.resize(f.size());
  gd.II2.assign(f.size(), Eigen::Matrix3d::Zero());
  gd.phi = Field<Eigen::Vector2d>(f.grid, Eigen::Vector2d::Zero());
  for (std::size_t n = 0; n < f.size(); ++n) {
    gd.II1[n] = Eigen::Matrix3d::Zero();
    gd.II1[n].topLeftCorner<2, 2>() = fs.second[n];
  }
  return gd;
}

// ---------------------------------------------------------------------------
// Frame integration
// ---------------------------------------------------------------------------

using Frame = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

enum class PathOrder { u_then_v, v_then_u };

struct GSample {
  Immersion g;
  std::vector<Frame> frame;  // base slice: rows g_u, g_v, g_t, xi1, xi2
  int base_k = 0;
  FieldMax holonomy;         // max frame defect around grid cells
  PathOrder order = PathOrder::u_then_v;
};

namespace detail {

struct Connection {
  Field<Frame> omega_u, omega_v;
};

// Omega_a for the frame system dF/da = Omega_a F on the base slice.
inline Connection frame_connection(const FSample& fs, const GData& gd, int k0) {
  const Immersion& f = fs.f;
  const Grid2& g = f.grid;
  Field<Eigen::Matrix3d> G(g), Gt(g);
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const std::size_t n = f.index(i, j, k0), n2 = g.index(i, j);
      const Eigen::MatrixXd& T = f.tangent[n];
      const Eigen::MatrixXd& D = fs.tangent_t[n2];
      G(i, j) = T.transpose() * T;
      Gt(i, j) = D.transpose() * T + T.transpose() * D;
    }
  const auto Gu = diff_u(G), Gv = diff_v(G);
  Connection c{Field<Frame>(g), Field<Frame>(g)};
  for (std::size_t n2 = 0; n2 < g.size(); ++n2) {
    const std::array<const Eigen::Matrix3d*, 3> dG{&Gu.data()[n2], &Gv.data()[n2], &Gt.data()[n2]};
    const Eigen::Matrix3d Ginv = G.data()[n2].inverse();
    const std::size_t n = n2 + g.size() * k0;
    const Eigen::Vector2d ph = gd.phi.data()[n2];
    for (int a = 0; a < 2; ++a) {
      Frame W = Frame::Zero();
      for (int b = 0; b < 3; ++b) {
        // Christoffel symbols of the first kind, then raised
        Eigen::Vector3d first;
        for (int cc = 0; cc < 3; ++cc)
          first(cc) = 0.5 * ((*dG[a])(b, cc) + (*dG[b])(a, cc) - (*dG[cc])(a, b));
        W.block<1, 3>(b, 0) = (Ginv * first).transpose();
        W(b, 3) = gd.II1[n](a, b);
        W(b, 4) = gd.II2[n](a, b);
      }
      W.block<1, 3>(3, 0) = -(Ginv * gd.II1[n].col(a)).transpose();
      W.block<1, 3>(4, 0) = -(Ginv * gd.II2[n].col(a)).transpose();
      W(3, 4) = ph(a);
      W(4, 3) = -ph(a);
      (a == 0 ? c.omega_u : c.omega_v).data()[n2] = W;
    }
  }
  return c;
}

inline Frame step_map(const Frame& w0, const Frame& w1, double h) { return (0.5 * h * (w0 + w1)).exp(); }

}  // namespace detail

/// Integrates dF = Omega F over the base slice along a lexicographic path family and
/// extends along the straight rulings.
inline GSample frame_integrate_g(const FSample& fs, const GData& gd, PathOrder order = PathOrder::u_then_v) {
  const Immersion& f = fs.f;
  const Grid2& g = f.grid;
  const Grid1& tg = f.tgrid;
  const int k0 = tg.origin_index();
  const auto conn = detail::frame_connection(fs, gd, k0);
  const double hu = g.hu(), hv = g.hv();

  GSample out;
  out.order = order;
  out.base_k = k0;
  out.frame.assign(g.size(), Frame::Zero());
  std::vector<Vec5> pos(g.size(), Vec5::Zero());

  // initial frame: f's frame in R^4 x {0}, xi1 = (N, 0), xi2 = e5
  {
    const std::size_t n = f.index(0, 0, k0);
    Frame F = Frame::Zero();
    for (int r = 0; r < 3; ++r) F.block<1, 4>(r, 0) = f.tangent[n].col(r).transpose();
    F.block<1, 4>(3, 0) = f.normal[n].col(0).transpose();
    F(4, 4) = 1.0;
    out.frame[0] = F;
    pos[0].head<4>() = f.x[n];
  }
  auto march = [&](int i0, int j0, int i1, int j1) {
    const std::size_t a = g.index(i0, j0), b = g.index(i1, j1);
    const bool along_u = j0 == j1;
    const double h = along_u ? (i1 - i0) * hu : (j1 - j0) * hv;
    const auto& W = along_u ? conn.omega_u : conn.omega_v;
    out.frame[b] = detail::step_map(W.data()[a], W.data()[b], h) * out.frame[a];
    const int row = along_u ? 0 : 1;
    pos[b] = pos[a] + 0.5 * h * (out.frame[a].row(row) + out.frame[b].row(row)).transpose();
  };
  if (order == PathOrder::u_then_v) {
    for (int i = 1; i < g.nu; ++i) march(i - 1, 0, i, 0);
    for (int i = 0; i < g.nu; ++i)
      for (int j = 1; j < g.nv; ++j) march(i, j - 1, i, j);
  } else {
    for (int j = 1; j < g.nv; ++j) march(0, j - 1, 0, j);
    for (int j = 0; j < g.nv; ++j)
      for (int i = 1; i < g.nu; ++i) march(i - 1, j, i, j);
  }

  // plaquette holonomy
  out.holonomy = FieldMax{0.0, Node{0, 0, k0}};
  for (int j = 0; j + 1 < g.nv; ++j)
    for (int i = 0; i + 1 < g.nu; ++i) {
      const auto& U = conn.omega_u;
      const auto& V = conn.omega_v;
      const Frame M1 = detail::step_map(U(i, j), U(i + 1, j), hu);
      const Frame M2 = detail::step_map(V(i + 1, j), V(i + 1, j + 1), hv);
      const Frame M3 = detail::step_map(U(i + 1, j + 1), U(i, j + 1), -hu);
      const Frame M4 = detail::step_map(V(i, j + 1), V(i, j), -hv);
      const Frame& F = out.frame[g.index(i, j)];
      const double d = (M4 * M3 * M2 * M1 * F - F).cwiseAbs().maxCoeff();
      if (d > out.holonomy.value) out.holonomy = FieldMax{d, Node{i, j, k0}};
    }

  // straight rulings: g(y, t) = g(y, t0) + (t - t0) g_t(y, t0)
  Immersion& G = out.g;
  G.name = "g";
  G.m = 5;
  G.grid = g;
  G.tgrid = tg;
  G.x.resize(G.size());
  G.tangent.resize(G.size());
  G.normal.resize(G.size());
  for (std::size_t n2 = 0; n2 < g.size(); ++n2) {
    const Frame& F = out.frame[n2];
    const Eigen::Matrix<double, 3, 5> dT_du = (conn.omega_u.data()[n2] * F).topRows<3>();
    const Eigen::Matrix<double, 3, 5> dT_dv = (conn.omega_v.data()[n2] * F).topRows<3>();
    for (int k = 0; k < tg.nt; ++k) {
      const double s = tg.t(k) - tg.t(k0);
      const std::size_t n = n2 + g.size() * k;
      G.x[n] = pos[n2] + s * F.row(2).transpose();
      Eigen::MatrixXd T(5, 3);
      T.col(0) = F.row(0).transpose() + s * dT_du.row(2).transpose();
      T.col(1) = F.row(1).transpose() + s * dT_dv.row(2).transpose();
      T.col(2) = F.row(2).transpose();
      G.tangent[n] = T;
      // the integrated normals are orthonormal only to discretization order; store the
      // orthonormal complement of the tangent frame closest to them
      Eigen::MatrixXd Nn(5, 2);
      Nn.col(0) = F.row(3).transpose();
      Nn.col(1) = F.row(4).transpose();
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr(T);
      const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(5, 3);
      Nn -= Q * (Q.transpose() * Nn);
      const Eigen::HouseholderQR<Eigen::MatrixXd> qn(Nn);
      Eigen::MatrixXd Z = qn.householderQ() * Eigen::MatrixXd::Identity(5, 2);
      for (int c = 0; c < 2; ++c)
        if (Z.col(c).dot(Nn.col(c)) < 0) Z.col(c) *= -1;
      G.normal[n] = Z;
    }
  }
  return out;
}

inline ordered_json to_json(PathOrder o) { return o == PathOrder::u_then_v ? "u_then_v" : "v_then_u"; }

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct IsometryReport {
  double max_relative_deviation = 0;
  Node node{};
  int normal_rank = 0;            // minimal numerical rank of the first normal space of g
  double normal_rank_margin = 0;  // min sigma2/sigma1 over interior base-slice nodes
  Node rank_node{};
};

/// Induced metrics compared nodewise; the first normal space of g is measured from
/// finite differences of its tangent frame.
inline IsometryReport isometry_check(const Immersion& a, const Immersion& b) {
  if (!(a.grid == b.grid) || a.tgrid.nt != b.tgrid.nt) throw DomainError("samples on different grids");
  IsometryReport r;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const Eigen::Matrix3d ga = a.metric(n), gb = b.metric(n);
    const double d = (ga - gb).norm() / ga.norm();
    if (d > r.max_relative_deviation) r.max_relative_deviation = d, r.node = a.node(n);
  }
  const Grid2& g = b.grid;
  const int k0 = b.tgrid.origin_index();
  const int q = static_cast<int>(b.normal.front().cols());
  Field<Eigen::VectorXd> Tu(g), Tv(g), Tt(g);
  for (std::size_t n2 = 0; n2 < g.size(); ++n2) {
    const std::size_t n = n2 + g.size() * k0;
    Tu.data()[n2] = b.tangent[n].col(0);
    Tv.data()[n2] = b.tangent[n].col(1);
    Tt.data()[n2] = b.tangent[n].col(2);
  }
  const auto Tuu = diff_u(Tu), Tuv = diff_v(Tu), Tvv = diff_v(Tv), Tut = diff_u(Tt), Tvt = diff_v(Tt);
  r.normal_rank_margin = INFINITY;
  r.normal_rank = q;
  for (int j = 2; j < g.nv - 2; ++j)
    for (int i = 2; i < g.nu - 2; ++i) {
      const std::size_t n2 = g.index(i, j), n = n2 + g.size() * k0;
      Eigen::MatrixXd M(q, 5);
      for (int c = 0; c < q; ++c) {
        const Eigen::VectorXd xi = b.normal[n].col(c);
        M(c, 0) = xi.dot(Tuu.data()[n2]);
        M(c, 1) = xi.dot(Tuv.data()[n2]);
        M(c, 2) = xi.dot(Tvv.data()[n2]);
        M(c, 3) = xi.dot(Tut.data()[n2]);
        M(c, 4) = xi.dot(Tvt.data()[n2]);
      }
      const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues();
      const double ratio = s(0) > 0 ? s(s.size() - 1) / s(0) : 0.0;
      if (ratio < r.normal_rank_margin) r.normal_rank_margin = ratio, r.rank_node = {i, j, k0};
      int rank = 0;
      for (int c = 0; c < s.size(); ++c)
        if (s(c) > 1e-3 * s(0)) ++rank;
      r.normal_rank = std::min(r.normal_rank, rank);
    }
  return r;
}

struct Alignment {
  Eigen::MatrixXd R;
  Eigen::VectorXd shift;
  double max_error = 0;
  Node node{};
};

/// Optimal rigid motion x -> R x + shift taking `moving` onto `fixed` (Kabsch), with the
/// smaller dimension padded by zeros.
inline Alignment rigid_align(const Immersion& moving, const Immersion& fixed) {
  if (moving.size() != fixed.size()) throw DomainError("samples of different sizes");
  const int m = std::max(moving.m, fixed.m);
  auto pad = [m](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    y.head(x.size()) = x;
    return y;
  };
  const std::size_t N = moving.size();
  Eigen::VectorXd cm = Eigen::VectorXd::Zero(m), cf = Eigen::VectorXd::Zero(m);
  for (std::size_t n = 0; n < N; ++n) cm += pad(moving.x[n]), cf += pad(fixed.x[n]);
  cm /= double(N);
  cf /= double(N);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t n = 0; n < N; ++n) H += (pad(moving.x[n]) - cm) * (pad(fixed.x[n]) - cf).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(m, m);
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) D(m - 1, m - 1) = -1;
  Alignment a;
  a.R = svd.matrixV() * D * svd.matrixU().transpose();
  a.shift = cf - a.R * cm;
  for (std::size_t n = 0; n < N; ++n) {
    const double e = (a.R * pad(moving.x[n]) + a.shift - pad(fixed.x[n])).norm();
    if (e > a.max_error) a.max_error = e, a.node = moving.node(n);
  }
  return a;
}

inline double max_position_difference(const Immersion& a, const Immersion& b) {
  double d = 0;
  for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, (a.x[n] - b.x[n]).norm());
  return d;
}

inline ordered_json to_json(const IsometryReport& r) {
  ordered_json j = ordered_json::object();
  j["max_relative_deviation"] = r.max_relative_deviation;
  j["node"] = to_json(r.node);
  j["normal_rank"] = r.normal_rank;
  j["normal_rank_margin"] = r.normal_rank_margin;
  j["normal_rank_node"] = to_json(r.rank_node);
  return j;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline void write_immersion_csv(const std::filesystem::path& path, const Immersion& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "u,v,t";
  for (int c = 1; c <= s.m; ++c) out << ",x" << c;
  out << '\n';
  for (int k = 0; k < s.tgrid.nt; ++k)
    for (int j = 0; j < s.grid.nv; ++j)
      for (int i = 0; i < s.grid.nu; ++i) {
        const auto& x = s.x[s.index(i, j, k)];
        out << format_double(s.grid.u(i)) << ',' << format_double(s.grid.v(j)) << ',' << format_double(s.tgrid.t(k));
        for (int c = 0; c < s.m; ++c) out << ',' << format_double(x(c));
        out << '\n';
      }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Rows of the orthogonal projection used for OBJ output: the three leading principal
/// axes of the slice, each with its largest entry positive.
inline Eigen::MatrixXd obj_projection(const Immersion& s, int k) {
  if (s.m == 3) return Eigen::MatrixXd::Identity(3, 3);
  const std::size_t N = s.grid.size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(s.m);
  for (std::size_t n = 0; n < N; ++n) c += s.x[n + N * k];
  c /= double(N);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(s.m, s.m);
  for (std::size_t n = 0; n < N; ++n) C += (s.x[n + N * k] - c) * (s.x[n + N * k] - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  Eigen::MatrixXd P(3, s.m);
  for (int r = 0; r < 3; ++r) {
    Eigen::VectorXd v = es.eigenvectors().col(s.m - 1 - r);
    Eigen::Index at;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0) v = -v;
    P.row(r) = v.transpose();
  }
  return P;
}

inline void write_obj(const std::filesystem::path& path, const Immersion& s, int k) {
  if (k < 0 || k >= s.tgrid.nt) throw DomainError("OBJ slice index out of range");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const Eigen::MatrixXd P = obj_projection(s, k);
  out << "# " << s.name << " slice t = " << format_double(s.tgrid.t(k)) << ", " << s.grid.nu << "x" << s.grid.nv
      << " nodes\n";
  for (int r = 0; r < 3; ++r) {
    out << "# projection row " << r + 1 << ":";
    for (int c = 0; c < s.m; ++c) out << ' ' << format_double(P(r, c));
    out << '\n';
  }
  for (int j = 0; j < s.grid.nv; ++j)
    for (int i = 0; i < s.grid.nu; ++i) {
      const Eigen::Vector3d y = P * s.x[s.index(i, j, k)];
      out << "v " << format_double(y(0)) << ' ' << format_double(y(1)) << ' ' << format_double(y(2)) << '\n';
    }
  auto id = [&](int i, int j) { return 1 + i + s.grid.nu * j; };
  for (int j = 0; j + 1 < s.grid.nv; ++j)
    for (int i = 0; i + 1 < s.grid.nu; ++i) {
      out << "f " << id(i, j) << ' ' << id(i + 1, j) << ' ' << id(i + 1, j + 1) << '\n';
      out << "f " << id(i, j) << ' ' << id(i + 1, j + 1) << ' ' << id(i, j + 1) << '\n';
    }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gdeform
