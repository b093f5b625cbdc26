#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gdeform/catalog.hpp"
#include "gdeform/reconstruct.hpp"

using namespace gdeform;

namespace {

RotationalProfile wavy() {
  RotationalProfile p;
  p.r0 = 0.6;
  p.amp = 0.05;
  p.freq = 1.0;
  return p;
}

struct Instance {
  ChartGeometry geo;
  TripleField triple;
  FSample fs;
  GData gd;
};

Instance clifford(int n, const FunctionSpec& nu = FunctionSpec::sine(1, 0.2, 1), Grid1 tg = {}) {
  Instance r;
  r.geo = build_geometry(clifford_torus(Grid2(0, 1, 0, 1, n, n)));
  const auto d = build_pair(r.geo, FunctionSpec::c_minus_exp_m2lambda(3), FunctionSpec::constant(1), Normalization::metric);
  r.triple = triple_from_pair(r.geo, d);
  r.fs = gauss_param_f(r.geo, make_support(r.geo, nu_exp_lambda(r.geo, nu)), tg, r.triple.Jbar);
  r.gd = second_form_g(r.triple, r.fs, default_triple_tol(r.geo.grid));
  return r;
}

Instance rotational(int n, Grid1 tg = {}) {
  Instance r;
  r.geo = build_geometry(rotational_isothermic(Grid2(0, 1, 0, 1, n, n), wavy()));
  const auto d = build_pair(r.geo, FunctionSpec::c_minus_exp_m2lambda(4), FunctionSpec::constant(1));
  r.triple = triple_from_pair(r.geo, d);
  r.fs = gauss_param_f(r.geo, make_support(r.geo, nu_exp_lambda(r.geo, FunctionSpec::sine(1, 0.2, 1))), tg,
                       r.triple.Jbar);
  r.gd = second_form_g(r.triple, r.fs, default_triple_tol(r.geo.grid));
  return r;
}

std::filesystem::path tmp() {
  auto d = std::filesystem::temp_directory_path() / "gdeform_tests";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(GaussParam, CliffordConstantSupportSlice) {
  // gamma = e^lambda = 1/sqrt(2): at t = 0, f = h/sqrt(2) and f_a = h_a/sqrt(2)
  const auto in = clifford(16, FunctionSpec::constant(1));
  const auto& f = in.fs.f;
  const int k0 = f.tgrid.origin_index();
  ASSERT_EQ(f.tgrid.t(k0), 0.0);
  const double c = 1 / std::sqrt(2.0);
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) {
      const auto& jt = in.geo.jets(i, j);
      const std::size_t n = f.index(i, j, k0);
      EXPECT_LE((f.x[n] - c * jt.h).norm(), 1e-14);
      EXPECT_LE((f.tangent[n].col(0) - c * jt.hu).norm(), 1e-11);
      EXPECT_LE((f.tangent[n].col(1) - c * jt.hv).norm(), 1e-11);
      EXPECT_EQ(f.normal[n].col(0), jt.h);
      // second form rank 2 on horizontal vectors: II = -gamma g = -diag(1, 1)/(2 sqrt 2)
      EXPECT_NEAR(in.fs.second[n](0, 0), -c / 2, 1e-12);
      EXPECT_NEAR(in.fs.second[n](1, 1), -c / 2, 1e-12);
      EXPECT_NEAR(in.fs.second[n](0, 1), 0.0, 1e-12);
    }
  EXPECT_TRUE(in.fs.report.pass());
}

TEST(GaussParam, RulingShiftIsLinear) {
  const auto in = rotational(16);
  const auto& f = in.fs.f;
  const int k0 = f.tgrid.origin_index();
  for (int k = 0; k < f.tgrid.nt; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        const Eigen::VectorXd d = f.x[f.index(i, j, k)] - f.x[f.index(i, j, k0)];
        const Eigen::VectorXd e = (f.tgrid.t(k) - f.tgrid.t(k0)) * in.geo.normals(i, j).col(0);
        EXPECT_LE((d - e).norm(), 1e-15);
        EXPECT_EQ(f.tangent[f.index(i, j, k)].col(2), in.geo.normals(i, j).col(0));
      }
}

TEST(GaussParam, WeingartenCrossCheckConverges) {
  const auto a = rotational(32), b = rotational(64);
  EXPECT_EQ(a.fs.second_sign, 1);
  EXPECT_GE(a.fs.fd_residual / b.fs.fd_residual, 3.5);
  EXPECT_GT(b.fs.fd_residual_other, 0.1);
}

TEST(GaussParam, SingularParametrizationRetriesThenFails) {
  // Clifford with gamma = 1/sqrt(2): det P vanishes at t = +-1/sqrt(2)
  const double c = 1 / std::sqrt(2.0);
  const auto geo = build_geometry(clifford_torus(Grid2(0, 1, 0, 1, 12, 12)));
  const auto sf = make_support(geo, nu_exp_lambda(geo, FunctionSpec::constant(1)));
  const auto ok = gauss_param_f(geo, sf, Grid1{-c, c, 3});
  EXPECT_EQ(ok.retries, 1);
  EXPECT_NEAR(ok.f.tgrid.t1, c / 2, 1e-15);
  EXPECT_THROW(gauss_param_f(geo, sf, Grid1{-2 * c, 2 * c, 5}), DomainError);
  EXPECT_THROW(gauss_param_f(geo, make_support(geo, ScalarField(geo.grid, 0.0)), Grid1{}), DomainError);
}

TEST(SecondForm, CliffordIsDiagonal) {
  const auto in = clifford(16);
  for (std::size_t n = 0; n < in.fs.f.size(); ++n) {
    const std::size_t n2 = n % in.geo.grid.size();
    const auto& II1 = in.gd.II1[n];
    EXPECT_NEAR(II1(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(II1(0, 0), in.triple.D1.data()[n2](0, 0) * in.fs.second[n](0, 0), 1e-15);
    EXPECT_NEAR(II1(1, 1), in.triple.D1.data()[n2](1, 1) * in.fs.second[n](1, 1), 1e-15);
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(II1(2, c), 0.0);
      EXPECT_EQ(in.gd.II2[n](c, 2), 0.0);
    }
  }
  EXPECT_LE(in.gd.gauss_residual, 1e-9);
}

TEST(SecondForm, GaussEquationRotational) {
  EXPECT_LE(rotational(32).gd.gauss_residual, 1e-9);
}

TEST(SecondForm, RejectsAsymmetricData) {
  auto in = rotational(16);
  auto t = in.triple;
  t.D1 = t.D1.map([](const Eigen::Matrix2d& m) {
    Eigen::Matrix2d r = m;
    r(0, 1) += 10.0;
    return r;
  });
  EXPECT_THROW(second_form_g(t, in.fs, default_triple_tol(in.geo.grid)), DomainError);
}

TEST(FrameIntegration, ConstantConnectionHasTrivialHolonomy) {
  const auto in = clifford(16, FunctionSpec::constant(1));
  const int k0 = in.fs.f.tgrid.origin_index();
  const auto c = detail::frame_connection(in.fs, in.gd, k0);
  const Frame& U = c.omega_u(5, 7);
  const Frame& V = c.omega_v(5, 7);
  EXPECT_LE((U - c.omega_u(11, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((U * V - V * U).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(frame_integrate_g(in.fs, in.gd).holonomy.value, 1e-10);
}

TEST(FrameIntegration, HolonomyAndPathIndependenceConverge) {
  double hol[3], transp[3];
  int n = 32;
  for (int r = 0; r < 3; ++r, n *= 2) {
    const auto in = rotational(n);
    const auto a = frame_integrate_g(in.fs, in.gd);
    const auto b = frame_integrate_g(in.fs, in.gd, PathOrder::v_then_u);
    hol[r] = a.holonomy.value;
    transp[r] = max_position_difference(a.g, b.g);
  }
  for (int r = 0; r < 2; ++r) {
    EXPECT_GE(std::log2(hol[r] / hol[r + 1]), 1.8);
    EXPECT_GE(std::log2(transp[r] / transp[r + 1]), 1.8);
  }
}

TEST(FrameIntegration, ZeroDeformationReproducesF) {
  double err[2];
  for (int r = 0; r < 2; ++r) {
    const auto in = rotational(r == 0 ? 32 : 64);
    const auto z = frame_integrate_g(in.fs, zero_deformation(in.fs));
    const auto al = rigid_align(z.g, in.fs.f);
    err[r] = al.max_error;
    // the canonical start already places g in R^4 x {0}
    for (const auto& x : z.g.x) EXPECT_LE(std::abs(x(4)), 1e-12);
    EXPECT_LE(isometry_check(in.fs.f, z.g).normal_rank, 1);
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 1.8);
}

TEST(Isometry, TrivialComparisons) {
  const auto in = clifford(16);
  EXPECT_EQ(isometry_check(in.fs.f, in.fs.f).max_relative_deviation, 0.0);
  const auto g = frame_integrate_g(in.fs, in.gd).g;
  // rigid motion: rotation in the (x1, x5) plane plus a shift
  Immersion moved = g;
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(5, 5);
  const double a = 0.7;
  R(0, 0) = std::cos(a), R(0, 4) = -std::sin(a), R(4, 0) = std::sin(a), R(4, 4) = std::cos(a);
  for (std::size_t n = 0; n < g.size(); ++n) {
    moved.x[n] = R * g.x[n] + Eigen::VectorXd::Constant(5, 3.0);
    moved.tangent[n] = R * g.tangent[n];
    moved.normal[n] = R * g.normal[n];
  }
  EXPECT_LE(isometry_check(g, moved).max_relative_deviation, 1e-14);
  const auto al = rigid_align(moved, g);
  EXPECT_LE(al.max_error, 1e-12);
}

TEST(Isometry, CliffordConvergesAndIsGenuine) {
  double dev[2];
  for (int r = 0; r < 2; ++r) {
    const auto in = clifford(r == 0 ? 32 : 64);
    const auto g = frame_integrate_g(in.fs, in.gd);
    const auto iso = isometry_check(in.fs.f, g.g);
    dev[r] = iso.max_relative_deviation;
    EXPECT_EQ(iso.normal_rank, 2);
    EXPECT_TRUE(g.g.check().pass());
  }
  EXPECT_LE(dev[1], 5e-3);
  EXPECT_GE(std::log2(dev[0] / dev[1]), 1.8);
}

TEST(Export, CsvAndObjCounts) {
  const auto in = clifford(8, FunctionSpec::constant(1), Grid1{0, 0, 1});
  const auto g = frame_integrate_g(in.fs, in.gd).g;
  write_immersion_csv(tmp() / "g.csv", g);
  std::ifstream csv(tmp() / "g.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "u,v,t,x1,x2,x3,x4,x5");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 64);

  write_obj(tmp() / "g.obj", g, 0);
  std::ifstream obj(tmp() / "g.obj");
  int v = 0, f = 0, proj = 0;
  while (std::getline(obj, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
    if (line.rfind("# projection row", 0) == 0) ++proj;
  }
  EXPECT_EQ(v, 64);
  EXPECT_EQ(f, 98);
  EXPECT_EQ(proj, 3);
  const auto P = obj_projection(g, 0);
  EXPECT_LE((P * P.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Export, CsvRoundTripIsBitExact) {
  // export the Gauss map itself so that the sphere-patch reader accepts it
  const auto geo = build_geometry(rotational_isothermic(Grid2(0, 1, 0, 1, 9, 11), wavy()));
  Immersion h;
  h.name = "h";
  h.m = 4;
  h.grid = geo.grid;
  h.tgrid = Grid1{0, 0, 1};
  for (std::size_t n = 0; n < geo.grid.size(); ++n) h.x.push_back(geo.jets.data()[n].h);
  write_immersion_csv(tmp() / "h.csv", h);
  const auto back = sampled_patch(tmp() / "h.csv");
  ASSERT_EQ(back.grid(), geo.grid);
  for (int j = 0; j < 11; ++j)
    for (int i = 0; i < 9; ++i) EXPECT_EQ(back.jet(i, j).h, geo.jets(i, j).h);
}

TEST(Export, UnwritablePath) {
  const auto in = clifford(8);
  EXPECT_THROW(write_immersion_csv("/nonexistent_dir/x.csv", in.fs.f), IoError);
  EXPECT_THROW(write_obj("/nonexistent_dir/x.obj", in.fs.f, 0), IoError);
}
