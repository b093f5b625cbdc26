#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gdeform/catalog.hpp"
#include "gdeform/gaussmap.hpp"

using namespace gdeform;

namespace {

const double kPi = std::acos(-1.0);

Grid2 chart64() { return Grid2(0.0, 1.0, 0.0, 1.0, 64, 64); }

RotationalProfile wavy() {
  RotationalProfile p;
  p.r0 = 0.6;
  p.amp = 0.05;
  p.freq = 1.0;
  return p;
}

SurfacePatch round_sphere(const Grid2& g) {
  return SurfacePatch::analytic("round_sphere", g, 4, [](double u, double v) {
    Jet jt;
    const double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
    jt.h = Eigen::Vector4d(cu * cv, cu * sv, su, 0);
    jt.hu = Eigen::Vector4d(-su * cv, -su * sv, cu, 0);
    jt.hv = Eigen::Vector4d(-cu * sv, cu * cv, 0, 0);
    jt.huu = Eigen::Vector4d(-cu * cv, -cu * sv, -su, 0);
    jt.huv = Eigen::Vector4d(su * sv, -su * cv, 0, 0);
    jt.hvv = Eigen::Vector4d(-cu * cv, -cu * sv, 0, 0);
    return jt;
  });
}

std::vector<ScalarField> sample_coords(const SurfacePatch& p) {
  std::vector<ScalarField> c;
  for (int a = 0; a < p.ambient(); ++a) c.push_back(p.height(a));
  return c;
}

double gauss_formula_residual(const ChartGeometry& geo, int band) {
  double worst = 0;
  for (int j = band; j < geo.grid.nv - band; ++j)
    for (int i = band; i < geo.grid.nu - band; ++i) {
      const Jet& jt = geo.jets(i, j);
      Eigen::VectorXd r = jt.huv - geo.gamma_u(i, j) * jt.hu - geo.gamma_v(i, j) * jt.hv + geo.F(i, j) * jt.h;
      for (int a = 0; a < geo.normal_count(); ++a) r -= geo.alpha_uv[a](i, j) * geo.normals(i, j).col(a);
      worst = std::max(worst, r.norm());
    }
  return worst;
}

}  // namespace

TEST(CliffordTorus, MetricAndConnectionFromClosedForm) {
  const auto geo = build_geometry(clifford_torus(chart64()));
  for (std::size_t n = 0; n < geo.E.data().size(); ++n) {
    EXPECT_NEAR(geo.E.data()[n], 0.5, 1e-15);
    EXPECT_NEAR(geo.G.data()[n], 0.5, 1e-15);
    EXPECT_NEAR(geo.F.data()[n], 0.0, 1e-15);
    for (int k = 0; k < 2; ++k) EXPECT_LE(geo.christoffel.data()[n].up[k].cwiseAbs().maxCoeff(), 1e-15);
  }
  // lambda = ln(E)/2 = -ln(2)/2
  EXPECT_NEAR(0.5 * std::log(geo.E(10, 20)), -0.5 * std::log(2.0), 1e-15);
  // second form: alpha_uu = -alpha_vv = -1/2 up to the normal orientation
  EXPECT_NEAR(std::abs(geo.alpha_uu[0](5, 5)), 0.5, 1e-14);
  EXPECT_NEAR(geo.alpha_uu[0](5, 5) + geo.alpha_vv[0](5, 5), 0.0, 1e-14);
  EXPECT_NEAR(geo.alpha_uv[0](5, 5), 0.0, 1e-15);
}

TEST(CliffordTorus, NormalFrameIsOrthonormalComplement) {
  const auto geo = build_geometry(clifford_torus(Grid2(0, 2 * kPi, 0, 2 * kPi, 16, 16)));
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) {
      const Jet& jt = geo.jets(i, j);
      const Eigen::VectorXd e = geo.normals(i, j).col(0);
      EXPECT_NEAR(e.norm(), 1.0, 1e-12);
      EXPECT_NEAR(e.dot(jt.h), 0.0, 1e-12);
      EXPECT_NEAR(e.dot(jt.hu), 0.0, 1e-12);
      EXPECT_NEAR(e.dot(jt.hv), 0.0, 1e-12);
    }
}

TEST(RoundSphere, TotallyGeodesicHasNoNormalComponent) {
  const auto geo = build_geometry(round_sphere(Grid2(-0.5, 0.5, 0, 1, 12, 12)));
  for (int j = 0; j < 12; ++j)
    for (int i = 0; i < 12; ++i) {
      EXPECT_NEAR(std::abs(geo.normals(i, j)(3, 0)), 1.0, 1e-12);
      EXPECT_NEAR(geo.alpha_uv[0](i, j), 0.0, 1e-14);
      EXPECT_NEAR(geo.alpha_uu[0](i, j), 0.0, 1e-14);
    }
  const auto cs = classify(geo);
  EXPECT_EQ(cs.kind, ConjugacyKind::undetermined);
  EXPECT_FALSE(cs.note.empty());
}

TEST(RotationalIsothermic, ConformalAndConjugate) {
  const auto prof = wavy();
  const Grid2 g = chart64();
  const auto geo = build_geometry(rotational_isothermic(g, prof));
  for (int j = 0; j < g.nv; j += 7)
    for (int i = 0; i < g.nu; i += 5) {
      const double r = prof.r(g.u(i));
      EXPECT_NEAR(geo.E(i, j), r * r, 1e-12);
      EXPECT_NEAR(geo.G(i, j), r * r, 1e-12);
      EXPECT_NEAR(geo.F(i, j), 0.0, 1e-12);
      EXPECT_NEAR(geo.alpha_uv[0](i, j), 0.0, 1e-12);
      EXPECT_NEAR(geo.gamma_u(i, j), 0.0, 1e-12);
      EXPECT_NEAR(geo.gamma_v(i, j), prof.dlambda(g.u(i)), 1e-12);
    }
}

TEST(RotationalIsothermic, ChristoffelMatchesConformalFactorDerivatives) {
  auto defect = [](int n) {
    const Grid2 g(0, 1, 0, 1, n, n);
    const auto geo = build_geometry(rotational_isothermic(g, wavy()));
    const auto Ev = diff_v(geo.E), Gu = diff_u(geo.G);
    double worst = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(2 * geo.gamma_u(i, j) - Ev(i, j) / geo.E(i, j)));
        worst = std::max(worst, std::abs(2 * geo.gamma_v(i, j) - Gu(i, j) / geo.G(i, j)));
      }
    return worst;
  };
  const double d32 = defect(32), d64 = defect(64);
  const double h = 1.0 / 63;
  EXPECT_LE(d64, 10 * h * h);
  EXPECT_GE(d32 / d64, 3.5);
}

TEST(RotationalIsothermic, ConstantProfileIsClifford) {
  const Grid2 g(0, 1, 0, 1, 16, 16);
  RotationalProfile p;
  p.r0 = 1.0 / std::sqrt(2.0);
  p.amp = 0.0;
  const auto a = rotational_isothermic(g, p), b = clifford_torus(g);
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) {
      EXPECT_LE((a.jet(i, j).h - b.jet(i, j).h).norm(), 1e-14);
      EXPECT_LE((a.jet(i, j).huu - b.jet(i, j).huu).norm(), 1e-14);
    }
}

TEST(RotationalIsothermic, RejectsInadmissibleProfile) {
  RotationalProfile p;
  p.r0 = 0.6;
  p.amp = 0.5;
  p.freq = 3.0;
  EXPECT_THROW(rotational_isothermic(chart64(), p), DomainError);
  EXPECT_THROW(catalog("helicoid", chart64()), ConfigError);
}

TEST(HeightFunctions, KernelOfQ) {
  for (const auto& patch : {clifford_torus(chart64()), rotational_isothermic(chart64(), wavy())}) {
    const auto geo = build_geometry(patch);
    for (int a = 0; a < 4; ++a) EXPECT_LE(max_abs(height_q_analytic(geo, a), 2).value, 1e-8) << patch.name();
  }
}

TEST(HeightFunctions, HessianCommutesWithJ) {
  for (const auto& patch : {clifford_torus(chart64()), rotational_isothermic(chart64(), wavy())}) {
    const auto geo = build_geometry(patch);
    const auto cs = classify(geo);
    ASSERT_EQ(cs.kind, ConjugacyKind::hyperbolic);
    for (int a = 0; a < 4; ++a) EXPECT_LE(hessian_commutation(geo, cs.J, a).value, 1e-7);
  }
}

TEST(Classify, CliffordIsHyperbolicWithDiagonalJ) {
  const auto geo = build_geometry(clifford_torus(chart64()));
  const auto cs = classify(geo);
  EXPECT_EQ(cs.kind, ConjugacyKind::hyperbolic);
  EXPECT_EQ(cs.epsilon, 1.0);
  EXPECT_LE(cs.square_residual, 1e-10);
  EXPECT_LE(cs.conjugacy_residual, 1e-12);
  for (const auto& J : cs.J.data()) EXPECT_LE((J - Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()).norm(), 1e-12);
  // brute force over nodes: the coordinate pair (a,c,b) = (0,1,0) solves the relation
  // everywhere and has ab - c^2 = -1 < 0
  for (int j = 0; j < geo.grid.nv; ++j)
    for (int i = 0; i < geo.grid.nu; ++i) {
      const auto al = geo.alpha(0, i, j);
      const double a = 0, c = 1, b = 0;
      EXPECT_LE(std::abs(a * al(0, 0) + 2 * c * al(0, 1) + b * al(1, 1)), 1e-14);
      EXPECT_LT(a * b - c * c, 0.0);
    }
}

TEST(Classify, NodeKindsFromTwoDimensionalNormalSpace) {
  Eigen::Matrix2d J;
  int dim = 0;
  Eigen::MatrixXd ell(2, 3);
  ell << 1, 0, -1, 0, 2, 0;
  EXPECT_EQ(classify_node(ell, J, dim), ConjugacyKind::elliptic);
  EXPECT_EQ(dim, 2);
  EXPECT_LE((J * J + Eigen::Matrix2d::Identity()).norm(), 1e-12);
  EXPECT_GT(J(0, 1), 0.0);

  Eigen::MatrixXd hyp(2, 3);
  hyp << 1, 0, 0, 0, 0, 1;
  EXPECT_EQ(classify_node(hyp, J, dim), ConjugacyKind::hyperbolic);
  EXPECT_LE((J - Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()).norm(), 1e-12);

  Eigen::MatrixXd par(2, 3);
  par << 1, 0, 0, 0, 2, 0;
  EXPECT_EQ(classify_node(par, J, dim), ConjugacyKind::parabolic);
  EXPECT_LE((J * J).norm(), 1e-12);

  Eigen::MatrixXd full = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_EQ(classify_node(full, J, dim), ConjugacyKind::undetermined);
  EXPECT_EQ(dim, 3);
}

TEST(Classify, ConjugacyRelationHoldsForGenericMoments) {
  Eigen::MatrixXd m(2, 3);
  m << 0.3, -1.1, 0.7, 1.9, 0.4, -0.2;
  Eigen::Matrix2d J;
  int dim = 0;
  const auto kind = classify_node(m, J, dim);
  ASSERT_NE(kind, ConjugacyKind::undetermined);
  for (int a = 0; a < 2; ++a) {
    Eigen::Matrix2d al;
    al << m(a, 0), 0.5 * m(a, 1), 0.5 * m(a, 1), m(a, 2);
    EXPECT_LE((J.transpose() * al - al * J).norm(), 1e-12);
  }
  EXPECT_LE((J * J - epsilon_of(kind) * Eigen::Matrix2d::Identity()).norm(), 1e-12);
}

TEST(Classify, ScaleInvariance) {
  auto geo = build_geometry(rotational_isothermic(chart64(), wavy()));
  const auto before = classify(geo);
  const auto w = ScalarField::generate(geo.grid, [](double u, double v) { return 0.3 + u * u + std::exp(v); });
  for (auto* comp : {&geo.alpha_uu[0], &geo.alpha_uv[0], &geo.alpha_vv[0]})
    *comp = zip(*comp, w, [](double x, double s) { return x * s; });
  const auto after = classify(geo);
  EXPECT_EQ(before.kind, after.kind);
  for (std::size_t n = 0; n < before.J.data().size(); ++n) {
    const auto &a = before.J.data()[n], &b = after.J.data()[n];
    EXPECT_LE(std::min((a - b).norm(), (a + b).norm()), 1e-12);
  }
}

TEST(Classify, RejectsThreeDimensionalFirstNormalSpace) {
  const Grid2 g(0, 1, 0, 1, 8, 8);
  auto geo = ChartGeometry::flat(g);
  geo.alpha_uu.assign(3, ScalarField(g));
  geo.alpha_uv.assign(3, ScalarField(g));
  geo.alpha_vv.assign(3, ScalarField(g));
  for (auto& f : geo.alpha_uu) f = ScalarField(g, 0.0);
  geo.alpha_uu[0] = ScalarField(g, 1.0);
  geo.alpha_uv[1] = ScalarField(g, 1.0);
  geo.alpha_vv[2] = ScalarField(g, 1.0);
  EXPECT_THROW(classify(geo), DomainError);
}

TEST(SampledPatch, CsvIngestionMatchesAnalytic) {
  const Grid2 g(0, 1, 0, 1, 48, 48);
  const auto analytic = rotational_isothermic(g, wavy());
  const auto dir = std::filesystem::temp_directory_path() / "gdeform_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / "rot_points.csv";
  {
    std::ofstream out(path);
    out << "u,v,t,x1,x2,x3,x4\n";
    for (int j = 0; j < g.nv; ++j)
      for (int i = 0; i < g.nu; ++i) {
        const auto& h = analytic.jet(i, j).h;
        out << format_double(g.u(i)) << ',' << format_double(g.v(j)) << ",0";
        for (int a = 0; a < 4; ++a) out << ',' << format_double(h(a));
        out << '\n';
      }
  }
  const auto sampled = catalog("sampled", g, {}, path);
  EXPECT_FALSE(sampled.is_analytic());
  EXPECT_TRUE(sampled.grid() == g);
  const auto ga = build_geometry(analytic), gs = build_geometry(sampled);
  const double h2 = 2.0 / (47.0 * 47.0);
  EXPECT_LE(max_abs(zip(ga.E, gs.E, std::minus<>()), 2).value, 10 * h2);
  EXPECT_LE(max_abs(zip(ga.gamma_v, gs.gamma_v, std::minus<>()), 2).value, 10 * h2);
  EXPECT_LE(gauss_formula_residual(gs, 2), 10 * h2);
  EXPECT_LE(gauss_formula_residual(ga, 0), 1e-12);
}

TEST(SampledPatch, DegenerateImmersionIsRejected) {
  const Grid2 g(0, 1, 0, 1, 10, 10);
  std::vector<ScalarField> c = {
      ScalarField::generate(g, [](double u, double) { return std::cos(u); }),
      ScalarField::generate(g, [](double u, double) { return std::sin(u); }), ScalarField(g, 0.0),
      ScalarField(g, 0.0)};
  EXPECT_THROW(build_geometry(SurfacePatch::sampled("line", c)), DomainError);
}

TEST(SampledPatch, FourSphereFrameUsesCenterPivots) {
  const Grid2 g(0.1, 0.9, 0.2, 1.0, 24, 24);
  const auto s = 1.0 / std::sqrt(2.0);
  std::vector<ScalarField> c = {
      ScalarField::generate(g, [s](double u, double) { return s * std::cos(u); }),
      ScalarField::generate(g, [s](double u, double) { return s * std::sin(u); }),
      ScalarField::generate(g, [s](double, double v) { return s * std::cos(v); }),
      ScalarField::generate(g, [s](double, double v) { return s * std::sin(v); }), ScalarField(g, 0.0)};
  const auto geo = build_geometry(SurfacePatch::sampled("torus_in_s4", c));
  EXPECT_EQ(geo.normal_count(), 2);
  for (int j = 0; j < g.nv; j += 3)
    for (int i = 0; i < g.nu; i += 3) {
      const Eigen::MatrixXd& e = geo.normals(i, j);
      EXPECT_LE((e.transpose() * e - Eigen::Matrix2d::Identity()).norm(), 1e-8);
      EXPECT_LE((e.transpose() * geo.jets(i, j).h).norm(), 1e-8);
      EXPECT_LE((e.transpose() * geo.jets(i, j).hu).norm(), 1e-8);
    }
  // the fifth axis is orthogonal to everything and is picked first
  EXPECT_NEAR(std::abs(geo.normals(5, 5)(4, 0)), 1.0, 1e-12);
}
