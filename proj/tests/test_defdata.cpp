#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gdeform/catalog.hpp"
#include "gdeform/defdata.hpp"

using namespace gdeform;

namespace {

RotationalProfile wavy() {
  RotationalProfile p;
  p.r0 = 0.6;
  p.amp = 0.05;
  p.freq = 1.0;
  return p;
}

ChartGeometry clifford(int n = 64) { return build_geometry(clifford_torus(Grid2(0, 1, 0, 1, n, n))); }
ChartGeometry rotational(int n = 64, double L = 1.0) {
  return build_geometry(rotational_isothermic(Grid2(0, L, 0, L, n, n), wavy()));
}

double h2(const Grid2& g) { return g.hu() * g.hu() + g.hv() * g.hv(); }

}  // namespace

TEST(QOperator, FlatCoefficientsKillConstants) {
  const auto geo = ChartGeometry::flat(Grid2(0, 1, 0, 1, 10, 10));
  const auto q = q_apply(geo, ScalarField(geo.grid, 3.7));
  for (double x : q.data()) EXPECT_EQ(x, 0.0);
  const auto qc = q_apply(geo, ComplexField(geo.grid, Complex(-1.0, 0.5)));
  for (const auto& z : qc.data()) EXPECT_EQ(std::abs(z), 0.0);
}

TEST(QOperator, CliffordSineProduct) {
  const auto geo = clifford();
  const auto th = ScalarField::generate(geo.grid, [](double u, double v) { return std::sin(u) * std::sin(v); });
  const auto q = q_apply(geo, th);
  double err = 0;
  for (int j = 0; j < 64; ++j)
    for (int i = 0; i < 64; ++i) err = std::max(err, std::abs(q(i, j) - std::cos(geo.grid.u(i)) * std::cos(geo.grid.v(j))));
  EXPECT_LE(err, 2 * h2(geo.grid));
}

TEST(QOperator, HeightFunctionsWithStencils) {
  for (const auto& geo : {clifford(), rotational()}) {
    const auto patch_h = geo.jets.map([](const Jet& jt) { return jt.h; });
    for (int a = 0; a < 4; ++a) {
      const auto ha = patch_h.map([a](const Eigen::VectorXd& x) { return x(a); });
      EXPECT_LE(max_abs(q_apply(geo, ha), 2).value, 5 * h2(geo.grid));
    }
  }
}

TEST(QOperator, ComplexFormOnModulusSquared) {
  const auto geo = ChartGeometry::flat(Grid2(-1, 1, -1, 1, 12, 12));
  const auto th = ComplexField::generate(geo.grid, [](double u, double v) { return Complex(u * u + v * v, 0); });
  const auto q = q_apply(geo, th);
  for (const auto& z : q.data()) EXPECT_NEAR(std::abs(z - 1.0), 0.0, 1e-11);
}

TEST(FunctionSpec, BuiltinsAndTables) {
  EXPECT_EQ(FunctionSpec::poly({1, 2, 3}).eval(2).real(), 17.0);
  EXPECT_EQ(FunctionSpec::affine(1, -2).eval(0.5).real(), 0.0);
  EXPECT_NEAR(FunctionSpec::sine(1, 2, 3).eval(0.5).real(), 1 + 2 * std::sin(1.5), 1e-15);
  EXPECT_EQ(FunctionSpec::c_minus_exp_m2lambda(3).eval(0, 2.0).real(), 1.0);
  EXPECT_EQ(FunctionSpec::half_c_minus_exp_m2lambda(3).eval(0, 2.0).real(), 0.5);
  const auto tab = FunctionSpec::table({0, 1, 3}, {0, 2, 0}, {1, 1, 3});
  EXPECT_EQ(tab.eval(0.5), Complex(1, 1));
  EXPECT_EQ(tab.eval(2.0), Complex(1, 2));
  EXPECT_THROW(tab.eval(3.5), DomainError);
  EXPECT_THROW(FunctionSpec::table({0, 0}, {1, 1}), ConfigError);

  const auto dir = std::filesystem::temp_directory_path() / "gdeform_tests";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "zeta.csv") << "t,value,imag\n0,-1,0\n1,-0.9,0.1\n";
  const auto z = FunctionSpec::table_csv(dir / "zeta.csv");
  EXPECT_NEAR(std::abs(z.eval(0.5) - Complex(-0.95, 0.05)), 0.0, 1e-15);
}

TEST(BuildPair, CliffordConstantHalf) {
  const auto geo = clifford();
  const auto d = build_pair(geo, FunctionSpec::constant(0.5), FunctionSpec::constant(0.5));
  for (std::size_t n = 0; n < geo.grid.size(); ++n) {
    EXPECT_EQ(d.phi.data()[n], 0.5);
    EXPECT_EQ(d.psi.data()[n], 0.5);
    EXPECT_EQ(d.rho.data()[n], std::sqrt(3.0));
    EXPECT_NEAR(d.q_rho.data()[n], 0.0, 1e-9);
    EXPECT_EQ(d.branch.data()[n], Branch::both_positive);
  }
  EXPECT_TRUE(ch_membership(d, 1e-10).pass);
}

TEST(BuildPair, CliffordExampleFamilyWithMetricNormalization) {
  const auto geo = clifford();
  // c - exp(-2 lambda) = 3 - 2 = 1, V = d = 1; phi = U E = 1/2, psi = V G = 1/2
  const auto d = build_pair(geo, FunctionSpec::c_minus_exp_m2lambda(3), FunctionSpec::constant(1), Normalization::metric);
  for (std::size_t n = 0; n < geo.grid.size(); ++n) {
    EXPECT_NEAR(d.rho.data()[n], std::sqrt(3.0 + 1.0 - 1.0), 1e-15);
    EXPECT_NEAR(d.phi.data()[n], 0.5, 1e-15);
  }
  const auto m = ch_membership(d, 1e-10);
  EXPECT_TRUE(m.pass);
  EXPECT_EQ(m.count_both_positive, 64 * 64);
}

TEST(BuildPair, CliffordQuadraticU) {
  const auto geo = clifford();
  const auto d = build_pair(geo, FunctionSpec::poly({1, 0, 1}), FunctionSpec::constant(1));
  for (int j = 0; j < 64; ++j)
    for (int i = 0; i < 64; ++i) {
      const double u = geo.grid.u(i);
      EXPECT_NEAR(d.rho(i, j), std::sqrt(2 * u * u + 5), 1e-14);
    }
  EXPECT_TRUE(ch_membership(d).pass);
  EXPECT_LE(ch_membership(d).max_residual, 1e-10);
}

TEST(BuildPair, RejectsInadmissibleDataNamingNode) {
  const auto geo = clifford(16);
  const auto U = FunctionSpec::affine(0.5, -2.0);  // turns negative for u > 1/4
  try {
    build_pair(geo, U, FunctionSpec::constant(0.5));
    FAIL();
  } catch (const DomainError& e) {
    ASSERT_TRUE(e.node().has_value());
    EXPECT_EQ(e.node()->i, 4);  // first node with u >= 1/4 - margin
    EXPECT_NE(std::string(e.what()).find("both_positive"), std::string::npos);
  }
}

TEST(BuildPair, SmallBranches) {
  const auto geo = clifford(16);
  const auto d = build_pair(geo, FunctionSpec::constant(0.1), FunctionSpec::constant(-2));
  for (Branch b : d.branch.data()) EXPECT_EQ(b, Branch::phi_small);
  EXPECT_NEAR(d.rho(3, 3), std::sqrt(std::abs(2 * (0.1 - 2) + 1)), 1e-15);
  const auto e = build_pair(geo, FunctionSpec::constant(-2), FunctionSpec::constant(0.1));
  for (Branch b : e.branch.data()) EXPECT_EQ(b, Branch::psi_small);
}

TEST(BuildPair, TransportResidualIsSecondOrder) {
  auto run = [](int n) {
    const auto geo = rotational(n);
    return build_pair(geo, FunctionSpec::sine(1, 0.3, 2), FunctionSpec::sine(1, 0.4, 3)).transport_residual;
  };
  const double r32 = run(32), r64 = run(64);
  EXPECT_LE(r64, 10.0 * 2.0 / (63.0 * 63.0));
  EXPECT_GE(r32 / r64, 3.5);
}

TEST(Membership, RotationalExampleFamily) {
  const auto geo = rotational();
  const double tol = 50 * h2(geo.grid);
  // V constant: every U gives a member
  const auto member = build_pair(geo, FunctionSpec::c_minus_exp_m2lambda(4), FunctionSpec::constant(1));
  EXPECT_TRUE(ch_membership(member, tol).pass);
  // with the metric normalization the U-branch (c - exp(-2 lambda))/2 admits any V
  const auto branch = build_pair(geo, FunctionSpec::half_c_minus_exp_m2lambda(4), FunctionSpec::sine(1, 0.5, 2),
                                 Normalization::metric);
  EXPECT_TRUE(ch_membership(branch, tol).pass);
  // generic pair with V' != 0 off the branch
  const auto off = build_pair(geo, FunctionSpec::sine(2, 0.9, 10), FunctionSpec::sine(2, 0.9, 10));
  const auto m = ch_membership(off, tol);
  EXPECT_FALSE(m.pass);
  EXPECT_GT(m.max_residual, 10 * tol);
}

TEST(Membership, StableUnderRefinement) {
  auto run = [](int n) {
    const auto geo = rotational(n);
    const auto d = build_pair(geo, FunctionSpec::half_c_minus_exp_m2lambda(4), FunctionSpec::sine(1, 0.5, 2),
                              Normalization::metric);
    return ch_membership(d, 50 * h2(geo.grid));
  };
  const auto coarse = run(32);
  ASSERT_TRUE(coarse.pass);
  if (coarse.max_residual * 10 <= coarse.tol) {
    const auto fine = run(63);
    EXPECT_TRUE(fine.pass);
  }
  EXPECT_TRUE(run(63).pass);
}

TEST(BuildZeta, ConstantTransport) {
  const auto geo = ChartGeometry::flat(Grid2(0, 0.2, 0, 0.2, 16, 16));
  const auto d = build_zeta(geo, FunctionSpec::constant(-1));
  for (std::size_t n = 0; n < geo.grid.size(); ++n) {
    EXPECT_EQ(d.phi_c.data()[n], Complex(-1, 0));
    EXPECT_NEAR(d.rho.data()[n], std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(d.q_rho.data()[n], 0.0, 1e-9);
  }
  EXPECT_TRUE(ch_membership(d, 1e-10).pass);
  EXPECT_TRUE(d.warnings.empty());
}

TEST(BuildZeta, AffineZetaIsReproduced) {
  const auto geo = ChartGeometry::flat(Grid2(0, 0.2, 0, 0.2, 16, 16));
  const auto d = build_zeta(geo, FunctionSpec::affine(-1, 0.1));
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) {
      const Complex z(geo.grid.u(i), geo.grid.v(j));
      EXPECT_LE(std::abs(d.phi_c(i, j) - (-1.0 + z / 10.0)), 1e-11);
    }
  EXPECT_GT(d.margin, 0.25);
  const auto m = ch_membership(d);
  EXPECT_LE(m.max_residual, 1e-2);
}

TEST(BuildZeta, RejectsInadmissibleZeta) {
  const auto geo = ChartGeometry::flat(Grid2(0, 0.2, 0, 0.2, 10, 10));
  EXPECT_THROW(build_zeta(geo, FunctionSpec::constant(-0.5)), DomainError);
  EXPECT_THROW(build_zeta(geo, FunctionSpec::constant(-0.1)), DomainError);
}

TEST(BuildZeta, DetectsBlowUp) {
  const auto geo = ChartGeometry::flat(Grid2(0, 4, 0, 4, 200, 200));
  // a rough, non-holomorphic-looking table excites the unstable modes
  std::vector<double> t, re;
  for (int k = 0; k < 200; ++k) {
    t.push_back(4.0 * k / 199);
    re.push_back(-1.0 + ((k % 2) ? 0.01 : -0.01));
  }
  EXPECT_THROW(build_zeta(geo, FunctionSpec::table(t, re)), DomainError);
}

TEST(Support, CliffordNuExpLambda) {
  const auto geo = clifford();
  const auto s = make_support(geo, nu_exp_lambda(geo, FunctionSpec::sine(1, 0.3, 2)));
  EXPECT_TRUE(support_check(s, 5 * h2(geo.grid)).pass);
  for (const auto& H : s.hess.data()) EXPECT_EQ(H(0, 1), H(1, 0));
  const auto uv = make_support(geo, ScalarField::generate(geo.grid, [](double u, double v) { return u * v; }));
  const auto c = support_check(uv, 1e-6);
  EXPECT_FALSE(c.pass);
  EXPECT_NEAR(c.max_residual, 1.0, 1e-10);
}

TEST(Support, RotationalCauchyDataRecoverClosedForm) {
  auto err = [](int n) {
    const auto geo = rotational(n);
    const auto nu = FunctionSpec::sine(1, 0.3, 2);
    const auto s = support_from_nu_cauchy(geo, nu);
    double e = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        e = std::max(e, std::abs(s.gamma(i, j) - nu.eval(geo.grid.v(j)).real() * wavy().r(geo.grid.u(i))));
    return e;
  };
  const double e32 = err(32), e64 = err(64);
  EXPECT_LE(e64, 1.0 / (63.0 * 63.0));
  EXPECT_GE(e32 / e64, 3.5);
}
