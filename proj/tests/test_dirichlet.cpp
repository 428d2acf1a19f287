#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mmc/dirichlet.hpp"

using namespace mmc;

namespace {

const double kPi = std::acos(-1.0);

ScalarField random_field(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  ScalarField f(n);
  for (int i = 0; i < n; ++i) f[i] = nd(gen);
  return f;
}

ScalarField sin_x(const DiscreteSpace& s) {
  ScalarField f(s.nv);
  for (int i = 0; i < s.nv; ++i) f[i] = std::sin(s.pos[i].x());
  return f;
}

double sup(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("constants have zero gradient and zero Gamma2", "[dirichlet]") {
  for (const char* spec : {"flat_torus:n=6", "icosphere:subdiv=1", "interval:n=10"}) {
    const DiscreteSpace s = build_space(spec);
    const Dirichlet dir(s);
    const ScalarField one = ScalarField::Constant(s.nv, 3.0);
    CHECK(sup(dir.gradient(one)) <= 1e-12);
    CHECK(sup(dir.laplacian(one)) <= 1e-10);
    CHECK(dir.gamma2(one, random_field(s.nv, 1)).tv() <= 1e-10);
  }
}

TEST_CASE("carre du champ is nonnegative and integrates by parts", "[dirichlet]") {
  const DiscreteSpace s = build_space("icosphere:subdiv=2");
  const Dirichlet dir(s);
  const ScalarField f = random_field(s.nv, 2), g = random_field(s.nv, 3);
  CHECK(dir.carre_du_champ(f, f).minCoeff() >= 0.0);
  const double lhs = integrate(s, dir.carre_du_champ(f, g));
  const double rhs = -integrate(s, f.cwiseProduct(dir.laplacian(g)));
  CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(integrate(s, dir.carre_du_champ(f, f))));
}

TEST_CASE("stiffness matrix is symmetric positive semidefinite", "[dirichlet]") {
  const DiscreteSpace s = build_space("cone:angle=2,n=5");
  const Dirichlet dir(s);
  const Mat S = Mat(dir.S());
  CHECK((S - S.transpose()).norm() <= 1e-12 * S.norm());
  const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(S).eigenvalues();
  CHECK(ev[0] >= -1e-10 * ev[ev.size() - 1]);
  CHECK(ev[1] > 0.0);  // connected
}

TEST_CASE("exact operator identities", "[dirichlet]") {
  for (const char* spec : {"flat_torus:n=8", "icosphere:subdiv=2", "union:flat_torus(n=4)+interval(n=8)"}) {
    const DiscreteSpace s = build_space(spec);
    const Dirichlet dir(s);
    const ScalarField f = random_field(s.nv, 4), g = random_field(s.nv, 5);
    const VectorField x = dir.gradient(random_field(s.nv, 6)) + dir.gradient(g) * 0.5;
    CHECK(div_grad_adjointness(dir, g, x).gap <= 1e-10);
    CHECK(laplacian_div_grad(dir, f).gap <= 1e-10);
    CHECK(laplacian_total_mass(dir, f).gap <= 1e-10);
    CHECK(gamma2_mass_identity(dir, f).gap <= 1e-8);
  }
}

TEST_CASE("Laplacian of sin x on the torus converges at second order", "[dirichlet]") {
  std::vector<double> err;
  for (int n : {16, 32}) {
    const DiscreteSpace s = flat_torus(n, 2 * kPi);
    const Dirichlet dir(s);
    const ScalarField f = sin_x(s);
    err.push_back(sup(dir.laplacian(f) + f));
  }
  CHECK(err[0] < 0.05);
  CHECK(err[1] <= 0.3 * err[0]);
}

TEST_CASE("heat flow", "[dirichlet]") {
  const DiscreteSpace s = flat_torus(24, 2 * kPi);
  const Dirichlet dir(s);

  SECTION("constants are fixed and mass is conserved") {
    const ScalarField c = ScalarField::Constant(s.nv, 2.0);
    CHECK(sup(dir.heat_flow(c, 0.3) - c) <= 1e-12);
    const ScalarField f = random_field(s.nv, 7);
    CHECK(std::abs(integrate(s, dir.heat_flow(f, 0.3)) - integrate(s, f)) <= 1e-10 * integrate(s, f.cwiseAbs()));
  }
  SECTION("energy regularization") {
    const ScalarField f = random_field(s.nv, 8);
    for (double t : {0.05, 0.2, 1.0}) {
      const double l2 = integrate(s, f.cwiseProduct(f));
      CHECK(dir.energy(dir.heat_flow(f, t)) <= l2 / (4 * t));
    }
  }
  SECTION("eigenfunction decay") {
    const ScalarField f = sin_x(s);
    const double t = 0.5;
    CHECK(sup(dir.heat_flow(f, t, 0.005) - std::exp(-t) * f) <= 0.02);
  }
  SECTION("step count") {
    CHECK(Dirichlet::heat_steps(0.1, 0.01) == 10);
    CHECK(Dirichlet::heat_steps(0.0, 0.01) == 0);
    CHECK(dir.heat_trajectory(sin_x(s), 0.1).size() == 11);
  }
}

TEST_CASE("test function bank is seed-deterministic", "[dirichlet]") {
  const DiscreteSpace s = flat_torus(8, 2 * kPi);
  const Dirichlet dir(s);
  const TestFunctionBank a = test_functions(dir, 12, 42, 0.05, 4);
  const TestFunctionBank b = test_functions(dir, 12, 42, 0.05, 4);
  const TestFunctionBank c = test_functions(dir, 12, 43, 0.05, 4);
  REQUIRE(a.f.size() == 12 + coordinate_lifts(s).size());
  CHECK(a.labels.size() == a.f.size());
  REQUIRE(a.fields.size() == 4);
  bool differs = false;
  for (size_t i = 0; i < a.f.size(); ++i) {
    CHECK(a.f[i] == b.f[i]);
    differs = differs || a.f[i] != c.f[i];
  }
  CHECK(differs);
  CHECK(a.warnings.empty());
  CHECK_FALSE(test_functions(dir, 4, 42, 0.0, 2).warnings.empty());
}

TEST_CASE("Hessian form symmetry and the gradient identity", "[dirichlet]") {
  const DiscreteSpace s = build_space("icosphere:subdiv=2");
  const Dirichlet dir(s);
  const ScalarField f = random_field(s.nv, 9), g = random_field(s.nv, 10), h = random_field(s.nv, 11);
  const ScalarField hgh = dir.hessian_form_H(f, g, h), hhg = dir.hessian_form_H(f, h, g);
  CHECK(sup(hgh - hhg) <= 1e-12 * sup(hgh));
  const ScalarField two_h = 2.0 * dir.hessian_form_H(f, f, g);
  const ScalarField grad_form = dir.carre_du_champ(dir.carre_du_champ(f, f), g);
  CHECK(sup(two_h - grad_form) <= 1e-10 * sup(grad_form));
}

TEST_CASE("multivariate Gamma2 with the identity map is exact", "[dirichlet]") {
  const DiscreteSpace s = flat_torus(10, 2 * kPi);
  const Dirichlet dir(s);
  const MultivariateGamma2 r = multivariate_gamma2(dir, Polynomial::identity(), {random_field(s.nv, 12)});
  CHECK(r.gamma2_residual.gap <= 1e-10);
  CHECK(r.grad_residual.gap <= 1e-10);

  const Polynomial sq = Polynomial::square();
  Vec x(1);
  x << 3.0;
  CHECK(sq.value(x) == 9.0);
  CHECK(sq.grad(x)[0] == 6.0);
  CHECK(sq.hess(x)(0, 0) == 2.0);
}

TEST_CASE("Bakry-Emery contraction on the flat torus", "[dirichlet]") {
  const DiscreteSpace s = flat_torus(12, 2 * kPi);
  const Dirichlet dir(s);
  const TestFunctionBank bank = test_functions(dir, 6, 42, 0.05);
  for (const ScalarField& f : bank.f)
    for (double t : {0.01, 0.1}) {
      CHECK(bakry_emery(dir, f, t, 0.0).gap <= 1e-9);
      CHECK(bakry_emery_first_power(dir, f, t, 0.0).gap <= 1e-9);
    }
  const ScalarField rough = random_field(s.nv, 13);
  CHECK(bakry_emery(dir, rough, 0.1, 0.0).gap <= 1e-9);
  CHECK(bakry_emery_first_power(dir, rough, 0.0, 0.0).gap == 0.0);
  CHECK(bakry_emery_first_power(dir, rough, 0.1, 0.0).gap <= 1e-9);
}
