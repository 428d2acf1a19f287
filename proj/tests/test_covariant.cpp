#include <catch_amalgamated.hpp>

#include <cmath>

#include "mmc/covariant.hpp"

using namespace mmc;

namespace {

struct Fixture {
  DiscreteSpace s;
  Dirichlet dir;
  TestFunctionBank bank;
  Connection con;
  explicit Fixture(const std::string& spec)
      : s(build_space(spec)), dir(s), bank(test_functions(dir, 20, 42, 0.05)), con(dir) {}
};

double rel_l2(const DiscreteSpace& s, const Tensor2Field& a, const Tensor2Field& b) {
  return std::sqrt(hessian_energy(s, Tensor2Field(a - b)) / hessian_energy(s, b));
}

}  // namespace

TEST_CASE("covariant derivative of a gradient is the Hessian", "[covariant]") {
  std::vector<double> err;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    const ScalarField f = fx.bank.f[0];
    const Tensor2Field grad_grad = fx.con.apply(fx.dir.gradient(f));
    err.push_back(rel_l2(fx.s, grad_grad, weak_hessian(fx.dir, f, fx.bank).H));
  }
  CHECK(err[0] < 0.5);
  CHECK(err[1] <= 0.75 * err[0]);
}

TEST_CASE("zero and parallel fields", "[covariant]") {
  Fixture fx("flat_torus:n=8");
  CHECK(fx.con.parallel());
  CHECK(fx.con.apply(VectorField::Zero(fx.s.nvec())).cwiseAbs().maxCoeff() == 0.0);
  for (const VectorField& e : fx.con.generators()) {
    CHECK(fx.con.apply(e).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(fx.con.energy(e) <= 1e-20);
  }
}

TEST_CASE("Lie bracket is antisymmetric", "[covariant]") {
  Fixture fx("icosphere:subdiv=2");
  const VectorField x = fx.bank.fields[0], y = fx.bank.fields[1];
  CHECK(lie_bracket(fx.con, x, x).cwiseAbs().maxCoeff() <= 1e-12 * x.cwiseAbs().maxCoeff());
  const VectorField xy = lie_bracket(fx.con, x, y), yx = lie_bracket(fx.con, y, x);
  CHECK((xy + yx).cwiseAbs().maxCoeff() <= 1e-12 * xy.cwiseAbs().maxCoeff());
}

TEST_CASE("directional derivative is tensorial in the direction", "[covariant]") {
  Fixture fx("icosphere:subdiv=2");
  const Tensor2Field t = fx.con.apply(fx.bank.fields[0]);
  const VectorField z = fx.bank.fields[1];
  CHECK(directional_derivative(fx.s, t, VectorField::Zero(fx.s.nvec())).cwiseAbs().maxCoeff() == 0.0);
  const CellScalar f = fx.s.vertex_to_cell(fx.bank.f[2]);
  const VectorField lhs = directional_derivative(fx.s, t, scale_cells(fx.s, f, z));
  const VectorField rhs = scale_cells(fx.s, f, directional_derivative(fx.s, t, z));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * rhs.cwiseAbs().maxCoeff());
  CHECK(contraction_bound(fx.con, fx.bank.fields[0], z).gap <= 1e-12);
}

TEST_CASE("connection Laplacian is the adjoint of the covariant derivative", "[covariant]") {
  for (const char* spec : {"flat_torus:n=10", "icosphere:subdiv=2", "cone:angle=3,n=6"}) {
    Fixture fx(spec);
    CHECK(connection_adjointness(fx.con, fx.bank.fields[0], fx.bank.fields[1]).gap <= 1e-10);
  }
}

TEST_CASE("connection heat flow", "[covariant]") {
  Fixture fx("icosphere:subdiv=2");
  CHECK(fx.con.heat_flow(VectorField::Zero(fx.s.nvec()), 0.2).cwiseAbs().maxCoeff() == 0.0);
  const auto traj = fx.con.heat_trajectory(fx.bank.fields[0], 0.2);
  for (size_t k = 1; k < traj.size(); ++k) CHECK(fx.con.energy(traj[k]) <= fx.con.energy(traj[k - 1]) * (1 + 1e-12));
  CHECK(kato_type_check(fx.con, fx.bank.fields[0], 0.0).gap == 0.0);
  CHECK_THROWS_AS(kato_type_check(fx.con, fx.bank.fields[0], -1.0), std::invalid_argument);
}

TEST_CASE("Kato inequality on the flat torus", "[covariant]") {
  Fixture fx("flat_torus:n=16");
  for (double t : {0.01, 0.1}) CHECK(kato_type_check(fx.con, fx.bank.fields[0], t).gap <= 1e-9);
}

TEST_CASE("covariant calculus rules converge", "[covariant]") {
  std::vector<double> leib, metric, torsion;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    const auto& F = fx.bank.fields;
    leib.push_back(covariant_leibniz(fx.con, fx.bank.f[0], F[0]).gap);
    metric.push_back(metric_compatibility(fx.con, F[0], F[1], F[2]).gap);
    torsion.push_back(torsion_free_check(fx.con, fx.bank.f[1], F[0], F[1]).gap);
  }
  CHECK(leib[1] <= 0.75 * leib[0]);
  CHECK(metric[1] <= 0.75 * metric[0]);
  CHECK(torsion[1] <= 0.75 * torsion[0]);
}

TEST_CASE("covariant locality and methods", "[covariant]") {
  Fixture fx("flat_torus:n=16");
  const VectorField x = fx.bank.fields[0];
  CHECK(covariant_locality(fx.con, x, x, half_torus_region(fx.s)).gap == 0.0);
  CHECK_THROWS_AS(covariant_locality(fx.con, x, x, std::vector<char>(fx.s.nc, 0)), std::invalid_argument);
  const CovariantResult gen = weak_covariant(fx.con, x, fx.bank, CovariantMethod::generator);
  CHECK_FALSE(gen.fallback);
  CHECK(rel_l2(fx.s, gen.T, fx.con.apply(x)) <= 1e-8);
  CHECK(covariant_method_from_string(to_string(CovariantMethod::weak_lsq)) == CovariantMethod::weak_lsq);
}

TEST_CASE("connection energy dual bound", "[covariant]") {
  Fixture fx("flat_torus:n=12");
  const VectorField x = fx.bank.fields[0];
  const double dual = ec_duality(fx.con, x, fx.bank);
  CHECK(dual <= fx.con.energy(x) * (1 + 1e-8));
  CHECK(dual >= 0.8 * fx.con.energy(x));
}
