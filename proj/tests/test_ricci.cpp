#include <catch_amalgamated.hpp>

#include <cmath>

#include "mmc/ricci.hpp"

using namespace mmc;

namespace {

struct Fixture {
  DiscreteSpace s;
  Dirichlet dir;
  TestFunctionBank bank;
  Connection con;
  Complex cx;
  explicit Fixture(const std::string& spec)
      : s(build_space(spec)), dir(s), bank(test_functions(dir, 20, 42, 0.05)), con(dir), cx(dir) {}
};

}  // namespace

TEST_CASE("Ricci measure is bilinear and symmetric", "[ricci]") {
  for (const char* spec : {"flat_torus:n=10", "icosphere:subdiv=2", "cone:angle=3,n=6"}) {
    Fixture fx(spec);
    const auto& F = fx.bank.fields;
    INFO(spec);
    CHECK(ricci_bilinearity(fx.cx, fx.con, F[0], F[1], F[2], 0.7, -1.3).gap <= 1e-10);
    CHECK(ricci_symmetry(fx.cx, fx.con, F[0], F[1]).gap <= 1e-10);
    CHECK(ricci_total_mass(fx.cx, fx.con, F[0], F[1]).gap <= 1e-8);
    CHECK(bochner_check(fx.cx, fx.con, F[0], fx.s.kappa).extra["laplacian_mass"].get<double>() <= 1e-10);
  }
}

TEST_CASE("Ricci of the zero field vanishes", "[ricci]") {
  Fixture fx("icosphere:subdiv=1");
  const VectorField zero = VectorField::Zero(fx.s.nvec());
  const RicciMeasure r = ricci_measure(fx.cx, fx.con, zero, fx.bank.fields[0]);
  CHECK(r.mu.tv() == 0.0);
  CHECK(r.scale() == 0.0);
}

TEST_CASE("Ricci parts add up", "[ricci]") {
  Fixture fx("icosphere:subdiv=2");
  const RicciMeasure r = ricci_measure(fx.cx, fx.con, fx.bank.fields[0], fx.bank.fields[1]);
  const Vec sum = r.laplacian_part + r.hodge_part + r.hs_part;
  CHECK((sum - r.mu.w).cwiseAbs().maxCoeff() <= 1e-12 * r.scale());
  CHECK((r.density - r.mu.w.cwiseQuotient(fx.s.mv)).cwiseAbs().maxCoeff() <= 1e-12 * r.density.cwiseAbs().maxCoeff());
}

TEST_CASE("constant weight reduces the representations", "[ricci]") {
  Fixture fx("flat_torus:n=12");
  const ScalarField one = ScalarField::Ones(fx.s.nv);
  const auto& F = fx.bank.fields;
  CHECK(ricci_tensor_property(fx.cx, fx.con, one, F[0], F[1]).gap <= 1e-10);
  CHECK(ricci_representation(fx.cx, fx.con, fx.bank, F[0], F[1], one).gap <= 1e-8);
}

TEST_CASE("Ricci total variation bound", "[ricci]") {
  for (const char* spec : {"flat_torus:n=10", "icosphere:subdiv=2"}) {
    Fixture fx(spec);
    CHECK(ricci_tv_bound(fx.cx, fx.con, fx.bank.fields[0], fx.bank.fields[1], fx.s.kappa).gap == 0.0);
  }
}

TEST_CASE("flat torus Ricci vanishes under refinement", "[ricci]") {
  std::vector<double> rel, bound;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    const VectorField x = fx.bank.fields[0];
    const RicciMeasure r = ricci_measure(fx.cx, fx.con, x, x);
    rel.push_back(r.mu.tv() / r.scale());
    bound.push_back(ricci_lower_bound(fx.cx, fx.con, x, 0.0, fx.bank.tau).gap);
  }
  CHECK(rel[0] < 0.5);
  CHECK(rel[1] <= 0.75 * rel[0]);
  CHECK(bound[1] <= 0.75 * bound[0]);
}

TEST_CASE("Ricci locality", "[ricci]") {
  Fixture fx("flat_torus:n=16");
  const VectorField x = fx.bank.fields[0];
  CHECK(ricci_locality(fx.cx, fx.con, x, x, half_torus_region(fx.s)).gap == 0.0);
}

TEST_CASE("cone diagnostic and energy difference are finite", "[ricci]") {
  Fixture fx("cone:angle=3,n=8");
  const Measurement m = cone_diagnostic(fx.cx, fx.con, fx.bank.fields[0]);
  CHECK(std::isfinite(m.gap));
  CHECK(std::isfinite(energy_difference(fx.cx, fx.con, fx.bank.fields[0])));
}
