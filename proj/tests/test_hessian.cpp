#include <catch_amalgamated.hpp>

#include <cmath>

#include "mmc/covariant.hpp"

using namespace mmc;

namespace {

const double kPi = std::acos(-1.0);

struct Fixture {
  DiscreteSpace s;
  Dirichlet dir;
  TestFunctionBank bank;
  explicit Fixture(const std::string& spec) : s(build_space(spec)), dir(s), bank(test_functions(dir, 20, 42, 0.05)) {}
};

ScalarField sin_x(const DiscreteSpace& s) {
  ScalarField f(s.nv);
  for (int i = 0; i < s.nv; ++i) f[i] = std::sin(s.pos[i].x());
  return f;
}

// Relative L2 error of H against diag(-sin x, 0) at cell centroids.
double sin_hessian_error(const DiscreteSpace& s, const Tensor2Field& H) {
  double err = 0.0, ref = 0.0;
  for (int c = 0; c < s.nc; ++c) {
    const double cx = s.local[c].rowwise().mean().x();
    Eigen::Matrix3d amb = Eigen::Matrix3d::Zero();
    amb(0, 0) = -std::sin(cx);
    const Mat exact = s.frame[c].transpose() * amb * s.frame[c];
    const Mat got = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        H.data() + s.toff[c], 2, 2);
    err += s.mc[c] * (got - exact).squaredNorm();
    ref += s.mc[c] * exact.squaredNorm();
  }
  return std::sqrt(err / ref);
}

}  // namespace

TEST_CASE("Hessian of sin x on the torus", "[hessian]") {
  std::vector<double> err;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    const HessianResult r = weak_hessian(fx.dir, sin_x(fx.s), fx.bank);
    err.push_back(sin_hessian_error(fx.s, r.H));
  }
  CHECK(err[0] < 0.2);
  CHECK(err[1] < 0.75 * err[0]);
}

TEST_CASE("Hessian methods agree", "[hessian]") {
  Fixture fx("flat_torus:n=16");
  const ScalarField f = sin_x(fx.s);
  const HessianResult a = weak_hessian(fx.dir, f, fx.bank, HessianMethod::local_formula);
  const HessianResult b = weak_hessian(fx.dir, f, fx.bank, HessianMethod::weak_lsq);
  CHECK(a.method == HessianMethod::local_formula);
  CHECK(b.method == HessianMethod::weak_lsq);
  const double na = std::sqrt(hessian_energy(fx.s, a.H));
  const double d = std::sqrt(hessian_energy(fx.s, Tensor2Field(a.H - b.H)));
  CHECK(d <= 0.25 * na);
  CHECK(hessian_method_from_string(to_string(HessianMethod::weak_lsq)) == HessianMethod::weak_lsq);
  CHECK_THROWS(hessian_method_from_string("bogus"));
}

TEST_CASE("Hessian is symmetric and splits orthogonally", "[hessian]") {
  Fixture fx("icosphere:subdiv=2");
  for (int i = 0; i < 3; ++i) {
    const HessianResult r = weak_hessian(fx.dir, fx.bank.f[i], fx.bank);
    CHECK(hessian_symmetry(fx.s, r.H).gap <= 1e-10);
    CHECK(sym_asym_pythagoras(fx.s, r.H).gap <= 1e-10);
  }
  const Tensor2Field t = outer(fx.s, fx.bank.fields[0], fx.bank.fields[1]);
  CHECK(sym_asym_pythagoras(fx.s, t).gap <= 1e-10);
}

TEST_CASE("Hessian calculus rules in their exact cases", "[hessian]") {
  Fixture fx("flat_torus:n=12");
  const ScalarField f = fx.bank.f[0];
  const ScalarField c = ScalarField::Constant(fx.s.nv, 1.7);
  CHECK(hessian_leibniz(fx.dir, fx.bank, f, c).gap <= 1e-10);
  CHECK(hessian_chain(fx.dir, fx.bank, f, Polynomial::identity()).gap <= 1e-10);
  // Both sides vanish; compare absolute sizes.
  const Measurement prod = grad_product_rule(fx.dir, fx.bank, f, c);
  CHECK(prod.lhs <= 1e-10);
  CHECK(prod.rhs <= 1e-10);
}

TEST_CASE("Hessian calculus rules converge", "[hessian]") {
  std::vector<double> leib, chain, prod;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    leib.push_back(hessian_leibniz(fx.dir, fx.bank, fx.bank.f[0], fx.bank.f[1]).gap);
    chain.push_back(hessian_chain(fx.dir, fx.bank, fx.bank.f[2], Polynomial::square()).gap);
    prod.push_back(grad_product_rule(fx.dir, fx.bank, fx.bank.f[3], fx.bank.f[4]).gap);
  }
  CHECK(leib[1] <= 0.75 * leib[0]);
  CHECK(chain[1] <= 0.75 * chain[0]);
  CHECK(prod[1] <= 0.75 * prod[0]);
}

TEST_CASE("Hessian locality", "[hessian]") {
  Fixture fx("flat_torus:n=16");
  const std::vector<char> region = half_torus_region(fx.s);
  CHECK(hessian_locality(fx.dir, fx.bank, fx.bank.f[0], fx.bank.f[0], region).gap == 0.0);
  const std::vector<char> inner = interior_cells(fx.s, region, 2);
  for (int c = 0; c < fx.s.nc; ++c)
    if (inner[c]) CHECK(region[c]);
}

TEST_CASE("dual formulation bounds the Hessian energy from below", "[hessian]") {
  Fixture fx("flat_torus:n=12");
  const ScalarField f = fx.bank.f[0];
  const double direct = 2.0 * hessian_energy(fx.s, weak_hessian(fx.dir, f, fx.bank).H);
  const double dual = e2_duality(fx.dir, f, fx.bank);
  CHECK(dual <= direct * (1 + 1e-8));
  CHECK(dual >= 0.8 * direct);
}

TEST_CASE("key inequality", "[hessian]") {
  Fixture fx("flat_torus:n=12");
  const std::vector<ScalarField> fs{fx.bank.f[0], fx.bank.f[1]}, gs{fx.bank.f[2], fx.bank.f[3]};
  const Measurement empty = key_inequality(fx.dir, fs, gs, {}, 0.0);
  CHECK(empty.lhs == 0.0);
  CHECK(empty.gap == 0.0);
  CHECK_THROWS_AS(key_inequality(fx.dir, fs, {gs[0]}, {}, 0.0), std::invalid_argument);
}

TEST_CASE("pointwise Hessian bound on the flat torus", "[hessian]") {
  std::vector<double> gaps;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    const ScalarField f = sin_x(fx.s);
    const Measurement m = hs_bound(fx.dir, f, weak_hessian(fx.dir, f, fx.bank).H, 0.0);
    CHECK(m.extra.contains("two_sided"));
    gaps.push_back(m.gap);
  }
  CHECK(gaps[1] <= std::max(0.75 * gaps[0], 1e-9));
}
