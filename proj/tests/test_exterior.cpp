#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mmc/exterior.hpp"

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

Vec random_vec(Eigen::Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(gen);
  return v;
}

double sup(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("cochain complex sizes and dd = 0", "[exterior]") {
  Fixture fx("flat_torus:n=6");
  CHECK(fx.cx.size(0) == 36);
  CHECK(fx.cx.size(1) == 108);  // V - E + F = 0
  CHECK(fx.cx.size(2) == 72);
  CHECK(fx.cx.top_degree() == 2);
  const SpMat dd = fx.cx.d(1) * fx.cx.d(0);
  CHECK(dd.norm() == 0.0);
  CHECK(dd_zero(fx.cx, fx.bank.f[0]).gap <= 1e-12);
}

TEST_CASE("codifferential", "[exterior]") {
  Fixture fx("icosphere:subdiv=2");
  CHECK(sup(fx.cx.codifferential(0, random_vec(fx.cx.size(0), 1))) == 0.0);
  for (int k : {1, 2}) {
    const Vec a = random_vec(fx.cx.size(k - 1), 2 + k), b = random_vec(fx.cx.size(k), 4 + k);
    CHECK(codifferential_adjointness(fx.cx, k, a, b).gap <= 1e-10);
  }
}

TEST_CASE("codifferential of an exact form is minus the Laplacian", "[exterior]") {
  Fixture fx("cone:angle=3,n=6");
  const ScalarField f = fx.bank.f[0];
  const Vec lhs = fx.cx.codifferential(1, fx.cx.exterior_derivative(0, f));
  CHECK(sup(lhs + fx.dir.laplacian(f)) <= 1e-10 * sup(lhs));
  const Vec hl = fx.cx.hodge_laplacian(0, f);
  CHECK(sup(hl + fx.dir.laplacian(f)) <= 1e-10 * sup(hl));
  CHECK(delta_wedge_formula(fx.cx, fx.con, fx.bank, {f}).gap <= 1e-10);
}

TEST_CASE("Whitney projection maps gradients to differentials", "[exterior]") {
  Fixture fx("icosphere:subdiv=2");
  const ScalarField f = fx.bank.f[1];
  const Vec w = fx.cx.flat(fx.dir.gradient(f));
  const Vec df = fx.cx.exterior_derivative(0, f);
  CHECK(sup(w - df) <= 1e-10 * sup(df));
  CHECK(sup(fx.cx.sharp(df) - fx.dir.gradient(f)) <= 1e-10 * sup(fx.dir.gradient(f)));
}

TEST_CASE("Hodge stiffness is symmetric and nonnegative", "[exterior]") {
  Fixture fx("flat_torus:n=5");
  for (int k : {0, 1}) {
    const Mat K = Mat(fx.cx.stiffness(k));
    CHECK((K - K.transpose()).norm() <= 1e-10 * K.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(K).eigenvalues()[0] >= -1e-10 * K.norm());
  }
  const Vec w = random_vec(fx.cx.size(1), 7);
  CHECK(fx.cx.hodge_energy(w) >= 0.0);
  CHECK(std::abs(2 * fx.cx.hodge_energy(w) - fx.cx.inner(1, w, fx.cx.hodge_laplacian(1, w))) <=
        1e-10 * fx.cx.hodge_energy(w));
}

TEST_CASE("Betti numbers", "[exterior]") {
  struct Case {
    const char* spec;
    std::vector<int> b;
  };
  for (const Case& c : {Case{"flat_torus:n=6", {1, 2, 1}}, Case{"icosphere:subdiv=1", {1, 0, 1}},
                        Case{"union:flat_torus(n=4)+flat_torus(n=5)", {2, 4, 2}}, Case{"interval:n=10", {1, 0}}}) {
    Fixture fx(c.spec);
    const BettiReport r = betti(fx.cx);
    INFO(c.spec);
    CHECK(r.eigen == c.b);
    CHECK(r.rank_nullity == c.b);
    CHECK(r.agree);
  }
}

TEST_CASE("sparse rank", "[exterior]") {
  SpMat a(3, 3);
  a.insert(0, 0) = 1.0;
  a.insert(1, 1) = 2.0;
  a.insert(2, 0) = 3.0;
  CHECK(sparse_rank(a) == 2);
  CHECK(sparse_rank(SpMat(4, 2)) == 0);
}

TEST_CASE("Hodge decomposition on the torus", "[exterior]") {
  Fixture fx("flat_torus:n=8");
  const HarmonicBasis h1 = harmonic_forms(fx.cx, 1);
  REQUIRE(h1.basis.cols() == 2);
  CHECK_FALSE(h1.ambiguous);
  const Vec w = random_vec(fx.cx.size(1), 8);
  const HodgeDecomposition d = hodge_decomposition(fx.cx, w, h1);
  CHECK(d.reconstruction <= 1e-8);
  CHECK(d.orthogonality <= 1e-8);
  CHECK(d.closed <= 1e-8);
  CHECK(d.coclosed <= 1e-8);
  // Harmonic forms are closed and coclosed.
  for (int j = 0; j < 2; ++j) CHECK(sup(fx.cx.hodge_laplacian(1, h1.basis.col(j))) <= 1e-6);
}

TEST_CASE("first Betti number bound on flat spaces", "[exterior]") {
  Fixture fx("flat_torus:n=6");
  CHECK(betti_bound_rcd0(fx.cx, betti(fx.cx)).gap == 0.0);
}

TEST_CASE("Hodge heat flow", "[exterior]") {
  Fixture fx("flat_torus:n=12");
  const Vec w = fx.cx.flat(fx.bank.fields[0]);
  CHECK(sup(fx.cx.hodge_heat_flow(1, w, 0.0) - w) == 0.0);
  CHECK(form_contraction_check(fx.cx, w, 0.0, 0.0).gap == 0.0);
  CHECK(form_contraction_check(fx.cx, Vec::Zero(w.size()), 0.1, 0.0).gap == 0.0);
  CHECK(form_contraction_check(fx.cx, w, 0.1, 0.0).gap <= 1e-9);
  CHECK(hodge_flow_commutation(fx.cx, fx.bank.f[0], 0.1).gap <= 1e-8);
  CHECK(ec_eh_inequality(fx.cx, fx.con, VectorField::Zero(fx.s.nvec()), 0.0).gap == 0.0);
}

TEST_CASE("exterior product rules converge", "[exterior]") {
  std::vector<double> leib, prod, hodge;
  for (int n : {16, 32}) {
    Fixture fx("flat_torus:n=" + std::to_string(n));
    leib.push_back(ext_leibniz(fx.cx, fx.bank.f[0], fx.bank.f[1]).gap);
    prod.push_back(codifferential_product(fx.cx, fx.bank.f[0], fx.bank.f[1]).gap);
    hodge.push_back(hodge_identity_1forms(fx.cx, fx.bank, fx.bank.f[0], fx.bank.f[1]).gap);
  }
  CHECK(leib[1] <= 0.75 * leib[0]);
  CHECK(prod[1] <= 0.75 * prod[0]);
  CHECK(hodge[1] <= 0.75 * hodge[0]);
}
