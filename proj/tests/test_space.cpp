#include <catch_amalgamated.hpp>

#include <cmath>
#include <algorithm>
#include <limits>
#include <random>

#include "mmc/space.hpp"

using namespace mmc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double kPi = std::acos(-1.0);

Vec random_vec(Eigen::Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(gen);
  return v;
}

double triangle_area_sum(const DiscreteSpace& s) {
  double total = 0.0;
  for (int c = 0; c < s.nc; ++c) {
    const Eigen::Matrix3d& p = s.local[c];
    total += 0.5 * (p.col(1) - p.col(0)).cross(p.col(2) - p.col(0)).norm();
  }
  return total;
}

}  // namespace

TEST_CASE("flat torus generator counts and mass", "[space]") {
  const DiscreteSpace s = build_space("flat_torus:n=4,side=6.283185307179586");
  CHECK(s.nv == 16);
  CHECK(s.nc == 32);
  CHECK(s.max_dim() == 2);
  CHECK_THAT(s.total_mass(), WithinRel(4 * kPi * kPi, 1e-12));
  CHECK_THAT(s.mv.sum(), WithinRel(s.mc.sum(), 1e-12));
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("icosphere mass is its inscribed triangle area", "[space]") {
  const DiscreteSpace s = icosphere(0, 1.0);
  CHECK(s.nv == 12);
  CHECK(s.nc == 20);
  CHECK_THAT(s.total_mass(), WithinRel(triangle_area_sum(s), 1e-12));
  // Icosahedron inscribed in the unit sphere: edge 4 / sqrt(10 + 2 sqrt 5).
  const double edge = 4.0 / std::sqrt(10.0 + 2.0 * std::sqrt(5.0));
  CHECK_THAT(s.total_mass(), WithinRel(5.0 * std::sqrt(3.0) * edge * edge, 1e-12));
  // Inscribed polyhedra approach the sphere area from below.
  double prev = s.total_mass();
  for (int k = 1; k <= 3; ++k) {
    const double m = icosphere(k, 1.0).total_mass();
    CHECK(m > prev);
    CHECK(m < 4 * kPi);
    prev = m;
  }
  CHECK(std::abs(icosphere(1, 1.0).total_mass() - 4 * kPi) <= 0.15 * 4 * kPi);
}

TEST_CASE("cone mass equals its triangle areas", "[space]") {
  const DiscreteSpace s = build_space("cone:angle=3.14159,n=8");
  CHECK_THAT(s.total_mass(), WithinRel(triangle_area_sum(s), 1e-12));
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("every metric is positive definite and frames orthonormal", "[space]") {
  for (const char* spec : {"flat_torus:n=6", "icosphere:subdiv=1", "cone:angle=2,n=6"}) {
    const DiscreteSpace s = build_space(spec);
    for (int c = 0; c < s.nc; ++c) {
      CHECK(Eigen::SelfAdjointEigenSolver<Mat>(s.gram[c]).eigenvalues()[0] > 0.0);
      CHECK((s.gram[c] - s.gram[c].transpose()).norm() == 0.0);
      const Mat ftf = s.frame[c].transpose() * s.frame[c];
      CHECK((ftf - Mat::Identity(ftf.rows(), ftf.cols())).norm() <= 1e-12);
    }
  }
}

TEST_CASE("descriptor parsing round-trips and refinement doubles n", "[space]") {
  const SpaceSpec sp = parse_space_spec("flat_torus:n=8,side=3");
  CHECK(sp.name == "flat_torus");
  CHECK(parse_space_spec(format_space_spec(sp)).params == sp.params);
  CHECK(parse_space_spec(refine_spec("flat_torus:n=8")).params.at("n") == "16");
  CHECK(parse_space_spec(refine_spec("icosphere:subdiv=2")).params.at("subdiv") == "3");
  CHECK_THROWS(build_space("no_such_generator:n=3"));
}

TEST_CASE("space hash is deterministic", "[space]") {
  CHECK(build_space("flat_torus:n=5").hash() == build_space("flat_torus:n=5").hash());
  CHECK(build_space("flat_torus:n=5").hash() != build_space("flat_torus:n=6").hash());
}

TEST_CASE("pointwise inner product", "[space]") {
  const DiscreteSpace s = build_space("flat_torus:n=6");
  const Vec x = random_vec(s.nvec(), 1), y = random_vec(s.nvec(), 2);
  CHECK(cell_inner(s, x, x).minCoeff() >= 0.0);
  CHECK(cell_inner(s, x, Vec::Zero(s.nvec())).cwiseAbs().maxCoeff() == 0.0);
  const CellScalar xy = cell_inner(s, x, y), nx = cell_norm(s, x), ny = cell_norm(s, y);
  for (int c = 0; c < s.nc; ++c) CHECK(std::abs(xy[c]) <= nx[c] * ny[c] * (1 + 1e-14));
}

TEST_CASE("musical isomorphisms", "[space]") {
  DiscreteSpace s = build_space("flat_torus:n=4");
  const Vec x = random_vec(s.nvec(), 3);
  CHECK(musical_sharp(s, musical_flat(s, x)) == x);  // identity metric
  const CellScalar n_form = kform_norm2(s, kform_from_vector(s, x));
  CHECK((n_form - cell_inner(s, x, x)).cwiseAbs().maxCoeff() <= 1e-12 * n_form.maxCoeff());

  s.gram[0] = Mat::Identity(2, 2);
  s.gram[0](0, 0) = 2.0;
  Vec e1 = Vec::Zero(s.nvec());
  e1[s.voff[0]] = 1.0;
  const OneForm w = musical_flat(s, e1);
  CHECK(w[s.voff[0]] == 2.0);
  CHECK(w[s.voff[0] + 1] == 0.0);
  CHECK_THAT(kform_norm2(s, kform_from_vector(s, e1))[0], WithinRel(cell_inner(s, e1, e1)[0], 1e-14));
}

TEST_CASE("Hilbert-Schmidt products of tensors", "[space]") {
  const DiscreteSpace s = build_space("flat_torus:n=4");
  const Vec x = random_vec(s.nvec(), 4), y = random_vec(s.nvec(), 5);
  const Tensor2Field xy = outer(s, x, y);
  const CellScalar lhs = cell_hs_inner(s, xy, xy);
  const CellScalar rhs = cell_inner(s, x, x).cwiseProduct(cell_inner(s, y, y));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * rhs.maxCoeff());
  const Vec a = random_vec(s.nten(), 6), b = random_vec(s.nten(), 7);
  CHECK(cell_hs_inner(s, a, b) == cell_hs_inner(s, b, a));
  const CellScalar id = cell_hs_inner(s, identity_tensor(s), identity_tensor(s));
  CHECK((id.array() - 2.0).abs().maxCoeff() <= 1e-14);
}

TEST_CASE("symmetric and antisymmetric split", "[space]") {
  const DiscreteSpace s = build_space("flat_torus:n=4");
  const Vec x = random_vec(s.nvec(), 8), y = random_vec(s.nvec(), 9);
  const Tensor2Field sym = outer(s, x, x);
  auto [s1, a1] = sym_asym_split(s, sym);
  CHECK((s1 - sym).cwiseAbs().maxCoeff() <= 1e-14 * sym.cwiseAbs().maxCoeff());
  CHECK(a1.cwiseAbs().maxCoeff() <= 1e-14 * sym.cwiseAbs().maxCoeff());

  const Tensor2Field anti = outer(s, x, y) - outer(s, y, x);
  auto [s2, a2] = sym_asym_split(s, anti);
  CHECK(s2.cwiseAbs().maxCoeff() <= 1e-14 * anti.cwiseAbs().maxCoeff());
  CHECK((a2 - anti).cwiseAbs().maxCoeff() <= 1e-14 * anti.cwiseAbs().maxCoeff());

  const Vec a = random_vec(s.nten(), 10);
  auto [sa, aa] = sym_asym_split(s, a);
  CHECK((sa + aa - a).cwiseAbs().maxCoeff() <= 1e-15 * a.cwiseAbs().maxCoeff());
  const double total = integrate_cells(s, cell_hs_inner(s, a, a));
  const double parts = integrate_cells(s, cell_hs_inner(s, sa, sa)) + integrate_cells(s, cell_hs_inner(s, aa, aa));
  CHECK(std::abs(total - parts) <= 1e-12 * total);
}

TEST_CASE("wedge products", "[space]") {
  const DiscreteSpace s = build_space("flat_torus:n=4");
  const KForm w = kform_from_vector(s, random_vec(s.nvec(), 11));
  const KForm e = kform_from_vector(s, random_vec(s.nvec(), 12));
  CHECK(wedge(s, w, w).values.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((wedge(s, w, e).values + wedge(s, e, w).values).cwiseAbs().maxCoeff() <= 1e-15);

  // dx ^ dy in the chart frame has unit norm.
  Vec dx = Vec::Zero(s.nvec()), dy = Vec::Zero(s.nvec());
  for (int c = 0; c < s.nc; ++c) {
    const Eigen::Vector3d ex(1, 0, 0), ey(0, 1, 0);
    dx.segment(s.voff[c], 2) = s.frame[c].transpose() * ex;
    dy.segment(s.voff[c], 2) = s.frame[c].transpose() * ey;
  }
  const CellScalar n2 = kform_norm2(s, wedge(s, kform_from_vector(s, dx), kform_from_vector(s, dy)));
  CHECK((n2.array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("local dimension classes", "[space]") {
  const auto torus = local_dimension(build_space("flat_torus:n=4"));
  REQUIRE(torus.size() == 1);
  CHECK(torus[0].dim == 2);
  const auto mixed = local_dimension(build_space("union:flat_torus(n=4)+interval(n=8)"));
  REQUIRE(mixed.size() == 2);
  CHECK(std::min(mixed[0].dim, mixed[1].dim) == 1);
  CHECK(std::max(mixed[0].dim, mixed[1].dim) == 2);
  for (const auto& c : mixed) CHECK(c.mass > 0.0);
}

TEST_CASE("weighted norms", "[space]") {
  const DiscreteSpace s = build_space("flat_torus:n=8,side=6.283185307179586");
  CHECK_THAT(lp_norm(s, ScalarField::Ones(s.nv), 2.0), WithinRel(2 * kPi, 1e-12));
  ScalarField f = ScalarField::Zero(s.nv);
  f[3] = -3.0;
  f[5] = 2.0;
  CHECK(lp_norm(s, f, std::numeric_limits<double>::infinity()) == 3.0);

  const Vec x = random_vec(s.nvec(), 13);
  const CellScalar g = random_vec(s.nc, 14);
  const double lhs = lp_norm_cells(s, cell_norm(s, scale_cells(s, g, x)), 2.0);
  const double rhs = g.cwiseAbs().maxCoeff() * lp_norm_cells(s, cell_norm(s, x), 2.0);
  CHECK(lhs <= rhs);
}
