#include <catch_amalgamated.hpp>

#include <cmath>

#include "mmc/lagrangian.hpp"

using namespace mmc;

namespace {

const double kPi = std::acos(-1.0);

MeasureCurve static_curve(const Vec& mu, int n) {
  MeasureCurve c;
  for (int k = 0; k < n; ++k) {
    c.t.push_back(0.1 * k);
    c.mu.push_back(mu);
  }
  return c;
}

}  // namespace

TEST_CASE("torus blobs are probability weights", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(16, 2 * kPi);
  const Vec mu = torus_blob(s, 1.0, 2.0, 0.5);
  CHECK(std::abs(mu.sum() - 1.0) <= 1e-12);
  CHECK(mu.minCoeff() >= 0.0);
  CHECK_THROWS(torus_blob(icosphere(1, 1.0), 0.0, 0.0, 0.5));
}

TEST_CASE("static curve satisfies both formulas trivially", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(12, 2 * kPi);
  const Dirichlet dir(s);
  const Connection con(dir);
  const TestFunctionBank bank = test_functions(dir, 20, 42, 0.05);
  const MeasureCurve curve = static_curve(torus_blob(s, 3.0, 3.0, 0.8), 5);
  const VelocityTrack zero{std::vector<VectorField>(5, VectorField::Zero(s.nvec()))};
  const Measurement first = continuity_residual(dir, curve, zero, {bank.f[0], bank.f[1]});
  CHECK(first.lhs == 0.0);
  CHECK(first.gap == 0.0);
  const Measurement second = second_order_formula(con, bank, curve, zero, bank.f[0]);
  CHECK(second.lhs == 0.0);
  CHECK(kinetic_energy(s, curve, zero) == 0.0);
  CHECK(mass_defect(s, curve) <= 1e-12);
}

TEST_CASE("curve validation", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(6, 2 * kPi);
  MeasureCurve bad = static_curve(Vec::Constant(s.nv, 1.0 / s.nv), 3);
  bad.mu[1][0] = -1e-3;
  CHECK_THROWS_AS(mass_defect(s, bad), std::invalid_argument);
  const VelocityTrack short_track{std::vector<VectorField>(2, VectorField::Zero(s.nvec()))};
  CHECK_THROWS_AS(kinetic_energy(s, static_curve(Vec::Constant(s.nv, 1.0 / s.nv), 3), short_track),
                  std::invalid_argument);
}

TEST_CASE("heat flow curve solves the continuity equation", "[lagrangian]") {
  // The flux is exact in space for this velocity; only the centered time
  // difference errs, at second order in dt.
  const DiscreteSpace s = flat_torus(12, 2 * kPi);
  const Dirichlet dir(s);
  const TestFunctionBank bank = test_functions(dir, 6, 42, 0.05);
  ScalarField rho0 = ScalarField::Ones(s.nv) + 0.5 * bank.f[0] / bank.f[0].cwiseAbs().maxCoeff();
  rho0 /= integrate(s, rho0);
  std::vector<double> gaps;
  for (int steps : {10, 20, 40}) {
    const MeasureCurve curve = heat_curve(dir, rho0, 0.2, steps);
    CHECK(mass_defect(s, curve) <= 1e-10);
    gaps.push_back(continuity_residual(dir, curve, heat_velocity(dir, curve), {bank.f[1], bank.f[2]}).gap);
  }
  CHECK(gaps[0] < 0.01);
  CHECK(gaps[1] <= 0.3 * gaps[0]);
  CHECK(gaps[2] <= 0.3 * gaps[1]);
}

TEST_CASE("translation kinetic energy", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(16, 2 * kPi);
  const Eigen::Vector2d v(1.0, 0.5);
  const MeasureCurve curve = translation_curve(s, {2.0, 3.0}, 0.6, v, {0.0, 0.25, 0.5, 0.75, 1.0});
  const VelocityTrack track = constant_track(s, v, curve.t.size());
  CHECK(std::abs(kinetic_energy(s, curve, track) - v.squaredNorm()) <= 1e-10);
  for (double d : time_derivative_norms(s, curve, track)) CHECK(d == 0.0);
}

TEST_CASE("static transport oracle", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(12, 2 * kPi);
  const Vec mu0 = torus_blob(s, 2.0, 2.0, 0.6);
  CHECK(transport_lp(s, mu0, mu0) == 0.0);
  std::vector<int> all(s.nv);
  for (int i = 0; i < s.nv; ++i) all[i] = i;
  const Mat c = oracle_cost(s, all, all);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(c.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.maxCoeff() <= 2 * kPi * kPi + 1e-9);  // half-diagonal of the periodic square, squared
}

TEST_CASE("translated blob transports at the squared shift", "[lagrangian]") {
  // Supports of radius 0.75 shifted by a quarter period: every pair is closer
  // than half the period, so torus and planar costs agree and the grid
  // translate is optimal.
  const DiscreteSpace s = flat_torus(16, 2 * kPi);
  const double shift = 2 * kPi / 4;
  const Vec mu0 = torus_blob(s, 2.0, 3.0, 0.25);
  const Vec mu1 = torus_blob(s, 2.0 + shift, 3.0, 0.25);
  CHECK(std::abs(transport_lp(s, mu0, mu1) / (shift * shift) - 1.0) <= 1e-6);
}

TEST_CASE("wide blobs transport cheaper across the torus seam", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(16, 2 * kPi);
  const double shift = 2 * kPi / 4;
  const Vec mu0 = torus_blob(s, 2.0, 3.0, 0.6);
  const Vec mu1 = torus_blob(s, 2.0 + shift, 3.0, 0.6);
  CHECK(transport_lp(s, mu0, mu1) < shift * shift);
}

TEST_CASE("dynamic transport between equal measures is free", "[lagrangian]") {
  const DiscreteSpace s = flat_torus(8, 2 * kPi);
  const Dirichlet dir(s);
  const Vec mu = torus_blob(s, 3.0, 3.0, 1.0);
  BBOptions opt;
  opt.steps = 4;
  opt.max_iter = 500;
  const BBResult r = benamou_brenier(dir, mu, mu, opt);
  CHECK(r.value <= 1e-6);
  CHECK(r.curve.mu.size() == 5);
  Vec heavier = mu * 2.0;
  CHECK_THROWS_AS(benamou_brenier(dir, mu, heavier, opt), SolverError);
}
