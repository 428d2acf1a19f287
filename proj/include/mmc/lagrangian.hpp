#pragma once

#include <stdexcept>

#include "mmc/covariant.hpp"

namespace mmc {

// Probability weights over vertices on a time grid. Densities are mu / m_v.
struct MeasureCurve {
  std::vector<double> t;
  std::vector<Vec> mu;
};

// Per-time velocity; aligned with the curve's grid.
struct VelocityTrack {
  std::vector<VectorField> X;
};

// max_t |sum mu_t - 1|; throws on negative weights or mismatched sizes.
double mass_defect(const DiscreteSpace& s, const MeasureCurve& curve);
// Smallest C with mu_t <= C m for all t.
double compression_bound(const DiscreteSpace& s, const MeasureCurve& curve);
// sum_k dt_k int |X_k|^2 d mu_k, left rule.
double kinetic_energy(const DiscreteSpace& s, const MeasureCurve& curve, const VelocityTrack& track);
// Centered differences of the track; endpoints dropped.
std::vector<double> time_derivative_norms(const DiscreteSpace& s, const MeasureCurve& curve,
                                          const VelocityTrack& track);

// Normalized Gaussian bump sampled at vertices, cut at 3 widths. Torus chart only.
Vec torus_blob(const DiscreteSpace& s, double cx, double cy, double width);

// mu_t = h_t(rho0) m on a uniform grid, from the exact semigroup of the
// discrete Laplacian (dense spectral factorization; nv <= 2000).
MeasureCurve heat_curve(const Dirichlet& dir, const ScalarField& rho0, double T, int steps);
// X_t = -grad rho_t / rho_t with rho_t taken as the cell average.
VelocityTrack heat_velocity(const Dirichlet& dir, const MeasureCurve& curve);

// Translation of a torus blob with constant chart velocity v: mu_t is the
// bump centred at c + t v, sampled and normalized. X_t = v.
MeasureCurve translation_curve(const DiscreteSpace& s, const Eigen::Vector2d& c, double width,
                               const Eigen::Vector2d& v, const std::vector<double>& times);
VelocityTrack constant_track(const DiscreteSpace& s, const Eigen::Vector2d& v, std::size_t count);

// max over f and interior times of |(F_{k+1} - F_{k-1}) / (t_{k+1} - t_{k-1}) - int df(X_k) d mu_k|,
// F_k = int f d mu_k, over the largest |int df(X_k) d mu_k|.
Measurement continuity_residual(const Dirichlet& dir, const MeasureCurve& curve, const VelocityTrack& track,
                                const std::vector<ScalarField>& fs);

// Right-hand side int Hf(X,X) + <grad f, dX/dt> + <grad_X X, grad f> d mu at grid index k (interior).
double second_order_rhs(const Connection& con, const TestFunctionBank& bank, const MeasureCurve& curve,
                        const VelocityTrack& track, const ScalarField& f, std::size_t k);
// Second centered difference of int f d mu_t against the right-hand side at interior times.
Measurement second_order_formula(const Connection& con, const TestFunctionBank& bank, const MeasureCurve& curve,
                                 const VelocityTrack& track, const ScalarField& f);
// Chart-flow study at time t0: second differences at dt, dt/2, dt/4.
// gap: Richardson-extrapolated second difference against the right-hand side, relative.
// extra["ratio"]: |D(dt/2) - D(dt/4)| / |D(dt) - D(dt/2)|, 1/4 for a second-order scheme.
Measurement second_order_chart_study(const Connection& con, const TestFunctionBank& bank, const ScalarField& f,
                                     const Eigen::Vector2d& c, double width, const Eigen::Vector2d& v, double t0,
                                     double dt);

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BBOptions {
  int steps = 16;
  int max_iter = 20000;
  double tol = 1e-7;  // primal and dual residuals, relative
};

struct BBResult {
  double value = 0.0;  // sum dt int |m|^2 / rho
  MeasureCurve curve;
  VelocityTrack track;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double continuity_defect = 0.0;  // of the returned curve
  bool converged = false;
};

// Dynamic transport by ADMM on a staggered grid: densities at vertices and
// integer times, momenta at cells and half times. Throws SolverError on
// mismatched masses or disconnected supports.
BBResult benamou_brenier(const Dirichlet& dir, const Vec& mu0, const Vec& mu1, const BBOptions& opt = {});

// Squared distance between vertices used by the transport oracle: exact
// chart distance on the torus, shortest-path length along cell edges otherwise.
Mat oracle_cost(const DiscreteSpace& s, const std::vector<int>& from, const std::vector<int>& to);
// Assignment linear program over vertex pairs, by min-cost flow on integer mass units.
double transport_lp(const DiscreteSpace& s, const Vec& mu0, const Vec& mu1, long units = 10000000);

}  // namespace mmc
