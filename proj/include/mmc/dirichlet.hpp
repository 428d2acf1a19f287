#pragma once

#include "mmc/space.hpp"
#include "mmc/verdict.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <mutex>

namespace mmc {

// Cheeger energy of the P1 model: S = D^T W D with D the per-cell gradient
// and W the cell masses. Delta = -M^{-1} S with M the lumped vertex masses.
class Dirichlet {
 public:
  explicit Dirichlet(const DiscreteSpace& s);

  const DiscreteSpace& space() const { return *s_; }
  const SpMat& D() const { return D_; }
  const Vec& W() const { return W_; }  // cell mass per vector row
  const SpMat& S() const { return S_; }
  const Vec& M() const { return s_->mv; }

  VectorField gradient(const ScalarField& f) const { return D_ * f; }
  OneForm differential(const ScalarField& f) const { return musical_flat(*s_, D_ * f); }
  ScalarField divergence(const VectorField& x) const;
  ScalarField laplacian(const ScalarField& f) const;
  SignedMeasure measure_laplacian(const ScalarField& f) const { return {-(S_ * f)}; }
  double energy(const ScalarField& f) const { return 0.5 * f.dot(S_ * f); }
  ScalarField carre_du_champ(const ScalarField& f, const ScalarField& g) const;

  // Implicit Euler, dt = t / ceil(t / max_dt).
  ScalarField heat_flow(const ScalarField& f, double t, double max_dt = 0.01) const;
  std::vector<ScalarField> heat_trajectory(const ScalarField& f, double t, double max_dt = 0.01) const;
  static int heat_steps(double t, double max_dt);

  SignedMeasure gamma2(const ScalarField& f, const ScalarField& g) const;
  ScalarField gamma2_density(const ScalarField& f, const ScalarField& g) const;

  // Per-cell H[f](g1, g2) with g1, g2 given by their per-cell gradients.
  CellScalar hform_cells(const ScalarField& f, const VectorField& g1, const VectorField& g2) const;
  ScalarField hessian_form_H(const ScalarField& f, const ScalarField& g, const ScalarField& h) const;

  // Sparse factorization of M + dt S, cached per dt.
  const Eigen::SimplicialLDLT<SpMat>& heat_solver(double dt) const;

 private:
  const DiscreteSpace* s_;
  SpMat D_;
  Vec W_;
  SpMat S_;
  struct Cache {
    std::mutex mu;
    std::map<double, std::unique_ptr<Eigen::SimplicialLDLT<SpMat>>> solvers;
  };
  std::shared_ptr<Cache> cache_;
};

// Scalar test functions and generated vector fields.
struct TestFunctionBank {
  std::vector<ScalarField> f;
  std::vector<std::string> labels;
  std::vector<double> grad_sup;      // sup of |grad f| per member
  std::vector<VectorField> fields;   // sum_i B(g_i) grad f_i
  std::vector<std::vector<std::pair<int, int>>> field_terms;  // (g index, f index)
  // Gradient generators with known second-order behavior: constant
  // coordinate fields on the torus, tangential coordinate gradients otherwise.
  std::vector<VectorField> frame;
  bool frame_parallel = false;
  unsigned long long seed = 0;
  double tau = 0.0;
  std::vector<std::string> warnings;
};

// nf seeded random members followed by the chart's coordinate lifts, each
// smoothed by h_tau.
TestFunctionBank test_functions(const Dirichlet& dir, int nf, unsigned long long seed, double tau,
                                int nfields = 10);

// Analytic coordinate lifts per chart, used by oracles and by the bank.
std::vector<ScalarField> coordinate_lifts(const DiscreteSpace& s, std::vector<std::string>* labels = nullptr);

// Polynomial map R^n -> R with exact partial derivatives.
struct Polynomial {
  struct Term {
    double coef;
    std::vector<int> exps;
  };
  int nvars = 1;
  std::vector<Term> terms;

  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Mat hess(const Vec& x) const;

  static Polynomial identity();
  static Polynomial product();  // x*y
  static Polynomial square();   // x^2
};

struct MultivariateGamma2 {
  SignedMeasure A;
  ScalarField B;
  ScalarField C;
  ScalarField D;
  Measurement gamma2_residual;  // Gamma2(Phi(f)) against A + (B + C) m, relative TV
  Measurement grad_residual;    // |grad Phi(f)|^2 against D, relative sup
};

MultivariateGamma2 multivariate_gamma2(const Dirichlet& dir, const Polynomial& phi,
                                       const std::vector<ScalarField>& fs);

// Bakry-Emery contraction |grad h_t f|^2 <= e^{-2Kt} h_t(|grad f|^2) and the
// first-power form. Gap is the positive part of the violation over the max of the bound.
Measurement bakry_emery(const Dirichlet& dir, const ScalarField& f, double t, double K);
Measurement bakry_emery_first_power(const Dirichlet& dir, const ScalarField& f, double t, double K);

// Exact identities of the assembled operators; relative gaps.
// int g div X = -int <grad g, X>.
Measurement div_grad_adjointness(const Dirichlet& dir, const ScalarField& g, const VectorField& x);
// Delta f = div grad f.
Measurement laplacian_div_grad(const Dirichlet& dir, const ScalarField& f);
// Lap f (M) = 0, over the TV of Lap f.
Measurement laplacian_total_mass(const Dirichlet& dir, const ScalarField& f);
// Gamma2(f,f)(M) = int (Delta f)^2.
Measurement gamma2_mass_identity(const Dirichlet& dir, const ScalarField& f);

}  // namespace mmc
