#pragma once

#include "mmc/hessian.hpp"

namespace mmc {

// Covariant derivative of per-cell vector fields, assembled once per space.
// With generators E_i = grad x_i (tangential coordinate fields) and
// X = sum_i X^i E_i, where X^i is the ambient component of X:
//   grad X = sum_i grad(A X^i) (x) E_i + X^i H x_i.
// On the flat torus E_i are the constant coordinate fields and H x_i = 0.
class Connection {
 public:
  explicit Connection(const Dirichlet& dir);

  const Dirichlet& dirichlet() const { return *dir_; }
  const DiscreteSpace& space() const { return dir_->space(); }
  const SpMat& Cov() const { return cov_; }      // nten x nvec
  const Vec& Wt() const { return wt_; }          // cell mass per tensor entry
  const std::vector<VectorField>& generators() const { return gen_; }
  const std::vector<Tensor2Field>& generator_hessians() const { return gen_hess_; }
  bool parallel() const { return parallel_; }

  Tensor2Field apply(const VectorField& x) const { return cov_ * x; }
  double energy(const VectorField& x) const;  // E_C = 1/2 int |grad X|^2
  // Delta_C = -Mcell^{-1} Cov^T Wt Cov.
  VectorField laplacian(const VectorField& x) const;
  // Implicit Euler, dt = t / ceil(t / max_dt).
  VectorField heat_flow(const VectorField& x, double t, double max_dt = 0.01) const;
  std::vector<VectorField> heat_trajectory(const VectorField& x, double t, double max_dt = 0.01) const;

 private:
  const Dirichlet* dir_;
  SpMat cov_;
  Vec wt_;
  std::vector<VectorField> gen_;
  std::vector<Tensor2Field> gen_hess_;
  bool parallel_ = false;
  struct Cache {
    std::mutex mu;
    std::map<double, std::unique_ptr<Eigen::SimplicialLDLT<SpMat>>> solvers;
  };
  std::shared_ptr<Cache> cache_;
  const Eigen::SimplicialLDLT<SpMat>& solver(double dt) const;
};

enum class CovariantMethod { generator, weak_lsq };
std::string to_string(CovariantMethod m);
CovariantMethod covariant_method_from_string(const std::string& s);

struct CovariantResult {
  Tensor2Field T;  // T[a][b] = <grad_{e_a} X, e_b>
  double residual = 0.0;
  CovariantMethod method = CovariantMethod::generator;
  bool fallback = false;
  int iterations = 0;
};

// Generator route falls back to weak-lsq when the decomposition residual
// exceeds 1e-6 |X|.
CovariantResult weak_covariant(const Connection& con, const VectorField& x, const TestFunctionBank& bank,
                               CovariantMethod method = CovariantMethod::generator);

// <grad_Z X, Y> = grad X : (Z (x) Y).
VectorField directional_derivative(const DiscreteSpace& s, const Tensor2Field& gradx, const VectorField& z);
VectorField lie_bracket(const Connection& con, const VectorField& x, const VectorField& y);

// Relative L2 residuals.
Measurement covariant_leibniz(const Connection& con, const ScalarField& f, const VectorField& x);
Measurement metric_compatibility(const Connection& con, const VectorField& x, const VectorField& y,
                                 const VectorField& z);
Measurement torsion_free_check(const Connection& con, const ScalarField& f, const VectorField& x,
                               const VectorField& y);
// [grad f, grad g] against H g(grad f, .) - H f(grad g, .).
Measurement bracket_of_gradients(const Connection& con, const TestFunctionBank& bank, const ScalarField& f,
                                 const ScalarField& g);
// max over cells of |grad_Z X| - |grad X|_HS |Z|, positive part.
Measurement contraction_bound(const Connection& con, const VectorField& x, const VectorField& z);
// |int <Y, Delta_C X> + int grad Y : grad X| relative to the product of norms.
Measurement connection_adjointness(const Connection& con, const VectorField& x, const VectorField& y);

// Dual lower bound for E_C over families B(w) E_a (x) E_b.
double ec_duality(const Connection& con, const VectorField& x, const TestFunctionBank& bank, int nprod = 10,
                  double rel_cutoff = kDualityGramCutoff);

// |h_{C,t} X|^2 <= h_t |X|^2 at vertices.
Measurement kato_type_check(const Connection& con, const VectorField& x, double t, double max_dt = 0.01);

Measurement covariant_locality(const Connection& con, const VectorField& x1, const VectorField& x2,
                               const std::vector<char>& region);

// Cells whose centroid lies in the first half of the torus in x.
std::vector<char> half_torus_region(const DiscreteSpace& s);

}  // namespace mmc
