#pragma once

#include "mmc/covariant.hpp"

#include <Eigen/SparseLU>

namespace mmc {

// Whitney cochain complex on the cell structure. Degree-k cochains hold one
// value per vertex, per edge (sorted pair i < j) and per 2-cell.
// Inner products: M0 = lumped vertex masses, M1 = Galerkin Whitney mass,
// M2 = m_c / area_c^2. delta_k = M_{k-1}^{-1} d_{k-1}^T M_k.
class Complex {
 public:
  explicit Complex(const Dirichlet& dir);

  const Dirichlet& dirichlet() const { return *dir_; }
  const DiscreteSpace& space() const { return dir_->space(); }
  int top_degree() const { return nf() > 0 ? 2 : 1; }
  int size(int k) const;
  int nf() const { return static_cast<int>(faces_.size()); }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<int>& faces() const { return faces_; }  // cell id per 2-cochain slot

  const SpMat& d(int k) const;  // k = 0, 1
  const SpMat& mass(int k) const;
  // Whitney 1-form evaluated at cell centroids, as per-cell vector fields.
  const SpMat& W1() const { return w1_; }

  // L2 projection of a per-cell vector field onto Whitney 1-forms: R1(grad f) = d0 f.
  Vec flat(const VectorField& x) const;
  VectorField sharp(const Vec& w) const { return w1_ * w; }
  // 2-cochain with the given per-cell density against e1 ^ e2; and back.
  Vec two_form(const CellScalar& density) const;
  CellScalar density2(const Vec& c) const;
  // Whitney interpolation: edge value int_e f dg for P1 f, g.
  Vec interpolate_fdg(const ScalarField& f, const ScalarField& g) const;

  Vec exterior_derivative(int k, const Vec& w) const;
  // delta on 0-forms is identically zero.
  Vec codifferential(int k, const Vec& w) const;
  Vec hodge_laplacian(int k, const Vec& w) const;
  // Stiffness K_k = M_k Delta_H; symmetric positive semidefinite (k = 0, 1).
  const SpMat& stiffness(int k) const;
  double inner(int k, const Vec& a, const Vec& b) const { return a.dot(mass(k) * b); }
  // E_H = 1/2 (|d w|^2 + |delta w|^2) for a 1-cochain.
  double hodge_energy(const Vec& w) const;
  // (Delta_H X^flat)^sharp.
  VectorField hodge_laplacian_vec(const VectorField& x) const { return sharp(hodge_laplacian(1, flat(x))); }
  // Per-cell mean of |w|^2 for a cochain of degree k.
  CellScalar pointwise_norm2(int k, const Vec& w) const;

  Vec hodge_heat_flow(int k, const Vec& w, double t, double max_dt = 0.01) const;

  Vec solve_mass1(const Vec& b) const;

 private:
  const Dirichlet* dir_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<int> faces_;
  std::vector<int> face_slot_;  // per cell, -1 when not a 2-cell
  SpMat d0_, d1_, m0_, m1_, m2_, w1_, k0_, k1_;
  std::vector<Mat> m1_local_;                    // per cell, over its local edges
  std::vector<std::vector<int>> cell_edges_;
  Eigen::SimplicialLDLT<SpMat> m1_solver_;
  struct Cache {
    std::mutex mu;
    std::map<std::pair<int, double>, std::unique_ptr<Eigen::SimplicialLDLT<SpMat>>> ldlt;
    std::map<double, std::unique_ptr<Eigen::SparseLU<SpMat>>> lu2;
  };
  std::shared_ptr<Cache> cache_;
};

struct HarmonicBasis {
  int degree = 0;
  Mat basis;  // columns, M_k-orthonormal
  std::vector<double> eigenvalues;  // smallest computed, ascending
  double lambda_max = 0.0;
  double threshold = 0.0;
  double gap_factor = 0.0;  // first non-harmonic eigenvalue / threshold
  bool ambiguous = false;
};

// Shift-invert block subspace iteration in the M_k inner product; eigenvalues <= 1e-8 lambda_max
// count as harmonic, and the next one must exceed the threshold by 100x.
HarmonicBasis harmonic_forms(const Complex& cx, int k, double rel_threshold = 1e-8, int nev = 8);

struct BettiReport {
  std::vector<int> eigen;        // dim Harm_k
  std::vector<int> rank_nullity; // dim ker d_k - rank d_{k-1}
  std::vector<int> ranks;        // rank d_0, rank d_1
  bool agree = false;
  std::vector<HarmonicBasis> bases;
};
BettiReport betti(const Complex& cx);
int sparse_rank(const SpMat& a);

struct HodgeDecomposition {
  Vec exact, coexact, harmonic;
  Vec alpha, beta;  // exact = d0 alpha, coexact = delta2 beta
  double reconstruction = 0.0;  // |d alpha + delta beta + h - w| / |w|
  double orthogonality = 0.0;   // max pairwise |<., .>| / |w|^2
  double coclosed = 0.0;        // |delta coexact| / |w|
  double closed = 0.0;          // |d exact| / |w|
};
HodgeDecomposition hodge_decomposition(const Complex& cx, const Vec& w, const HarmonicBasis& h1);

// Exact and asymptotic checks.
Measurement codifferential_adjointness(const Complex& cx, int k, const Vec& a, const Vec& b);
Measurement dd_zero(const Complex& cx, const ScalarField& f);
// d(f dg) against df ^ dg with f dg = R1(f grad g).
Measurement ext_leibniz(const Complex& cx, const ScalarField& f, const ScalarField& g);
// delta(f dg) against -<grad f, grad g> - f Delta g.
Measurement codifferential_product(const Complex& cx, const ScalarField& f, const ScalarField& g);
// Smooth test 1-forms (f_i grad f_j)^flat from the bank.
std::vector<Vec> bank_test_forms(const Complex& cx, const TestFunctionBank& bank, int n = 10);
// max_j |<lhs - rhs, eta_j>| / (|rhs| |eta_j|) over test forms; the strong M1
// residual goes to extra["strong"]. Galerkin co-curl is consistent only in this sense.
Measurement weak_form_residual(const Complex& cx, const Vec& lhs, const Vec& rhs, const std::vector<Vec>& tests);
// k = 1: delta(df) = -Delta f. k = 2: delta(df ^ dg) = Delta g df - Delta f dg - [grad f, grad g]^flat.
Measurement delta_wedge_formula(const Complex& cx, const Connection& con, const TestFunctionBank& bank,
                                const std::vector<ScalarField>& fs);
// Delta_H(f dg) = -f d Delta g - Delta f dg - 2 H g(grad f, .).
Measurement hodge_identity_1forms(const Complex& cx, const TestFunctionBank& bank, const ScalarField& f,
                                  const ScalarField& g);
// h_{H,t}(df) against d h_t f.
Measurement hodge_flow_commutation(const Complex& cx, const ScalarField& f, double t, double max_dt = 0.01);
// |h_{H,t} w|^2 <= e^{-2Kt} h_t |w|^2 at vertices.
Measurement form_contraction_check(const Complex& cx, const Vec& w, double t, double K, double max_dt = 0.01);
// E_C(X) <= E_H(X^flat) - K/2 |X|^2; gap is the positive part over E_C.
Measurement ec_eh_inequality(const Complex& cx, const Connection& con, const VectorField& x, double K);
// b_1 <= max cell dimension on K = 0 spaces.
Measurement betti_bound_rcd0(const Complex& cx, const BettiReport& b);

}  // namespace mmc
