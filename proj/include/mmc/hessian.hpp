#pragma once

#include "mmc/dirichlet.hpp"

namespace mmc {

enum class HessianMethod { local_formula, weak_lsq };

std::string to_string(HessianMethod m);
HessianMethod hessian_method_from_string(const std::string& s);

struct HessianResult {
  Tensor2Field H;  // symmetric
  double residual = 0.0;
  HessianMethod method = HessianMethod::local_formula;
  std::vector<int> deficient_cells;
  int iterations = 0;
};

HessianResult weak_hessian(const Dirichlet& dir, const ScalarField& f, const TestFunctionBank& bank,
                           HessianMethod method = HessianMethod::local_formula);

double hessian_energy(const DiscreteSpace& s, const Tensor2Field& H);

// Right-hand side of the integrated Hessian identity for weight w and
// generators given by per-cell gradients: returns int w H f(g1, g2).
double weak_hessian_pairing(const Dirichlet& dir, const ScalarField& f, const ScalarField& w,
                            const VectorField& g1, const VectorField& g2);

// Dual lower bound for 2 E2(f) over families w * (g1 x g2) with w from
// products of bank members and (g1, g2) from the bank frame.
struct DualityFamily {
  std::vector<ScalarField> weights;
  std::vector<std::pair<int, int>> pairs;
  Mat gram_eigvecs;
  Vec gram_eigvals;
};
// Gram directions below this fraction of the largest eigenvalue are dropped:
// members with L2 norm under 1% are not resolved, and the weak pairing error
// divided by their norm is unbounded.
inline constexpr double kDualityGramCutoff = 1e-4;
// {1} U bank U products of the first nprod members.
std::vector<ScalarField> duality_weights(const DiscreteSpace& s, const TestFunctionBank& bank, int nprod);
DualityFamily hessian_duality_family(const Dirichlet& dir, const TestFunctionBank& bank, int nprod = 10);
double e2_duality(const Dirichlet& dir, const ScalarField& f, const TestFunctionBank& bank,
                  const DualityFamily& family, double rel_cutoff = kDualityGramCutoff);
double e2_duality(const Dirichlet& dir, const ScalarField& f, const TestFunctionBank& bank);

// Key inequality at vertices; gap is the positive part of lhs - rhs over max rhs.
Measurement key_inequality(const Dirichlet& dir, const std::vector<ScalarField>& fs,
                           const std::vector<ScalarField>& gs, const std::vector<ScalarField>& hs, double K);
// |Hf|^2 <= gamma2(f,f) - K |grad f|^2 pointwise. extra["two_sided"] is the
// max |lhs - rhs| over max |rhs|, for spaces where the bound is an equality.
Measurement hs_bound(const Dirichlet& dir, const ScalarField& f, const Tensor2Field& H, double K);
// E2(f) <= int (Delta f)^2 - K |grad f|^2.
Measurement e2_apriori(const Dirichlet& dir, const ScalarField& f, const Tensor2Field& H, double K);
// Integrated Bochner identity int |Hf|^2 = int (Delta f)^2 - K |grad f|^2 on constant-curvature models.
Measurement integrated_bochner(const Dirichlet& dir, const ScalarField& f, const Tensor2Field& H, double K);

// Relative L2 residuals of the Hessian calculus rules.
Measurement hessian_leibniz(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f1,
                            const ScalarField& f2);
Measurement hessian_chain(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f,
                          const Polynomial& phi);
Measurement grad_product_rule(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f1,
                              const ScalarField& f2);

// Cells whose vertex star, grown `rings` times, stays inside the region.
std::vector<char> interior_cells(const DiscreteSpace& s, const std::vector<char>& region, int rings);
Measurement hessian_locality(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f1,
                             const ScalarField& f2, const std::vector<char>& region);

// max |H - H^T| over max |H|.
Measurement hessian_symmetry(const DiscreteSpace& s, const Tensor2Field& H);
// |T|^2 = |T_sym|^2 + |T_asym|^2 in the HS inner product, integrated.
Measurement sym_asym_pythagoras(const DiscreteSpace& s, const Tensor2Field& T);

// Relative L2 norm helpers on per-cell data.
double cell_l2(const DiscreteSpace& s, const Vec& stacked, const std::vector<int>& off);
Tensor2Field symmetrize(const DiscreteSpace& s, const Tensor2Field& t);

}  // namespace mmc
