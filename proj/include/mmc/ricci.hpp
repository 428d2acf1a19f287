#pragma once

#include "mmc/exterior.hpp"

namespace mmc {

// Vertex-weight Ricci measure
//   Ric(X, Y) = Lap <X,Y>/2 + (1/2 <X, (D_H Y^flat)^sharp> + 1/2 <Y, (D_H X^flat)^sharp> - grad X : grad Y) m
// with per-cell densities pushed to vertices by the mass-weighted average.
// The three parts are kept so that reports can show which one dominates.
struct RicciMeasure {
  SignedMeasure mu;
  ScalarField density;  // mu / m_v
  Vec laplacian_part, hodge_part, hs_part;  // vertex weights; mu = sum
  double K = 0.0;
  std::string x_id, y_id;

  // Sum of the TV norms of the parts: the size of what cancels in mu.
  double scale() const;
};

RicciMeasure ricci_measure(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y);

// Density checks compare measures after heat mollification h_tau of their
// densities, i.e. tested against the heat kernels at time tau (pass the bank's
// smoothing time). The vertex measure Laplacian has no pointwise-consistent
// density on irregular meshes; tau = 0 gives the raw vertex densities, which
// are always reported in extra["raw"].

// Bochner defect Lap|X|^2/2 - |grad X|^2 + <X, (D_H X^flat)^sharp> - K|X|^2 m.
// gap: negative part over the max HS density. extra: two_sided (max |defect|
// over the same scale) and laplacian_mass (|Lap(|X|^2/2)(M)| over its TV).
Measurement bochner_check(const Complex& cx, const Connection& con, const VectorField& x, double K,
                          double tau = 0.0);
// Ric(X,X) >= K|X|^2 m; the same defect read as a bound.
Measurement ricci_lower_bound(const Complex& cx, const Connection& con, const VectorField& x, double K,
                              double tau = 0.0);
// Ric(X,Y)(M) against int <dX,dY> + dX dY - grad X : grad Y.
Measurement ricci_total_mass(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y);
// |Ric(X,Y)|_TV <= 2 sqrt(E_H(X) + K^-|X|^2) sqrt(E_H(Y) + K^-|Y|^2), K^- = max(0, -K).
Measurement ricci_tv_bound(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y,
                           double K);
// int f dRic(X,Y) by the definition, by moving derivatives onto fY, and by the symmetric form.
Measurement ricci_representation(const Complex& cx, const Connection& con, const TestFunctionBank& bank,
                                 const VectorField& x, const VectorField& y, const ScalarField& f);
// Ric(fX, Y) against f Ric(X, Y) in TV.
Measurement ricci_tensor_property(const Complex& cx, const Connection& con, const ScalarField& f,
                                  const VectorField& x, const VectorField& y);
// Ric(grad f, grad f) density against K |grad f|^2 in L1, relative.
Measurement ricci_gradient_oracle(const Complex& cx, const Connection& con, const ScalarField& f, double K,
                                  double tau = 0.0);
// Vertices whose cells stay `rings` rings inside the region: Ric(X1,X1) against Ric(X2,X2).
// The Whitney mass inverse is global with geometric decay per ring, so keep
// the margin fixed in length (rings ~ 1/h) when comparing resolutions.
Measurement ricci_locality(const Complex& cx, const Connection& con, const VectorField& x1, const VectorField& x2,
                           const std::vector<char>& region, int rings = 3);
// Cone: Ric(X,X) in TV away from the apex and the rim, over the scale.
// Vertices within `rings` edge hops of either are excluded.
Measurement cone_diagnostic(const Complex& cx, const Connection& con, const VectorField& x, int rings = 2);

// Ric(aX + bY, Z) against a Ric(X,Z) + b Ric(Y,Z), and Ric(X,Y) against Ric(Y,X); TV over scale.
Measurement ricci_bilinearity(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y,
                              const VectorField& z, double a, double b);
Measurement ricci_symmetry(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y);

// Empirical E_H(X^flat) - E_C(X); recorded, never asserted.
double energy_difference(const Complex& cx, const Connection& con, const VectorField& x);

}  // namespace mmc
