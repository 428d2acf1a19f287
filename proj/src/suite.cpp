#include "mmc/suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace mmc {

namespace {

constexpr int kBank = 20;
constexpr double kTau = 0.05;
constexpr int kFields = 10;
constexpr int kFamily = 5;  // members per exact identity
constexpr int kRules = 3;   // members per calculus rule
constexpr double kFlowTime = 0.1;

// Criterion-level tolerances that are not refinement ratios.
constexpr double kMassIdentityTol = 1e-8;
constexpr double kOracleTol = 0.10;
constexpr double kHodgeTol = 1e-8;
constexpr double kTransportTol = 0.05;
constexpr double kSecondOrderRatio = 0.3;
constexpr double kDualityShortfall = 0.20;
constexpr double kDualityExcess = 1e-8;

using Verdicts = std::vector<Verdict>;
using LevelFn = std::function<Measurement(Level&)>;
using CheckFn = std::function<Verdicts(SuiteContext&)>;

std::vector<Measurement> per_level(SuiteContext& ctx, const LevelFn& fn) {
  std::vector<Measurement> out;
  for (int i = 0; i < ctx.levels(); ++i) out.push_back(fn(ctx.level(i)));
  return out;
}

Measurement family(int n, const std::function<Measurement(int)>& fn) {
  std::vector<Measurement> ms;
  for (int i = 0; i < n; ++i) ms.push_back(fn(i));
  return worst_of(ms);
}

json level_specs(SuiteContext& ctx) {
  json specs = json::array();
  for (int i = 0; i < ctx.levels(); ++i) specs.push_back(ctx.level(i).spec());
  return specs;
}

Verdicts refined(SuiteContext& ctx, const std::string& name, const std::string& anchor, const LevelFn& fn) {
  Verdict v = refined_verdict(name, anchor, per_level(ctx, fn), ctx.policy());
  v.meta["spaces"] = level_specs(ctx);
  return {v};
}

// Exact identities run on the coarsest level.
Verdicts exact(SuiteContext& ctx, const std::string& name, const std::string& anchor, double tol,
               const std::function<Measurement(Level&, int)>& fn) {
  Level& L = ctx.coarse();
  Verdict v = exact_verdict(name, anchor, family(kFamily, [&](int i) { return fn(L, i); }), tol, ctx.policy());
  v.meta["space"] = L.spec();
  return {v};
}

Measurement plain(double lhs, double rhs, double gap, double h) {
  Measurement m;
  m.lhs = lhs;
  m.rhs = rhs;
  m.gap = gap;
  m.h = h;
  return m;
}

Measurement maybe_two_sided(SuiteContext& ctx, const Measurement& m) {
  return equality_model(ctx) ? two_sided(m) : m;
}

bool has_faces(SuiteContext& ctx) { return ctx.coarse().complex().nf() > 0; }
bool is_torus(SuiteContext& ctx) { return ctx.coarse().space().chart.kind == ChartKind::torus; }
bool is_sphere(SuiteContext& ctx) { return ctx.coarse().space().chart.kind == ChartKind::sphere; }

std::vector<char> half_region(const DiscreteSpace& s) {
  if (s.chart.kind == ChartKind::torus) return half_torus_region(s);
  // Elsewhere: cells whose mean first coordinate is below the median vertex value.
  std::vector<double> xs;
  for (const auto& p : s.pos) xs.push_back(p[0]);
  std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
  const double mid = xs[xs.size() / 2];
  std::vector<char> r(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    double x = 0.0;
    for (int k = 0; k <= s.dim[c]; ++k) x += s.pos[s.cells[c][k]][0];
    r[c] = x / (s.dim[c] + 1) < mid;
  }
  return r;
}

// f1 on the region's vertices, f1 + other elsewhere.
ScalarField altered_outside(const DiscreteSpace& s, const std::vector<char>& region, const ScalarField& f1,
                            const ScalarField& other) {
  std::vector<char> inside(s.nv, 0);
  for (int c = 0; c < s.nc; ++c)
    if (region[c])
      for (int k = 0; k <= s.dim[c]; ++k) inside[s.cells[c][k]] = 1;
  ScalarField f2 = f1;
  for (int v = 0; v < s.nv; ++v)
    if (!inside[v]) f2[v] += other[v];
  return f2;
}

VectorField altered_outside_cells(const DiscreteSpace& s, const std::vector<char>& region, const VectorField& x1,
                                  const VectorField& other) {
  VectorField x2 = x1;
  for (int c = 0; c < s.nc; ++c)
    if (!region[c]) x2.segment(s.voff[c], s.dim[c]) = other.segment(s.voff[c], s.dim[c]);
  return x2;
}

// Probability density 1 + f / (2 |f|_inf), normalized.
ScalarField positive_density(const DiscreteSpace& s, const ScalarField& f) {
  ScalarField rho = ScalarField::Ones(s.nv) + 0.5 * f / std::max(f.cwiseAbs().maxCoeff(), 1e-300);
  return rho / integrate(s, rho);
}

// Dual energies over the first kFamily members at every level, as ratios to the direct energy.
Verdicts duality_verdicts(SuiteContext& ctx, const std::string& prefix, const std::string& what,
                          const std::function<double(Level&, int)>& ratio) {
  double low = 1.0, high = 0.0;
  json ratios = json::array();
  for (int lv = 0; lv < ctx.levels(); ++lv)
    for (int i = 0; i < kFamily; ++i) {
      const double r = ratio(ctx.level(lv), i);
      ratios.push_back(r);
      low = std::min(low, r);
      high = std::max(high, r);
    }
  auto make = [&](const std::string& name, const std::string& anchor, double gap, double tol) {
    Measurement m = plain(low, high, gap, ctx.fine().space().h);
    m.extra["ratios"] = ratios;
    m.extra["bank_size"] = kBank;
    Verdict v = exact_verdict(name, anchor, m, tol, ctx.policy());
    v.meta["spaces"] = level_specs(ctx);
    return v;
  };
  return {make(prefix + "_duality_shortfall", "dual lower bound for the " + what + " energy", 1.0 - low,
               kDualityShortfall),
          make(prefix + "_duality_excess", "dual bound never exceeds the " + what + " energy",
               std::max(0.0, high - 1.0), kDualityExcess)};
}

const std::map<std::string, CheckFn>& registry() {
  static const std::map<std::string, CheckFn> checks = [] {
    std::map<std::string, CheckFn> r;

    // Exact identities.
    r["div_grad_adjointness"] = [](SuiteContext& ctx) {
      return exact(ctx, "div_grad_adjointness", "divergence as adjoint of the gradient", ctx.policy().exact,
                   [](Level& L, int i) {
                     return div_grad_adjointness(L.dirichlet(), L.bank().f[i], L.bank().fields[i]);
                   });
    };
    r["laplacian_div_grad"] = [](SuiteContext& ctx) {
      return exact(ctx, "laplacian_div_grad", "Laplacian equals divergence of gradient", ctx.policy().exact,
                   [](Level& L, int i) { return laplacian_div_grad(L.dirichlet(), L.bank().f[i]); });
    };
    r["measure_laplacian_mass"] = [](SuiteContext& ctx) {
      return exact(ctx, "measure_laplacian_mass", "measure-valued Laplacian has zero total mass", ctx.policy().exact,
                   [](Level& L, int i) { return laplacian_total_mass(L.dirichlet(), L.bank().f[i]); });
    };
    r["gamma2_mass"] = [](SuiteContext& ctx) {
      return exact(ctx, "gamma2_mass", "total mass of Gamma2 equals the squared Laplacian integral",
                   kMassIdentityTol,
                   [](Level& L, int i) { return gamma2_mass_identity(L.dirichlet(), L.bank().f[i]); });
    };
    r["codifferential_adjointness"] = [](SuiteContext& ctx) {
      Verdicts out = exact(ctx, "codifferential_adjointness_1", "codifferential as adjoint of d on 1-forms",
                           ctx.policy().exact, [](Level& L, int i) {
                             return codifferential_adjointness(L.complex(), 1, L.bank().f[i],
                                                               L.complex().flat(L.bank().fields[i]));
                           });
      if (has_faces(ctx)) {
        Verdicts two = exact(ctx, "codifferential_adjointness_2", "codifferential as adjoint of d on 2-forms",
                             ctx.policy().exact, [](Level& L, int i) {
                               const Complex& cx = L.complex();
                               return codifferential_adjointness(
                                   cx, 2, cx.flat(L.bank().fields[i]),
                                   cx.two_form(L.space().vertex_to_cell(L.bank().f[i + 1])));
                             });
        out.insert(out.end(), two.begin(), two.end());
      }
      return out;
    };
    r["dd_zero"] = [](SuiteContext& ctx) {
      return exact(ctx, "dd_zero", "d composed with d vanishes", ctx.policy().exact,
                   [](Level& L, int i) { return dd_zero(L.complex(), L.bank().f[i]); });
    };
    r["connection_laplacian_adjointness"] = [](SuiteContext& ctx) {
      return exact(ctx, "connection_laplacian_adjointness", "connection Laplacian is minus the adjoint pairing",
                   ctx.policy().exact, [](Level& L, int i) {
                     return connection_adjointness(L.connection(), L.bank().fields[i], L.bank().fields[i + 1]);
                   });
    };
    r["hessian_symmetry"] = [](SuiteContext& ctx) {
      return exact(ctx, "hessian_symmetry", "Hessian is symmetric", ctx.policy().exact, [](Level& L, int i) {
        return hessian_symmetry(L.space(), weak_hessian(L.dirichlet(), L.bank().f[i], L.bank()).H);
      });
    };
    r["sym_asym_pythagoras"] = [](SuiteContext& ctx) {
      return exact(ctx, "sym_asym_pythagoras", "symmetric and antisymmetric parts are orthogonal",
                   ctx.policy().exact, [](Level& L, int i) {
                     return sym_asym_pythagoras(L.space(), L.connection().apply(L.bank().fields[i]));
                   });
    };
    r["ricci_bilinear"] = [](SuiteContext& ctx) {
      return exact(ctx, "ricci_bilinear", "Ricci measure is bilinear", ctx.policy().exact, [](Level& L, int i) {
        const auto& X = L.bank().fields;
        return ricci_bilinearity(L.complex(), L.connection(), X[i], X[i + 1], X[i + 2], 0.7, -1.3);
      });
    };
    r["ricci_symmetric"] = [](SuiteContext& ctx) {
      return exact(ctx, "ricci_symmetric", "Ricci measure is symmetric", ctx.policy().exact, [](Level& L, int i) {
        return ricci_symmetry(L.complex(), L.connection(), L.bank().fields[i], L.bank().fields[i + 1]);
      });
    };
    r["bochner_laplacian_mass"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return exact(ctx, "bochner_laplacian_mass", "Laplacian of the squared norm has zero mass", ctx.policy().exact,
                   [K](Level& L, int i) {
                     const Measurement b = bochner_check(L.complex(), L.connection(), L.bank().fields[i], K);
                     return plain(0.0, 0.0, b.extra.at("laplacian_mass").get<double>(), L.space().h);
                   });
    };
    r["ricci_total_mass"] = [](SuiteContext& ctx) {
      return exact(ctx, "ricci_total_mass", "total Ricci mass from the energies", kMassIdentityTol,
                   [](Level& L, int i) {
                     return ricci_total_mass(L.complex(), L.connection(), L.bank().fields[i], L.bank().fields[i + 1]);
                   });
    };
    r["ricci_tv_bound"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return exact(ctx, "ricci_tv_bound", "total variation of Ricci bounded by the energies", ctx.policy().exact,
                   [K](Level& L, int i) {
                     return ricci_tv_bound(L.complex(), L.connection(), L.bank().fields[i], L.bank().fields[i + 1],
                                           K);
                   });
    };
    r["heat_mass"] = [](SuiteContext& ctx) {
      return exact(ctx, "heat_mass", "heat flow preserves the integral", ctx.policy().exact, [](Level& L, int i) {
        const DiscreteSpace& s = L.space();
        const ScalarField& f = L.bank().f[i];
        const double a = integrate(s, L.dirichlet().heat_flow(f, kFlowTime)), b = integrate(s, f);
        return plain(a, b, std::abs(a - b) / std::max(lp_norm(s, f, 1.0), 1e-300), s.h);
      });
    };

    // Pointwise curvature.
    r["hessian_bochner_gap"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "hessian_bochner_gap", "Gamma2 dominates the squared Hessian", [&](Level& L) {
        return family(kBank, [&](int i) {
          const ScalarField& f = L.bank().f[i];
          return maybe_two_sided(ctx, hs_bound(L.dirichlet(), f, weak_hessian(L.dirichlet(), f, L.bank()).H, K));
        });
      });
    };
    r["key_inequality"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "key_inequality", "polarized Gamma2 bound", [&](Level& L) {
        const auto& f = L.bank().f;
        return key_inequality(L.dirichlet(), {f[0], f[1]}, {f[2], f[3]}, {f[4], f[5]}, K);
      });
    };
    r["vector_bochner"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "vector_bochner", "Bochner inequality for vector fields", [&](Level& L) {
        return family(kFields, [&](int i) {
          return maybe_two_sided(ctx,
                                 bochner_check(L.complex(), L.connection(), L.bank().fields[i], K, L.bank().tau));
        });
      });
    };
    r["ricci_lower_bound"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "ricci_lower_bound", "Ricci measure bounded below by K", [&](Level& L) {
        return family(2 * kFields, [&](int i) {
          const VectorField x =
              i < kFields ? L.bank().fields[i] : VectorField(L.dirichlet().gradient(L.bank().f[i - kFields]));
          return maybe_two_sided(ctx, ricci_lower_bound(L.complex(), L.connection(), x, K, L.bank().tau));
        });
      });
    };
    r["ricci_gradient_oracle"] = [](SuiteContext& ctx) -> Verdicts {
      if (!is_sphere(ctx)) return {};
      const double K = ctx.kappa();
      const std::vector<Measurement> levels = per_level(ctx, [&](Level& L) {
        return family(kFields, [&](int i) {
          return ricci_gradient_oracle(L.complex(), L.connection(), L.bank().f[i], K, L.bank().tau);
        });
      });
      Verdict v = exact_verdict("ricci_gradient_oracle", "Ricci of gradients equals K times squared gradient",
                                levels.back(), kOracleTol, ctx.policy());
      json gaps = json::array();
      for (const auto& m : levels) gaps.push_back(m.gap);
      v.meta["gaps"] = gaps;
      v.meta["spaces"] = level_specs(ctx);
      return {v};
    };
    r["ricci_representation"] = [](SuiteContext& ctx) {
      return refined(ctx, "ricci_representation", "three representations of the Ricci pairing", [&](Level& L) {
        return family(kRules, [&](int i) {
          const auto& X = L.bank().fields;
          return ricci_representation(L.complex(), L.connection(), L.bank(), X[i], X[i + 1], L.bank().f[i]);
        });
      });
    };
    r["ricci_tensor_property"] = [](SuiteContext& ctx) {
      return refined(ctx, "ricci_tensor_property", "Ricci is tensorial in each slot", [&](Level& L) {
        return family(kRules, [&](int i) {
          const auto& X = L.bank().fields;
          return ricci_tensor_property(L.complex(), L.connection(), L.bank().f[i], X[i], X[i + 1]);
        });
      });
    };
    r["cone_apex"] = [](SuiteContext& ctx) -> Verdicts {
      if (ctx.coarse().space().chart.kind != ChartKind::cone) return {};
      return refined(ctx, "cone_apex", "Ricci away from the apex and rim", [&](Level& L) {
        return family(kFields,
                      [&](int i) { return cone_diagnostic(L.complex(), L.connection(), L.bank().fields[i]); });
      });
    };

    // Semigroups.
    r["bakry_emery"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "bakry_emery", "Bakry-Emery gradient contraction", [&](Level& L) {
        return family(kBank, [&](int i) { return bakry_emery(L.dirichlet(), L.bank().f[i], kFlowTime, K); });
      });
    };
    r["bakry_emery_first_power"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "bakry_emery_first_power", "first-power Bakry-Emery contraction", [&](Level& L) {
        return family(kBank,
                      [&](int i) { return bakry_emery_first_power(L.dirichlet(), L.bank().f[i], kFlowTime, K); });
      });
    };
    r["form_contraction"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "form_contraction", "Hodge heat flow contracts pointwise norms", [&](Level& L) {
        const std::vector<Vec> forms = bank_test_forms(L.complex(), L.bank(), kFields);
        return family(static_cast<int>(forms.size()),
                      [&](int i) { return form_contraction_check(L.complex(), forms[i], kFlowTime, K); });
      });
    };
    r["connection_flow_kato"] = [](SuiteContext& ctx) {
      return refined(ctx, "connection_flow_kato", "connection heat flow dominated by scalar heat flow",
                     [&](Level& L) {
                       return family(kFields, [&](int i) {
                         return kato_type_check(L.connection(), L.bank().fields[i], kFlowTime);
                       });
                     });
    };
    r["hodge_flow_commutation"] = [](SuiteContext& ctx) {
      return refined(ctx, "hodge_flow_commutation", "Hodge heat flow commutes with d", [&](Level& L) {
        return family(kRules,
                      [&](int i) { return hodge_flow_commutation(L.complex(), L.bank().f[i], kFlowTime); });
      });
    };
    r["connection_hodge_energy"] = [](SuiteContext& ctx) {
      const double K = ctx.kappa();
      return refined(ctx, "connection_hodge_energy", "connection energy bounded by Hodge energy", [&](Level& L) {
        return family(kFields,
                      [&](int i) { return ec_eh_inequality(L.complex(), L.connection(), L.bank().fields[i], K); });
      });
    };

    // Topology, per level.
    r["betti_numbers"] = [](SuiteContext& ctx) {
      Verdicts out;
      for (int i = 0; i < ctx.levels(); ++i) {
        Level& L = ctx.level(i);
        const DiscreteSpace& s = L.space();
        const BettiReport b = betti(L.complex());
        std::vector<int> expected;
        if (s.chart.kind == ChartKind::torus) expected = {1, 2, 1};
        if (s.chart.kind == ChartKind::sphere) expected = {1, 0, 1};
        double mismatch = 0.0;
        for (std::size_t k = 0; k < b.eigen.size(); ++k) {
          mismatch += std::abs(b.eigen[k] - b.rank_nullity[k]);
          if (k < expected.size()) mismatch += std::abs(b.eigen[k] - expected[k]);
        }
        Measurement m = plain(0.0, 0.0, mismatch, s.h);
        m.extra["eigen"] = b.eigen;
        m.extra["rank_nullity"] = b.rank_nullity;
        if (!expected.empty()) m.extra["expected"] = expected;
        json factors = json::array();
        for (const auto& basis : b.bases) factors.push_back(basis.gap_factor);
        m.extra["gap_factors"] = factors;
        Verdict v = exact_verdict("betti_numbers", "harmonic dimensions match cohomology", m, 0.0, ctx.policy());
        v.meta["space"] = L.spec();
        out.push_back(v);
      }
      return out;
    };
    r["first_betti_bound"] = [](SuiteContext& ctx) -> Verdicts {
      if (ctx.kappa() < 0.0) return {};
      Level& L = ctx.coarse();
      Verdict v = exact_verdict("first_betti_bound", "first Betti number bounded by dimension at K >= 0",
                                betti_bound_rcd0(L.complex(), betti(L.complex())), 0.0, ctx.policy());
      v.meta["space"] = L.spec();
      return {v};
    };
    r["hodge_reconstruction"] = [](SuiteContext& ctx) {
      Verdicts out;
      for (int i = 0; i < ctx.levels(); ++i) {
        Level& L = ctx.level(i);
        const Complex& cx = L.complex();
        const Vec w = cx.flat(L.bank().fields[0]) + cx.d(0) * L.bank().f[1];
        const HodgeDecomposition hd = hodge_decomposition(cx, w, harmonic_forms(cx, 1));
        Measurement m = plain(0.0, 0.0, hd.reconstruction, L.space().h);
        m.extra["orthogonality"] = hd.orthogonality;
        m.extra["closed"] = hd.closed;
        m.extra["coclosed"] = hd.coclosed;
        Verdict v = exact_verdict("hodge_reconstruction", "Hodge decomposition reconstructs the form", m,
                                  kHodgeTol, ctx.policy());
        v.meta["space"] = L.spec();
        out.push_back(v);
      }
      return out;
    };

    // Calculus rules.
    r["hessian_leibniz"] = [](SuiteContext& ctx) {
      return refined(ctx, "hessian_leibniz", "Leibniz rule for the Hessian", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules,
                      [&](int i) { return hessian_leibniz(L.dirichlet(), L.bank(), f[2 * i], f[2 * i + 1]); });
      });
    };
    r["hessian_chain"] = [](SuiteContext& ctx) {
      return refined(ctx, "hessian_chain", "chain rule for the Hessian", [&](Level& L) {
        return family(kRules, [&](int i) {
          return hessian_chain(L.dirichlet(), L.bank(), L.bank().f[i], Polynomial::square());
        });
      });
    };
    r["gradient_product"] = [](SuiteContext& ctx) {
      return refined(ctx, "gradient_product", "gradient of a scalar product via Hessians", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules,
                      [&](int i) { return grad_product_rule(L.dirichlet(), L.bank(), f[2 * i], f[2 * i + 1]); });
      });
    };
    r["covariant_leibniz"] = [](SuiteContext& ctx) {
      return refined(ctx, "covariant_leibniz", "Leibniz rule for the covariant derivative", [&](Level& L) {
        return family(kRules,
                      [&](int i) { return covariant_leibniz(L.connection(), L.bank().f[i], L.bank().fields[i]); });
      });
    };
    r["metric_compatibility"] = [](SuiteContext& ctx) {
      return refined(ctx, "metric_compatibility", "connection is metric compatible", [&](Level& L) {
        const auto& X = L.bank().fields;
        return family(kRules,
                      [&](int i) { return metric_compatibility(L.connection(), X[i], X[i + 1], X[i + 2]); });
      });
    };
    r["torsion_free"] = [](SuiteContext& ctx) {
      return refined(ctx, "torsion_free", "connection is torsion free", [&](Level& L) {
        const auto& X = L.bank().fields;
        return family(kRules,
                      [&](int i) { return torsion_free_check(L.connection(), L.bank().f[i], X[i], X[i + 1]); });
      });
    };
    r["bracket_of_gradients"] = [](SuiteContext& ctx) {
      return refined(ctx, "bracket_of_gradients", "bracket of gradients via Hessians", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules, [&](int i) {
          return bracket_of_gradients(L.connection(), L.bank(), f[2 * i], f[2 * i + 1]);
        });
      });
    };
    r["exterior_leibniz"] = [](SuiteContext& ctx) -> Verdicts {
      if (!has_faces(ctx)) return {};
      return refined(ctx, "exterior_leibniz", "Leibniz rule for the exterior derivative", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules, [&](int i) { return ext_leibniz(L.complex(), f[2 * i], f[2 * i + 1]); });
      });
    };
    r["codifferential_wedge"] = [](SuiteContext& ctx) -> Verdicts {
      if (!has_faces(ctx)) return {};
      return refined(ctx, "codifferential_wedge", "codifferential of a wedge of differentials", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules, [&](int i) {
          return delta_wedge_formula(L.complex(), L.connection(), L.bank(), {f[2 * i], f[2 * i + 1]});
        });
      });
    };
    r["codifferential_product"] = [](SuiteContext& ctx) {
      return refined(ctx, "codifferential_product", "codifferential of f dg", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules,
                      [&](int i) { return codifferential_product(L.complex(), f[2 * i], f[2 * i + 1]); });
      });
    };
    r["hodge_laplacian_product"] = [](SuiteContext& ctx) {
      return refined(ctx, "hodge_laplacian_product", "Hodge Laplacian of f dg", [&](Level& L) {
        const auto& f = L.bank().f;
        return family(kRules, [&](int i) {
          return hodge_identity_1forms(L.complex(), L.bank(), f[2 * i], f[2 * i + 1]);
        });
      });
    };
    r["hessian_locality"] = [](SuiteContext& ctx) {
      return refined(ctx, "hessian_locality", "Hessians agree where functions agree", [&](Level& L) {
        const std::vector<char> region = half_region(L.space());
        const auto& f = L.bank().f;
        return family(kRules, [&](int i) {
          return hessian_locality(L.dirichlet(), L.bank(), f[i],
                                  altered_outside(L.space(), region, f[i], f[i + kRules]), region);
        });
      });
    };
    r["covariant_locality"] = [](SuiteContext& ctx) {
      return refined(ctx, "covariant_locality", "covariant derivatives agree where fields agree", [&](Level& L) {
        const std::vector<char> region = half_region(L.space());
        const auto& X = L.bank().fields;
        return family(kRules, [&](int i) {
          return covariant_locality(L.connection(), X[i],
                                    altered_outside_cells(L.space(), region, X[i], X[i + kRules]), region);
        });
      });
    };

    // Curves of measures.
    r["heat_continuity"] = [](SuiteContext& ctx) {
      Level& L = ctx.coarse();
      const Dirichlet& dir = L.dirichlet();
      const ScalarField rho0 = positive_density(L.space(), L.bank().f[0]);
      const std::vector<ScalarField> fs(L.bank().f.begin() + 1, L.bank().f.begin() + 1 + kFamily);
      // Refined in the time step on the coarse space.
      std::vector<Measurement> levels;
      for (int i = 0; i < ctx.policy().refine; ++i) {
        const MeasureCurve c = heat_curve(dir, rho0, 0.2, 10 << i);
        levels.push_back(continuity_residual(dir, c, heat_velocity(dir, c), fs));
      }
      Verdict v =
          refined_verdict("heat_continuity", "heat flow solves the continuity equation", levels, ctx.policy());
      v.meta["space"] = L.spec();
      return Verdicts{v};
    };
    r["benamou_brenier_vs_lp"] = [](SuiteContext& ctx) -> Verdicts {
      if (!is_torus(ctx)) return {};
      Level& L = ctx.coarse();
      const DiscreteSpace& s = L.space();
      const double side = s.chart.side;
      const Vec mu0 = torus_blob(s, side / 4, side / 2, 0.5), mu1 = torus_blob(s, side / 2, side / 2, 0.5);
      const double lp = transport_lp(s, mu0, mu1);
      BBOptions opt;
      opt.steps = 8;
      opt.max_iter = 3000;
      const BBResult bb = benamou_brenier(L.dirichlet(), mu0, mu1, opt);
      Measurement m = plain(bb.value, lp, std::abs(bb.value / lp - 1.0), s.h);
      m.dt = 1.0 / opt.steps;
      m.extra["iterations"] = bb.iterations;
      m.extra["primal_residual"] = bb.primal_residual;
      m.extra["dual_residual"] = bb.dual_residual;
      m.extra["continuity_defect"] = bb.continuity_defect;
      Verdict v = exact_verdict("benamou_brenier_vs_lp", "dynamic transport cost matches the static oracle", m,
                                kTransportTol, ctx.policy());
      v.meta["space"] = L.spec();
      return {v};
    };
    r["second_order_formula"] = [](SuiteContext& ctx) -> Verdicts {
      if (!is_torus(ctx)) return {};
      // Translating blob: second order in dt at each level, consistent in h across levels.
      const Eigen::Vector2d c0(2.0, 3.0), vel(1.0, 0.5);
      const std::vector<Measurement> levels = per_level(ctx, [&](Level& L) {
        std::vector<Measurement> ms;
        double ratio = 0.0;
        for (int i = 0; i < kRules; ++i) {
          ms.push_back(
              second_order_chart_study(L.connection(), L.bank(), L.bank().f[i], c0, 0.6, vel, 0.1, 0.02));
          ratio = std::max(ratio, ms.back().extra.at("ratio").get<double>());
        }
        Measurement m = worst_of(ms);
        m.extra["max_ratio"] = ratio;
        return m;
      });
      const double ratio = levels.back().extra.at("max_ratio").get<double>();
      Measurement mr = plain(ratio, 0.25, ratio, levels.back().h);
      mr.dt = 0.02;
      Verdict vr = exact_verdict("second_order_dt_ratio", "second differences converge at second order", mr,
                                 kSecondOrderRatio, ctx.policy());
      vr.meta["space"] = ctx.fine().spec();
      Verdict vm =
          refined_verdict("second_order_formula", "second derivative along the flow", levels, ctx.policy());
      vm.meta["spaces"] = level_specs(ctx);
      return {vr, vm};
    };

    // Duality.
    r["hessian_duality"] = [](SuiteContext& ctx) {
      std::map<Level*, DualityFamily> fams;
      return duality_verdicts(ctx, "hessian", "Hessian", [&](Level& L, int i) {
        auto it = fams.find(&L);
        if (it == fams.end()) it = fams.emplace(&L, hessian_duality_family(L.dirichlet(), L.bank())).first;
        const ScalarField& f = L.bank().f[i];
        const double direct = 2.0 * hessian_energy(L.space(), weak_hessian(L.dirichlet(), f, L.bank()).H);
        return e2_duality(L.dirichlet(), f, L.bank(), it->second) / direct;
      });
    };
    r["connection_duality"] = [](SuiteContext& ctx) {
      return duality_verdicts(ctx, "connection", "connection", [](Level& L, int i) {
        const VectorField& x = L.bank().fields[i];
        return ec_duality(L.connection(), x, L.bank()) / L.connection().energy(x);
      });
    };
    return r;
  }();
  return checks;
}

}  // namespace

const DiscreteSpace& Level::space() {
  if (!s_) s_ = std::make_unique<DiscreteSpace>(build_space(spec_));
  return *s_;
}

const Dirichlet& Level::dirichlet() {
  if (!dir_) dir_ = std::make_unique<Dirichlet>(space());
  return *dir_;
}

const TestFunctionBank& Level::bank() {
  if (!bank_) bank_ = std::make_unique<TestFunctionBank>(test_functions(dirichlet(), kBank, seed_, kTau, kFields));
  return *bank_;
}

const Connection& Level::connection() {
  if (!con_) con_ = std::make_unique<Connection>(dirichlet());
  return *con_;
}

const Complex& Level::complex() {
  if (!cx_) cx_ = std::make_unique<Complex>(dirichlet());
  return *cx_;
}

SuiteContext::SuiteContext(const std::string& spec, std::optional<double> kappa, const TolPolicy& policy)
    : kappa_(kappa), policy_(policy) {
  if (policy.refine < 1 || policy.refine > 2) throw std::invalid_argument("refine must be 1 or 2");
  std::string cur = spec;
  for (int i = 0; i < policy.refine; ++i) {
    levels_.push_back(std::make_unique<Level>(cur, policy.seed));
    if (i + 1 < policy.refine) cur = refine_spec(cur);
  }
}

double SuiteContext::kappa() { return kappa_ ? *kappa_ : coarse().space().kappa; }

bool equality_model(SuiteContext& ctx) {
  const DiscreteSpace& s = ctx.coarse().space();
  const bool constant = s.chart.kind == ChartKind::torus || s.chart.kind == ChartKind::sphere;
  return constant && ctx.kappa() == s.kappa;
}

std::vector<std::string> check_names() {
  std::vector<std::string> out;
  for (const auto& entry : registry()) out.push_back(entry.first);
  return out;
}

std::vector<std::string> criterion_checks(int id) {
  switch (id) {
    case 1:
      return {"div_grad_adjointness", "laplacian_div_grad", "measure_laplacian_mass", "gamma2_mass",
              "codifferential_adjointness", "dd_zero", "connection_laplacian_adjointness", "hessian_symmetry",
              "sym_asym_pythagoras", "ricci_bilinear", "ricci_symmetric", "bochner_laplacian_mass",
              "ricci_total_mass"};
    case 2:
      return {"hessian_bochner_gap", "vector_bochner", "ricci_lower_bound", "bakry_emery", "bakry_emery_first_power",
              "form_contraction", "connection_flow_kato"};
    case 3: return {"ricci_gradient_oracle", "ricci_lower_bound", "connection_hodge_energy"};
    case 4: return {"betti_numbers", "hodge_reconstruction", "first_betti_bound"};
    case 5:
      return {"hessian_leibniz", "hessian_chain", "gradient_product", "covariant_leibniz", "metric_compatibility",
              "torsion_free", "exterior_leibniz", "codifferential_wedge", "codifferential_product",
              "hodge_laplacian_product", "hessian_locality", "covariant_locality"};
    case 6: return {"heat_continuity", "benamou_brenier_vs_lp", "second_order_formula"};
    case 7: return {"hessian_duality", "connection_duality"};
    default: throw std::invalid_argument("unknown criterion " + std::to_string(id));
  }
}

std::vector<Verdict> run_checks(const std::vector<std::string>& names, SuiteContext& ctx) {
  std::vector<Verdict> out;
  for (const auto& name : names) {
    auto it = registry().find(name);
    if (it == registry().end()) throw std::invalid_argument("unknown check " + name);
    Verdicts vs = it->second(ctx);
    out.insert(out.end(), vs.begin(), vs.end());
  }
  return out;
}

std::string criterion_name(int id) {
  switch (id) {
    case 1: return "exact linear algebra";
    case 2: return "flat curvature";
    case 3: return "curved space";
    case 4: return "topology";
    case 5: return "calculus rules";
    case 6: return "lagrangian";
    case 7: return "duality";
    default: throw std::invalid_argument("unknown criterion " + std::to_string(id));
  }
}

std::optional<std::string> criterion_inapplicable(int id, const DiscreteSpace& s) {
  if ((id == 2 || id == 6) && s.chart.kind != ChartKind::torus) return "needs a flat torus";
  if (id == 3 && s.chart.kind != ChartKind::sphere) return "needs a sphere";
  return std::nullopt;
}

CriterionReport run_criterion(int id, SuiteContext& ctx) {
  CriterionReport r;
  r.id = id;
  r.name = criterion_name(id);
  r.space = ctx.coarse().spec();
  if (auto why = criterion_inapplicable(id, ctx.coarse().space())) {
    r.skipped = true;
    r.reason = *why;
    return r;
  }
  r.verdicts = run_checks(criterion_checks(id), ctx);
  return r;
}

std::vector<CriterionReport> run_suite(SuiteContext& ctx) {
  std::vector<CriterionReport> out;
  for (int id = 1; id <= kCriteria; ++id) out.push_back(run_criterion(id, ctx));
  return out;
}

json to_json(const CriterionReport& r) {
  json j;
  j["id"] = r.id;
  j["name"] = r.name;
  j["space"] = r.space;
  j["skipped"] = r.skipped;
  j["pass"] = r.pass();
  if (r.skipped) j["reason"] = r.reason;
  json vs = json::array();
  for (const auto& v : r.verdicts) vs.push_back(to_json(v));
  j["verdicts"] = vs;
  return j;
}

std::string emit_suite_report(const std::vector<CriterionReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  json j;
  j["criteria"] = arr;
  return j.dump(2);
}

bool suite_pass(const std::vector<CriterionReport>& reports) {
  bool any = false;
  for (const auto& r : reports) {
    if (r.skipped) continue;
    any = true;
    if (!r.pass()) return false;
  }
  return any;
}

Measurement worst_of(const std::vector<Measurement>& ms) {
  if (ms.empty()) throw std::invalid_argument("empty family");
  std::size_t k = 0;
  for (std::size_t i = 1; i < ms.size(); ++i)
    if (!(ms[i].gap <= ms[k].gap)) k = i;  // NaN wins
  Measurement m = ms[k];
  m.extra["count"] = ms.size();
  m.extra["worst"] = k;
  return m;
}

Measurement two_sided(Measurement m) {
  if (!m.extra.contains("two_sided")) throw std::invalid_argument("measurement has no two-sided gap");
  m.extra["one_sided"] = m.gap;
  m.gap = m.extra["two_sided"].get<double>();
  return m;
}

}  // namespace mmc
