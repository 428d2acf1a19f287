#include "mmc/hessian.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>

namespace mmc {

namespace {

// Coefficients of g1^T H g2 in the symmetric unknowns (h11, sqrt2 h12, h22).
Vec sym_row(const Eigen::Ref<const Vec>& g1, const Eigen::Ref<const Vec>& g2) {
  if (g1.size() == 1) return Vec::Constant(1, g1[0] * g2[0]);
  Vec r(3);
  r << g1[0] * g2[0], (g1[0] * g2[1] + g1[1] * g2[0]) / std::sqrt(2.0), g1[1] * g2[1];
  return r;
}

void store_sym(const DiscreteSpace& s, int c, const Vec& u, Tensor2Field& H) {
  const int d = s.dim[c], o = s.toff[c];
  if (d == 1) {
    H[o] = u[0];
    return;
  }
  const double off = u[1] / std::sqrt(2.0);
  H[o] = u[0];
  H[o + 1] = off;
  H[o + 2] = off;
  H[o + 3] = u[2];
}

std::vector<std::pair<int, int>> frame_pairs(int k) {
  std::vector<std::pair<int, int>> p;
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) p.emplace_back(a, b);
  return p;
}

double logdet_score(const Mat& R) {
  const Mat G = R.transpose() * R + 1e-14 * Mat::Identity(R.cols(), R.cols());
  return std::log(std::max(G.determinant(), 1e-300));
}

Tensor2Field tensor_of(const DiscreteSpace& s, const CellScalar& f, const VectorField& x, const VectorField& y) {
  return scale_cells_t(s, f, outer(s, x, y));
}

}  // namespace

std::string to_string(HessianMethod m) { return m == HessianMethod::local_formula ? "local-formula" : "weak-lsq"; }

HessianMethod hessian_method_from_string(const std::string& s) {
  if (s == "local-formula" || s == "local") return HessianMethod::local_formula;
  if (s == "weak-lsq" || s == "lsq") return HessianMethod::weak_lsq;
  throw std::invalid_argument("unknown Hessian method '" + s + "'");
}

double cell_l2(const DiscreteSpace& s, const Vec& stacked, const std::vector<int>& off) {
  double acc = 0.0;
  for (int c = 0; c < s.nc; ++c) acc += s.mc[c] * stacked.segment(off[c], off[c + 1] - off[c]).squaredNorm();
  return std::sqrt(acc);
}

Tensor2Field symmetrize(const DiscreteSpace& s, const Tensor2Field& t) { return sym_asym_split(s, t).first; }

HessianResult weak_hessian(const Dirichlet& dir, const ScalarField& f, const TestFunctionBank& bank,
                           HessianMethod method) {
  const DiscreteSpace& s = dir.space();
  if (bank.frame.empty()) throw std::invalid_argument("bank has no frame generators");
  const auto pairs = frame_pairs(static_cast<int>(bank.frame.size()));
  std::vector<CellScalar> rhs;
  for (auto [a, b] : pairs) rhs.push_back(dir.hform_cells(f, bank.frame[a], bank.frame[b]));

  HessianResult out;
  out.method = method;
  out.H = Tensor2Field::Zero(s.nten());

  if (method == HessianMethod::local_formula) {
    double res2 = 0.0, ref2 = 0.0;
    for (int c = 0; c < s.nc; ++c) {
      const int d = s.dim[c];
      const int nu = d * (d + 1) / 2;
      const int need = nu + 2;
      const int np = static_cast<int>(pairs.size());
      Mat rows(np, nu);
      for (int p = 0; p < np; ++p) {
        const auto [a, b] = pairs[p];
        rows.row(p) = sym_row(bank.frame[a].segment(s.voff[c], d), bank.frame[b].segment(s.voff[c], d)).transpose();
      }
      std::vector<int> chosen;
      if (np <= need) {
        for (int p = 0; p < np; ++p) chosen.push_back(p);
      } else {
        std::vector<char> used(np, 0);
        while (static_cast<int>(chosen.size()) < need) {
          int best = -1;
          double best_score = -INFINITY;
          for (int p = 0; p < np; ++p) {
            if (used[p]) continue;
            Mat R(chosen.size() + 1, nu);
            for (std::size_t k = 0; k < chosen.size(); ++k) R.row(k) = rows.row(chosen[k]);
            R.row(chosen.size()) = rows.row(p);
            const double sc = logdet_score(R);
            if (sc > best_score + 1e-12) {
              best_score = sc;
              best = p;
            }
          }
          used[best] = 1;
          chosen.push_back(best);
        }
      }
      Mat R(chosen.size(), nu);
      Vec b(chosen.size());
      for (std::size_t k = 0; k < chosen.size(); ++k) {
        R.row(k) = rows.row(chosen[k]);
        b[k] = rhs[chosen[k]][c];
      }
      Eigen::JacobiSVD<Mat> svd(R);
      const Vec sv = svd.singularValues();
      if (sv.size() < nu || sv[sv.size() - 1] < 1e-10 * std::max(sv[0], 1e-300)) out.deficient_cells.push_back(c);
      Eigen::CompleteOrthogonalDecomposition<Mat> cod(R);
      cod.setThreshold(1e-10);
      const Vec u = cod.solve(b);
      store_sym(s, c, u, out.H);
      res2 += s.mc[c] * (R * u - b).squaredNorm();
      ref2 += s.mc[c] * b.squaredNorm();
    }
    out.residual = std::sqrt(res2 / std::max(ref2, 1e-300));
    return out;
  }

  // Integrated identity tested against vertex hat functions, one row per
  // (vertex, generator pair); unknowns scaled by sqrt(m_c) so the
  // minimal-norm solution is the L2-minimal Hessian.
  std::vector<int> uoff(s.nc + 1, 0);
  for (int c = 0; c < s.nc; ++c) uoff[c + 1] = uoff[c] + s.dim[c] * (s.dim[c] + 1) / 2;
  const int np = static_cast<int>(pairs.size());
  std::vector<Triplet> trip;
  Vec b = Vec::Zero(static_cast<Eigen::Index>(s.nv) * np);
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    const double sq = std::sqrt(s.mc[c]);
    for (int p = 0; p < np; ++p) {
      const auto [a, bb] = pairs[p];
      const Vec r = sym_row(bank.frame[a].segment(s.voff[c], d), bank.frame[bb].segment(s.voff[c], d));
      for (int k = 0; k <= d; ++k) {
        const int v = s.cells[c][k];
        const double wgt = s.mc[c] / (d + 1) / s.mv[v];
        const Eigen::Index row = static_cast<Eigen::Index>(v) * np + p;
        for (int u = 0; u < r.size(); ++u) trip.emplace_back(row, uoff[c] + u, wgt * r[u] / sq);
        b[row] += wgt * rhs[p][c];
      }
    }
  }
  SpMat A(static_cast<Eigen::Index>(s.nv) * np, uoff.back());
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::LeastSquaresConjugateGradient<SpMat, Eigen::IdentityPreconditioner> lscg;
  lscg.setTolerance(1e-13);
  lscg.setMaxIterations(50000);
  lscg.compute(A);
  const Vec x = lscg.solve(b);
  out.iterations = static_cast<int>(lscg.iterations());
  for (int c = 0; c < s.nc; ++c) {
    const Vec u = x.segment(uoff[c], uoff[c + 1] - uoff[c]) / std::sqrt(s.mc[c]);
    store_sym(s, c, u, out.H);
  }
  out.residual = (A * x - b).norm() / std::max(b.norm(), 1e-300);
  return out;
}

double hessian_energy(const DiscreteSpace& s, const Tensor2Field& H) {
  return 0.5 * integrate_cells(s, cell_hs_inner(s, H, H));
}

double weak_hessian_pairing(const Dirichlet& dir, const ScalarField& f, const ScalarField& w,
                            const VectorField& g1, const VectorField& g2) {
  const DiscreteSpace& s = dir.space();
  const VectorField df = dir.gradient(f);
  const CellScalar wc = s.vertex_to_cell(w);
  const ScalarField fg1 = s.cell_to_vertex(cell_inner(s, df, g1));
  const ScalarField fg2 = s.cell_to_vertex(cell_inner(s, df, g2));
  const ScalarField div1 = dir.divergence(scale_cells(s, wc, g1));
  const ScalarField div2 = dir.divergence(scale_cells(s, wc, g2));
  const VectorField dg12 = dir.gradient(s.cell_to_vertex(cell_inner(s, g1, g2)));
  const double twice = -integrate(s, fg1.cwiseProduct(div2)) - integrate(s, fg2.cwiseProduct(div1)) -
                       integrate_cells(s, wc.cwiseProduct(cell_inner(s, df, dg12)));
  return 0.5 * twice;
}

std::vector<ScalarField> duality_weights(const DiscreteSpace& s, const TestFunctionBank& bank, int nprod) {
  std::vector<ScalarField> w{ScalarField::Ones(s.nv)};
  for (const auto& f : bank.f) w.push_back(f);
  const int np = std::min<int>(nprod, static_cast<int>(bank.f.size()));
  for (int i = 0; i < np; ++i)
    for (int j = i; j < np; ++j) w.push_back(bank.f[i].cwiseProduct(bank.f[j]));
  return w;
}

DualityFamily hessian_duality_family(const Dirichlet& dir, const TestFunctionBank& bank, int nprod) {
  const DiscreteSpace& s = dir.space();
  DualityFamily fam;
  fam.weights = duality_weights(s, bank, nprod);
  fam.pairs = frame_pairs(static_cast<int>(bank.frame.size()));
  const int nw = static_cast<int>(fam.weights.size());
  const int npairs = static_cast<int>(fam.pairs.size());
  Mat Wc(s.nc, nw);
  for (int k = 0; k < nw; ++k) Wc.col(k) = s.vertex_to_cell(fam.weights[k]);
  Mat G(nw * npairs, nw * npairs);
  for (int p = 0; p < npairs; ++p) {
    for (int q = p; q < npairs; ++q) {
      const auto [a, b] = fam.pairs[p];
      const auto [a2, b2] = fam.pairs[q];
      const CellScalar fac = s.mc.cwiseProduct(cell_inner(s, bank.frame[a], bank.frame[a2]))
                                 .cwiseProduct(cell_inner(s, bank.frame[b], bank.frame[b2]));
      const Mat blk = Wc.transpose() * fac.asDiagonal() * Wc;
      G.block(p * nw, q * nw, nw, nw) = blk;
      G.block(q * nw, p * nw, nw, nw) = blk.transpose();
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  fam.gram_eigvals = es.eigenvalues();
  fam.gram_eigvecs = es.eigenvectors();
  return fam;
}

double e2_duality(const Dirichlet& dir, const ScalarField& f, const TestFunctionBank& bank,
                  const DualityFamily& fam, double rel_cutoff) {
  const int nw = static_cast<int>(fam.weights.size());
  const int npairs = static_cast<int>(fam.pairs.size());
  Vec ell(nw * npairs);
  for (int p = 0; p < npairs; ++p) {
    const auto [a, b] = fam.pairs[p];
    for (int k = 0; k < nw; ++k)
      ell[p * nw + k] = weak_hessian_pairing(dir, f, fam.weights[k], bank.frame[a], bank.frame[b]);
  }
  const double lmax = fam.gram_eigvals.cwiseAbs().maxCoeff();
  const Vec proj = fam.gram_eigvecs.transpose() * ell;
  double value = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i)
    if (fam.gram_eigvals[i] > rel_cutoff * lmax) value += proj[i] * proj[i] / fam.gram_eigvals[i];
  return value;
}

double e2_duality(const Dirichlet& dir, const ScalarField& f, const TestFunctionBank& bank) {
  return e2_duality(dir, f, bank, hessian_duality_family(dir, bank));
}

Measurement key_inequality(const Dirichlet& dir, const std::vector<ScalarField>& fs,
                           const std::vector<ScalarField>& gs, const std::vector<ScalarField>& hs, double K) {
  const DiscreteSpace& s = dir.space();
  if (fs.size() != gs.size()) throw std::invalid_argument("f and g lists must have equal length");
  const std::size_t n = fs.size(), m = hs.size();
  ScalarField rho = ScalarField::Zero(s.nv);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const ScalarField gff = dir.carre_du_champ(fs[i], fs[k]);
      rho += gs[i].cwiseProduct(gs[k]).cwiseProduct(dir.gamma2_density(fs[i], fs[k]) - K * gff);
      rho += 2.0 * gs[i].cwiseProduct(dir.hessian_form_H(fs[i], fs[k], gs[k]));
      rho += 0.5 * (gff.cwiseProduct(dir.carre_du_champ(gs[i], gs[k])) +
                    dir.carre_du_champ(fs[i], gs[k]).cwiseProduct(dir.carre_du_champ(gs[i], fs[k])));
    }
  }
  ScalarField inner = ScalarField::Zero(s.nv);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      inner += dir.carre_du_champ(fs[i], hs[j]).cwiseProduct(dir.carre_du_champ(gs[i], hs[j])) +
               gs[i].cwiseProduct(dir.hessian_form_H(fs[i], hs[j], hs[j]));
  ScalarField hh = ScalarField::Zero(s.nv);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) hh += dir.carre_du_champ(hs[j], hs[k]).array().square().matrix();
  const ScalarField lhs = inner.array().square().matrix();
  const ScalarField rhs = rho.cwiseProduct(hh);
  Measurement out;
  out.lhs = lhs.maxCoeff();
  out.rhs = rhs.maxCoeff();
  const double scale = std::max({std::abs(out.rhs), std::abs(out.lhs), 1e-300});
  out.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / scale;
  out.h = s.h;
  out.extra["rho_min"] = rho.minCoeff();
  return out;
}

Measurement hs_bound(const Dirichlet& dir, const ScalarField& f, const Tensor2Field& H, double K) {
  const DiscreteSpace& s = dir.space();
  const ScalarField lhs = tensor_hs_inner(s, H, H);
  const ScalarField rhs = dir.gamma2_density(f, f) - K * dir.carre_du_champ(f, f);
  Measurement out;
  out.lhs = lhs.maxCoeff();
  out.rhs = rhs.maxCoeff();
  out.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  out.h = s.h;
  out.extra["two_sided"] = (lhs - rhs).cwiseAbs().maxCoeff() / std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  return out;
}

Measurement e2_apriori(const Dirichlet& dir, const ScalarField& f, const Tensor2Field& H, double K) {
  const DiscreteSpace& s = dir.space();
  const ScalarField lf = dir.laplacian(f);
  Measurement out;
  out.lhs = hessian_energy(s, H);
  out.rhs = integrate(s, lf.cwiseProduct(lf)) - K * integrate_cells(s, cell_inner(s, dir.gradient(f), dir.gradient(f)));
  out.gap = std::max(0.0, out.lhs - out.rhs) / std::max(std::abs(out.rhs), 1e-300);
  out.h = s.h;
  return out;
}

Measurement integrated_bochner(const Dirichlet& dir, const ScalarField& f, const Tensor2Field& H, double K) {
  Measurement out = e2_apriori(dir, f, H, K);
  out.lhs *= 2.0;
  out.gap = std::abs(out.lhs - out.rhs) / std::max(std::abs(out.rhs), 1e-300);
  return out;
}

Measurement hessian_leibniz(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f1,
                            const ScalarField& f2) {
  const DiscreteSpace& s = dir.space();
  const Tensor2Field H12 = weak_hessian(dir, f1.cwiseProduct(f2), bank).H;
  const Tensor2Field H1 = weak_hessian(dir, f1, bank).H;
  const Tensor2Field H2 = weak_hessian(dir, f2, bank).H;
  const VectorField d1 = dir.gradient(f1), d2 = dir.gradient(f2);
  const Tensor2Field rhs = scale_cells_t(s, s.vertex_to_cell(f2), H1) + scale_cells_t(s, s.vertex_to_cell(f1), H2) +
                           outer(s, d1, d2) + outer(s, d2, d1);
  Measurement out;
  out.lhs = cell_l2(s, H12, s.toff);
  out.rhs = cell_l2(s, rhs, s.toff);
  out.gap = cell_l2(s, H12 - rhs, s.toff) / std::max(out.rhs, 1e-300);
  out.h = s.h;
  return out;
}

Measurement hessian_chain(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f,
                          const Polynomial& phi) {
  const DiscreteSpace& s = dir.space();
  if (phi.nvars != 1) throw std::invalid_argument("chain rule needs a map of one variable");
  ScalarField comp(s.nv), d1(s.nv), d2(s.nv);
  for (int v = 0; v < s.nv; ++v) {
    const Vec x = Vec::Constant(1, f[v]);
    comp[v] = phi.value(x);
    d1[v] = phi.grad(x)[0];
    d2[v] = phi.hess(x)(0, 0);
  }
  const Tensor2Field lhs = weak_hessian(dir, comp, bank).H;
  const VectorField df = dir.gradient(f);
  const Tensor2Field rhs =
      scale_cells_t(s, s.vertex_to_cell(d1), weak_hessian(dir, f, bank).H) + tensor_of(s, s.vertex_to_cell(d2), df, df);
  Measurement out;
  out.lhs = cell_l2(s, lhs, s.toff);
  out.rhs = cell_l2(s, rhs, s.toff);
  out.gap = cell_l2(s, lhs - rhs, s.toff) / std::max(out.rhs, 1e-300);
  out.h = s.h;
  return out;
}

Measurement grad_product_rule(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f1,
                              const ScalarField& f2) {
  const DiscreteSpace& s = dir.space();
  const VectorField d1 = dir.gradient(f1), d2 = dir.gradient(f2);
  const VectorField lhs = dir.gradient(s.cell_to_vertex(cell_inner(s, d1, d2)));
  const VectorField rhs =
      contract_first(s, weak_hessian(dir, f1, bank).H, d2) + contract_first(s, weak_hessian(dir, f2, bank).H, d1);
  Measurement out;
  out.lhs = cell_l2(s, lhs, s.voff);
  out.rhs = cell_l2(s, rhs, s.voff);
  out.gap = cell_l2(s, lhs - rhs, s.voff) / std::max(out.rhs, 1e-300);
  out.h = s.h;
  return out;
}

std::vector<char> interior_cells(const DiscreteSpace& s, const std::vector<char>& region, int rings) {
  std::vector<char> bad(s.nc);
  for (int c = 0; c < s.nc; ++c) bad[c] = !region[c];
  for (int r = 0; r < rings; ++r) {
    std::vector<char> vbad(s.nv, 0);
    for (int c = 0; c < s.nc; ++c)
      if (bad[c])
        for (int k = 0; k <= s.dim[c]; ++k) vbad[s.cells[c][k]] = 1;
    for (int c = 0; c < s.nc; ++c)
      for (int k = 0; k <= s.dim[c]; ++k)
        if (vbad[s.cells[c][k]]) bad[c] = 1;
  }
  std::vector<char> out(s.nc);
  for (int c = 0; c < s.nc; ++c) out[c] = !bad[c];
  return out;
}

Measurement hessian_locality(const Dirichlet& dir, const TestFunctionBank& bank, const ScalarField& f1,
                             const ScalarField& f2, const std::vector<char>& region) {
  const DiscreteSpace& s = dir.space();
  bool any = false;
  for (char r : region) any = any || r;
  if (!any) throw std::invalid_argument("empty region");
  const std::vector<char> inner = interior_cells(s, region, 3);
  const Tensor2Field H1 = weak_hessian(dir, f1, bank).H;
  const Tensor2Field H2 = weak_hessian(dir, f2, bank).H;
  double diff = 0.0, ref = 0.0;
  int count = 0;
  for (int c = 0; c < s.nc; ++c) {
    const int n = s.dim[c] * s.dim[c];
    ref = std::max(ref, H1.segment(s.toff[c], n).cwiseAbs().maxCoeff());
    if (!inner[c]) continue;
    ++count;
    diff = std::max(diff, (H1 - H2).segment(s.toff[c], n).cwiseAbs().maxCoeff());
  }
  Measurement out;
  out.lhs = diff;
  out.rhs = ref;
  out.gap = diff / std::max(ref, 1e-300);
  out.h = s.h;
  out.extra["interior_cells"] = count;
  return out;
}

Measurement hessian_symmetry(const DiscreteSpace& s, const Tensor2Field& H) {
  Measurement m;
  m.lhs = (H - transpose(s, H)).cwiseAbs().maxCoeff();
  m.rhs = H.cwiseAbs().maxCoeff();
  m.gap = m.lhs / std::max(m.rhs, 1e-300);
  m.h = s.h;
  return m;
}

Measurement sym_asym_pythagoras(const DiscreteSpace& s, const Tensor2Field& T) {
  const auto [sym, asym] = sym_asym_split(s, T);
  Measurement m;
  m.lhs = integrate_cells(s, cell_hs_inner(s, T, T));
  m.rhs = integrate_cells(s, cell_hs_inner(s, sym, sym)) + integrate_cells(s, cell_hs_inner(s, asym, asym));
  m.gap = std::abs(m.lhs - m.rhs) / std::max(m.lhs, 1e-300);
  m.h = s.h;
  return m;
}

}  // namespace mmc
