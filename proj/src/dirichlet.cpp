#include "mmc/dirichlet.hpp"

#include <cmath>

namespace mmc {

Dirichlet::Dirichlet(const DiscreteSpace& s) : s_(&s), cache_(std::make_shared<Cache>()) {
  std::vector<Triplet> t;
  W_.resize(s.nvec());
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    const Mat& F = s.frame[c];
    Mat E(d, d);
    for (int k = 1; k <= d; ++k) E.col(k - 1) = F.transpose() * (s.local[c].col(k) - s.local[c].col(0));
    const Mat G = E.transpose().inverse();  // column k-1: gradient of lambda_k
    for (int a = 0; a < d; ++a) {
      const int row = s.voff[c] + a;
      W_[row] = s.mc[c];
      double sum = 0.0;
      for (int k = 1; k <= d; ++k) {
        t.emplace_back(row, s.cells[c][k], G(a, k - 1));
        sum += G(a, k - 1);
      }
      t.emplace_back(row, s.cells[c][0], -sum);
    }
  }
  D_.resize(s.nvec(), s.nv);
  D_.setFromTriplets(t.begin(), t.end());
  S_ = (D_.transpose() * W_.asDiagonal() * D_).pruned();
  S_ = 0.5 * (S_ + SpMat(S_.transpose()));
}

ScalarField Dirichlet::divergence(const VectorField& x) const {
  return -(D_.transpose() * W_.cwiseProduct(x)).cwiseQuotient(s_->mv);
}

ScalarField Dirichlet::laplacian(const ScalarField& f) const { return -(S_ * f).cwiseQuotient(s_->mv); }

ScalarField Dirichlet::carre_du_champ(const ScalarField& f, const ScalarField& g) const {
  return pointwise_inner(*s_, D_ * f, D_ * g);
}

const Eigen::SimplicialLDLT<SpMat>& Dirichlet::heat_solver(double dt) const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  auto& slot = cache_->solvers[dt];
  if (!slot) {
    SpMat A = S_ * dt;
    for (int v = 0; v < s_->nv; ++v) A.coeffRef(v, v) += s_->mv[v];
    slot = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(A);
    if (slot->info() != Eigen::Success) throw std::runtime_error("heat solver factorization failed");
  }
  return *slot;
}

int Dirichlet::heat_steps(double t, double max_dt) {
  if (t < 0.0) throw std::invalid_argument("negative time");
  if (t == 0.0) return 0;
  return static_cast<int>(std::ceil(t / max_dt - 1e-12));
}

std::vector<ScalarField> Dirichlet::heat_trajectory(const ScalarField& f, double t, double max_dt) const {
  const int n = heat_steps(t, max_dt);
  std::vector<ScalarField> out{f};
  if (n == 0) return out;
  const auto& solver = heat_solver(t / n);
  ScalarField u = f;
  for (int k = 0; k < n; ++k) {
    const Vec rhs = s_->mv.cwiseProduct(u);  // solve() must not alias its right-hand side
    u = solver.solve(rhs);
    out.push_back(u);
  }
  return out;
}

ScalarField Dirichlet::heat_flow(const ScalarField& f, double t, double max_dt) const {
  return heat_trajectory(f, t, max_dt).back();
}

SignedMeasure Dirichlet::gamma2(const ScalarField& f, const ScalarField& g) const {
  const VectorField df = D_ * f, dg = D_ * g;
  const ScalarField fg = s_->cell_to_vertex(cell_inner(*s_, df, dg));
  const VectorField dlf = D_ * laplacian(f), dlg = D_ * laplacian(g);
  const ScalarField corr = s_->cell_to_vertex(cell_inner(*s_, df, dlg) + cell_inner(*s_, dg, dlf));
  return {-0.5 * (S_ * fg) - 0.5 * s_->mv.cwiseProduct(corr)};
}

ScalarField Dirichlet::gamma2_density(const ScalarField& f, const ScalarField& g) const {
  return gamma2(f, g).w.cwiseQuotient(s_->mv);
}

CellScalar Dirichlet::hform_cells(const ScalarField& f, const VectorField& g1, const VectorField& g2) const {
  const VectorField df = D_ * f;
  const VectorField a = D_ * s_->cell_to_vertex(cell_inner(*s_, df, g1));
  const VectorField b = D_ * s_->cell_to_vertex(cell_inner(*s_, df, g2));
  const VectorField c = D_ * s_->cell_to_vertex(cell_inner(*s_, g1, g2));
  return 0.5 * (cell_inner(*s_, b, g1) + cell_inner(*s_, a, g2) - cell_inner(*s_, df, c));
}

ScalarField Dirichlet::hessian_form_H(const ScalarField& f, const ScalarField& g, const ScalarField& h) const {
  return s_->cell_to_vertex(hform_cells(f, D_ * g, D_ * h));
}

// ---------------------------------------------------------------- polynomial maps

double Polynomial::value(const Vec& x) const {
  double acc = 0.0;
  for (const auto& t : terms) {
    double m = t.coef;
    for (int i = 0; i < nvars; ++i) m *= std::pow(x[i], t.exps[i]);
    acc += m;
  }
  return acc;
}

Vec Polynomial::grad(const Vec& x) const {
  Vec g = Vec::Zero(nvars);
  for (const auto& t : terms) {
    for (int i = 0; i < nvars; ++i) {
      if (t.exps[i] == 0) continue;
      double m = t.coef * t.exps[i];
      for (int j = 0; j < nvars; ++j) m *= std::pow(x[j], t.exps[j] - (j == i ? 1 : 0));
      g[i] += m;
    }
  }
  return g;
}

Mat Polynomial::hess(const Vec& x) const {
  Mat H = Mat::Zero(nvars, nvars);
  for (const auto& t : terms) {
    for (int i = 0; i < nvars; ++i) {
      for (int j = 0; j < nvars; ++j) {
        std::vector<int> e = t.exps;
        double m = t.coef * e[i];
        e[i] -= 1;
        if (m == 0.0) continue;
        m *= e[j];
        e[j] -= 1;
        if (m == 0.0) continue;
        for (int k = 0; k < nvars; ++k) m *= std::pow(x[k], e[k]);
        H(i, j) += m;
      }
    }
  }
  return H;
}

Polynomial Polynomial::identity() { return {1, {{1.0, {1}}}}; }
Polynomial Polynomial::product() { return {2, {{1.0, {1, 1}}}}; }
Polynomial Polynomial::square() { return {1, {{1.0, {2}}}}; }

MultivariateGamma2 multivariate_gamma2(const Dirichlet& dir, const Polynomial& phi,
                                       const std::vector<ScalarField>& fs) {
  const DiscreteSpace& s = dir.space();
  const int n = phi.nvars;
  if (static_cast<int>(fs.size()) != n) throw std::invalid_argument("function count does not match the map");
  if (std::abs(phi.value(Vec::Zero(n))) > 0.0) throw std::invalid_argument("map must vanish at the origin");

  std::vector<Vec> d1(n);
  std::vector<std::vector<Vec>> d2(n, std::vector<Vec>(n));
  for (int i = 0; i < n; ++i) d1[i].resize(s.nv);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d2[i][j].resize(s.nv);
  ScalarField comp(s.nv);
  for (int v = 0; v < s.nv; ++v) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = fs[i][v];
    comp[v] = phi.value(x);
    const Vec g = phi.grad(x);
    const Mat H = phi.hess(x);
    for (int i = 0; i < n; ++i) {
      d1[i][v] = g[i];
      for (int j = 0; j < n; ++j) d2[i][j][v] = H(i, j);
    }
  }
  std::vector<std::vector<ScalarField>> gam(n, std::vector<ScalarField>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gam[i][j] = dir.carre_du_champ(fs[i], fs[j]);

  MultivariateGamma2 out;
  out.A.w = Vec::Zero(s.nv);
  out.B = Vec::Zero(s.nv);
  out.C = Vec::Zero(s.nv);
  out.D = Vec::Zero(s.nv);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec pij = d1[i].cwiseProduct(d1[j]);
      out.A.w += pij.cwiseProduct(dir.gamma2(fs[i], fs[j]).w);
      out.D += pij.cwiseProduct(gam[i][j]);
      for (int k = 0; k < n; ++k) {
        out.B += 2.0 * d1[i].cwiseProduct(d2[j][k]).cwiseProduct(dir.hessian_form_H(fs[i], fs[j], fs[k]));
        for (int l = 0; l < n; ++l)
          out.C += d2[i][k].cwiseProduct(d2[j][l]).cwiseProduct(gam[i][j]).cwiseProduct(gam[k][l]);
      }
    }
  }
  const Vec lhs = dir.gamma2(comp, comp).w;
  const Vec rhs = out.A.w + (out.B + out.C).cwiseProduct(s.mv);
  out.gamma2_residual.lhs = lhs.sum();
  out.gamma2_residual.rhs = rhs.sum();
  out.gamma2_residual.gap = (lhs - rhs).cwiseAbs().sum() / std::max(lhs.cwiseAbs().sum(), 1e-300);
  out.gamma2_residual.h = s.h;
  const Vec g2 = dir.carre_du_champ(comp, comp);
  out.grad_residual.lhs = g2.maxCoeff();
  out.grad_residual.rhs = out.D.maxCoeff();
  out.grad_residual.gap = (g2 - out.D).cwiseAbs().maxCoeff() / std::max(g2.cwiseAbs().maxCoeff(), 1e-300);
  out.grad_residual.h = s.h;
  return out;
}

Measurement bakry_emery(const Dirichlet& dir, const ScalarField& f, double t, double K) {
  const DiscreteSpace& s = dir.space();
  const ScalarField ht = dir.heat_flow(f, t);
  const ScalarField lhs = dir.carre_du_champ(ht, ht);
  const ScalarField rhs = std::exp(-2.0 * K * t) * dir.heat_flow(dir.carre_du_champ(f, f), t);
  Measurement m;
  m.lhs = lhs.maxCoeff();
  m.rhs = rhs.maxCoeff();
  m.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / std::max(rhs.maxCoeff(), 1e-300);
  m.h = s.h;
  m.dt = t / std::max(1, Dirichlet::heat_steps(t, 0.01));
  return m;
}

Measurement bakry_emery_first_power(const Dirichlet& dir, const ScalarField& f, double t, double K) {
  const DiscreteSpace& s = dir.space();
  const ScalarField ht = dir.heat_flow(f, t);
  // Both sides average cell norms over the vertex star; the root of the
  // averaged square would exceed the averaged root by Jensen even at t = 0.
  const ScalarField lhs = s.cell_to_vertex(cell_norm(s, dir.gradient(ht)));
  const ScalarField grad_norm = s.cell_to_vertex(cell_norm(s, dir.gradient(f)));
  const ScalarField rhs = std::exp(-K * t) * dir.heat_flow(grad_norm, t);
  Measurement m;
  m.lhs = lhs.maxCoeff();
  m.rhs = rhs.maxCoeff();
  m.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / std::max(rhs.maxCoeff(), 1e-300);
  m.h = s.h;
  m.dt = t / std::max(1, Dirichlet::heat_steps(t, 0.01));
  return m;
}

Measurement div_grad_adjointness(const Dirichlet& dir, const ScalarField& g, const VectorField& x) {
  const DiscreteSpace& s = dir.space();
  Measurement m;
  m.lhs = integrate(s, g.cwiseProduct(dir.divergence(x)));
  m.rhs = -integrate_cells(s, cell_inner(s, dir.gradient(g), x));
  const double scale = std::sqrt(2.0 * dir.energy(g) * integrate_cells(s, cell_inner(s, x, x)));
  m.gap = std::abs(m.lhs - m.rhs) / std::max(scale, 1e-300);
  m.h = s.h;
  return m;
}

Measurement laplacian_div_grad(const Dirichlet& dir, const ScalarField& f) {
  const DiscreteSpace& s = dir.space();
  const ScalarField a = dir.laplacian(f), b = dir.divergence(dir.gradient(f));
  Measurement m;
  m.lhs = lp_norm(s, a, 2.0);
  m.rhs = lp_norm(s, b, 2.0);
  m.gap = lp_norm(s, a - b, 2.0) / std::max(m.lhs, 1e-300);
  m.h = s.h;
  return m;
}

Measurement laplacian_total_mass(const Dirichlet& dir, const ScalarField& f) {
  const SignedMeasure lap = dir.measure_laplacian(f);
  Measurement m;
  m.lhs = lap.total();
  m.rhs = 0.0;
  m.gap = std::abs(lap.total()) / std::max(lap.tv(), 1e-300);
  m.h = dir.space().h;
  return m;
}

Measurement gamma2_mass_identity(const Dirichlet& dir, const ScalarField& f) {
  const DiscreteSpace& s = dir.space();
  const ScalarField lf = dir.laplacian(f);
  Measurement m;
  m.lhs = dir.gamma2(f, f).total();
  m.rhs = integrate(s, lf.cwiseProduct(lf));
  m.gap = std::abs(m.lhs - m.rhs) / std::max(std::abs(m.rhs), 1e-300);
  m.h = s.h;
  return m;
}

}  // namespace mmc
