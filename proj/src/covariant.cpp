#include "mmc/covariant.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>

namespace mmc {

namespace {

// Per-cell component <X, E> as a sparse nc x nvec map.
SpMat component_map(const DiscreteSpace& s, const VectorField& e) {
  std::vector<Triplet> t;
  for (int c = 0; c < s.nc; ++c)
    for (int a = 0; a < s.dim[c]; ++a) t.emplace_back(c, s.voff[c] + a, e[s.voff[c] + a]);
  SpMat P(s.nc, s.nvec());
  P.setFromTriplets(t.begin(), t.end());
  return P;
}

double rel_l2(const DiscreteSpace& s, const Vec& lhs, const Vec& rhs, const std::vector<int>& off, Measurement& m) {
  m.lhs = cell_l2(s, lhs, off);
  m.rhs = cell_l2(s, rhs, off);
  m.gap = cell_l2(s, lhs - rhs, off) / std::max({m.lhs, m.rhs, 1e-300});
  m.h = s.h;
  return m.gap;
}

}  // namespace

Connection::Connection(const Dirichlet& dir) : dir_(&dir), cache_(std::make_shared<Cache>()) {
  const DiscreteSpace& s = dir.space();
  parallel_ = s.chart.kind == ChartKind::torus;
  const int nax = parallel_ ? 2 : 3;
  TestFunctionBank frame_bank;
  std::vector<int> axes;
  for (int i = 0; i < nax; ++i) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[i] = 1.0;
    VectorField z(s.nvec());
    for (int c = 0; c < s.nc; ++c) z.segment(s.voff[c], s.dim[c]) = s.frame[c].transpose() * e;
    if (z.norm() <= 1e-12 * std::sqrt(static_cast<double>(s.nvec()))) continue;
    gen_.push_back(z);
    axes.push_back(i);
  }
  frame_bank.frame = gen_;
  for (int axis : axes) {
    if (parallel_) {
      gen_hess_.push_back(Tensor2Field::Zero(s.nten()));
      continue;
    }
    ScalarField x(s.nv);
    for (int v = 0; v < s.nv; ++v) x[v] = s.pos[v][axis];
    gen_hess_.push_back(weak_hessian(dir, x, frame_bank).H);
  }

  SpMat cov(s.nten(), s.nvec());
  for (std::size_t i = 0; i < gen_.size(); ++i) {
    const SpMat P = component_map(s, gen_[i]);
    const SpMat grad = dir.D() * s.avg_cv() * P;  // nvec x nvec
    std::vector<Triplet> k, j;
    for (int c = 0; c < s.nc; ++c) {
      const int d = s.dim[c];
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          k.emplace_back(s.toff[c] + a * d + b, s.voff[c] + a, gen_[i][s.voff[c] + b]);
          const double hv = gen_hess_[i][s.toff[c] + a * d + b];
          if (hv != 0.0) j.emplace_back(s.toff[c] + a * d + b, c, hv);
        }
    }
    SpMat K(s.nten(), s.nvec()), J(s.nten(), s.nc);
    K.setFromTriplets(k.begin(), k.end());
    J.setFromTriplets(j.begin(), j.end());
    cov += K * grad + J * P;
  }
  cov_ = cov.pruned();
  wt_.resize(s.nten());
  for (int c = 0; c < s.nc; ++c) wt_.segment(s.toff[c], s.dim[c] * s.dim[c]).setConstant(s.mc[c]);
}

double Connection::energy(const VectorField& x) const {
  const Tensor2Field t = apply(x);
  return 0.5 * t.dot(wt_.cwiseProduct(t));
}

VectorField Connection::laplacian(const VectorField& x) const {
  return -(cov_.transpose() * wt_.cwiseProduct(cov_ * x)).cwiseQuotient(dir_->W());
}

const Eigen::SimplicialLDLT<SpMat>& Connection::solver(double dt) const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  auto& slot = cache_->solvers[dt];
  if (!slot) {
    SpMat A = dt * SpMat(cov_.transpose() * wt_.asDiagonal() * cov_);
    for (Eigen::Index r = 0; r < A.rows(); ++r) A.coeffRef(r, r) += dir_->W()[r];
    slot = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(A);
    if (slot->info() != Eigen::Success) throw std::runtime_error("connection flow factorization failed");
  }
  return *slot;
}

std::vector<VectorField> Connection::heat_trajectory(const VectorField& x, double t, double max_dt) const {
  const int n = Dirichlet::heat_steps(t, max_dt);
  std::vector<VectorField> out{x};
  if (n == 0) return out;
  const auto& sol = solver(t / n);
  VectorField u = x;
  for (int k = 0; k < n; ++k) {
    const Vec rhs = dir_->W().cwiseProduct(u);
    u = sol.solve(rhs);
    out.push_back(u);
  }
  return out;
}

VectorField Connection::heat_flow(const VectorField& x, double t, double max_dt) const {
  return heat_trajectory(x, t, max_dt).back();
}

std::string to_string(CovariantMethod m) { return m == CovariantMethod::generator ? "generator" : "weak-lsq"; }

CovariantMethod covariant_method_from_string(const std::string& s) {
  if (s == "generator") return CovariantMethod::generator;
  if (s == "weak-lsq" || s == "lsq") return CovariantMethod::weak_lsq;
  throw std::invalid_argument("unknown covariant method '" + s + "'");
}

CovariantResult weak_covariant(const Connection& con, const VectorField& x, const TestFunctionBank& bank,
                               CovariantMethod method) {
  const DiscreteSpace& s = con.space();
  const Dirichlet& dir = con.dirichlet();
  if (bank.f.empty() && bank.frame.empty()) throw std::invalid_argument("empty bank");
  const auto& gen = con.generators();
  CovariantResult out;
  out.method = method;
  if (method == CovariantMethod::generator) {
    VectorField rec = VectorField::Zero(s.nvec());
    for (const auto& e : gen) rec += scale_cells(s, cell_inner(s, x, e), e);
    const double xn = cell_l2(s, x, s.voff);
    out.residual = xn > 0.0 ? cell_l2(s, rec - x, s.voff) / xn : 0.0;
    if (out.residual <= 1e-6) {
      out.T = con.apply(x);
      return out;
    }
    out.fallback = true;
    out.method = CovariantMethod::weak_lsq;
  }

  // Integrated identity against vertex hats, one row per (vertex, ordered generator pair).
  const int ng = static_cast<int>(gen.size());
  const int np = ng * ng;
  std::vector<CellScalar> rhs;
  for (int a = 0; a < ng; ++a)
    for (int b = 0; b < ng; ++b) {
      const VectorField dxb = dir.gradient(s.cell_to_vertex(cell_inner(s, x, gen[b])));
      rhs.push_back(cell_inner(s, dxb, gen[a]) - contract(s, con.generator_hessians()[b], gen[a], x));
    }
  std::vector<Triplet> trip;
  Vec b = Vec::Zero(static_cast<Eigen::Index>(s.nv) * np);
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    const double sq = std::sqrt(s.mc[c]);
    for (int a = 0; a < ng; ++a)
      for (int bb = 0; bb < ng; ++bb) {
        const int p = a * ng + bb;
        for (int k = 0; k <= d; ++k) {
          const int v = s.cells[c][k];
          const double wgt = s.mc[c] / (d + 1) / s.mv[v];
          const Eigen::Index row = static_cast<Eigen::Index>(v) * np + p;
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
              trip.emplace_back(row, s.toff[c] + i * d + j,
                                wgt * gen[a][s.voff[c] + i] * gen[bb][s.voff[c] + j] / sq);
          b[row] += wgt * rhs[p][c];
        }
      }
  }
  SpMat A(static_cast<Eigen::Index>(s.nv) * np, s.nten());
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::LeastSquaresConjugateGradient<SpMat, Eigen::IdentityPreconditioner> lscg;
  lscg.setTolerance(1e-13);
  lscg.setMaxIterations(50000);
  lscg.compute(A);
  const Vec sol = lscg.solve(b);
  out.iterations = static_cast<int>(lscg.iterations());
  out.T = Tensor2Field(s.nten());
  for (int c = 0; c < s.nc; ++c) {
    const int n = s.dim[c] * s.dim[c];
    out.T.segment(s.toff[c], n) = sol.segment(s.toff[c], n) / std::sqrt(s.mc[c]);
  }
  const double bn = b.norm();
  out.residual = bn > 0.0 ? (A * sol - b).norm() / bn : 0.0;
  return out;
}

VectorField directional_derivative(const DiscreteSpace& s, const Tensor2Field& gradx, const VectorField& z) {
  return contract_first(s, gradx, z);
}

VectorField lie_bracket(const Connection& con, const VectorField& x, const VectorField& y) {
  const DiscreteSpace& s = con.space();
  return directional_derivative(s, con.apply(y), x) - directional_derivative(s, con.apply(x), y);
}

Measurement covariant_leibniz(const Connection& con, const ScalarField& f, const VectorField& x) {
  const DiscreteSpace& s = con.space();
  const CellScalar fc = s.vertex_to_cell(f);
  const Tensor2Field lhs = con.apply(scale_cells(s, fc, x));
  const Tensor2Field rhs = outer(s, con.dirichlet().gradient(f), x) + scale_cells_t(s, fc, con.apply(x));
  Measurement m;
  rel_l2(s, lhs, rhs, s.toff, m);
  return m;
}

Measurement metric_compatibility(const Connection& con, const VectorField& x, const VectorField& y,
                                 const VectorField& z) {
  const DiscreteSpace& s = con.space();
  const CellScalar lhs =
      cell_inner(s, con.dirichlet().gradient(s.cell_to_vertex(cell_inner(s, x, y))), z);
  const CellScalar rhs = contract(s, con.apply(x), z, y) + contract(s, con.apply(y), z, x);
  Measurement m;
  m.lhs = lp_norm_cells(s, lhs, 2.0);
  m.rhs = lp_norm_cells(s, rhs, 2.0);
  m.gap = lp_norm_cells(s, lhs - rhs, 2.0) / std::max({m.lhs, m.rhs, 1e-300});
  m.h = s.h;
  return m;
}

Measurement torsion_free_check(const Connection& con, const ScalarField& f, const VectorField& x,
                               const VectorField& y) {
  const DiscreteSpace& s = con.space();
  const Dirichlet& dir = con.dirichlet();
  const VectorField df = dir.gradient(f);
  const ScalarField yf = s.cell_to_vertex(cell_inner(s, df, y));
  const ScalarField xf = s.cell_to_vertex(cell_inner(s, df, x));
  const CellScalar lhs = cell_inner(s, dir.gradient(yf), x) - cell_inner(s, dir.gradient(xf), y);
  const CellScalar rhs = cell_inner(s, df, lie_bracket(con, x, y));
  Measurement m;
  m.lhs = lp_norm_cells(s, lhs, 2.0);
  m.rhs = lp_norm_cells(s, rhs, 2.0);
  const double scale = std::max({m.lhs, m.rhs,
                                 lp_norm_cells(s, cell_inner(s, dir.gradient(yf), x), 2.0), 1e-300});
  m.gap = lp_norm_cells(s, lhs - rhs, 2.0) / scale;
  m.h = s.h;
  return m;
}

Measurement bracket_of_gradients(const Connection& con, const TestFunctionBank& bank, const ScalarField& f,
                                 const ScalarField& g) {
  const DiscreteSpace& s = con.space();
  const Dirichlet& dir = con.dirichlet();
  const VectorField df = dir.gradient(f), dg = dir.gradient(g);
  const VectorField lhs = lie_bracket(con, df, dg);
  const VectorField rhs = contract_first(s, weak_hessian(dir, g, bank).H, df) -
                          contract_first(s, weak_hessian(dir, f, bank).H, dg);
  Measurement m;
  rel_l2(s, lhs, rhs, s.voff, m);
  // A vanishing bracket is measured against the size of its two terms.
  const double scale = std::max(m.rhs, cell_l2(s, contract_first(s, weak_hessian(dir, g, bank).H, df), s.voff));
  m.gap = cell_l2(s, lhs - rhs, s.voff) / std::max(scale, 1e-300);
  return m;
}

Measurement contraction_bound(const Connection& con, const VectorField& x, const VectorField& z) {
  const DiscreteSpace& s = con.space();
  const Tensor2Field t = con.apply(x);
  const CellScalar lhs = cell_norm(s, directional_derivative(s, t, z));
  const CellScalar rhs = cell_hs_inner(s, t, t).cwiseSqrt().cwiseProduct(cell_norm(s, z));
  Measurement m;
  m.lhs = lhs.maxCoeff();
  m.rhs = rhs.maxCoeff();
  m.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / std::max(m.rhs, 1e-300);
  m.h = s.h;
  return m;
}

Measurement connection_adjointness(const Connection& con, const VectorField& x, const VectorField& y) {
  const Vec& W = con.dirichlet().W();
  const Tensor2Field tx = con.apply(x), ty = con.apply(y);
  Measurement m;
  m.lhs = y.dot(W.cwiseProduct(con.laplacian(x)));
  m.rhs = -ty.dot(con.Wt().cwiseProduct(tx));
  const double scale = std::sqrt(tx.dot(con.Wt().cwiseProduct(tx)) * ty.dot(con.Wt().cwiseProduct(ty)));
  m.gap = std::abs(m.lhs - m.rhs) / std::max(scale, 1e-300);
  m.h = con.space().h;
  return m;
}

double ec_duality(const Connection& con, const VectorField& x, const TestFunctionBank& bank, int nprod,
                  double rel_cutoff) {
  const DiscreteSpace& s = con.space();
  const auto& gen = con.generators();
  const int ng = static_cast<int>(gen.size());
  const std::vector<ScalarField> weights = duality_weights(s, bank, nprod);
  const int nw = static_cast<int>(weights.size());
  Mat Wc(s.nc, nw);
  for (int k = 0; k < nw; ++k) Wc.col(k) = s.vertex_to_cell(weights[k]);

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < ng; ++a)
    for (int b = 0; b < ng; ++b) pairs.emplace_back(a, b);
  const int np = static_cast<int>(pairs.size());
  Mat G(nw * np, nw * np);
  for (int p = 0; p < np; ++p)
    for (int q = p; q < np; ++q) {
      const CellScalar fac = s.mc.cwiseProduct(cell_inner(s, gen[pairs[p].first], gen[pairs[q].first]))
                                 .cwiseProduct(cell_inner(s, gen[pairs[p].second], gen[pairs[q].second]));
      const Mat blk = Wc.transpose() * fac.asDiagonal() * Wc;
      G.block(p * nw, q * nw, nw, nw) = blk;
      G.block(q * nw, p * nw, nw, nw) = blk.transpose();
    }

  // Paired against the assembled Cov, the operator every adjoint uses, so the
  // sup is a projection of grad X and cannot exceed E_C.
  const Tensor2Field gx = con.apply(x);
  Vec ell(nw * np);
  for (int p = 0; p < np; ++p) {
    const auto [a, b] = pairs[p];
    const CellScalar pair = cell_hs_inner(s, gx, outer(s, gen[a], gen[b]));
    for (int k = 0; k < nw; ++k) ell[p * nw + k] = integrate_cells(s, Wc.col(k).cwiseProduct(pair));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const Vec proj = es.eigenvectors().transpose() * ell;
  double value = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i)
    if (es.eigenvalues()[i] > rel_cutoff * lmax) value += proj[i] * proj[i] / es.eigenvalues()[i];
  return 0.5 * value;
}

Measurement kato_type_check(const Connection& con, const VectorField& x, double t, double max_dt) {
  const DiscreteSpace& s = con.space();
  if (t < 0.0) throw std::invalid_argument("negative time");
  const VectorField xt = con.heat_flow(x, t, max_dt);
  const ScalarField lhs = s.cell_to_vertex(cell_inner(s, xt, xt));
  const ScalarField rhs = con.dirichlet().heat_flow(s.cell_to_vertex(cell_inner(s, x, x)), t, max_dt);
  Measurement m;
  m.lhs = lhs.maxCoeff();
  m.rhs = rhs.maxCoeff();
  m.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / std::max(m.rhs, 1e-300);
  m.h = s.h;
  m.dt = t > 0.0 ? t / Dirichlet::heat_steps(t, max_dt) : 0.0;
  return m;
}

Measurement covariant_locality(const Connection& con, const VectorField& x1, const VectorField& x2,
                               const std::vector<char>& region) {
  const DiscreteSpace& s = con.space();
  bool any = false;
  for (char r : region) any = any || r;
  if (!any) throw std::invalid_argument("empty region");
  const std::vector<char> inner = interior_cells(s, region, 3);
  const Tensor2Field t1 = con.apply(x1), t2 = con.apply(x2);
  double diff = 0.0, ref = 0.0;
  int count = 0;
  for (int c = 0; c < s.nc; ++c) {
    const int n = s.dim[c] * s.dim[c];
    ref = std::max(ref, t1.segment(s.toff[c], n).cwiseAbs().maxCoeff());
    if (!inner[c]) continue;
    ++count;
    diff = std::max(diff, (t1 - t2).segment(s.toff[c], n).cwiseAbs().maxCoeff());
  }
  Measurement m;
  m.lhs = diff;
  m.rhs = ref;
  m.gap = diff / std::max(ref, 1e-300);
  m.h = s.h;
  m.extra["interior_cells"] = count;
  return m;
}

std::vector<char> half_torus_region(const DiscreteSpace& s) {
  if (s.chart.kind != ChartKind::torus) throw std::invalid_argument("half-torus region needs a torus");
  std::vector<char> r(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    double x = 0.0;
    for (int k = 0; k <= s.dim[c]; ++k) x += s.local[c](0, k);
    x = std::fmod(x / (s.dim[c] + 1), s.chart.side);
    if (x < 0) x += s.chart.side;
    r[c] = x < 0.5 * s.chart.side;
  }
  return r;
}

}  // namespace mmc
