#include "mmc/exterior.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SPQRSupport>

#include <cmath>
#include <functional>
#include <random>

namespace mmc {

namespace {

// Barycentric gradients in frame coordinates, d x (d+1).
Mat bary_gradients(const DiscreteSpace& s, int c) {
  const int d = s.dim[c];
  Mat E(d, d);
  for (int k = 1; k <= d; ++k) E.col(k - 1) = s.frame[c].transpose() * (s.local[c].col(k) - s.local[c].col(0));
  const Mat G = E.transpose().inverse();
  Mat out(d, d + 1);
  out.rightCols(d) = G;
  out.col(0) = -G.rowwise().sum();
  return out;
}

SpMat diag_sparse(const Vec& v) {
  SpMat m(v.size(), v.size());
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < v.size(); ++i) t.emplace_back(i, i, v[i]);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Vec diag_of(const SpMat& m) { return m.diagonal(); }

double m_norm(const SpMat& M, const Vec& v) { return std::sqrt(std::max(0.0, v.dot(M * v))); }

}  // namespace

Complex::Complex(const Dirichlet& dir) : dir_(&dir), cache_(std::make_shared<Cache>()) {
  const DiscreteSpace& s = dir.space();
  std::map<std::pair<int, int>, int> edge_id;
  auto edge_of = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = edge_id.find(key);
    if (it != edge_id.end()) return it->second;
    const int id = static_cast<int>(edges_.size());
    edges_.push_back({key.first, key.second});
    edge_id.emplace(key, id);
    return id;
  };

  face_slot_.assign(s.nc, -1);
  cell_edges_.resize(s.nc);
  m1_local_.resize(s.nc);
  std::vector<Triplet> tm1, tw1;
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    const Mat G = bary_gradients(s, c);
    std::vector<std::pair<int, int>> loc;  // local (a, b), oriented by global index
    if (d == 1) {
      loc.emplace_back(0, 1);
    } else {
      loc = {{0, 1}, {1, 2}, {0, 2}};
      face_slot_[c] = static_cast<int>(faces_.size());
      faces_.push_back(c);
    }
    for (auto& [a, b] : loc)
      if (s.cells[c][a] > s.cells[c][b]) std::swap(a, b);
    const int ne = static_cast<int>(loc.size());
    Mat ml(ne, ne);
    for (int i = 0; i < ne; ++i) {
      const int e = edge_of(s.cells[c][loc[i].first], s.cells[c][loc[i].second]);
      cell_edges_[c].push_back(e);
      const Vec ga = G.col(loc[i].first), gb = G.col(loc[i].second);
      const Vec centroid = d == 1 ? Vec(gb) : Vec((gb - ga) / 3.0);
      for (int r = 0; r < d; ++r) tw1.emplace_back(s.voff[c] + r, e, centroid[r]);
    }
    if (d == 1) {
      ml(0, 0) = s.mc[c] * G.col(loc[0].second).squaredNorm();
    } else {
      auto mm = [&](int i, int j) { return s.mc[c] * (i == j ? 2.0 : 1.0) / 12.0; };
      auto gg = [&](int i, int j) { return G.col(i).dot(G.col(j)); };
      for (int i = 0; i < ne; ++i)
        for (int j = 0; j < ne; ++j) {
          const auto [a, b] = loc[i];
          const auto [p, q] = loc[j];
          ml(i, j) = mm(a, p) * gg(b, q) - mm(a, q) * gg(b, p) - mm(b, p) * gg(a, q) + mm(b, q) * gg(a, p);
        }
    }
    m1_local_[c] = ml;
    for (int i = 0; i < ne; ++i)
      for (int j = 0; j < ne; ++j) tm1.emplace_back(cell_edges_[c][i], cell_edges_[c][j], ml(i, j));
  }

  const int ne = static_cast<int>(edges_.size());
  std::vector<Triplet> t0;
  for (int e = 0; e < ne; ++e) {
    t0.emplace_back(e, edges_[e][0], -1.0);
    t0.emplace_back(e, edges_[e][1], 1.0);
  }
  d0_.resize(ne, s.nv);
  d0_.setFromTriplets(t0.begin(), t0.end());

  std::vector<Triplet> t1;
  Vec m2(nf());
  for (int f = 0; f < nf(); ++f) {
    const int c = faces_[f];
    for (int k = 0; k < 3; ++k) {
      const int from = s.cells[c][k], to = s.cells[c][(k + 1) % 3];
      t1.emplace_back(f, edge_id.at(std::minmax(from, to)), from < to ? 1.0 : -1.0);
    }
    m2[f] = s.mc[c] / (s.area[c] * s.area[c]);
  }
  d1_.resize(nf(), ne);
  d1_.setFromTriplets(t1.begin(), t1.end());

  m0_ = diag_sparse(s.mv);
  m1_.resize(ne, ne);
  m1_.setFromTriplets(tm1.begin(), tm1.end());
  m2_ = diag_sparse(m2);
  w1_.resize(s.nvec(), ne);
  w1_.setFromTriplets(tw1.begin(), tw1.end());

  m1_solver_.compute(m1_);
  if (m1_solver_.info() != Eigen::Success) throw std::runtime_error("Whitney mass factorization failed");
  k0_ = SpMat(d0_.transpose() * m1_ * d0_).pruned();
  const Vec inv_m0 = s.mv.cwiseInverse();
  const SpMat co = m1_ * d0_;
  k1_ = SpMat(SpMat(d1_.transpose() * m2_ * d1_) + SpMat(co * inv_m0.asDiagonal() * co.transpose())).pruned();
}

int Complex::size(int k) const {
  switch (k) {
    case 0: return space().nv;
    case 1: return static_cast<int>(edges_.size());
    case 2: return nf();
    default: throw std::invalid_argument("form degree out of range");
  }
}

const SpMat& Complex::d(int k) const {
  if (k == 0) return d0_;
  if (k == 1) return d1_;
  throw std::invalid_argument("exterior derivative degree out of range");
}

const SpMat& Complex::mass(int k) const {
  if (k == 0) return m0_;
  if (k == 1) return m1_;
  if (k == 2) return m2_;
  throw std::invalid_argument("form degree out of range");
}

const SpMat& Complex::stiffness(int k) const {
  if (k == 0) return k0_;
  if (k == 1) return k1_;
  throw std::invalid_argument("stiffness is assembled for degrees 0 and 1");
}

Vec Complex::solve_mass1(const Vec& b) const { return m1_solver_.solve(b); }

Vec Complex::flat(const VectorField& x) const { return solve_mass1(w1_.transpose() * dir_->W().cwiseProduct(x)); }

Vec Complex::two_form(const CellScalar& density) const {
  Vec c(nf());
  for (int f = 0; f < nf(); ++f) c[f] = density[faces_[f]] * space().area[faces_[f]];
  return c;
}

CellScalar Complex::density2(const Vec& c) const {
  CellScalar out = CellScalar::Zero(space().nc);
  for (int f = 0; f < nf(); ++f) out[faces_[f]] = c[f] / space().area[faces_[f]];
  return out;
}

Vec Complex::interpolate_fdg(const ScalarField& f, const ScalarField& g) const {
  Vec w(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const int a = edges_[e][0], b = edges_[e][1];
    w[e] = 0.5 * (f[a] + f[b]) * (g[b] - g[a]);
  }
  return w;
}

Vec Complex::exterior_derivative(int k, const Vec& w) const {
  if (w.size() != size(k)) throw std::invalid_argument("cochain size does not match its degree");
  if (k == 0) return d0_ * w;
  if (k == 1) return d1_ * w;
  return Vec(0);
}

Vec Complex::codifferential(int k, const Vec& w) const {
  if (w.size() != size(k)) throw std::invalid_argument("cochain size does not match its degree");
  if (k == 0) return Vec::Zero(w.size());
  if (k == 1) return (d0_.transpose() * (m1_ * w)).cwiseQuotient(space().mv);
  return solve_mass1(d1_.transpose() * (m2_ * w));
}

Vec Complex::hodge_laplacian(int k, const Vec& w) const {
  if (k == 0) return codifferential(1, d0_ * w);
  if (k == 1) {
    Vec out = d0_ * codifferential(1, w);
    if (nf() > 0) out += codifferential(2, d1_ * w);
    return out;
  }
  return d1_ * codifferential(2, w);
}

double Complex::hodge_energy(const Vec& w) const {
  const Vec dw = d1_ * w;
  const Vec dl = codifferential(1, w);
  return 0.5 * (dw.dot(m2_ * dw) + dl.dot(space().mv.cwiseProduct(dl)));
}

CellScalar Complex::pointwise_norm2(int k, const Vec& w) const {
  const DiscreteSpace& s = space();
  if (k == 0) return s.vertex_to_cell(w.cwiseProduct(w));
  if (k == 2) return density2(w).array().square().matrix();
  CellScalar out(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    Vec loc(cell_edges_[c].size());
    for (std::size_t i = 0; i < cell_edges_[c].size(); ++i) loc[i] = w[cell_edges_[c][i]];
    out[c] = loc.dot(m1_local_[c] * loc) / s.mc[c];
  }
  return out;
}

Vec Complex::hodge_heat_flow(int k, const Vec& w, double t, double max_dt) const {
  if (t < 0.0) throw std::invalid_argument("negative time");
  if (k == 0) return dir_->heat_flow(w, t, max_dt);
  const int n = Dirichlet::heat_steps(t, max_dt);
  if (n == 0) return w;
  const double dt = t / n;
  Vec u = w;
  if (k == 1) {
    std::unique_lock<std::mutex> lock(cache_->mu);
    auto& slot = cache_->ldlt[{1, dt}];
    if (!slot) {
      slot = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(SpMat(m1_ + dt * k1_));
      if (slot->info() != Eigen::Success) throw std::runtime_error("Hodge flow factorization failed");
    }
    const auto& sol = *slot;
    lock.unlock();
    for (int i = 0; i < n; ++i) {
      const Vec rhs = m1_ * u;
      u = sol.solve(rhs);
    }
    return u;
  }
  if (k != 2 || nf() == 0) throw std::invalid_argument("form degree out of range");
  // (M2 + dt M2 d1 M1^{-1} d1^T M2) x = M2 x_n as a block system in (y, x).
  std::unique_lock<std::mutex> lock(cache_->mu);
  auto& slot = cache_->lu2[dt];
  const int ne = size(1);
  if (!slot) {
    std::vector<Triplet> t;
    for (int i = 0; i < m1_.outerSize(); ++i)
      for (SpMat::InnerIterator it(m1_, i); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    const SpMat b = SpMat(d1_.transpose() * m2_);
    for (int i = 0; i < b.outerSize(); ++i)
      for (SpMat::InnerIterator it(b, i); it; ++it) {
        t.emplace_back(it.row(), ne + it.col(), -it.value());
        t.emplace_back(ne + it.col(), it.row(), dt * it.value());
      }
    for (int f = 0; f < nf(); ++f) t.emplace_back(ne + f, ne + f, m2_.coeff(f, f));
    SpMat A(ne + nf(), ne + nf());
    A.setFromTriplets(t.begin(), t.end());
    slot = std::make_unique<Eigen::SparseLU<SpMat>>();
    slot->compute(A);
    if (slot->info() != Eigen::Success) throw std::runtime_error("2-form flow factorization failed");
  }
  auto& sol = *slot;
  lock.unlock();
  for (int i = 0; i < n; ++i) {
    Vec rhs = Vec::Zero(ne + nf());
    rhs.tail(nf()) = m2_ * u;
    u = sol.solve(rhs).tail(nf());
  }
  return u;
}

// ---------------------------------------------------------------- spectra

namespace {

struct SpectralOps {
  int n = 0;
  std::function<Vec(const Vec&)> K;        // stiffness
  std::function<Vec(const Vec&)> Minv;     // mass inverse
  std::function<Vec(const Vec&)> shifted;  // (K + sigma M)^{-1}
  SpMat M;
};

SpectralOps spectral_ops(const Complex& cx, int k, double& sigma, double& lmax) {
  SpectralOps ops;
  ops.n = cx.size(k);
  ops.M = cx.mass(k);
  const SpMat& M = ops.M;
  if (k <= 1) {
    const SpMat& K = cx.stiffness(k);
    ops.K = [&K](const Vec& x) { return Vec(K * x); };
  } else {
    ops.K = [&cx, &M](const Vec& x) {
      return Vec(M * (cx.d(1) * cx.solve_mass1(cx.d(1).transpose() * (M * x))));
    };
  }
  if (k == 1) {
    ops.Minv = [&cx](const Vec& x) { return cx.solve_mass1(x); };
  } else {
    const Vec dm = diag_of(M);
    ops.Minv = [dm](const Vec& x) { return Vec(x.cwiseQuotient(dm)); };
  }
  // Largest eigenvalue of M^{-1} K by power iteration.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  Vec x(ops.n);
  for (auto& v : x) v = gauss(rng);
  lmax = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Vec y = ops.Minv(ops.K(x));
    const double nrm = m_norm(M, y);
    if (nrm == 0.0) break;
    x = y / nrm;
    const double est = x.dot(ops.K(x));
    if (it > 20 && std::abs(est - lmax) <= 1e-6 * est) {
      lmax = est;
      break;
    }
    lmax = est;
  }
  if (lmax <= 0.0) lmax = 1.0;
  sigma = 1e-6 * lmax;
  if (k <= 1) {
    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(SpMat(cx.stiffness(k) + sigma * M));
    if (ldlt->info() != Eigen::Success) throw std::runtime_error("shifted factorization failed");
    ops.shifted = [ldlt](const Vec& b) { return Vec(ldlt->solve(b)); };
  } else {
    const int ne = cx.size(1), nf = cx.size(2);
    std::vector<Triplet> t;
    const SpMat& m1 = cx.mass(1);
    for (int i = 0; i < m1.outerSize(); ++i)
      for (SpMat::InnerIterator it(m1, i); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    const SpMat b = SpMat(cx.d(1).transpose() * M);
    for (int i = 0; i < b.outerSize(); ++i)
      for (SpMat::InnerIterator it(b, i); it; ++it) {
        t.emplace_back(it.row(), ne + it.col(), -it.value());
        t.emplace_back(ne + it.col(), it.row(), it.value());
      }
    for (int f = 0; f < nf; ++f) t.emplace_back(ne + f, ne + f, sigma * M.coeff(f, f));
    SpMat A(ne + nf, ne + nf);
    A.setFromTriplets(t.begin(), t.end());
    auto lu = std::make_shared<Eigen::SparseLU<SpMat>>();
    lu->compute(A);
    if (lu->info() != Eigen::Success) throw std::runtime_error("shifted saddle factorization failed");
    ops.shifted = [lu, ne, nf](const Vec& rhs) {
      Vec full = Vec::Zero(ne + nf);
      full.tail(nf) = rhs;
      return Vec(lu->solve(full).tail(nf));
    };
  }
  return ops;
}

}  // namespace

HarmonicBasis harmonic_forms(const Complex& cx, int k, double rel_threshold, int nev) {
  if (k < 0 || k > cx.top_degree()) throw std::invalid_argument("form degree out of range");
  HarmonicBasis hb;
  hb.degree = k;
  double sigma = 0.0, lmax = 0.0;
  SpectralOps ops = spectral_ops(cx, k, sigma, lmax);
  const int n = ops.n;
  hb.lambda_max = lmax;
  hb.threshold = rel_threshold * lmax;
  const int p = std::min(n, nev + 4);

  // Shift-invert subspace iteration with Rayleigh-Ritz in the M inner product.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  Mat X(n, p);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = gauss(rng);
  Vec lam = Vec::Zero(p);
  for (int it = 0; it < 60; ++it) {
    Mat Y(n, p);
    for (int j = 0; j < p; ++j) Y.col(j) = ops.shifted(ops.M * X.col(j));
    Mat KY(n, p);
    for (int j = 0; j < p; ++j) KY.col(j) = ops.K(Y.col(j));
    const Mat Kp = Y.transpose() * KY;
    const Mat Mp = Y.transpose() * (ops.M * Y);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(0.5 * (Kp + Kp.transpose()), 0.5 * (Mp + Mp.transpose()));
    if (ges.info() != Eigen::Success) throw std::runtime_error("Rayleigh-Ritz step failed");
    X = Y * ges.eigenvectors();
    for (int j = 0; j < p; ++j) X.col(j) /= m_norm(ops.M, X.col(j));
    const Vec next = ges.eigenvalues();
    const double change = (next - lam).cwiseAbs().head(std::min(p, nev)).maxCoeff();
    lam = next;
    if (it > 3 && change <= 1e-12 * lmax) break;
  }
  int count = 0;
  for (int j = 0; j < p; ++j) {
    hb.eigenvalues.push_back(std::max(lam[j], 0.0));
    if (lam[j] <= hb.threshold) ++count;
  }
  hb.basis = X.leftCols(count);
  if (count < p) {
    hb.gap_factor = lam[count] / std::max(hb.threshold, 1e-300);
    hb.ambiguous = hb.gap_factor < 100.0;
  } else {
    hb.gap_factor = INFINITY;
    hb.ambiguous = count == p && p < n;
  }
  return hb;
}

namespace {
int spqr_rank(const SpMat& a) {
  SpMat m = a;
  m.makeCompressed();
  Eigen::SPQR<SpMat> qr;
  qr.setPivotThreshold(1e-10);
  qr.compute(m);
  if (qr.info() != Eigen::Success) throw std::runtime_error("sparse QR failed");
  return static_cast<int>(qr.rank());
}
}  // namespace

// SuiteSparseQR's rank detection can miss a deficiency but never invents one at
// this threshold, so the smaller of the two orientations is taken.
int sparse_rank(const SpMat& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  return std::min(spqr_rank(a), spqr_rank(SpMat(a.transpose())));
}

BettiReport betti(const Complex& cx) {
  BettiReport r;
  const int top = cx.top_degree();
  r.ranks.push_back(sparse_rank(cx.d(0)));
  r.ranks.push_back(cx.nf() > 0 ? sparse_rank(cx.d(1)) : 0);
  r.rank_nullity.push_back(cx.size(0) - r.ranks[0]);
  r.rank_nullity.push_back(cx.size(1) - r.ranks[0] - r.ranks[1]);
  if (top == 2) r.rank_nullity.push_back(cx.size(2) - r.ranks[1]);
  for (int k = 0; k <= top; ++k) {
    const int need = r.rank_nullity[k] + 4;
    r.bases.push_back(harmonic_forms(cx, k, 1e-8, std::max(8, need)));
    r.eigen.push_back(static_cast<int>(r.bases.back().basis.cols()));
  }
  r.agree = r.eigen == r.rank_nullity;
  for (const auto& b : r.bases) r.agree = r.agree && !b.ambiguous;
  return r;
}

HodgeDecomposition hodge_decomposition(const Complex& cx, const Vec& w, const HarmonicBasis& h1) {
  const DiscreteSpace& s = cx.space();
  if (h1.degree != 1) throw std::invalid_argument("harmonic basis must be of degree 1");
  const SpMat& M1 = cx.mass(1);
  HodgeDecomposition out;

  // Exact part: K0 alpha = d0^T M1 w with one pinned vertex per component.
  std::vector<char> pinned(s.nv, 0);
  std::vector<char> seen(s.ncomp, 0);
  for (int v = 0; v < s.nv; ++v)
    if (!seen[s.component[v]]) {
      seen[s.component[v]] = 1;
      pinned[v] = 1;
    }
  const SpMat& K0 = cx.stiffness(0);
  std::vector<Triplet> t;
  for (int i = 0; i < K0.outerSize(); ++i)
    for (SpMat::InnerIterator it(K0, i); it; ++it)
      if (!pinned[it.row()] && !pinned[it.col()]) t.emplace_back(it.row(), it.col(), it.value());
  for (int v = 0; v < s.nv; ++v)
    if (pinned[v]) t.emplace_back(v, v, 1.0);
  SpMat Kp(s.nv, s.nv);
  Kp.setFromTriplets(t.begin(), t.end());
  Vec rhs = cx.d(0).transpose() * (M1 * w);
  for (int v = 0; v < s.nv; ++v)
    if (pinned[v]) rhs[v] = 0.0;
  Eigen::SimplicialLDLT<SpMat> ldlt(Kp);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("exact-part factorization failed");
  out.alpha = ldlt.solve(rhs);
  out.exact = cx.d(0) * out.alpha;

  out.harmonic = Vec::Zero(w.size());
  for (Eigen::Index j = 0; j < h1.basis.cols(); ++j)
    out.harmonic += h1.basis.col(j) * h1.basis.col(j).dot(M1 * w);

  const Vec rest = w - out.exact - out.harmonic;
  if (cx.nf() > 0) {
    // d1^T u = M1 rest in least squares, u = M2 beta; normal equations by CG.
    const SpMat& d1 = cx.d(1);
    const SpMat N = SpMat(d1 * d1.transpose());
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-15);
    cg.setMaxIterations(100000);
    cg.compute(N);
    const Vec u = cg.solve(d1 * (M1 * rest));
    out.beta = u.cwiseQuotient(cx.mass(2).diagonal());
    out.coexact = cx.solve_mass1(d1.transpose() * u);
  } else {
    out.beta = Vec(0);
    out.coexact = Vec::Zero(w.size());
  }
  const double wn = std::max(m_norm(M1, w), 1e-300);
  out.reconstruction = m_norm(M1, out.exact + out.coexact + out.harmonic - w) / wn;
  out.orthogonality = std::max({std::abs(out.exact.dot(M1 * out.coexact)), std::abs(out.exact.dot(M1 * out.harmonic)),
                                std::abs(out.coexact.dot(M1 * out.harmonic))}) /
                      (wn * wn);
  out.coclosed = m_norm(cx.mass(0), cx.codifferential(1, out.coexact)) / wn;
  out.closed = cx.nf() > 0 ? m_norm(cx.mass(2), cx.d(1) * out.exact) / wn : 0.0;
  return out;
}

// ---------------------------------------------------------------- checks

Measurement codifferential_adjointness(const Complex& cx, int k, const Vec& a, const Vec& b) {
  if (k < 1 || k > cx.top_degree()) throw std::invalid_argument("codifferential degree out of range");
  Measurement m;
  const Vec da = cx.exterior_derivative(k - 1, a);
  m.lhs = cx.inner(k, da, b);
  m.rhs = cx.inner(k - 1, a, cx.codifferential(k, b));
  const double scale = m_norm(cx.mass(k), da) * m_norm(cx.mass(k), b);
  m.gap = std::abs(m.lhs - m.rhs) / std::max(scale, 1e-300);
  m.h = cx.space().h;
  return m;
}

Measurement dd_zero(const Complex& cx, const ScalarField& f) {
  Measurement m;
  const Vec df = cx.d(0) * f;
  m.lhs = cx.nf() > 0 ? (cx.d(1) * df).cwiseAbs().maxCoeff() : 0.0;
  m.rhs = 0.0;
  m.gap = m.lhs / std::max(df.cwiseAbs().maxCoeff(), 1e-300);
  m.h = cx.space().h;
  return m;
}

Measurement ext_leibniz(const Complex& cx, const ScalarField& f, const ScalarField& g) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = cx.dirichlet();
  if (cx.nf() == 0) throw std::invalid_argument("no 2-cells");
  const VectorField df = dir.gradient(f), dg = dir.gradient(g);
  const Vec lhs = cx.d(1) * cx.flat(scale_cells(s, s.vertex_to_cell(f), dg));
  const KForm wd = wedge(s, kform_from_vector(s, df), kform_from_vector(s, dg));
  CellScalar dens = CellScalar::Zero(s.nc);
  const std::vector<int> off = kform_offsets(s, 2);
  for (int c = 0; c < s.nc; ++c)
    if (off[c + 1] > off[c]) dens[c] = wd.values[off[c]];
  const Vec rhs = cx.two_form(dens);
  const SpMat& M2 = cx.mass(2);
  Measurement m;
  m.lhs = m_norm(M2, lhs);
  m.rhs = m_norm(M2, rhs);
  m.gap = m_norm(M2, lhs - rhs) / std::max({m.lhs, m.rhs, 1e-300});
  m.h = s.h;
  return m;
}

Measurement codifferential_product(const Complex& cx, const ScalarField& f, const ScalarField& g) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = cx.dirichlet();
  const VectorField df = dir.gradient(f), dg = dir.gradient(g);
  const Vec lhs = cx.codifferential(1, cx.flat(scale_cells(s, s.vertex_to_cell(f), dg)));
  const Vec rhs = -s.cell_to_vertex(cell_inner(s, df, dg)) - f.cwiseProduct(dir.laplacian(g));
  Measurement m;
  m.lhs = lp_norm(s, lhs, 2.0);
  m.rhs = lp_norm(s, rhs, 2.0);
  m.gap = lp_norm(s, lhs - rhs, 2.0) / std::max({m.lhs, m.rhs, 1e-300});
  m.h = s.h;
  return m;
}

std::vector<Vec> bank_test_forms(const Complex& cx, const TestFunctionBank& bank, int n) {
  const DiscreteSpace& s = cx.space();
  const int nb = static_cast<int>(bank.f.size());
  if (nb == 0) throw std::invalid_argument("empty bank");
  std::vector<Vec> out;
  for (int j = 0; j < n; ++j) {
    const ScalarField& g = bank.f[(j + nb / 2) % nb];
    const ScalarField& h = bank.f[(j + 3) % nb];
    out.push_back(cx.flat(scale_cells(s, s.vertex_to_cell(g), cx.dirichlet().gradient(h))));
  }
  return out;
}

Measurement weak_form_residual(const Complex& cx, const Vec& lhs, const Vec& rhs, const std::vector<Vec>& tests) {
  const SpMat& M1 = cx.mass(1);
  Measurement m;
  m.lhs = m_norm(M1, lhs);
  m.rhs = m_norm(M1, rhs);
  const double scale = std::max({m.lhs, m.rhs, 1e-300});
  const Vec r = M1 * (lhs - rhs);
  for (const auto& e : tests) m.gap = std::max(m.gap, std::abs(r.dot(e)) / (scale * std::max(m_norm(M1, e), 1e-300)));
  m.extra["strong"] = m_norm(M1, lhs - rhs) / scale;
  m.h = cx.space().h;
  return m;
}

Measurement delta_wedge_formula(const Complex& cx, const Connection& con, const TestFunctionBank& bank,
                                const std::vector<ScalarField>& fs) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = cx.dirichlet();
  Measurement m;
  m.h = s.h;
  if (fs.size() == 1) {
    const Vec lhs = cx.codifferential(1, cx.d(0) * fs[0]);
    const Vec rhs = -dir.laplacian(fs[0]);
    m.lhs = lp_norm(s, lhs, 2.0);
    m.rhs = lp_norm(s, rhs, 2.0);
    m.gap = lp_norm(s, lhs - rhs, 2.0) / std::max({m.lhs, m.rhs, 1e-300});
    return m;
  }
  if (fs.size() != 2) throw std::invalid_argument("wedge degree exceeds the cell dimension");
  if (cx.nf() == 0) throw std::invalid_argument("no 2-cells");
  const VectorField d1 = dir.gradient(fs[0]), d2 = dir.gradient(fs[1]);
  const KForm wd = wedge(s, kform_from_vector(s, d1), kform_from_vector(s, d2));
  CellScalar dens = CellScalar::Zero(s.nc);
  const std::vector<int> off = kform_offsets(s, 2);
  for (int c = 0; c < s.nc; ++c)
    if (off[c + 1] > off[c]) dens[c] = wd.values[off[c]];
  const Vec lhs = cx.codifferential(2, cx.two_form(dens));
  const VectorField rhs_field = scale_cells(s, s.vertex_to_cell(dir.laplacian(fs[1])), d1) -
                                scale_cells(s, s.vertex_to_cell(dir.laplacian(fs[0])), d2) -
                                lie_bracket(con, d1, d2);
  return weak_form_residual(cx, lhs, cx.flat(rhs_field), bank_test_forms(cx, bank));
}

Measurement hodge_identity_1forms(const Complex& cx, const TestFunctionBank& bank, const ScalarField& f,
                                  const ScalarField& g) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = cx.dirichlet();
  const VectorField df = dir.gradient(f), dg = dir.gradient(g);
  const CellScalar fc = s.vertex_to_cell(f);
  const Vec lhs = cx.hodge_laplacian(1, cx.flat(scale_cells(s, fc, dg)));
  const VectorField rhs_field = -scale_cells(s, fc, dir.gradient(dir.laplacian(g))) -
                                scale_cells(s, s.vertex_to_cell(dir.laplacian(f)), dg) -
                                2.0 * contract_first(s, weak_hessian(dir, g, bank).H, df);
  return weak_form_residual(cx, lhs, cx.flat(rhs_field), bank_test_forms(cx, bank));
}

Measurement hodge_flow_commutation(const Complex& cx, const ScalarField& f, double t, double max_dt) {
  const Vec lhs = cx.hodge_heat_flow(1, cx.d(0) * f, t, max_dt);
  const Vec rhs = cx.d(0) * cx.dirichlet().heat_flow(f, t, max_dt);
  const SpMat& M1 = cx.mass(1);
  Measurement m;
  m.lhs = m_norm(M1, lhs);
  m.rhs = m_norm(M1, rhs);
  m.gap = m_norm(M1, lhs - rhs) / std::max({m.lhs, m.rhs, 1e-300});
  m.h = cx.space().h;
  m.dt = t > 0.0 ? t / Dirichlet::heat_steps(t, max_dt) : 0.0;
  return m;
}

Measurement form_contraction_check(const Complex& cx, const Vec& w, double t, double K, double max_dt) {
  const DiscreteSpace& s = cx.space();
  const Vec wt = cx.hodge_heat_flow(1, w, t, max_dt);
  const ScalarField lhs = s.cell_to_vertex(cx.pointwise_norm2(1, wt));
  const ScalarField rhs =
      std::exp(-2.0 * K * t) * cx.dirichlet().heat_flow(s.cell_to_vertex(cx.pointwise_norm2(1, w)), t, max_dt);
  Measurement m;
  m.lhs = lhs.maxCoeff();
  m.rhs = rhs.maxCoeff();
  m.gap = (lhs - rhs).cwiseMax(0.0).maxCoeff() / std::max(m.rhs, 1e-300);
  m.h = s.h;
  m.dt = t > 0.0 ? t / Dirichlet::heat_steps(t, max_dt) : 0.0;
  return m;
}

Measurement ec_eh_inequality(const Complex& cx, const Connection& con, const VectorField& x, double K) {
  const DiscreteSpace& s = cx.space();
  const double ec = con.energy(x);
  const double eh = cx.hodge_energy(cx.flat(x));
  const double x2 = x.dot(cx.dirichlet().W().cwiseProduct(x));
  Measurement m;
  m.lhs = ec;
  m.rhs = eh - 0.5 * K * x2;
  const double scale = std::max({std::abs(ec), std::abs(m.rhs), 1e-300});
  m.gap = std::max(0.0, m.lhs - m.rhs) / scale;
  m.h = s.h;
  m.extra["two_sided"] = std::abs(m.lhs - m.rhs) / scale;
  m.extra["E_H"] = eh;
  return m;
}

Measurement betti_bound_rcd0(const Complex& cx, const BettiReport& b) {
  Measurement m;
  m.lhs = b.eigen.size() > 1 ? b.eigen[1] : 0;
  m.rhs = cx.space().max_dim();
  m.gap = std::max(0.0, m.lhs - m.rhs);
  m.h = cx.space().h;
  return m;
}

}  // namespace mmc
