#include "mmc/lagrangian.hpp"

#include <Eigen/SparseLU>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/dijkstra_shortest_paths.hpp>
#include <boost/graph/find_flow_cost.hpp>
#include <boost/graph/successive_shortest_path_nonnegative_weights.hpp>

#include <cmath>

namespace mmc {

namespace {

void require_torus(const DiscreteSpace& s) {
  if (s.chart.kind != ChartKind::torus) throw std::invalid_argument("construction needs the flat torus chart");
}

double torus_delta(double d, double side) {
  d = std::fmod(d, side);
  if (d < -0.5 * side) d += side;
  if (d > 0.5 * side) d -= side;
  return d;
}

// Gaussian bump sampled at vertices times m_v, normalized. The periodic image
// sum keeps the weights smooth in the centre; `cut` drops values below e^{-9/2}.
Vec sampled_bump(const DiscreteSpace& s, double cx, double cy, double width, bool cut) {
  require_torus(s);
  if (!(width > 0.0)) throw std::invalid_argument("blob width must be positive");
  const double L = s.chart.side;
  Vec w(s.nv);
  for (int v = 0; v < s.nv; ++v) {
    double g = 0.0;
    if (cut) {
      const double dx = torus_delta(s.pos[v].x() - cx, L), dy = torus_delta(s.pos[v].y() - cy, L);
      const double r2 = (dx * dx + dy * dy) / (width * width);
      g = r2 <= 9.0 ? std::exp(-0.5 * r2) : 0.0;
    } else {
      for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) {
          const double dx = torus_delta(s.pos[v].x() - cx, L) + i * L;
          const double dy = torus_delta(s.pos[v].y() - cy, L) + j * L;
          g += std::exp(-0.5 * (dx * dx + dy * dy) / (width * width));
        }
    }
    w[v] = g * s.mv[v];
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw std::invalid_argument("blob has no mass on the mesh");
  return w / total;
}

double mu_integral(const ScalarField& f, const Vec& mu) { return f.dot(mu); }

// int <grad f, X> d mu with mu's density taken as the cell average.
double flux(const Dirichlet& dir, const ScalarField& f, const VectorField& x, const Vec& mu) {
  const DiscreteSpace& s = dir.space();
  const CellScalar rho = s.vertex_to_cell(mu.cwiseQuotient(s.mv));
  return integrate_cells(s, cell_inner(s, dir.gradient(f), x).cwiseProduct(rho));
}

void check_aligned(const MeasureCurve& curve, const VelocityTrack& track) {
  if (curve.t.size() != curve.mu.size() || curve.t.size() != track.X.size())
    throw std::invalid_argument("curve and track grids do not match");
}

}  // namespace

double mass_defect(const DiscreteSpace& s, const MeasureCurve& curve) {
  if (curve.t.size() != curve.mu.size()) throw std::invalid_argument("curve grid mismatch");
  double worst = 0.0;
  for (const Vec& mu : curve.mu) {
    if (mu.size() != s.nv) throw std::invalid_argument("weights do not match the vertex count");
    if (mu.minCoeff() < 0.0) throw std::invalid_argument("negative weight in curve");
    worst = std::max(worst, std::abs(mu.sum() - 1.0));
  }
  return worst;
}

double compression_bound(const DiscreteSpace& s, const MeasureCurve& curve) {
  double c = 0.0;
  for (const Vec& mu : curve.mu) c = std::max(c, mu.cwiseQuotient(s.mv).maxCoeff());
  return c;
}

double kinetic_energy(const DiscreteSpace& s, const MeasureCurve& curve, const VelocityTrack& track) {
  check_aligned(curve, track);
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < curve.t.size(); ++k) {
    const CellScalar rho = s.vertex_to_cell(curve.mu[k].cwiseQuotient(s.mv));
    e += (curve.t[k + 1] - curve.t[k]) * integrate_cells(s, cell_inner(s, track.X[k], track.X[k]).cwiseProduct(rho));
  }
  return e;
}

std::vector<double> time_derivative_norms(const DiscreteSpace& s, const MeasureCurve& curve,
                                          const VelocityTrack& track) {
  check_aligned(curve, track);
  std::vector<double> out;
  for (std::size_t k = 1; k + 1 < curve.t.size(); ++k) {
    const VectorField d = (track.X[k + 1] - track.X[k - 1]) / (curve.t[k + 1] - curve.t[k - 1]);
    out.push_back(std::sqrt(integrate_cells(s, cell_inner(s, d, d))));
  }
  return out;
}

Vec torus_blob(const DiscreteSpace& s, double cx, double cy, double width) {
  return sampled_bump(s, cx, cy, width, true);
}

MeasureCurve heat_curve(const Dirichlet& dir, const ScalarField& rho0, double T, int steps) {
  const DiscreteSpace& s = dir.space();
  if (s.nv > 2000) throw std::invalid_argument("spectral heat curve limited to 2000 vertices");
  if (T < 0.0 || steps < 1) throw std::invalid_argument("bad time grid");
  const Vec sq = s.mv.cwiseSqrt(), isq = sq.cwiseInverse();
  const Mat L = isq.asDiagonal() * Mat(dir.S()) * isq.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Mat> eig(L);
  const Vec c0 = eig.eigenvectors().transpose() * sq.cwiseProduct(rho0);
  MeasureCurve curve;
  for (int k = 0; k <= steps; ++k) {
    const double t = T * k / steps;
    const Vec decay = (-t * eig.eigenvalues().array()).exp().matrix();
    const Vec rho = isq.cwiseProduct(eig.eigenvectors() * decay.cwiseProduct(c0));
    Vec mu = s.mv.cwiseProduct(rho).cwiseMax(0.0);  // the semigroup is positive; drop roundoff
    mu /= mu.sum();
    curve.t.push_back(t);
    curve.mu.push_back(mu);
  }
  return curve;
}

VelocityTrack heat_velocity(const Dirichlet& dir, const MeasureCurve& curve) {
  const DiscreteSpace& s = dir.space();
  VelocityTrack track;
  for (const Vec& mu : curve.mu) {
    const ScalarField rho = mu.cwiseQuotient(s.mv);
    const CellScalar rc = s.vertex_to_cell(rho);
    CellScalar inv(s.nc);
    for (int c = 0; c < s.nc; ++c) inv[c] = rc[c] > 0.0 ? -1.0 / rc[c] : 0.0;
    track.X.push_back(scale_cells(s, inv, dir.gradient(rho)));
  }
  return track;
}

MeasureCurve translation_curve(const DiscreteSpace& s, const Eigen::Vector2d& c, double width,
                               const Eigen::Vector2d& v, const std::vector<double>& times) {
  MeasureCurve curve;
  for (double t : times) {
    curve.t.push_back(t);
    curve.mu.push_back(sampled_bump(s, c.x() + t * v.x(), c.y() + t * v.y(), width, false));
  }
  return curve;
}

VelocityTrack constant_track(const DiscreteSpace& s, const Eigen::Vector2d& v, std::size_t count) {
  require_torus(s);
  VectorField x(s.nvec());
  const Eigen::Vector3d v3(v.x(), v.y(), 0.0);
  for (int c = 0; c < s.nc; ++c)
    for (int a = 0; a < s.dim[c]; ++a) x[s.voff[c] + a] = s.frame[c].col(a).dot(v3);
  return VelocityTrack{std::vector<VectorField>(count, x)};
}

Measurement continuity_residual(const Dirichlet& dir, const MeasureCurve& curve, const VelocityTrack& track,
                                const std::vector<ScalarField>& fs) {
  check_aligned(curve, track);
  if (curve.t.size() < 3) throw std::invalid_argument("continuity residual needs three times");
  double worst = 0.0, scale = 0.0;
  for (const ScalarField& f : fs) {
    for (std::size_t k = 1; k + 1 < curve.t.size(); ++k) {
      const double lhs =
          (mu_integral(f, curve.mu[k + 1]) - mu_integral(f, curve.mu[k - 1])) / (curve.t[k + 1] - curve.t[k - 1]);
      const double rhs = flux(dir, f, track.X[k], curve.mu[k]);
      worst = std::max(worst, std::abs(lhs - rhs));
      scale = std::max(scale, std::abs(rhs));
    }
  }
  Measurement m;
  m.lhs = worst;
  m.rhs = scale;
  m.gap = worst / std::max(scale, 1e-300);
  m.h = dir.space().h;
  m.dt = curve.t[1] - curve.t[0];
  m.extra["mass_defect"] = mass_defect(dir.space(), curve);
  return m;
}

double second_order_rhs(const Connection& con, const TestFunctionBank& bank, const MeasureCurve& curve,
                        const VelocityTrack& track, const ScalarField& f, std::size_t k) {
  check_aligned(curve, track);
  if (k == 0 || k + 1 >= curve.t.size()) throw std::invalid_argument("boundary times are excluded");
  const DiscreteSpace& s = con.space();
  const Dirichlet& dir = con.dirichlet();
  const CellScalar rho = s.vertex_to_cell(curve.mu[k].cwiseQuotient(s.mv));
  const VectorField& x = track.X[k];
  const VectorField dx = (track.X[k + 1] - track.X[k - 1]) / (curve.t[k + 1] - curve.t[k - 1]);
  const Tensor2Field H = weak_hessian(dir, f, bank).H;
  const VectorField df = dir.gradient(f);
  const VectorField nxx = directional_derivative(s, con.apply(x), x);
  const CellScalar integrand = contract(s, H, x, x) + cell_inner(s, df, dx) + cell_inner(s, nxx, df);
  return integrate_cells(s, integrand.cwiseProduct(rho));
}

Measurement second_order_formula(const Connection& con, const TestFunctionBank& bank, const MeasureCurve& curve,
                                 const VelocityTrack& track, const ScalarField& f) {
  check_aligned(curve, track);
  if (curve.t.size() < 3) throw std::invalid_argument("second-order formula needs three times");
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 1; k + 1 < curve.t.size(); ++k) {
    const double dt = 0.5 * (curve.t[k + 1] - curve.t[k - 1]);
    const double d2 = (mu_integral(f, curve.mu[k + 1]) - 2.0 * mu_integral(f, curve.mu[k]) +
                       mu_integral(f, curve.mu[k - 1])) /
                      (dt * dt);
    const double rhs = second_order_rhs(con, bank, curve, track, f, k);
    worst = std::max(worst, std::abs(d2 - rhs));
    scale = std::max(scale, std::abs(rhs));
  }
  Measurement m;
  m.lhs = worst;
  m.rhs = scale;
  m.gap = worst / std::max(scale, 1e-300);
  m.h = con.space().h;
  m.dt = curve.t[1] - curve.t[0];
  return m;
}

Measurement second_order_chart_study(const Connection& con, const TestFunctionBank& bank, const ScalarField& f,
                                     const Eigen::Vector2d& c, double width, const Eigen::Vector2d& v, double t0,
                                     double dt) {
  const DiscreteSpace& s = con.space();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  std::vector<double> d2;
  double rhs = 0.0;
  for (int level = 0; level < 3; ++level) {
    const double step = dt / (1 << level);
    const MeasureCurve curve = translation_curve(s, c, width, v, {t0 - step, t0, t0 + step});
    const VelocityTrack track = constant_track(s, v, 3);
    d2.push_back((mu_integral(f, curve.mu[2]) - 2.0 * mu_integral(f, curve.mu[1]) + mu_integral(f, curve.mu[0])) /
                 (step * step));
    if (level == 0) rhs = second_order_rhs(con, bank, curve, track, f, 1);
  }
  const double extrapolated = d2[2] + (d2[2] - d2[1]) / 3.0;
  const double diff0 = std::abs(d2[0] - d2[1]), diff1 = std::abs(d2[1] - d2[2]);
  Measurement m;
  m.lhs = extrapolated;
  m.rhs = rhs;
  m.gap = std::abs(extrapolated - rhs) / std::max(std::abs(rhs), 1e-300);
  m.h = s.h;
  m.dt = dt;
  m.extra["second_differences"] = d2;
  m.extra["ratio"] = diff0 > 0.0 ? diff1 / diff0 : 0.0;
  return m;
}

// Staggered ADMM. Unknowns U = (rho_1..rho_{N-1} at vertices, m_0..m_{N-1} at
// cells). Centered V = (a_k, b_k) with a_k = B (rho_k + rho_{k+1}) / 2 and b_k = m_k.
// J(V) = sum_k dt sum_c m_c |b|^2 / (2a); the weights cancel in the pointwise prox.
BBResult benamou_brenier(const Dirichlet& dir, const Vec& mu0, const Vec& mu1, const BBOptions& opt) {
  const DiscreteSpace& s = dir.space();
  if (s.nv > 2000) throw std::invalid_argument("dynamic transport limited to 2000 vertices");
  if (mu0.size() != s.nv || mu1.size() != s.nv) throw std::invalid_argument("weights do not match the vertex count");
  if (mu0.minCoeff() < 0.0 || mu1.minCoeff() < 0.0) throw std::invalid_argument("negative weights");
  if (opt.steps < 1) throw std::invalid_argument("steps must be positive");
  std::vector<double> comp0(s.ncomp, 0.0), comp1(s.ncomp, 0.0);
  for (int v = 0; v < s.nv; ++v) {
    comp0[s.component[v]] += mu0[v];
    comp1[s.component[v]] += mu1[v];
  }
  for (int k = 0; k < s.ncomp; ++k)
    if (std::abs(comp0[k] - comp1[k]) > 1e-12) throw SolverError("infeasible: component masses differ");

  const int N = opt.steps, nv = s.nv, nc = s.nc, nvec = s.nvec();
  const double dt = 1.0 / N;
  const Vec rho0 = mu0.cwiseQuotient(s.mv), rho1 = mu1.cwiseQuotient(s.mv);
  const int nrho = (N - 1) * nv, nu = nrho + N * nvec;
  const int na = N * nc, nV = na + N * nvec;
  auto rho_idx = [&](int k) { return (k - 1) * nv; };  // k = 1..N-1
  auto m_idx = [&](int k) { return nrho + k * nvec; };

  // Interpolation I U + i0.
  const SpMat& B = s.avg_vc();
  std::vector<Triplet> it;
  Vec i0 = Vec::Zero(nV);
  for (int k = 0; k < N; ++k) {
    for (int side = 0; side < 2; ++side) {
      const int j = k + side;
      if (j == 0 || j == N) {
        i0.segment(k * nc, nc) += 0.5 * (B * (j == 0 ? rho0 : rho1));
        continue;
      }
      for (int o = 0; o < B.outerSize(); ++o)
        for (SpMat::InnerIterator e(B, o); e; ++e) it.emplace_back(k * nc + e.row(), rho_idx(j) + e.col(), 0.5 * e.value());
    }
    for (int r = 0; r < nvec; ++r) it.emplace_back(na + k * nvec + r, m_idx(k) + r, 1.0);
  }
  SpMat I(nV, nu);
  I.setFromTriplets(it.begin(), it.end());
  Vec wd(nV);
  for (int k = 0; k < N; ++k) {
    wd.segment(k * nc, nc) = dt * s.mc;
    wd.segment(na + k * nvec, nvec) = dt * dir.W();
  }

  // Continuity rows: M(rho_{k+1} - rho_k) - dt D^T W m_k = 0, one vertex per component dropped.
  std::vector<int> keep;
  {
    std::vector<int> last(s.ncomp, -1);
    for (int v = 0; v < nv; ++v) last[s.component[v]] = v;
    std::vector<char> drop(nv, 0);
    for (int v : last)
      if (v >= 0) drop[v] = 1;
    for (int v = 0; v < nv; ++v)
      if (!drop[v]) keep.push_back(v);
  }
  std::vector<int> row_of(nv, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) row_of[keep[i]] = static_cast<int>(i);
  const int nk = static_cast<int>(keep.size()), ncon = N * nk;
  const SpMat DtW = (dir.D().transpose() * dir.W().asDiagonal()).eval();
  std::vector<Triplet> at;
  Vec rc = Vec::Zero(ncon);
  for (int k = 0; k < N; ++k) {
    for (int v = 0; v < nv; ++v) {
      const int row = row_of[v];
      if (row < 0) continue;
      const int r = k * nk + row;
      if (k + 1 < N) at.emplace_back(r, rho_idx(k + 1) + v, s.mv[v]);
      else rc[r] -= s.mv[v] * rho1[v];
      if (k > 0) at.emplace_back(r, rho_idx(k) + v, -s.mv[v]);
      else rc[r] += s.mv[v] * rho0[v];
    }
    for (int o = 0; o < DtW.outerSize(); ++o)
      for (SpMat::InnerIterator e(DtW, o); e; ++e)
        if (row_of[e.row()] >= 0) at.emplace_back(k * nk + row_of[e.row()], m_idx(k) + e.col(), -dt * e.value());
  }
  SpMat A(ncon, nu);
  A.setFromTriplets(at.begin(), at.end());

  const SpMat Q = (SpMat(I.transpose()) * wd.asDiagonal() * I).eval();
  std::vector<Triplet> kt;
  for (int o = 0; o < Q.outerSize(); ++o)
    for (SpMat::InnerIterator e(Q, o); e; ++e) kt.emplace_back(e.row(), e.col(), e.value());
  for (int o = 0; o < A.outerSize(); ++o)
    for (SpMat::InnerIterator e(A, o); e; ++e) {
      kt.emplace_back(nu + e.row(), e.col(), e.value());
      kt.emplace_back(e.col(), nu + e.row(), e.value());
    }
  SpMat KKT(nu + ncon, nu + ncon);
  KKT.setFromTriplets(kt.begin(), kt.end());
  KKT.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(KKT);
  if (lu.info() != Eigen::Success) throw SolverError("transport KKT factorization failed");

  auto wnorm = [&](const Vec& x) { return std::sqrt(x.dot(wd.cwiseProduct(x))); };
  auto project = [&](const Vec& z) {
    Vec rhs(nu + ncon);
    rhs.head(nu) = SpMat(I.transpose()) * wd.cwiseProduct(z - i0);
    rhs.tail(ncon) = rc;
    const Vec sol = lu.solve(rhs);
    return Vec(sol.head(nu));
  };
  auto prox = [&](const Vec& y, double gamma) {
    Vec out = y;
    for (int k = 0; k < N; ++k) {
      for (int c = 0; c < nc; ++c) {
        const int ia = k * nc + c, ib = na + k * nvec + s.voff[c], d = s.dim[c];
        const double abar = y[ia];
        const double q = 0.5 * y.segment(ib, d).squaredNorm();
        auto p = [&](double a) { return (a - abar) * (a + gamma) * (a + gamma) - gamma * q; };
        double a;
        if (q == 0.0) {
          a = std::max(abar, 0.0);
        } else if (abar < 0.0 && p(0.0) >= 0.0) {
          a = 0.0;
        } else {
          a = std::max(abar, 0.0) + q / gamma;  // p(a) >= 0 here; Newton descends monotonically
          for (int iter = 0; iter < 100; ++iter) {
            const double dp = (a + gamma) * (3.0 * a + gamma - 2.0 * abar);
            const double step = p(a) / dp;
            a -= step;
            if (std::abs(step) <= 1e-15 * std::max(a, 1e-300)) break;
          }
        }
        out[ia] = a;
        out.segment(ib, d) = a > 0.0 ? Vec(y.segment(ib, d) * (a / (a + gamma))) : Vec::Zero(d);
      }
    }
    return out;
  };

  Vec U = Vec::Zero(nu);
  for (int k = 1; k < N; ++k) U.segment(rho_idx(k), nv) = (1.0 - k * dt) * rho0 + k * dt * rho1;
  U = project(I * U + i0);
  Vec IU = I * U + i0;
  Vec V = IU, Lam = Vec::Zero(nV);
  double r = 1.0;
  BBResult res;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    U = project(V - Lam);
    IU = I * U + i0;
    const Vec Vold = V;
    V = prox(IU + Lam, 1.0 / r);
    Lam += IU - V;
    const double ref = std::max({wnorm(IU), wnorm(V), 1e-300});
    res.primal_residual = wnorm(IU - V) / ref;
    res.dual_residual = wnorm(V - Vold) / ref;
    res.iterations = iter;
    if (res.primal_residual < opt.tol && res.dual_residual < opt.tol) {
      res.converged = true;
      break;
    }
    if (iter % 50 == 0) {
      if (res.primal_residual > 10.0 * res.dual_residual) {
        r *= 2.0;
        Lam /= 2.0;
      } else if (res.dual_residual > 10.0 * res.primal_residual) {
        r /= 2.0;
        Lam *= 2.0;
      }
    }
  }

  double value = 0.0;
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < nc; ++c) {
      const double a = V[k * nc + c];
      const double b2 = V.segment(na + k * nvec + s.voff[c], s.dim[c]).squaredNorm();
      if (a > 0.0) value += dt * s.mc[c] * b2 / a;
    }
  res.value = value;
  res.continuity_defect = (A * U - rc).norm() / std::max(rc.norm(), 1e-300);

  for (int k = 0; k <= N; ++k) {
    Vec rho = k == 0 ? rho0 : (k == N ? rho1 : Vec(U.segment(rho_idx(k), nv)));
    Vec mu = s.mv.cwiseProduct(rho.cwiseMax(0.0));
    mu /= mu.sum();
    res.curve.t.push_back(k * dt);
    res.curve.mu.push_back(mu);
  }
  // Velocities at integer times from the neighbouring half-time momenta.
  for (int k = 0; k <= N; ++k) {
    VectorField m = VectorField::Zero(nvec);
    int count = 0;
    for (int j : {k - 1, k})
      if (j >= 0 && j < N) {
        m += V.segment(na + j * nvec, nvec);
        ++count;
      }
    m /= count;
    const CellScalar rc_k = s.vertex_to_cell(res.curve.mu[k].cwiseQuotient(s.mv));
    CellScalar inv(nc);
    for (int c = 0; c < nc; ++c) inv[c] = rc_k[c] > 1e-12 * rc_k.maxCoeff() ? 1.0 / rc_k[c] : 0.0;
    res.track.X.push_back(scale_cells(s, inv, m));
  }
  return res;
}

Mat oracle_cost(const DiscreteSpace& s, const std::vector<int>& from, const std::vector<int>& to) {
  Mat C(from.size(), to.size());
  if (s.chart.kind == ChartKind::torus) {
    const double L = s.chart.side;
    for (std::size_t i = 0; i < from.size(); ++i)
      for (std::size_t j = 0; j < to.size(); ++j) {
        const double dx = torus_delta(s.pos[from[i]].x() - s.pos[to[j]].x(), L);
        const double dy = torus_delta(s.pos[from[i]].y() - s.pos[to[j]].y(), L);
        C(i, j) = dx * dx + dy * dy;
      }
    return C;
  }
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS, boost::no_property,
                                      boost::property<boost::edge_weight_t, double>>;
  Graph g(s.nv);
  std::map<std::pair<int, int>, double> len;
  for (int c = 0; c < s.nc; ++c)
    for (int i = 0; i <= s.dim[c]; ++i)
      for (int j = i + 1; j <= s.dim[c]; ++j)
        len[std::minmax(s.cells[c][i], s.cells[c][j])] = (s.local[c].col(i) - s.local[c].col(j)).norm();
  for (const auto& [e, l] : len) boost::add_edge(e.first, e.second, l, g);
  std::vector<double> dist(s.nv);
  for (std::size_t i = 0; i < from.size(); ++i) {
    boost::dijkstra_shortest_paths(g, from[i], boost::distance_map(dist.data()));
    for (std::size_t j = 0; j < to.size(); ++j) C(i, j) = dist[to[j]] * dist[to[j]];
  }
  return C;
}

double transport_lp(const DiscreteSpace& s, const Vec& mu0, const Vec& mu1, long units) {
  if (mu0.size() != s.nv || mu1.size() != s.nv) throw std::invalid_argument("weights do not match the vertex count");
  std::vector<int> from, to;
  std::vector<long> q0, q1;
  for (int v = 0; v < s.nv; ++v) {
    const long a = std::lround(mu0[v] * units), b = std::lround(mu1[v] * units);
    if (a > 0) {
      from.push_back(v);
      q0.push_back(a);
    }
    if (b > 0) {
      to.push_back(v);
      q1.push_back(b);
    }
  }
  if (from.empty() || to.empty()) throw std::invalid_argument("empty support");
  // Balance the rounding on the larger atom of the heavier side.
  long s0 = 0, s1 = 0;
  for (long a : q0) s0 += a;
  for (long b : q1) s1 += b;
  if (s0 > s1) *std::max_element(q0.begin(), q0.end()) -= s0 - s1;
  if (s1 > s0) *std::max_element(q1.begin(), q1.end()) -= s1 - s0;
  const Mat C = oracle_cost(s, from, to);

  using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
  using Graph = boost::adjacency_list<
      boost::vecS, boost::vecS, boost::directedS, boost::no_property,
      boost::property<boost::edge_capacity_t, long,
                      boost::property<boost::edge_residual_capacity_t, long,
                                      boost::property<boost::edge_reverse_t, Traits::edge_descriptor,
                                                      boost::property<boost::edge_weight_t, long>>>>>;
  // Integer costs: reduced costs in floating point can round below zero and
  // trip the nonnegativity check.
  const double cost_scale = 1e8 / std::max(C.maxCoeff(), 1e-300);
  const int n0 = static_cast<int>(from.size()), n1 = static_cast<int>(to.size());
  const int src = n0 + n1, sink = src + 1;
  Graph g(n0 + n1 + 2);
  auto cap = boost::get(boost::edge_capacity, g);
  auto rev = boost::get(boost::edge_reverse, g);
  auto wt = boost::get(boost::edge_weight, g);
  auto link = [&](int u, int v, long c, long w) {
    const auto e = boost::add_edge(u, v, g).first;
    const auto r = boost::add_edge(v, u, g).first;
    cap[e] = c;
    cap[r] = 0;
    wt[e] = w;
    wt[r] = -w;
    rev[e] = r;
    rev[r] = e;
  };
  for (int i = 0; i < n0; ++i) link(src, i, q0[i], 0);
  for (int j = 0; j < n1; ++j) link(n0 + j, sink, q1[j], 0);
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) link(i, n0 + j, q0[i], std::lround(C(i, j) * cost_scale));
  boost::successive_shortest_path_nonnegative_weights(g, src, sink);
  const long flow_cost = boost::find_flow_cost(g);
  return static_cast<double>(flow_cost) / cost_scale / static_cast<double>(units);
}

}  // namespace mmc
