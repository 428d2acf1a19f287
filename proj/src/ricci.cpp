#include "mmc/ricci.hpp"

#include <cmath>
#include <queue>

namespace mmc {

namespace {

// Vertex weights of a per-cell density: sum over incident cells of m_c phi_c / (dim + 1).
Vec cell_density_to_weights(const DiscreteSpace& s, const CellScalar& phi) {
  return s.mv.cwiseProduct(s.cell_to_vertex(phi));
}

double max_abs_over_mass(const DiscreteSpace& s, const Vec& w) { return w.cwiseQuotient(s.mv).cwiseAbs().maxCoeff(); }

// Hodge pairing density <X, (D_H Y^flat)^sharp> per cell.
CellScalar hodge_density(const Complex& cx, const VectorField& x, const VectorField& y) {
  return cell_inner(cx.space(), x, cx.sharp(cx.hodge_laplacian(1, cx.flat(y))));
}

// int <dX, dY> + dX dY in the complex's inner products.
double hodge_pairing(const Complex& cx, const VectorField& x, const VectorField& y) {
  return cx.flat(x).dot(cx.stiffness(1) * cx.flat(y));
}

double cov_pairing(const Connection& con, const VectorField& x, const VectorField& y) {
  const DiscreteSpace& s = con.space();
  return integrate_cells(s, cell_hs_inner(s, con.apply(x), con.apply(y)));
}

ScalarField mollify(const Dirichlet& dir, const ScalarField& density, double tau) {
  if (tau < 0.0) throw std::invalid_argument("negative mollification time");
  return tau > 0.0 ? dir.heat_flow(density, tau, std::min(0.01, tau)) : density;
}

// Ric(X,X) - K|X|^2 m as a density, and the HS density for scaling, both mollified.
struct Defect {
  ScalarField density, hs;
  Vec lap;
};

Defect bochner_defect(const Complex& cx, const Connection& con, const VectorField& x, double K, double tau) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = con.dirichlet();
  const RicciMeasure r = ricci_measure(cx, con, x, x);
  Defect d;
  d.density = mollify(dir, r.density - K * s.cell_to_vertex(cell_inner(s, x, x)), tau);
  d.hs = mollify(dir, (-r.hs_part).cwiseQuotient(s.mv), tau);
  d.lap = r.laplacian_part;
  return d;
}

Measurement defect_measurement(const DiscreteSpace& s, const Defect& d, const Defect& raw) {
  const double scale = std::max(d.hs.cwiseAbs().maxCoeff(), 1e-300);
  const double raw_scale = std::max(raw.hs.cwiseAbs().maxCoeff(), 1e-300);
  Measurement m;
  m.lhs = d.density.minCoeff();
  m.rhs = 0.0;
  m.gap = std::max(0.0, -d.density.minCoeff()) / scale;
  m.h = s.h;
  m.extra["two_sided"] = d.density.cwiseAbs().maxCoeff() / scale;
  m.extra["raw"] = {{"one_sided", std::max(0.0, -raw.density.minCoeff()) / raw_scale},
                    {"two_sided", raw.density.cwiseAbs().maxCoeff() / raw_scale}};
  m.extra["scale"] = scale;
  return m;
}

}  // namespace

double RicciMeasure::scale() const {
  return laplacian_part.cwiseAbs().sum() + hodge_part.cwiseAbs().sum() + hs_part.cwiseAbs().sum();
}

RicciMeasure ricci_measure(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = con.dirichlet();
  RicciMeasure r;
  r.K = s.kappa;
  r.laplacian_part = -0.5 * (dir.S() * s.cell_to_vertex(cell_inner(s, x, y)));
  r.hodge_part = cell_density_to_weights(s, 0.5 * (hodge_density(cx, x, y) + hodge_density(cx, y, x)));
  r.hs_part = -cell_density_to_weights(s, cell_hs_inner(s, con.apply(x), con.apply(y)));
  r.mu.w = r.laplacian_part + r.hodge_part + r.hs_part;
  r.density = r.mu.w.cwiseQuotient(s.mv);
  return r;
}

Measurement bochner_check(const Complex& cx, const Connection& con, const VectorField& x, double K, double tau) {
  const Defect raw = bochner_defect(cx, con, x, K, 0.0);
  const Defect d = tau > 0.0 ? bochner_defect(cx, con, x, K, tau) : raw;
  Measurement m = defect_measurement(cx.space(), d, raw);
  m.extra["laplacian_mass"] = std::abs(d.lap.sum()) / std::max(d.lap.cwiseAbs().sum(), 1e-300);
  m.extra["tau"] = tau;
  return m;
}

Measurement ricci_lower_bound(const Complex& cx, const Connection& con, const VectorField& x, double K,
                              double tau) {
  const DiscreteSpace& s = cx.space();
  const Defect raw = bochner_defect(cx, con, x, K, 0.0);
  const Defect d = tau > 0.0 ? bochner_defect(cx, con, x, K, tau) : raw;
  Measurement m = defect_measurement(s, d, raw);
  const RicciMeasure r = ricci_measure(cx, con, x, x);
  m.lhs = mollify(con.dirichlet(), r.density, tau).minCoeff();
  m.rhs = K * s.cell_to_vertex(cell_inner(s, x, x)).minCoeff();
  m.extra["tau"] = tau;
  return m;
}

Measurement ricci_total_mass(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y) {
  const RicciMeasure r = ricci_measure(cx, con, x, y);
  const double hp = hodge_pairing(cx, x, y), cp = cov_pairing(con, x, y);
  Measurement m;
  m.lhs = r.mu.total();
  m.rhs = hp - cp;
  m.gap = std::abs(m.lhs - m.rhs) / std::max({std::abs(hp), std::abs(cp), 1e-300});
  m.h = cx.space().h;
  return m;
}

Measurement ricci_tv_bound(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y,
                           double K) {
  const DiscreteSpace& s = cx.space();
  const double km = std::max(0.0, -K);
  auto factor = [&](const VectorField& z) {
    return std::sqrt(cx.hodge_energy(cx.flat(z)) + km * integrate_cells(s, cell_inner(s, z, z)));
  };
  const RicciMeasure r = ricci_measure(cx, con, x, y);
  Measurement m;
  m.lhs = r.mu.tv();
  m.rhs = 2.0 * factor(x) * factor(y);
  m.gap = std::max(0.0, m.lhs - m.rhs) / std::max(m.rhs, 1e-300);
  m.h = s.h;
  m.extra["margin"] = m.rhs > 0.0 ? 1.0 - m.lhs / m.rhs : 0.0;
  return m;
}

Measurement ricci_representation(const Complex& cx, const Connection& con, const TestFunctionBank& bank,
                                 const VectorField& x, const VectorField& y, const ScalarField& f) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = con.dirichlet();
  const RicciMeasure r = ricci_measure(cx, con, x, y);
  const double by_definition = f.dot(r.mu.w);

  const CellScalar fc = s.vertex_to_cell(f);
  auto moved = [&](const VectorField& a, const VectorField& b) {
    const VectorField fb = scale_cells(s, fc, b);
    return hodge_pairing(cx, a, fb) - cov_pairing(con, a, fb);
  };
  const double alt = 0.5 * (moved(x, y) + moved(y, x));

  const Tensor2Field H = weak_hessian(dir, f, bank).H;
  const VectorField df = dir.gradient(f);
  const CellScalar divx = s.vertex_to_cell(dir.divergence(x)), divy = s.vertex_to_cell(dir.divergence(y));
  const Vec fx = cx.flat(x), fy = cx.flat(y);
  const CellScalar curlx = cx.density2(cx.exterior_derivative(1, fx));
  const CellScalar curly = cx.density2(cx.exterior_derivative(1, fy));
  const Vec dlx = cx.codifferential(1, fx), dly = cx.codifferential(1, fy);
  double symmetric = integrate_cells(s, contract(s, H, x, y));
  symmetric += integrate_cells(s, cell_inner(s, df, x).cwiseProduct(divy) + cell_inner(s, df, y).cwiseProduct(divx));
  symmetric += integrate_cells(s, fc.cwiseProduct(curlx).cwiseProduct(curly));
  symmetric += integrate(s, f.cwiseProduct(dlx).cwiseProduct(dly));
  symmetric -= integrate_cells(s, fc.cwiseProduct(cell_hs_inner(s, con.apply(x), con.apply(y))));

  const double scale = std::max(f.cwiseAbs().maxCoeff() * r.scale(), 1e-300);
  Measurement m;
  m.lhs = by_definition;
  m.rhs = symmetric;
  m.gap = std::max({std::abs(by_definition - alt), std::abs(by_definition - symmetric), std::abs(alt - symmetric)}) /
          scale;
  m.h = s.h;
  m.extra["moved"] = alt;
  m.extra["moved_vs_definition"] = std::abs(by_definition - alt) / scale;
  m.extra["symmetric_vs_definition"] = std::abs(by_definition - symmetric) / scale;
  return m;
}

Measurement ricci_tensor_property(const Complex& cx, const Connection& con, const ScalarField& f,
                                  const VectorField& x, const VectorField& y) {
  const DiscreteSpace& s = cx.space();
  const VectorField fx = scale_cells(s, s.vertex_to_cell(f), x);
  const RicciMeasure a = ricci_measure(cx, con, fx, y);
  const RicciMeasure b = ricci_measure(cx, con, x, y);
  const Vec diff = a.mu.w - f.cwiseProduct(b.mu.w);
  Measurement m;
  m.lhs = a.mu.tv();
  m.rhs = f.cwiseProduct(b.mu.w).cwiseAbs().sum();
  m.gap = diff.cwiseAbs().sum() / std::max(f.cwiseAbs().maxCoeff() * b.scale(), 1e-300);
  m.h = s.h;
  return m;
}

Measurement ricci_gradient_oracle(const Complex& cx, const Connection& con, const ScalarField& f, double K,
                                  double tau) {
  const DiscreteSpace& s = cx.space();
  const Dirichlet& dir = con.dirichlet();
  const VectorField x = dir.gradient(f);
  const RicciMeasure r = ricci_measure(cx, con, x, x);
  const ScalarField expected = K * s.cell_to_vertex(cell_inner(s, x, x));
  const ScalarField got = mollify(dir, r.density, tau), want = mollify(dir, expected, tau);
  Measurement m;
  m.lhs = integrate(s, got);
  m.rhs = integrate(s, want);
  m.gap = lp_norm(s, got - want, 1.0) / std::max(lp_norm(s, want, 1.0), 1e-300);
  m.h = s.h;
  m.extra["raw"] = lp_norm(s, r.density - expected, 1.0) / std::max(lp_norm(s, expected, 1.0), 1e-300);
  m.extra["tau"] = tau;
  return m;
}

Measurement ricci_locality(const Complex& cx, const Connection& con, const VectorField& x1, const VectorField& x2,
                           const std::vector<char>& region, int rings) {
  const DiscreteSpace& s = cx.space();
  bool any = false;
  for (char c : region) any = any || c;
  if (!any) throw std::invalid_argument("empty region");
  const std::vector<char> inner = interior_cells(s, region, rings);
  std::vector<char> vin(s.nv, 1);
  for (int c = 0; c < s.nc; ++c)
    if (!inner[c])
      for (int k = 0; k <= s.dim[c]; ++k) vin[s.cells[c][k]] = 0;
  const RicciMeasure a = ricci_measure(cx, con, x1, x1);
  const RicciMeasure b = ricci_measure(cx, con, x2, x2);
  double diff = 0.0;
  int count = 0;
  for (int v = 0; v < s.nv; ++v) {
    if (!vin[v]) continue;
    ++count;
    diff = std::max(diff, std::abs(a.density[v] - b.density[v]));
  }
  const double ref = std::max(max_abs_over_mass(s, a.hs_part), 1e-300);
  Measurement m;
  m.lhs = diff;
  m.rhs = ref;
  m.gap = diff / ref;
  m.h = s.h;
  m.extra["interior_vertices"] = count;
  return m;
}

Measurement cone_diagnostic(const Complex& cx, const Connection& con, const VectorField& x, int rings) {
  const DiscreteSpace& s = cx.space();
  if (s.chart.kind != ChartKind::cone) throw std::invalid_argument("cone diagnostic needs a cone");
  // Breadth-first hop distance from the apex (vertex 0) and from rim vertices.
  std::vector<std::vector<int>> adj(s.nv);
  std::map<std::pair<int, int>, int> edge_faces;
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    for (int i = 0; i <= d; ++i)
      for (int j = i + 1; j <= d; ++j) {
        const int a = s.cells[c][i], b = s.cells[c][j];
        adj[a].push_back(b);
        adj[b].push_back(a);
        ++edge_faces[std::minmax(a, b)];
      }
  }
  std::vector<int> hop(s.nv, -1);
  std::queue<int> q;
  auto seed = [&](int v) {
    if (hop[v] < 0) {
      hop[v] = 0;
      q.push(v);
    }
  };
  seed(0);
  for (const auto& [e, n] : edge_faces)
    if (n == 1) {
      seed(e.first);
      seed(e.second);
    }
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[v])
      if (hop[w] < 0) {
        hop[w] = hop[v] + 1;
        q.push(w);
      }
  }
  const RicciMeasure r = ricci_measure(cx, con, x, x);
  double tv = 0.0, apex = 0.0;
  int count = 0;
  for (int v = 0; v < s.nv; ++v) {
    if (hop[v] > rings) {
      tv += std::abs(r.mu.w[v]);
      ++count;
    }
  }
  apex = r.mu.w[0];
  Measurement m;
  m.lhs = tv;
  m.rhs = 0.0;
  m.gap = tv / std::max(r.scale(), 1e-300);
  m.h = s.h;
  m.extra["kept_vertices"] = count;
  m.extra["apex_weight"] = apex;
  m.extra["total"] = r.mu.total();
  return m;
}

double energy_difference(const Complex& cx, const Connection& con, const VectorField& x) {
  return cx.hodge_energy(cx.flat(x)) - con.energy(x);
}

Measurement ricci_bilinearity(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y,
                              const VectorField& z, double a, double b) {
  const RicciMeasure lhs = ricci_measure(cx, con, a * x + b * y, z);
  const RicciMeasure rx = ricci_measure(cx, con, x, z), ry = ricci_measure(cx, con, y, z);
  Measurement m;
  m.lhs = lhs.mu.tv();
  m.rhs = (a * rx.mu.w + b * ry.mu.w).cwiseAbs().sum();
  m.gap = (lhs.mu.w - a * rx.mu.w - b * ry.mu.w).cwiseAbs().sum() /
          std::max(std::abs(a) * rx.scale() + std::abs(b) * ry.scale(), 1e-300);
  m.h = cx.space().h;
  return m;
}

Measurement ricci_symmetry(const Complex& cx, const Connection& con, const VectorField& x, const VectorField& y) {
  const RicciMeasure a = ricci_measure(cx, con, x, y), b = ricci_measure(cx, con, y, x);
  Measurement m;
  m.lhs = a.mu.tv();
  m.rhs = b.mu.tv();
  m.gap = (a.mu.w - b.mu.w).cwiseAbs().sum() / std::max(a.scale(), 1e-300);
  m.h = cx.space().h;
  return m;
}

}  // namespace mmc
