#include "mmc/dirichlet.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mmc {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Eigen::Vector3d centroid(const DiscreteSpace& s) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : s.pos) c += p;
  return c / s.nv;
}

double diameter_estimate(const DiscreteSpace& s) {
  Eigen::Vector3d lo = s.pos[0], hi = s.pos[0];
  for (const auto& p : s.pos) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return std::max((hi - lo).norm(), 1e-12);
}

}  // namespace

std::vector<ScalarField> coordinate_lifts(const DiscreteSpace& s, std::vector<std::string>* labels) {
  std::vector<ScalarField> out;
  auto push = [&](const std::string& name, auto fn) {
    ScalarField f(s.nv);
    for (int v = 0; v < s.nv; ++v) f[v] = fn(s.pos[v]);
    out.push_back(f);
    if (labels) labels->push_back(name);
  };
  if (s.chart.kind == ChartKind::torus) {
    const double k = two_pi / s.chart.side;
    const double a = 1.0 / k;
    push("lift:sin_x", [k, a](const Eigen::Vector3d& p) { return a * std::sin(k * p[0]); });
    push("lift:cos_x", [k, a](const Eigen::Vector3d& p) { return a * std::cos(k * p[0]); });
    push("lift:sin_y", [k, a](const Eigen::Vector3d& p) { return a * std::sin(k * p[1]); });
    push("lift:cos_y", [k, a](const Eigen::Vector3d& p) { return a * std::cos(k * p[1]); });
    return out;
  }
  const Eigen::Vector3d c = s.chart.kind == ChartKind::sphere ? Eigen::Vector3d::Zero() : centroid(s);
  const char* names[3] = {"lift:x", "lift:y", "lift:z"};
  for (int i = 0; i < 3; ++i) {
    double lo = s.pos[0][i], hi = s.pos[0][i];
    for (const auto& p : s.pos) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    if (hi - lo <= 1e-12 * diameter_estimate(s)) continue;
    push(names[i], [i, c](const Eigen::Vector3d& p) { return p[i] - c[i]; });
  }
  return out;
}

TestFunctionBank test_functions(const Dirichlet& dir, int nf, unsigned long long seed, double tau, int nfields) {
  if (nf < 1) throw std::invalid_argument("bank needs at least one function");
  if (tau < 0.0) throw std::invalid_argument("negative smoothing time");
  const DiscreteSpace& s = dir.space();
  TestFunctionBank bank;
  bank.seed = seed;
  bank.tau = tau;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<ScalarField> raw;
  if (s.chart.kind == ChartKind::torus) {
    const int modes[6][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 0}, {0, 2}};
    const double k0 = two_pi / s.chart.side;
    for (int j = 0; j < nf; ++j) {
      double a[6], b[6];
      for (int m = 0; m < 6; ++m) {
        a[m] = gauss(rng) / std::sqrt(12.0);
        b[m] = gauss(rng) / std::sqrt(12.0);
      }
      ScalarField f(s.nv);
      for (int v = 0; v < s.nv; ++v) {
        double acc = 0.0;
        for (int m = 0; m < 6; ++m) {
          const double ph = k0 * (modes[m][0] * s.pos[v][0] + modes[m][1] * s.pos[v][1]);
          acc += a[m] * std::cos(ph) + b[m] * std::sin(ph);
        }
        f[v] = acc / k0;
      }
      raw.push_back(f);
      bank.labels.push_back("fourier:" + std::to_string(j));
    }
  } else if (s.chart.kind == ChartKind::sphere) {
    std::vector<std::array<int, 3>> monos;
    for (int i = 0; i <= 3; ++i)
      for (int j = 0; i + j <= 3; ++j)
        for (int k = 0; i + j + k <= 3; ++k)
          if (i + j + k > 0) monos.push_back({i, j, k});
    const double r = s.chart.radius;
    for (int n = 0; n < nf; ++n) {
      std::vector<double> coef(monos.size());
      for (auto& x : coef) x = gauss(rng) / std::sqrt(static_cast<double>(monos.size()));
      ScalarField f(s.nv);
      for (int v = 0; v < s.nv; ++v) {
        const Eigen::Vector3d p = s.pos[v] / r;
        double acc = 0.0;
        for (std::size_t m = 0; m < monos.size(); ++m)
          acc += coef[m] * std::pow(p[0], monos[m][0]) * std::pow(p[1], monos[m][1]) * std::pow(p[2], monos[m][2]);
        f[v] = r * acc;
      }
      raw.push_back(f);
      bank.labels.push_back("poly:" + std::to_string(n));
    }
  } else {
    const double diam = diameter_estimate(s);
    const Eigen::Vector3d c = centroid(s);
    for (int n = 0; n < nf; ++n) {
      Eigen::Vector3d om[3];
      double amp[3], ph[3];
      for (int j = 0; j < 3; ++j) {
        Eigen::Vector3d dir3(gauss(rng), gauss(rng), gauss(rng));
        dir3.normalize();
        om[j] = dir3 * (0.5 + 1.5 * unif(rng)) * two_pi / diam;
        amp[j] = gauss(rng) / std::sqrt(3.0);
        ph[j] = two_pi * unif(rng);
      }
      ScalarField f(s.nv);
      for (int v = 0; v < s.nv; ++v) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += amp[j] * std::sin(om[j].dot(s.pos[v] - c) + ph[j]);
        f[v] = acc * diam / two_pi;
      }
      raw.push_back(f);
      bank.labels.push_back("wave:" + std::to_string(n));
    }
  }
  std::vector<std::string> lift_labels;
  for (auto& f : coordinate_lifts(s, &lift_labels)) raw.push_back(f);
  bank.labels.insert(bank.labels.end(), lift_labels.begin(), lift_labels.end());

  if (tau == 0.0) bank.warnings.push_back("tau = 0: bank holds raw unsmoothed fields");
  for (auto& f : raw) {
    ScalarField g = tau > 0.0 ? dir.heat_flow(f, tau, std::min(0.01, tau)) : f;
    bank.grad_sup.push_back(cell_norm(s, dir.gradient(g)).maxCoeff());
    bank.f.push_back(std::move(g));
  }

  const int nb = static_cast<int>(bank.f.size());
  std::uniform_int_distribution<int> pick(0, nb - 1);
  for (int j = 0; j < nfields; ++j) {
    std::vector<std::pair<int, int>> terms = {{pick(rng), pick(rng)}, {pick(rng), pick(rng)}};
    VectorField x = VectorField::Zero(s.nvec());
    for (auto [g, f] : terms) x += scale_cells(s, s.vertex_to_cell(bank.f[g]), dir.gradient(bank.f[f]));
    bank.fields.push_back(x);
    bank.field_terms.push_back(terms);
  }

  if (s.chart.kind == ChartKind::torus) {
    bank.frame_parallel = true;
    const Eigen::Vector3d dirs[3] = {{1, 0, 0}, {0, 1, 0}, Eigen::Vector3d(1, 1, 0) / std::sqrt(2.0)};
    for (const auto& e : dirs) {
      VectorField z(s.nvec());
      for (int c = 0; c < s.nc; ++c) z.segment(s.voff[c], s.dim[c]) = s.frame[c].transpose() * e;
      bank.frame.push_back(z);
    }
  } else {
    for (int i = 0; i < 3; ++i) {
      ScalarField x(s.nv);
      for (int v = 0; v < s.nv; ++v) x[v] = s.pos[v][i];
      const VectorField z = dir.gradient(x);
      if (z.norm() > 1e-12 * std::sqrt(static_cast<double>(s.nvec()))) bank.frame.push_back(z);
    }
  }
  return bank;
}

}  // namespace mmc
