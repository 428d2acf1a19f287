#include "mmc/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>

namespace mmc {

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

int DiscreteSpace::max_dim() const {
  int d = 0;
  for (int x : dim) d = std::max(d, x);
  return d;
}

CellScalar DiscreteSpace::vertex_to_cell(const ScalarField& f) const { return B_ * f; }

ScalarField DiscreteSpace::cell_to_vertex(const CellScalar& phi) const { return A_ * phi; }

void DiscreteSpace::finalize(const std::vector<double>& cell_weight) {
  nc = static_cast<int>(cells.size());
  frame.assign(nc, Mat());
  gram.assign(nc, Mat());
  area.resize(nc);
  mc.resize(nc);
  voff.assign(nc + 1, 0);
  toff.assign(nc + 1, 0);
  h = 0.0;
  for (int c = 0; c < nc; ++c) {
    const int d = dim[c];
    if (d < 1 || d > 2) throw SpaceError("cell dimension must be 1 or 2");
    const Eigen::Matrix3d& P = local[c];
    Mat F(3, d);
    const Eigen::Vector3d e1 = P.col(1) - P.col(0);
    if (e1.norm() <= 0.0) throw SpaceError("degenerate cell " + std::to_string(c));
    F.col(0) = e1.normalized();
    double vol = e1.norm();
    h = std::max(h, e1.norm());
    if (d == 2) {
      const Eigen::Vector3d e2 = P.col(2) - P.col(0);
      const Eigen::Vector3d n = e1.cross(e2);
      vol = 0.5 * n.norm();
      if (!(vol > 0.0)) throw SpaceError("degenerate cell " + std::to_string(c));
      const Eigen::Vector3d u = e2 - F.col(0).dot(e2) * F.col(0);
      F.col(1) = u.normalized();
      h = std::max({h, e2.norm(), (P.col(2) - P.col(1)).norm()});
    }
    frame[c] = F;
    gram[c] = Mat::Identity(d, d);
    area[c] = vol;
    const double w = cell_weight.empty() ? 1.0 : cell_weight[c];
    if (!(w > 0.0)) throw SpaceError("non-positive cell weight");
    mc[c] = vol * w;
    voff[c + 1] = voff[c] + d;
    toff[c + 1] = toff[c] + d * d;
  }

  mv = Vec::Zero(nv);
  std::vector<int> parent(nv);
  for (int i = 0; i < nv; ++i) parent[i] = i;
  for (int c = 0; c < nc; ++c) {
    const int d = dim[c];
    for (int k = 0; k <= d; ++k) mv[cells[c][k]] += mc[c] / (d + 1);
    for (int k = 1; k <= d; ++k) {
      const int a = find_root(parent, cells[c][0]);
      const int b = find_root(parent, cells[c][k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  component.assign(nv, -1);
  ncomp = 0;
  std::vector<int> label(nv, -1);
  for (int i = 0; i < nv; ++i) {
    const int r = find_root(parent, i);
    if (label[r] < 0) label[r] = ncomp++;
    component[i] = label[r];
  }

  std::vector<Triplet> ta;
  std::vector<Triplet> tb;
  for (int c = 0; c < nc; ++c) {
    const int d = dim[c];
    for (int k = 0; k <= d; ++k) {
      const int v = cells[c][k];
      ta.emplace_back(v, c, mc[c] / (d + 1) / mv[v]);
      tb.emplace_back(c, v, 1.0 / (d + 1));
    }
  }
  A_.resize(nv, nc);
  A_.setFromTriplets(ta.begin(), ta.end());
  B_.resize(nc, nv);
  B_.setFromTriplets(tb.begin(), tb.end());
  if (chart_tags.size() != static_cast<std::size_t>(nc)) chart_tags.assign(nc, chart.kind);
  validate();
}

void DiscreteSpace::validate() const {
  for (int v = 0; v < nv; ++v)
    if (!(mv[v] > 0.0)) throw SpaceError("vertex " + std::to_string(v) + " has no positive mass");
  for (int c = 0; c < nc; ++c) {
    if (!(mc[c] > 0.0)) throw SpaceError("cell " + std::to_string(c) + " has no positive mass");
    Eigen::SelfAdjointEigenSolver<Mat> es(gram[c]);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw SpaceError("metric not positive definite");
  }
  const double a = mc.sum();
  const double b = mv.sum();
  if (std::abs(a - b) > 1e-12 * std::abs(a)) throw SpaceError("mass inconsistency");
  std::vector<int> cdim(ncomp, 0);
  for (int c = 0; c < nc; ++c) {
    int& slot = cdim[component[cells[c][0]]];
    if (slot == 0) slot = dim[c];
    if (slot != dim[c]) throw SpaceError("cell dimension varies inside a component");
  }
}

std::uint64_t DiscreteSpace::hash() const {
  std::uint64_t hv = 1469598103934665603ULL;
  hv = fnv_bytes(hv, &nv, sizeof nv);
  hv = fnv_bytes(hv, &nc, sizeof nc);
  for (int c = 0; c < nc; ++c) {
    hv = fnv_bytes(hv, cells[c].data(), sizeof(int) * 3);
    hv = fnv_bytes(hv, local[c].data(), sizeof(double) * 9);
  }
  hv = fnv_bytes(hv, mc.data(), sizeof(double) * mc.size());
  hv = fnv_bytes(hv, mv.data(), sizeof(double) * mv.size());
  return hv;
}

std::string DiscreteSpace::hash_hex() const {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << hash();
  return os.str();
}

// ---------------------------------------------------------------- generators

DiscreteSpace flat_torus(int n, double side) {
  if (n < 3) throw SpaceError("flat_torus needs n >= 3");
  if (!(side > 0.0)) throw SpaceError("flat_torus needs side > 0");
  DiscreteSpace s;
  const double h = side / n;
  s.nv = n * n;
  auto id = [n](int i, int j) { return ((i % n + n) % n) + n * ((j % n + n) % n); };
  s.pos.resize(s.nv);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) s.pos[id(i, j)] = Eigen::Vector3d(i * h, j * h, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d p00(i * h, j * h, 0), p10((i + 1) * h, j * h, 0),
          p11((i + 1) * h, (j + 1) * h, 0), p01(i * h, (j + 1) * h, 0);
      Eigen::Matrix3d L;
      L << p00, p10, p11;
      s.cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      s.local.push_back(L);
      L << p00, p11, p01;
      s.cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      s.local.push_back(L);
    }
  }
  s.dim.assign(s.cells.size(), 2);
  s.chart = {ChartKind::torus, side, 0.0, 0.0};
  s.kappa = 0.0;
  s.finalize({});
  return s;
}

DiscreteSpace icosphere(int subdiv, double radius) {
  if (subdiv < 0 || subdiv > 7) throw SpaceError("icosphere subdiv must be in [0,7]");
  if (!(radius > 0.0)) throw SpaceError("icosphere needs radius > 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> V = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                                    {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                                    {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> F = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : V) v.normalize();
  for (int level = 0; level < subdiv; ++level) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      V.push_back((V[a] + V[b]).normalized());
      const int id = static_cast<int>(V.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> G;
    G.reserve(F.size() * 4);
    for (const auto& f : F) {
      const int a = midpoint(f[0], f[1]);
      const int b = midpoint(f[1], f[2]);
      const int c = midpoint(f[2], f[0]);
      G.push_back({f[0], a, c});
      G.push_back({f[1], b, a});
      G.push_back({f[2], c, b});
      G.push_back({a, b, c});
    }
    F.swap(G);
  }
  TriMesh m;
  for (auto& v : V) m.vertices.push_back(radius * v);
  m.faces = F;
  DiscreteSpace s = from_trimesh(m);
  s.chart = {ChartKind::sphere, 0.0, radius, 0.0};
  s.chart_tags.assign(s.nc, ChartKind::sphere);
  s.kappa = 1.0 / (radius * radius);
  return s;
}

DiscreteSpace cone(double angle, int n) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (!(angle > 0.0) || angle > two_pi + 1e-12) throw SpaceError("cone angle must be in (0, 2pi]");
  if (n < 2) throw SpaceError("cone needs n >= 2");
  const double r = angle / two_pi;
  const double height = std::sqrt(std::max(0.0, 1.0 - r * r));
  const int sectors = 6 * n;
  TriMesh m;
  m.vertices.emplace_back(0.0, 0.0, 0.0);
  for (int k = 1; k <= n; ++k) {
    const double rho = static_cast<double>(k) / n;
    for (int j = 0; j < sectors; ++j) {
      const double th = two_pi * j / sectors;
      m.vertices.emplace_back(rho * r * std::cos(th), rho * r * std::sin(th), -rho * height);
    }
  }
  auto ring = [sectors](int k, int j) { return 1 + (k - 1) * sectors + (j % sectors); };
  for (int j = 0; j < sectors; ++j) m.faces.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int k = 1; k < n; ++k) {
    for (int j = 0; j < sectors; ++j) {
      m.faces.push_back({ring(k, j), ring(k + 1, j), ring(k + 1, j + 1)});
      m.faces.push_back({ring(k, j), ring(k + 1, j + 1), ring(k, j + 1)});
    }
  }
  DiscreteSpace s = from_trimesh(m);
  s.chart = {ChartKind::cone, 0.0, 1.0, angle};
  s.chart_tags.assign(s.nc, ChartKind::cone);
  s.kappa = 0.0;
  return s;
}

DiscreteSpace weighted_grid(int n, double k, double side) {
  if (n < 2) throw SpaceError("weighted_grid needs n >= 2");
  if (!(side > 0.0)) throw SpaceError("weighted_grid needs side > 0");
  DiscreteSpace s;
  const double h = side / n;
  const double x0 = -0.5 * side;
  s.nv = (n + 1) * (n + 1);
  auto id = [n](int i, int j) { return i + (n + 1) * j; };
  s.pos.resize(s.nv);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) s.pos[id(i, j)] = Eigen::Vector3d(x0 + i * h, x0 + j * h, 0.0);
  std::vector<double> weight;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      for (const auto& tri : {std::array<int, 3>{a, b, c}, std::array<int, 3>{a, c, d}}) {
        Eigen::Matrix3d L;
        L << s.pos[tri[0]], s.pos[tri[1]], s.pos[tri[2]];
        const Eigen::Vector3d g = L.rowwise().mean();
        weight.push_back(std::exp(-0.5 * k * g.head<2>().squaredNorm()));
        s.cells.push_back(tri);
        s.local.push_back(L);
      }
    }
  }
  s.dim.assign(s.cells.size(), 2);
  s.chart = {ChartKind::plane, side, 0.0, 0.0};
  s.kappa = k;
  s.finalize(weight);
  return s;
}

DiscreteSpace interval_graph(int n, double length) {
  if (n < 1) throw SpaceError("interval needs n >= 1");
  if (!(length > 0.0)) throw SpaceError("interval needs length > 0");
  DiscreteSpace s;
  s.nv = n + 1;
  for (int i = 0; i <= n; ++i) s.pos.emplace_back(length * i / n, 0.0, 0.0);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix3d L = Eigen::Matrix3d::Zero();
    L.col(0) = s.pos[i];
    L.col(1) = s.pos[i + 1];
    s.cells.push_back({i, i + 1, -1});
    s.local.push_back(L);
  }
  s.dim.assign(n, 1);
  s.chart = {ChartKind::graph, length, 0.0, 0.0};
  s.kappa = 0.0;
  s.finalize({});
  return s;
}

DiscreteSpace disjoint_union(const DiscreteSpace& a, const DiscreteSpace& b) {
  DiscreteSpace s;
  s.nv = a.nv + b.nv;
  s.pos = a.pos;
  s.pos.insert(s.pos.end(), b.pos.begin(), b.pos.end());
  s.cells = a.cells;
  for (auto c : b.cells) {
    for (int& v : c)
      if (v >= 0) v += a.nv;
    s.cells.push_back(c);
  }
  s.local = a.local;
  s.local.insert(s.local.end(), b.local.begin(), b.local.end());
  s.dim = a.dim;
  s.dim.insert(s.dim.end(), b.dim.begin(), b.dim.end());
  s.chart_tags = a.chart_tags;
  s.chart_tags.insert(s.chart_tags.end(), b.chart_tags.begin(), b.chart_tags.end());
  s.chart = a.chart.kind == b.chart.kind ? a.chart : ChartInfo{};
  s.kappa = std::min(a.kappa, b.kappa);
  std::vector<double> w;
  for (int c = 0; c < a.nc; ++c) w.push_back(a.mc[c] / a.area[c]);
  for (int c = 0; c < b.nc; ++c) w.push_back(b.mc[c] / b.area[c]);
  s.finalize(w);
  return s;
}

DiscreteSpace from_trimesh(const TriMesh& m) {
  DiscreteSpace s;
  s.nv = static_cast<int>(m.vertices.size());
  if (s.nv == 0 || m.faces.empty()) throw SpaceError("empty mesh");
  std::map<std::pair<int, int>, int> edge_count;
  std::vector<int> used(s.nv, 0);
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= s.nv) throw SpaceError("face references missing vertex");
      used[f[k]] = 1;
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw SpaceError("repeated vertex in face");
    for (int k = 0; k < 3; ++k) {
      const auto e = std::minmax(f[k], f[(k + 1) % 3]);
      if (++edge_count[e] > 2) throw SpaceError("non-manifold mesh: edge shared by more than two faces");
    }
  }
  for (int v = 0; v < s.nv; ++v)
    if (!used[v]) throw SpaceError("isolated vertex " + std::to_string(v));
  s.pos = m.vertices;
  for (const auto& f : m.faces) {
    Eigen::Matrix3d L;
    L << m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]];
    s.cells.push_back(f);
    s.local.push_back(L);
  }
  s.dim.assign(s.cells.size(), 2);
  s.chart = {};
  s.kappa = 0.0;
  s.finalize({});
  return s;
}

// ---------------------------------------------------------------- descriptors

namespace {

double param(const SpaceSpec& sp, const std::string& key, double fallback) {
  auto it = sp.params.find(key);
  if (it == sp.params.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw SpaceError("bad value for " + key + ": " + it->second);
  }
}

int iparam(const SpaceSpec& sp, const std::string& key, int fallback) {
  const double v = param(sp, key, fallback);
  if (v != std::floor(v)) throw SpaceError("integer expected for " + key);
  return static_cast<int>(v);
}

void check_keys(const SpaceSpec& sp, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : sp.params) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw SpaceError("unknown parameter '" + k + "' for " + sp.name);
  }
}

std::map<std::string, std::string> parse_params(const std::string& text, char sep) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw SpaceError("expected key=value in '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

}  // namespace

SpaceSpec parse_space_spec(const std::string& text) {
  SpaceSpec sp;
  const auto colon = text.find(':');
  sp.name = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (sp.name == "union") {
    std::stringstream ss(rest);
    std::string part;
    while (std::getline(ss, part, '+')) {
      const auto open = part.find('(');
      SpaceSpec child;
      if (open == std::string::npos) {
        child.name = part;
      } else {
        if (part.back() != ')') throw SpaceError("unbalanced parenthesis in '" + part + "'");
        child.name = part.substr(0, open);
        child.params = parse_params(part.substr(open + 1, part.size() - open - 2), ';');
      }
      sp.parts.push_back(child);
    }
    if (sp.parts.size() < 2) throw SpaceError("union needs at least two parts");
    return sp;
  }
  if (sp.name == "mesh_file") {
    if (rest.rfind("path=", 0) == 0)
      sp.params["path"] = rest.substr(5);
    else if (!rest.empty())
      sp.params["path"] = rest;
    return sp;
  }
  sp.params = parse_params(rest, ',');
  return sp;
}

std::string format_space_spec(const SpaceSpec& sp) {
  std::string out = sp.name;
  if (sp.name == "union") {
    out += ":";
    for (std::size_t i = 0; i < sp.parts.size(); ++i) {
      if (i) out += "+";
      out += sp.parts[i].name + "(";
      bool first = true;
      for (const auto& [k, v] : sp.parts[i].params) {
        if (!first) out += ";";
        out += k + "=" + v;
        first = false;
      }
      out += ")";
    }
    return out;
  }
  bool first = true;
  for (const auto& [k, v] : sp.params) {
    out += first ? ":" : ",";
    out += k + "=" + v;
    first = false;
  }
  return out;
}

DiscreteSpace build_space(const SpaceSpec& sp) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  DiscreteSpace s;
  if (sp.name == "flat_torus") {
    check_keys(sp, {"n", "side"});
    s = flat_torus(iparam(sp, "n", 16), param(sp, "side", two_pi));
  } else if (sp.name == "icosphere") {
    check_keys(sp, {"subdiv", "radius"});
    s = icosphere(iparam(sp, "subdiv", 3), param(sp, "radius", 1.0));
  } else if (sp.name == "cone") {
    check_keys(sp, {"angle", "n"});
    s = cone(param(sp, "angle", std::numbers::pi), iparam(sp, "n", 8));
  } else if (sp.name == "weighted_grid") {
    check_keys(sp, {"n", "k", "side"});
    s = weighted_grid(iparam(sp, "n", 16), param(sp, "k", 1.0), param(sp, "side", two_pi));
  } else if (sp.name == "interval") {
    check_keys(sp, {"n", "length"});
    s = interval_graph(iparam(sp, "n", 16), param(sp, "length", 1.0));
  } else if (sp.name == "mesh_file") {
    auto it = sp.params.find("path");
    if (it == sp.params.end()) throw SpaceError("mesh_file needs a path");
    s = mesh_file(it->second);
  } else if (sp.name == "union") {
    s = build_space(sp.parts[0]);
    for (std::size_t i = 1; i < sp.parts.size(); ++i) s = disjoint_union(s, build_space(sp.parts[i]));
  } else {
    throw SpaceError("unknown space generator '" + sp.name + "'");
  }
  s.descriptor = format_space_spec(sp);
  return s;
}

DiscreteSpace build_space(const std::string& text) { return build_space(parse_space_spec(text)); }

namespace {

void refine_in_place(SpaceSpec& sp) {
  if (sp.name == "icosphere") {
    sp.params["subdiv"] = std::to_string(iparam(sp, "subdiv", 3) + 1);
  } else if (sp.name == "flat_torus" || sp.name == "cone" || sp.name == "weighted_grid" ||
             sp.name == "interval") {
    const int fallback = sp.name == "cone" ? 8 : 16;
    sp.params["n"] = std::to_string(2 * iparam(sp, "n", fallback));
  } else if (sp.name == "union") {
    for (auto& p : sp.parts) refine_in_place(p);
  } else {
    throw SpaceError("no refinement rule for " + sp.name);
  }
}

}  // namespace

std::string refine_spec(const std::string& text) {
  SpaceSpec sp = parse_space_spec(text);
  refine_in_place(sp);
  return format_space_spec(sp);
}

// ---------------------------------------------------------------- algebra

CellScalar cell_inner(const DiscreteSpace& s, const VectorField& x, const VectorField& y) {
  if (x.size() != s.nvec() || y.size() != s.nvec()) throw SpaceError("mismatched vector fields");
  CellScalar out(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c], o = s.voff[c];
    out[c] = x.segment(o, d).dot(s.gram[c] * y.segment(o, d));
  }
  return out;
}

ScalarField pointwise_inner(const DiscreteSpace& s, const VectorField& x, const VectorField& y) {
  return s.cell_to_vertex(cell_inner(s, x, y));
}

CellScalar cell_norm(const DiscreteSpace& s, const VectorField& x) {
  return cell_inner(s, x, x).cwiseMax(0.0).cwiseSqrt();
}

OneForm musical_flat(const DiscreteSpace& s, const VectorField& x) {
  OneForm w(x.size());
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c], o = s.voff[c];
    w.segment(o, d) = s.gram[c] * x.segment(o, d);
  }
  return w;
}

VectorField musical_sharp(const DiscreteSpace& s, const OneForm& w) {
  VectorField x(w.size());
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c], o = s.voff[c];
    x.segment(o, d) = s.gram[c].ldlt().solve(w.segment(o, d));
  }
  return x;
}

VectorField scale_cells(const DiscreteSpace& s, const CellScalar& f, const VectorField& x) {
  VectorField out(x.size());
  for (int c = 0; c < s.nc; ++c) out.segment(s.voff[c], s.dim[c]) = f[c] * x.segment(s.voff[c], s.dim[c]);
  return out;
}

Tensor2Field scale_cells_t(const DiscreteSpace& s, const CellScalar& f, const Tensor2Field& t) {
  Tensor2Field out(t.size());
  for (int c = 0; c < s.nc; ++c) {
    const int n = s.dim[c] * s.dim[c];
    out.segment(s.toff[c], n) = f[c] * t.segment(s.toff[c], n);
  }
  return out;
}

Tensor2Field outer(const DiscreteSpace& s, const VectorField& x, const VectorField& y) {
  Tensor2Field t(s.nten());
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) t[s.toff[c] + a * d + b] = x[s.voff[c] + a] * y[s.voff[c] + b];
  }
  return t;
}

Tensor2Field transpose(const DiscreteSpace& s, const Tensor2Field& in) {
  Tensor2Field t(in.size());
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) t[s.toff[c] + a * d + b] = in[s.toff[c] + b * d + a];
  }
  return t;
}

Tensor2Field identity_tensor(const DiscreteSpace& s) {
  Tensor2Field t = Tensor2Field::Zero(s.nten());
  for (int c = 0; c < s.nc; ++c)
    for (int a = 0; a < s.dim[c]; ++a) t[s.toff[c] + a * s.dim[c] + a] = 1.0;
  return t;
}

CellScalar cell_hs_inner(const DiscreteSpace& s, const Tensor2Field& a, const Tensor2Field& b) {
  if (a.size() != s.nten() || b.size() != s.nten()) throw SpaceError("mismatched tensor fields");
  CellScalar out(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    const Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> A(a.data() + s.toff[c], d, d);
    const Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> B(b.data() + s.toff[c], d, d);
    const Mat& G = s.gram[c];
    out[c] = (A.transpose() * G * B * G).trace();
  }
  return out;
}

ScalarField tensor_hs_inner(const DiscreteSpace& s, const Tensor2Field& a, const Tensor2Field& b) {
  return s.cell_to_vertex(cell_hs_inner(s, a, b));
}

std::pair<Tensor2Field, Tensor2Field> sym_asym_split(const DiscreteSpace& s, const Tensor2Field& a) {
  const Tensor2Field at = transpose(s, a);
  return {0.5 * (a + at), 0.5 * (a - at)};
}

CellScalar contract(const DiscreteSpace& s, const Tensor2Field& t, const VectorField& z,
                    const VectorField& y) {
  CellScalar out(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    double acc = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) acc += t[s.toff[c] + a * d + b] * z[s.voff[c] + a] * y[s.voff[c] + b];
    out[c] = acc;
  }
  return out;
}

VectorField contract_first(const DiscreteSpace& s, const Tensor2Field& t, const VectorField& z) {
  VectorField out = VectorField::Zero(s.nvec());
  for (int c = 0; c < s.nc; ++c) {
    const int d = s.dim[c];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) out[s.voff[c] + b] += t[s.toff[c] + a * d + b] * z[s.voff[c] + a];
  }
  return out;
}

// ---------------------------------------------------------------- exterior algebra

int kform_size(int d, int k) {
  if (k < 0 || k > d) return 0;
  if (k == 0 || k == d) return 1;
  return d;  // d <= 2 here, k = 1
}

std::vector<int> kform_offsets(const DiscreteSpace& s, int k) {
  std::vector<int> off(s.nc + 1, 0);
  for (int c = 0; c < s.nc; ++c) off[c + 1] = off[c] + kform_size(s.dim[c], k);
  return off;
}

KForm kform_from_vector(const DiscreteSpace& s, const VectorField& x) { return {1, musical_flat(s, x)}; }

KForm kform_from_cells(const DiscreteSpace& s, const CellScalar& f) {
  if (f.size() != s.nc) throw SpaceError("cell scalar expected");
  return {0, f};
}

KForm wedge(const DiscreteSpace& s, const KForm& a, const KForm& b) {
  const int k = a.degree + b.degree;
  if (k > s.max_dim()) throw SpaceError("wedge degree overflow");
  const auto oa = kform_offsets(s, a.degree);
  const auto ob = kform_offsets(s, b.degree);
  const auto oc = kform_offsets(s, k);
  KForm out{k, Vec::Zero(oc.back())};
  for (int c = 0; c < s.nc; ++c) {
    if (oc[c + 1] == oc[c]) continue;
    const double* pa = a.values.data() + oa[c];
    const double* pb = b.values.data() + ob[c];
    double* po = out.values.data() + oc[c];
    const int n = oc[c + 1] - oc[c];
    if (a.degree == 0) {
      for (int i = 0; i < n; ++i) po[i] = pa[0] * pb[i];
    } else if (b.degree == 0) {
      for (int i = 0; i < n; ++i) po[i] = pa[i] * pb[0];
    } else {
      po[0] = pa[0] * pb[1] - pa[1] * pb[0];
    }
  }
  return out;
}

CellScalar kform_norm2(const DiscreteSpace& s, const KForm& a) {
  const auto off = kform_offsets(s, a.degree);
  CellScalar out(s.nc);
  for (int c = 0; c < s.nc; ++c) {
    const int n = off[c + 1] - off[c];
    if (a.degree == 1) {
      const Vec w = a.values.segment(off[c], n);
      out[c] = w.dot(s.gram[c].ldlt().solve(w));
    } else if (a.degree == 2 && n == 1) {
      out[c] = a.values[off[c]] * a.values[off[c]] / s.gram[c].determinant();
    } else {
      out[c] = n ? a.values.segment(off[c], n).squaredNorm() : 0.0;
    }
  }
  return out;
}

std::vector<DimensionClass> local_dimension(const DiscreteSpace& s) {
  std::map<int, DimensionClass> by;
  for (int c = 0; c < s.nc; ++c) {
    auto& cls = by[s.dim[c]];
    cls.dim = s.dim[c];
    cls.cells.push_back(c);
    cls.mass += s.mc[c];
  }
  std::vector<DimensionClass> out;
  for (auto& [d, cls] : by)
    if (cls.mass > 0.0) out.push_back(std::move(cls));
  return out;
}

namespace {

double weighted_norm(const Vec& w, const Vec& f, double p) {
  if (f.size() != w.size()) throw SpaceError("field size does not match the space");
  if (std::isinf(p) && p > 0) return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  if (!(p >= 1.0)) throw SpaceError("p must be in [1, inf]");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) acc += w[i] * std::pow(std::abs(f[i]), p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace

double lp_norm(const DiscreteSpace& s, const ScalarField& f, double p) { return weighted_norm(s.mv, f, p); }

double lp_norm_cells(const DiscreteSpace& s, const CellScalar& f, double p) {
  return weighted_norm(s.mc, f, p);
}

double integrate(const DiscreteSpace& s, const ScalarField& f) { return s.mv.dot(f); }

double integrate_cells(const DiscreteSpace& s, const CellScalar& f) { return s.mc.dot(f); }

}  // namespace mmc
