#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Per-vertex values.
using ScalarField = Vec;
// Per-cell values.
using CellScalar = Vec;
// Per-cell frame coefficients, stacked with DiscreteSpace::voff.
using VectorField = Vec;
using OneForm = Vec;
// Per-cell d x d matrices, row-major, stacked with DiscreteSpace::toff.
// T[a][b] pairs slot a with the first factor of a tensor product.
using Tensor2Field = Vec;

struct SpaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ChartKind { none, torus, sphere, plane, cone, graph };

struct ChartInfo {
  ChartKind kind = ChartKind::none;
  double side = 0.0;    // torus period, grid width
  double radius = 0.0;  // sphere radius
  double angle = 0.0;   // cone total angle
};

struct SignedMeasure {
  Vec w;  // per-vertex weights

  double total() const { return w.sum(); }
  double tv() const { return w.cwiseAbs().sum(); }
};

class DiscreteSpace {
 public:
  int nv = 0;
  int nc = 0;
  std::vector<int> dim;                   // per cell, 1 or 2
  std::vector<std::array<int, 3>> cells;  // unused slots are -1
  std::vector<Eigen::Matrix3d> local;     // columns: unwrapped vertex positions
  std::vector<Mat> frame;                 // 3 x d, orthonormal columns
  std::vector<Mat> gram;                  // d x d
  Vec mv;                                 // vertex masses
  Vec mc;                                 // cell masses
  Vec area;                               // geometric cell volume (length or area)
  std::vector<Eigen::Vector3d> pos;       // vertex chart or ambient coordinates
  std::vector<int> component;             // per vertex
  int ncomp = 0;
  std::vector<int> voff;  // size nc+1
  std::vector<int> toff;  // size nc+1
  std::vector<ChartKind> chart_tags;  // per cell
  ChartInfo chart;
  double kappa = 0.0;
  double h = 0.0;  // longest edge
  std::string descriptor;

  int nvec() const { return voff.back(); }
  int nten() const { return toff.back(); }
  int max_dim() const;
  double total_mass() const { return mc.sum(); }

  // Cell-average transfer: (vertex_to_cell f)_c is the mean over the cell's vertices.
  CellScalar vertex_to_cell(const ScalarField& f) const;
  // Mass-weighted average; adjoint of vertex_to_cell in the m_v / m_c inner products.
  ScalarField cell_to_vertex(const CellScalar& phi) const;
  const SpMat& avg_cv() const { return A_; }
  const SpMat& avg_vc() const { return B_; }

  // Throws SpaceError when an invariant fails.
  void validate() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  // Finalize derived data after cells/positions/weights are set.
  void finalize(const std::vector<double>& cell_weight);

 private:
  SpMat A_;
  SpMat B_;
};

// Generators. Descriptor syntax: name:key=val,key=val
// flat_torus:n=16,side=6.283185307179586
// icosphere:subdiv=3,radius=1
// cone:angle=3.14159,n=8
// weighted_grid:n=16,k=1,side=6.283185307179586
// interval:n=16,length=1
// mesh_file:path=foo.off
// union:flat_torus(n=4)+interval(n=8)
DiscreteSpace flat_torus(int n, double side);
DiscreteSpace icosphere(int subdiv, double radius);
DiscreteSpace cone(double angle, int n);
DiscreteSpace weighted_grid(int n, double k, double side);
DiscreteSpace interval_graph(int n, double length);
DiscreteSpace disjoint_union(const DiscreteSpace& a, const DiscreteSpace& b);
DiscreteSpace mesh_file(const std::string& path);

struct SpaceSpec {
  std::string name;
  std::map<std::string, std::string> params;
  std::vector<SpaceSpec> parts;  // union only
};

SpaceSpec parse_space_spec(const std::string& text);
std::string format_space_spec(const SpaceSpec& spec);
DiscreteSpace build_space(const std::string& text);
DiscreteSpace build_space(const SpaceSpec& spec);
// Next resolution of the same model: n doubles, subdiv increments.
std::string refine_spec(const std::string& text);

// Triangle mesh with a list of faces, for file input and tests.
struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
};
TriMesh read_off(const std::string& path);
TriMesh read_obj(const std::string& path);
DiscreteSpace from_trimesh(const TriMesh& mesh);

// Pointwise algebra.
CellScalar cell_inner(const DiscreteSpace& s, const VectorField& x, const VectorField& y);
ScalarField pointwise_inner(const DiscreteSpace& s, const VectorField& x, const VectorField& y);
CellScalar cell_norm(const DiscreteSpace& s, const VectorField& x);
OneForm musical_flat(const DiscreteSpace& s, const VectorField& x);
VectorField musical_sharp(const DiscreteSpace& s, const OneForm& w);
// Apply a per-cell scalar to a per-cell field.
VectorField scale_cells(const DiscreteSpace& s, const CellScalar& f, const VectorField& x);
Tensor2Field scale_cells_t(const DiscreteSpace& s, const CellScalar& f, const Tensor2Field& t);

Tensor2Field outer(const DiscreteSpace& s, const VectorField& x, const VectorField& y);
Tensor2Field transpose(const DiscreteSpace& s, const Tensor2Field& a);
Tensor2Field identity_tensor(const DiscreteSpace& s);
CellScalar cell_hs_inner(const DiscreteSpace& s, const Tensor2Field& a, const Tensor2Field& b);
ScalarField tensor_hs_inner(const DiscreteSpace& s, const Tensor2Field& a, const Tensor2Field& b);
std::pair<Tensor2Field, Tensor2Field> sym_asym_split(const DiscreteSpace& s, const Tensor2Field& a);
// (T contracted with z in slot a, y in slot b) per cell.
CellScalar contract(const DiscreteSpace& s, const Tensor2Field& t, const VectorField& z,
                    const VectorField& y);
// Vector field w with <w, y> = T(z, y).
VectorField contract_first(const DiscreteSpace& s, const Tensor2Field& t, const VectorField& z);

// Per-cell exterior algebra; coefficients for increasing index sets.
struct KForm {
  int degree = 0;
  Vec values;
};
int kform_size(int d, int k);
std::vector<int> kform_offsets(const DiscreteSpace& s, int k);
KForm kform_from_vector(const DiscreteSpace& s, const VectorField& x);
KForm kform_from_cells(const DiscreteSpace& s, const CellScalar& f);
KForm wedge(const DiscreteSpace& s, const KForm& a, const KForm& b);
CellScalar kform_norm2(const DiscreteSpace& s, const KForm& a);

struct DimensionClass {
  int dim = 0;
  std::vector<int> cells;
  double mass = 0.0;
};
std::vector<DimensionClass> local_dimension(const DiscreteSpace& s);

// m-weighted p-norms; p = infinity gives the max.
double lp_norm(const DiscreteSpace& s, const ScalarField& f, double p);
double lp_norm_cells(const DiscreteSpace& s, const CellScalar& f, double p);
double integrate(const DiscreteSpace& s, const ScalarField& f);
double integrate_cells(const DiscreteSpace& s, const CellScalar& f);

}  // namespace mmc
