#pragma once

#include "hdsa/types.hpp"

#include <array>
#include <iosfwd>
#include <utility>
#include <vector>

namespace hdsa {

enum class BoundaryTag : std::uint8_t { Interior, Dirichlet, Neumann };

/// Simplicial mesh: intervals in 1D, P1 triangles in 2D.
///
/// `nodes` is (node count x dimension). `elements` holds one row per cell with
/// dimension + 1 vertex indices. `cells_per_axis` records the structured
/// resolution the mesh was built with.
struct Mesh {
  int dimension = 1;
  Matrix nodes;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> elements;
  std::vector<BoundaryTag> boundary;
  std::array<Index, 2> cells_per_axis{0, 0};

  Index num_nodes() const { return nodes.rows(); }
  Index num_elements() const { return elements.rows(); }

  /// Length (1D) or area (2D) of element `e`.
  double element_measure(Index e) const;

  /// Total measure of the domain.
  double measure() const;

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;
};

Mesh build_interval_mesh(double a, double b, Index n_elems);

/// Tensor-product mesh of the rectangle, each cell cut into two triangles
/// along its (x0,y0)-(x1,y1) diagonal. Nodes on x = x_min or y = y_min are
/// tagged Dirichlet; the remaining boundary nodes are tagged Neumann.
Mesh build_rect_mesh(std::pair<double, double> x_range, std::pair<double, double> y_range, Index nx,
                     Index ny);

/// Gradients of the three P1 hat functions on triangle `e` (rows = local vertex).
Eigen::Matrix<double, 3, 2> p1_gradients(const Mesh& mesh, Index e);

struct FemMatrices {
  SparseMatrix mass;
  SparseMatrix stiffness;
};

/// Consistent P1 mass and stiffness matrices with exact element integration.
/// No boundary conditions are imposed.
FemMatrices assemble(const Mesh& mesh);

/// Mass matrix restricted to the elements for which `keep(e)` is true.
template <class Predicate>
SparseMatrix assemble_mass_subset(const Mesh& mesh, Predicate keep);

/// Writes "row col value" lines, 17 significant digits, zero-based indices.
void write_triplets(std::ostream& os, const SparseMatrix& matrix);
void write_triplets(std::ostream& os, const Matrix& matrix);
SparseMatrix read_triplets(std::istream& is, Index rows, Index cols);

/// Writes node coordinates followed by element connectivity.
void write_mesh(std::ostream& os, const Mesh& mesh);

namespace detail {
void add_element_mass(const Mesh& mesh, Index e, std::vector<Triplet>& out);
}

template <class Predicate>
SparseMatrix assemble_mass_subset(const Mesh& mesh, Predicate keep) {
  std::vector<Triplet> entries;
  for (Index e = 0; e < mesh.num_elements(); ++e)
    if (keep(e)) detail::add_element_mass(mesh, e, entries);
  SparseMatrix out(mesh.num_nodes(), mesh.num_nodes());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

}  // namespace hdsa
