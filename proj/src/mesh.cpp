#include "hdsa/mesh.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

namespace hdsa {

double Mesh::element_measure(Index e) const {
  if (dimension == 1) {
    return nodes(elements(e, 1), 0) - nodes(elements(e, 0), 0);
  }
  const Eigen::Vector2d p0 = nodes.row(elements(e, 0)).transpose();
  const Eigen::Vector2d p1 = nodes.row(elements(e, 1)).transpose();
  const Eigen::Vector2d p2 = nodes.row(elements(e, 2)).transpose();
  const Eigen::Vector2d a = p1 - p0;
  const Eigen::Vector2d b = p2 - p0;
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

double Mesh::measure() const {
  double total = 0.0;
  for (Index e = 0; e < num_elements(); ++e) total += element_measure(e);
  return total;
}

void Mesh::validate() const {
  require(dimension == 1 || dimension == 2, "mesh: dimension must be 1 or 2");
  require(nodes.cols() == dimension, "mesh: node coordinate width does not match dimension");
  require(elements.cols() == dimension + 1, "mesh: connectivity width does not match dimension");
  require(static_cast<Index>(boundary.size()) == num_nodes(), "mesh: one boundary tag per node required");
  for (int d = 0; d < dimension; ++d)
    require(cells_per_axis[static_cast<std::size_t>(d)] >= 1, "mesh: need at least two nodes per dimension");
  for (Index e = 0; e < num_elements(); ++e) {
    for (Index k = 0; k < elements.cols(); ++k)
      require(elements(e, k) >= 0 && elements(e, k) < num_nodes(), "mesh: connectivity index out of range");
    require(element_measure(e) > 0.0, "mesh: degenerate element " + std::to_string(e));
  }
}

Mesh build_interval_mesh(double a, double b, Index n_elems) {
  require(n_elems >= 1, "build_interval_mesh: element count must be positive");
  require(a < b, "build_interval_mesh: require a < b");
  Mesh mesh;
  mesh.dimension = 1;
  mesh.cells_per_axis = {n_elems, 0};
  mesh.nodes.resize(n_elems + 1, 1);
  const double h = (b - a) / static_cast<double>(n_elems);
  for (Index i = 0; i <= n_elems; ++i) mesh.nodes(i, 0) = a + h * static_cast<double>(i);
  mesh.nodes(n_elems, 0) = b;
  mesh.elements.resize(n_elems, 2);
  for (Index e = 0; e < n_elems; ++e) {
    mesh.elements(e, 0) = e;
    mesh.elements(e, 1) = e + 1;
  }
  mesh.boundary.assign(static_cast<std::size_t>(n_elems + 1), BoundaryTag::Interior);
  mesh.boundary.front() = BoundaryTag::Neumann;
  mesh.boundary.back() = BoundaryTag::Neumann;
  return mesh;
}

Mesh build_rect_mesh(std::pair<double, double> x_range, std::pair<double, double> y_range, Index nx,
                     Index ny) {
  require(nx >= 1 && ny >= 1, "build_rect_mesh: cell counts must be positive");
  require(x_range.first < x_range.second && y_range.first < y_range.second,
          "build_rect_mesh: degenerate coordinate range");
  Mesh mesh;
  mesh.dimension = 2;
  mesh.cells_per_axis = {nx, ny};
  const Index px = nx + 1;
  const Index py = ny + 1;
  mesh.nodes.resize(px * py, 2);
  mesh.boundary.assign(static_cast<std::size_t>(px * py), BoundaryTag::Interior);
  const double hx = (x_range.second - x_range.first) / static_cast<double>(nx);
  const double hy = (y_range.second - y_range.first) / static_cast<double>(ny);
  for (Index j = 0; j < py; ++j) {
    for (Index i = 0; i < px; ++i) {
      const Index k = j * px + i;
      mesh.nodes(k, 0) = i == nx ? x_range.second : x_range.first + hx * static_cast<double>(i);
      mesh.nodes(k, 1) = j == ny ? y_range.second : y_range.first + hy * static_cast<double>(j);
      if (i == 0 || j == 0) {
        mesh.boundary[static_cast<std::size_t>(k)] = BoundaryTag::Dirichlet;
      } else if (i == nx || j == ny) {
        mesh.boundary[static_cast<std::size_t>(k)] = BoundaryTag::Neumann;
      }
    }
  }
  mesh.elements.resize(2 * nx * ny, 3);
  Index e = 0;
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index v00 = j * px + i;
      const Index v10 = v00 + 1;
      const Index v01 = v00 + px;
      const Index v11 = v01 + 1;
      mesh.elements.row(e++) << v00, v10, v11;
      mesh.elements.row(e++) << v00, v11, v01;
    }
  }
  return mesh;
}

Eigen::Matrix<double, 3, 2> p1_gradients(const Mesh& mesh, Index e) {
  const Eigen::Vector2d p0 = mesh.nodes.row(mesh.elements(e, 0)).transpose();
  const Eigen::Vector2d p1 = mesh.nodes.row(mesh.elements(e, 1)).transpose();
  const Eigen::Vector2d p2 = mesh.nodes.row(mesh.elements(e, 2)).transpose();
  Eigen::Matrix2d jac;
  jac.col(0) = p1 - p0;
  jac.col(1) = p2 - p0;
  const Eigen::Matrix2d inv_t = jac.inverse().transpose();
  Eigen::Matrix<double, 3, 2> ref;
  ref << -1.0, -1.0, 1.0, 0.0, 0.0, 1.0;
  return (inv_t * ref.transpose()).transpose();
}

namespace detail {

void add_element_mass(const Mesh& mesh, Index e, std::vector<Triplet>& out) {
  const double meas = mesh.element_measure(e);
  const Index nv = mesh.elements.cols();
  // P1 consistent mass: measure/((d+1)(d+2)) * (1 + delta_ij).
  const double scale = nv == 2 ? meas / 6.0 : meas / 12.0;
  for (Index a = 0; a < nv; ++a)
    for (Index b = 0; b < nv; ++b)
      out.emplace_back(mesh.elements(e, a), mesh.elements(e, b), scale * (a == b ? 2.0 : 1.0));
}

}  // namespace detail

FemMatrices assemble(const Mesh& mesh) {
  mesh.validate();
  std::vector<Triplet> mass;
  std::vector<Triplet> stiff;
  const Index nv = mesh.elements.cols();
  mass.reserve(static_cast<std::size_t>(mesh.num_elements() * nv * nv));
  stiff.reserve(mass.capacity());
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    detail::add_element_mass(mesh, e, mass);
    const double meas = mesh.element_measure(e);
    if (mesh.dimension == 1) {
      const double inv_h = 1.0 / meas;
      const Index i = mesh.elements(e, 0);
      const Index j = mesh.elements(e, 1);
      stiff.emplace_back(i, i, inv_h);
      stiff.emplace_back(j, j, inv_h);
      stiff.emplace_back(i, j, -inv_h);
      stiff.emplace_back(j, i, -inv_h);
    } else {
      const auto grads = p1_gradients(mesh, e);
      const Eigen::Matrix3d local = meas * grads * grads.transpose();
      for (Index a = 0; a < 3; ++a)
        for (Index b = 0; b < 3; ++b) stiff.emplace_back(mesh.elements(e, a), mesh.elements(e, b), local(a, b));
    }
  }
  FemMatrices out;
  out.mass.resize(mesh.num_nodes(), mesh.num_nodes());
  out.stiffness.resize(mesh.num_nodes(), mesh.num_nodes());
  out.mass.setFromTriplets(mass.begin(), mass.end());
  out.stiffness.setFromTriplets(stiff.begin(), stiff.end());
  return out;
}

void write_triplets(std::ostream& os, const SparseMatrix& matrix) {
  os << std::setprecision(17);
  for (Index k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

void write_triplets(std::ostream& os, const Matrix& matrix) {
  os << std::setprecision(17);
  for (Index j = 0; j < matrix.cols(); ++j)
    for (Index i = 0; i < matrix.rows(); ++i)
      if (matrix(i, j) != 0.0) os << i << ' ' << j << ' ' << matrix(i, j) << '\n';
}

SparseMatrix read_triplets(std::istream& is, Index rows, Index cols) {
  std::vector<Triplet> entries;
  Index i = 0;
  Index j = 0;
  double v = 0.0;
  while (is >> i >> j >> v) {
    require(i >= 0 && i < rows && j >= 0 && j < cols, "read_triplets: index out of range");
    entries.emplace_back(i, j, v);
  }
  SparseMatrix out(rows, cols);
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << std::setprecision(17);
  os << "# nodes " << mesh.num_nodes() << " dimension " << mesh.dimension << '\n';
  for (Index i = 0; i < mesh.num_nodes(); ++i) {
    for (Index d = 0; d < mesh.dimension; ++d) os << (d ? " " : "") << mesh.nodes(i, d);
    os << ' ' << static_cast<int>(mesh.boundary[static_cast<std::size_t>(i)]) << '\n';
  }
  os << "# elements " << mesh.num_elements() << '\n';
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    for (Index k = 0; k < mesh.elements.cols(); ++k) os << (k ? " " : "") << mesh.elements(e, k);
    os << '\n';
  }
}

}  // namespace hdsa
