#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace chr {

/// One face contribution of a boundary node. The outward normal is
/// `side * e_axis`. Corner nodes of a 2D grid appear twice, once per face.
struct BoundaryEntry {
  std::size_t node;
  int axis;       // 0 = x, 1 = y
  int side;       // -1 (low face) or +1 (high face)
  double weight;  // trapezoidal weight along the face
};

/// Tensor-product node grid on [0, Lx] or [0, Lx] x [0, Ly].
///
/// Nodes are numbered x-fastest: node(i, j) = j * nx + i. Bulk quadrature is
/// the tensor trapezoid rule; boundary quadrature is the trapezoid rule on
/// each face, so a corner collects a half weight from both adjacent faces.
class Grid {
 public:
  static Grid build(int dim, std::array<double, 2> extents, std::array<int, 2> counts);

  int dim() const { return dim_; }
  int nx() const { return n_[0]; }
  int ny() const { return n_[1]; }
  int count(int axis) const { return n_[axis]; }
  double length(int axis) const { return L_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  double hx() const { return h_[0]; }
  double hy() const { return h_[1]; }
  std::size_t size() const { return static_cast<std::size_t>(n_[0]) * n_[1]; }
  double volume() const { return dim_ == 1 ? L_[0] : L_[0] * L_[1]; }

  std::size_t node(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * n_[0] + i;
  }
  int ix(std::size_t k) const { return static_cast<int>(k % n_[0]); }
  int iy(std::size_t k) const { return static_cast<int>(k / n_[0]); }
  double x(std::size_t k) const { return ix(k) * h_[0]; }
  double y(std::size_t k) const { return dim_ == 1 ? 0.0 : iy(k) * h_[1]; }

  const Eigen::VectorXd& quad_weights() const { return w_; }
  /// Per-node sum of the face weights (zero on interior nodes).
  const Eigen::VectorXd& bquad_weights() const { return wb_; }
  const std::vector<BoundaryEntry>& boundary() const { return boundary_; }
  /// Distinct boundary node ids in ascending order.
  const std::vector<std::size_t>& boundary_nodes() const { return bnodes_; }

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && L_ == o.L_;
  }

 private:
  Grid() = default;

  int dim_ = 1;
  std::array<int, 2> n_{1, 1};
  std::array<double, 2> L_{0.0, 0.0};
  std::array<double, 2> h_{0.0, 0.0};
  Eigen::VectorXd w_;
  Eigen::VectorXd wb_;
  std::vector<BoundaryEntry> boundary_;
  std::vector<std::size_t> bnodes_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(int dim, std::array<double, 2> extents, std::array<int, 2> counts);

/// Nodal values on a grid. Vector fields are stored component-major:
/// all x-components, then all y-components.
class Field {
 public:
  Field() = default;
  Field(GridPtr grid, int components = 1);
  Field(GridPtr grid, Eigen::VectorXd values, int components = 1);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int components() const { return components_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  double& operator[](std::size_t k) { return values_[static_cast<Eigen::Index>(k)]; }
  double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }

  /// Component `c` as a scalar field.
  Field component(int c) const;

  bool all_finite() const { return values_.allFinite(); }
  /// Throws InvalidArgument when the field is not a finite scalar on `grid`.
  void require_scalar() const;

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
  int components_ = 1;
};

Field sample(const GridPtr& grid, const std::function<double(double, double)>& fn);

double integrate(const Field& f);
double boundary_integrate(const Field& f);
/// sqrt(integrate(f^2)).
double l2_norm(const Field& f);

/// Snapshot export: a `# grid ...` header line followed by `i[,j],x[,y],value`
/// rows (one value column per component).
void write_field_csv(std::ostream& os, const Field& f);
void write_field_csv(const std::string& path, const Field& f);

}  // namespace chr
