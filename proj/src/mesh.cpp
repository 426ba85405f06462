#include "chrflow/mesh.hpp"

#include "chrflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace chr {

namespace {

Eigen::VectorXd trapezoid(int n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w[0] = w[n - 1] = 0.5 * h;
  return w;
}

}  // namespace

Grid Grid::build(int dim, std::array<double, 2> extents, std::array<int, 2> counts) {
  if (dim != 1 && dim != 2) throw InvalidArgument("grid: dim must be 1 or 2");
  Grid g;
  g.dim_ = dim;
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0.0) || !std::isfinite(extents[a]))
      throw InvalidArgument("grid: extents must be positive");
    if (counts[a] < 5) throw InvalidArgument("grid: at least 5 nodes per axis are required");
    g.n_[a] = counts[a];
    g.L_[a] = extents[a];
    g.h_[a] = extents[a] / (counts[a] - 1);
  }
  if (dim == 1) {
    g.n_[1] = 1;
    g.L_[1] = 0.0;
    g.h_[1] = 0.0;
  }

  const std::size_t n = g.size();
  g.wb_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (dim == 1) {
    g.w_ = trapezoid(g.n_[0], g.h_[0]);
    g.boundary_.push_back({0, 0, -1, 1.0});
    g.boundary_.push_back({n - 1, 0, +1, 1.0});
  } else {
    const Eigen::VectorXd wx = trapezoid(g.n_[0], g.h_[0]);
    const Eigen::VectorXd wy = trapezoid(g.n_[1], g.h_[1]);
    g.w_.resize(static_cast<Eigen::Index>(n));
    for (int j = 0; j < g.n_[1]; ++j)
      for (int i = 0; i < g.n_[0]; ++i) g.w_[g.node(i, j)] = wx[i] * wy[j];
    // faces x = 0 and x = Lx carry y-trapezoid weights, and vice versa
    for (int j = 0; j < g.n_[1]; ++j) {
      g.boundary_.push_back({g.node(0, j), 0, -1, wy[j]});
      g.boundary_.push_back({g.node(g.n_[0] - 1, j), 0, +1, wy[j]});
    }
    for (int i = 0; i < g.n_[0]; ++i) {
      g.boundary_.push_back({g.node(i, 0), 1, -1, wx[i]});
      g.boundary_.push_back({g.node(i, g.n_[1] - 1), 1, +1, wx[i]});
    }
  }
  for (const auto& e : g.boundary_) {
    g.wb_[static_cast<Eigen::Index>(e.node)] += e.weight;
    g.bnodes_.push_back(e.node);
  }
  std::sort(g.bnodes_.begin(), g.bnodes_.end());
  g.bnodes_.erase(std::unique(g.bnodes_.begin(), g.bnodes_.end()), g.bnodes_.end());
  return g;
}

GridPtr make_grid(int dim, std::array<double, 2> extents, std::array<int, 2> counts) {
  return std::make_shared<const Grid>(Grid::build(dim, extents, counts));
}

Field::Field(GridPtr grid, int components)
    : grid_(std::move(grid)), components_(components) {
  if (!grid_) throw InvalidArgument("field: null grid");
  if (components < 1) throw InvalidArgument("field: components must be positive");
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_->size() * components));
}

Field::Field(GridPtr grid, Eigen::VectorXd values, int components)
    : grid_(std::move(grid)), values_(std::move(values)), components_(components) {
  if (!grid_) throw InvalidArgument("field: null grid");
  if (static_cast<std::size_t>(values_.size()) != grid_->size() * components)
    throw InvalidArgument("field: value count does not match grid");
  if (!values_.allFinite()) throw InvalidArgument("field: non-finite values");
}

Field Field::component(int c) const {
  const auto n = static_cast<Eigen::Index>(grid_->size());
  return Field(grid_, values_.segment(c * n, n));
}

void Field::require_scalar() const {
  if (!grid_) throw InvalidArgument("field: empty");
  if (components_ != 1) throw InvalidArgument("field: scalar field expected");
  if (!values_.allFinite()) throw InvalidArgument("field: non-finite values");
}

Field sample(const GridPtr& grid, const std::function<double(double, double)>& fn) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t k = 0; k < grid->size(); ++k)
    v[static_cast<Eigen::Index>(k)] = fn(grid->x(k), grid->y(k));
  return Field(grid, std::move(v));
}

double integrate(const Field& f) {
  f.require_scalar();
  return f.grid().quad_weights().dot(f.values());
}

double boundary_integrate(const Field& f) {
  f.require_scalar();
  return f.grid().bquad_weights().dot(f.values());
}

double l2_norm(const Field& f) {
  f.require_scalar();
  return std::sqrt(f.grid().quad_weights().dot(f.values().cwiseAbs2()));
}

void write_field_csv(std::ostream& os, const Field& f) {
  const Grid& g = f.grid();
  os << std::setprecision(17);
  os << "# grid dim=" << g.dim() << " nx=" << g.nx();
  if (g.dim() == 2) os << " ny=" << g.ny();
  os << " Lx=" << g.length(0);
  if (g.dim() == 2) os << " Ly=" << g.length(1);
  os << '\n';
  const auto n = static_cast<Eigen::Index>(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    os << g.ix(k);
    if (g.dim() == 2) os << ',' << g.iy(k);
    os << ',' << g.x(k);
    if (g.dim() == 2) os << ',' << g.y(k);
    for (int c = 0; c < f.components(); ++c)
      os << ',' << f.values()[c * n + static_cast<Eigen::Index>(k)];
    os << '\n';
  }
}

void write_field_csv(const std::string& path, const Field& f) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open " + path);
  write_field_csv(os, f);
}

}  // namespace chr
