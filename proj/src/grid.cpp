#include "qdgf/grid.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "qdgf/errors.hpp"

namespace qdgf {

std::string to_string(FieldKind kind) { return kind == FieldKind::real ? "real" : "complex"; }

FieldKind field_kind_from_string(const std::string& name) {
  if (name == "real") return FieldKind::real;
  if (name == "complex") return FieldKind::complex;
  throw InvalidArgument("unknown field kind '" + name + "' (expected real or complex)");
}

Grid::Grid(std::vector<double> half_widths, std::vector<int> points_per_axis, int components,
           FieldKind kind)
    : half_widths_(std::move(half_widths)),
      points_(std::move(points_per_axis)),
      components_(components),
      kind_(kind) {
  const std::size_t d = half_widths_.size();
  spacing_.resize(d);
  strides_.assign(d, 1);
  for (std::size_t k = d; k-- > 1;) strides_[k - 1] = strides_[k] * static_cast<std::size_t>(points_[k]);

  std::vector<std::vector<double>> axis_weights(d);
  for (std::size_t k = 0; k < d; ++k) {
    const int n = points_[k];
    spacing_[k] = 2.0 * half_widths_[k] / (n - 1);
    axis_weights[k].assign(static_cast<std::size_t>(n), spacing_[k]);
    axis_weights[k].front() = axis_weights[k].back() = 0.5 * spacing_[k];
  }

  const std::size_t count = strides_[0] * static_cast<std::size_t>(points_[0]);
  weights_.resize(count);
  for (std::size_t node = 0; node < count; ++node) {
    double w = 1.0;
    std::size_t rest = node;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t i = rest / strides_[k];
      rest %= strides_[k];
      w *= axis_weights[k][i];
    }
    weights_[node] = w;
  }

  std::vector<int> centre(d);
  for (std::size_t k = 0; k < d; ++k) centre[k] = points_[k] / 2;
  origin_ = node_index(centre);
}

double Grid::volume() const {
  double v = 1.0;
  for (double L : half_widths_) v *= 2.0 * L;
  return v;
}

std::vector<int> Grid::multi_index(std::size_t node) const {
  std::vector<int> idx(half_widths_.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    idx[k] = static_cast<int>(node / strides_[k]);
    node %= strides_[k];
  }
  return idx;
}

std::size_t Grid::node_index(std::span<const int> multi) const {
  std::size_t node = 0;
  for (std::size_t k = 0; k < multi.size(); ++k) {
    if (multi[k] < 0 || multi[k] >= points_[k]) throw InvalidArgument("grid index out of range");
    node += static_cast<std::size_t>(multi[k]) * strides_[k];
  }
  return node;
}

std::vector<int> Grid::offset_from_origin(std::size_t node) const {
  auto idx = multi_index(node);
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] -= points_[k] / 2;
  return idx;
}

std::size_t Grid::node_at_offset(std::span<const int> offset) const {
  std::vector<int> idx(offset.begin(), offset.end());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] += points_[k] / 2;
  return node_index(idx);
}

std::vector<double> Grid::coordinates(std::size_t node) const {
  auto idx = multi_index(node);
  std::vector<double> x(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) x[k] = -half_widths_[k] + idx[k] * spacing_[k];
  return x;
}

double Grid::coordinate(std::size_t node, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  const auto i = (node / strides_[a]) % static_cast<std::size_t>(points_[a]);
  return -half_widths_[a] + static_cast<double>(i) * spacing_[a];
}

Eigen::VectorXd Grid::sqrt_weights_per_dof() const {
  Eigen::VectorXd s(static_cast<Eigen::Index>(dof_count()));
  for (std::size_t node = 0; node < node_count(); ++node) {
    const double r = std::sqrt(weights_[node]);
    for (int m = 0; m < components_; ++m) s[static_cast<Eigen::Index>(dof(node, m))] = r;
  }
  return s;
}

bool Grid::same_layout(const Grid& other) const {
  return half_widths_ == other.half_widths_ && points_ == other.points_ &&
         components_ == other.components_ && kind_ == other.kind_;
}

GridPtr build_grid(int dim, std::vector<double> half_widths, std::vector<int> points_per_axis,
                   int components, FieldKind kind) {
  if (dim < 1) throw InvalidArgument("grid dimension must be >= 1");
  if (half_widths.size() == 1 && dim > 1) half_widths.assign(static_cast<std::size_t>(dim), half_widths[0]);
  if (points_per_axis.size() == 1 && dim > 1)
    points_per_axis.assign(static_cast<std::size_t>(dim), points_per_axis[0]);
  if (half_widths.size() != static_cast<std::size_t>(dim) ||
      points_per_axis.size() != static_cast<std::size_t>(dim))
    throw InvalidArgument("grid extents and point counts must have one entry per axis");
  if (components < 1) throw InvalidArgument("component count must be >= 1");
  for (double L : half_widths)
    if (!(L > 0.0) || !std::isfinite(L)) throw InvalidArgument("grid half-widths must be positive");
  for (int n : points_per_axis) {
    if (n < 3) throw InvalidArgument("each axis needs at least 3 points");
    if (n % 2 == 0) {
      std::ostringstream os;
      os << "points per axis must be odd so the origin is a node (got " << n << ")";
      throw InvalidArgument(os.str());
    }
  }
  return std::make_shared<const Grid>(std::move(half_widths), std::move(points_per_axis), components,
                                      kind);
}

Field::Field(GridPtr grid) : grid_(std::move(grid)) {
  values_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(grid_->dof_count()));
}

Field::Field(GridPtr grid, Eigen::VectorXcd values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != static_cast<Eigen::Index>(grid_->dof_count()))
    throw InvalidArgument("field value count does not match node_count x components");
  if (grid_->kind() == FieldKind::real) {
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (values_[i].imag() != 0.0) throw InvalidArgument("real-kind field has complex values");
  }
}

Field Field::from_weighted(GridPtr grid, const Eigen::VectorXcd& weighted) {
  const Eigen::VectorXd s = grid->sqrt_weights_per_dof();
  Eigen::VectorXcd v = weighted.array() / s.array().cast<std::complex<double>>();
  if (grid->kind() == FieldKind::real) v = v.real().cast<std::complex<double>>();
  return Field(std::move(grid), std::move(v));
}

Eigen::VectorXcd Field::weighted() const {
  return values_.array() * grid_->sqrt_weights_per_dof().array().cast<std::complex<double>>();
}

namespace {
void require_same_grid(const Field& f, const Field& g) {
  if (f.grid_ptr() != g.grid_ptr() && !f.grid().same_layout(g.grid()))
    throw InvalidArgument("fields live on different grids");
}
}  // namespace

std::complex<double> inner_product(const Field& f, const Field& g) {
  require_same_grid(f, g);
  const Grid& grid = f.grid();
  const int N = grid.components();
  std::complex<double> acc = 0.0;
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    std::complex<double> local = 0.0;
    for (int m = 0; m < N; ++m) local += std::conj(f.value(node, m)) * g.value(node, m);
    acc += grid.weight(node) * local;
  }
  return acc;
}

double l2_norm(const Field& f) { return std::sqrt(std::max(0.0, inner_product(f, f).real())); }

}  // namespace qdgf
