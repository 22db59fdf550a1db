#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qdgf {

enum class FieldKind { real, complex };

std::string to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& name);

/// Uniform tensor grid on the box [-L_1, L_1] x ... x [-L_d, L_d] with
/// trapezoidal quadrature weights. Point counts are odd so the origin is a node.
///
/// Degrees of freedom are laid out node-major: dof = node * N + component,
/// and nodes are ordered with the first axis varying slowest.
class Grid {
 public:
  Grid(std::vector<double> half_widths, std::vector<int> points_per_axis, int components,
       FieldKind kind);

  int dim() const { return static_cast<int>(half_widths_.size()); }
  int components() const { return components_; }
  FieldKind kind() const { return kind_; }
  bool is_complex() const { return kind_ == FieldKind::complex; }

  std::span<const double> half_widths() const { return half_widths_; }
  std::span<const int> points_per_axis() const { return points_; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }

  std::size_t node_count() const { return weights_.size(); }
  std::size_t dof_count() const { return weights_.size() * static_cast<std::size_t>(components_); }
  std::size_t origin_node() const { return origin_; }

  double weight(std::size_t node) const { return weights_[node]; }
  std::span<const double> weights() const { return weights_; }
  double volume() const;

  std::vector<int> multi_index(std::size_t node) const;
  std::size_t node_index(std::span<const int> multi) const;
  /// Signed offsets from the origin, in grid steps.
  std::vector<int> offset_from_origin(std::size_t node) const;
  /// Node reached from the origin by the given step offsets; throws when it
  /// falls outside the grid.
  std::size_t node_at_offset(std::span<const int> offset) const;
  std::vector<double> coordinates(std::size_t node) const;
  double coordinate(std::size_t node, int axis) const;

  std::size_t dof(std::size_t node, int component) const {
    return node * static_cast<std::size_t>(components_) + static_cast<std::size_t>(component);
  }

  /// sqrt(w) expanded to every degree of freedom.
  Eigen::VectorXd sqrt_weights_per_dof() const;

  bool same_layout(const Grid& other) const;

 private:
  std::vector<double> half_widths_;
  std::vector<int> points_;
  std::vector<double> spacing_;
  std::vector<double> weights_;
  std::vector<std::size_t> strides_;
  int components_;
  FieldKind kind_;
  std::size_t origin_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Validated constructor; rejects even point counts, fewer than 3 points per
/// axis and non-positive extents.
GridPtr build_grid(int dim, std::vector<double> half_widths, std::vector<int> points_per_axis,
                   int components, FieldKind kind);

/// A grid function: node-major values, one scalar per (node, component).
/// Real-kind fields carry zero imaginary parts.
class Field {
 public:
  explicit Field(GridPtr grid);
  Field(GridPtr grid, Eigen::VectorXcd values);

  static Field from_weighted(GridPtr grid, const Eigen::VectorXcd& weighted);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Eigen::VectorXcd& values() const { return values_; }
  std::complex<double> value(std::size_t node, int component) const {
    return values_[static_cast<Eigen::Index>(grid_->dof(node, component))];
  }

  /// Values scaled by sqrt(w) per node: the coordinates in which the
  /// quadrature inner product is the Euclidean one.
  Eigen::VectorXcd weighted() const;

 private:
  GridPtr grid_;
  Eigen::VectorXcd values_;
};

/// sum_m sum_i w_i conj(f_{m,i}) g_{m,i}
std::complex<double> inner_product(const Field& f, const Field& g);
double l2_norm(const Field& f);

}  // namespace qdgf
