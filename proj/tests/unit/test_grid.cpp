#include <doctest.h>

#include <cmath>

#include "qdgf/errors.hpp"
#include "qdgf/grid.hpp"

using namespace qdgf;

TEST_CASE("trapezoid weights on three points") {
  auto g = build_grid(1, {1.0}, {3}, 1, FieldKind::real);
  CHECK(g->weight(0) == doctest::Approx(0.5));
  CHECK(g->weight(1) == doctest::Approx(1.0));
  CHECK(g->weight(2) == doctest::Approx(0.5));
  CHECK(g->volume() == doctest::Approx(2.0));
  CHECK(g->origin_node() == 1);
}

TEST_CASE("weights sum to the box volume") {
  CHECK(build_grid(2, {1.0, 1.0}, {3, 3}, 1, FieldKind::real)->volume() == doctest::Approx(4.0).epsilon(1e-12));
  auto g = build_grid(3, {2, 2, 2}, {13, 13, 13}, 3, FieldKind::real);
  CHECK(g->volume() == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(g->node_count() == 2197);
  CHECK(g->dof_count() == 3 * 2197);
  for (double w : g->weights()) CHECK(w > 0.0);
  auto anis = build_grid(2, {1.0, 3.5}, {5, 9}, 2, FieldKind::complex);
  double s = 0.0;
  for (double w : anis->weights()) s += w;
  CHECK(s == doctest::Approx(14.0).epsilon(1e-12));
}

TEST_CASE("origin is a node and indexing round-trips") {
  auto g = build_grid(3, {1, 2, 3}, {5, 3, 7}, 1, FieldKind::real);
  for (int k = 0; k < 3; ++k) CHECK(g->coordinate(g->origin_node(), k) == 0.0);
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    const auto idx = g->multi_index(i);
    CHECK(g->node_index(idx) == i);
    CHECK(g->node_at_offset(g->offset_from_origin(i)) == i);
  }
  const std::vector<int> out = {3, 0, 0};
  CHECK_THROWS_AS(g->node_at_offset(out), InvalidArgument);
}

TEST_CASE("grid preconditions") {
  CHECK_THROWS_AS(build_grid(1, {1.0}, {4}, 1, FieldKind::real), InvalidArgument);
  CHECK_THROWS_AS(build_grid(1, {1.0}, {1}, 1, FieldKind::real), InvalidArgument);
  CHECK_THROWS_AS(build_grid(1, {0.0}, {3}, 1, FieldKind::real), InvalidArgument);
  CHECK_THROWS_AS(build_grid(3, {1.0, 2.0}, {3}, 1, FieldKind::real), InvalidArgument);
  // a single extent or point count is broadcast to every axis
  CHECK(build_grid(2, {1.0}, {3, 5}, 1, FieldKind::real)->half_widths()[1] == 1.0);
  CHECK_THROWS_AS(build_grid(1, {1.0}, {3}, 0, FieldKind::real), InvalidArgument);
}

TEST_CASE("inner product and norm") {
  auto g = build_grid(1, {1.0}, {3}, 1, FieldKind::complex);
  const Field one(g, Eigen::VectorXcd::Ones(3));
  CHECK(inner_product(one, one).real() == doctest::Approx(2.0));
  CHECK(l2_norm(one) == doctest::Approx(std::sqrt(2.0)));
  CHECK(l2_norm(Field(g)) == 0.0);

  const Field f(g, std::complex<double>(0, 1) * one.values());
  const auto ip = inner_product(f, one);
  CHECK(ip.real() == doctest::Approx(0.0));
  CHECK(ip.imag() == doctest::Approx(-2.0));

  auto g3 = build_grid(3, {2, 2, 2}, {13, 13, 13}, 3, FieldKind::real);
  const Field c(g3, Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(g3->dof_count())));
  CHECK(l2_norm(c) == doctest::Approx(std::sqrt(3.0 * 64.0)).epsilon(1e-12));
}

TEST_CASE("Gram-Schmidt pair is orthogonal in the weighted product") {
  auto g = build_grid(1, {1.0}, {11}, 1, FieldKind::real);
  Eigen::VectorXcd p0 = Eigen::VectorXcd::Ones(11), p1(11);
  for (Eigen::Index i = 0; i < 11; ++i) p1[i] = g->coordinate(static_cast<std::size_t>(i), 0) + 0.3;
  const Field f0(g, p0);
  Field f1(g, p1);
  const auto proj = inner_product(f0, f1) / inner_product(f0, f0);
  f1 = Field(g, p1 - proj * p0);
  CHECK(std::abs(inner_product(f0, f1)) < 1e-12);
}

TEST_CASE("real fields reject imaginary parts and weighted coordinates round-trip") {
  auto g = build_grid(1, {1.0}, {5}, 1, FieldKind::real);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(5);
  v[1] = {0.0, 1.0};
  CHECK_THROWS_AS(Field(g, v), InvalidArgument);
  CHECK_THROWS_AS(Field(g, Eigen::VectorXcd::Zero(4)), InvalidArgument);
  Eigen::VectorXcd r(5);
  r << 1, 2, 3, 4, 5;
  const Field f(g, r);
  const Field back = Field::from_weighted(g, f.weighted());
  CHECK((back.values() - r).norm() < 1e-14);
}
