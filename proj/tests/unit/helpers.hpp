#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qdgf/kernels.hpp"

namespace testing {

inline Eigen::MatrixXd random_symmetric(int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(gen);
  return 0.5 * (a + a.transpose());
}

inline Eigen::MatrixXd random_spd(int n, unsigned seed) {
  const Eigen::MatrixXd a = random_symmetric(n, seed);
  return a * a.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

/// Covariance Gram of the six helicity functionals (v(0), central-difference
/// curl at 0 with step h) evaluated directly from the kernel.
inline Eigen::MatrixXd stencil_gram(const qdgf::IsotropicFlowKernel& k, double h) {
  struct Term {
    Eigen::Vector3d x;
    int comp;
    double coef;
  };
  std::vector<std::vector<Term>> f(6);
  for (int m = 0; m < 3; ++m) f[static_cast<std::size_t>(m)].push_back({Eigen::Vector3d::Zero(), m, 1.0});
  for (int m = 0; m < 3; ++m) {
    const int a = (m + 1) % 3, b = (m + 2) % 3;  // (curl v)_m = d_a v_b - d_b v_a
    auto& t = f[static_cast<std::size_t>(3 + m)];
    t.push_back({h * Eigen::Vector3d::Unit(a), b, 0.5 / h});
    t.push_back({-h * Eigen::Vector3d::Unit(a), b, -0.5 / h});
    t.push_back({h * Eigen::Vector3d::Unit(b), a, -0.5 / h});
    t.push_back({-h * Eigen::Vector3d::Unit(b), a, 0.5 / h});
  }
  Eigen::MatrixXd gram(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double s = 0.0;
      for (const auto& p : f[i])
        for (const auto& q : f[j]) s += p.coef * q.coef * k.block(p.x - q.x)(p.comp, q.comp);
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
    }
  return gram;
}

}  // namespace testing
