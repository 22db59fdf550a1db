#pragma once

#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace qdgf {

/// Stationary covariance C(x - y) returning an N x N block per separation.
/// Evaluation must satisfy C(-r) = C(r)^T.
class CovarianceKernel {
 public:
  using BlockFn = std::function<void(std::span<const double> separation, std::span<double> block)>;

  CovarianceKernel(std::string name, int components, int required_dim, BlockFn fn);

  const std::string& name() const { return name_; }
  int components() const { return components_; }
  /// 0 when the kernel works in any dimension.
  int required_dim() const { return required_dim_; }

  void evaluate(std::span<const double> separation, std::span<double> block) const {
    fn_(separation, block);
  }
  Eigen::MatrixXd block(std::span<const double> separation) const;

 private:
  std::string name_;
  int components_;
  int required_dim_;
  BlockFn fn_;
};

/// Isotropic scalar kernel from a radial profile C(|r|).
CovarianceKernel radial_kernel(std::string name, std::function<double(double)> profile);
/// exp(-|r|^2 / 2 sigma^2)
CovarianceKernel gaussian_kernel(double sigma);
/// exp(-|r| / corr_length); continuous but not differentiable at 0.
CovarianceKernel exponential_kernel(double corr_length);

/// Longitudinal correlation profile f(x) of an isotropic flow and its first two
/// derivatives. `twice_differentiable` is false for profiles with a cusp at 0.
struct LongitudinalProfile {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
  bool twice_differentiable = true;
};

/// f(x) = exp(-x^2 / 2 ell^2)
LongitudinalProfile gaussian_profile(double taylor_scale);
/// f(x) = exp(-|x| / ell); not C^2, rejected by the flow kernel.
LongitudinalProfile exponential_profile(double taylor_scale);

/// Covariance of a homogeneous isotropic incompressible flow,
///   C_{mu nu}(x) = (2E/3) f(x) delta + (E/3) x f'(x) (delta - x_mu x_nu / x^2).
struct IsotropicFlowKernel {
  double energy = 1.0;
  double taylor_scale = 1.0;
  LongitudinalProfile profile;

  /// 3x3 block at a separation; the x -> 0 limit of the second term is 0.
  Eigen::Matrix3d block(const Eigen::Vector3d& separation) const;
  CovarianceKernel as_kernel() const;
};

/// Checks f(0) = 1, f'(0) = 0, the 1 - x^2/2 ell^2 small-x behaviour and
/// twice differentiability. Throws InvalidArgument on failure.
IsotropicFlowKernel make_flow_kernel(double energy, double taylor_scale,
                                     LongitudinalProfile profile);
IsotropicFlowKernel make_flow_kernel(double energy, double taylor_scale);

}  // namespace qdgf
