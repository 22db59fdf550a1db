#include "qdgf/kernels.hpp"

#include <cmath>
#include <sstream>

#include "qdgf/errors.hpp"

namespace qdgf {

CovarianceKernel::CovarianceKernel(std::string name, int components, int required_dim, BlockFn fn)
    : name_(std::move(name)), components_(components), required_dim_(required_dim), fn_(std::move(fn)) {
  if (components_ < 1) throw InvalidArgument("kernel component count must be >= 1");
}

Eigen::MatrixXd CovarianceKernel::block(std::span<const double> separation) const {
  Eigen::MatrixXd b(components_, components_);
  std::vector<double> tmp(static_cast<std::size_t>(components_ * components_));
  fn_(separation, tmp);
  for (int i = 0; i < components_; ++i)
    for (int j = 0; j < components_; ++j) b(i, j) = tmp[static_cast<std::size_t>(i * components_ + j)];
  return b;
}

namespace {
double radius(std::span<const double> r) {
  double s = 0.0;
  for (double x : r) s += x * x;
  return std::sqrt(s);
}
}  // namespace

CovarianceKernel radial_kernel(std::string name, std::function<double(double)> profile) {
  return CovarianceKernel(std::move(name), 1, 0,
                          [profile = std::move(profile)](std::span<const double> sep, std::span<double> out) {
                            out[0] = profile(radius(sep));
                          });
}

CovarianceKernel gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian kernel needs sigma > 0");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return CovarianceKernel("gaussian", 1, 0, [inv](std::span<const double> sep, std::span<double> out) {
    double s = 0.0;
    for (double x : sep) s += x * x;
    out[0] = std::exp(-s * inv);
  });
}

CovarianceKernel exponential_kernel(double corr_length) {
  if (!(corr_length > 0.0)) throw InvalidArgument("exponential kernel needs corr_length > 0");
  return CovarianceKernel("exponential", 1, 0,
                          [corr_length](std::span<const double> sep, std::span<double> out) {
                            out[0] = std::exp(-radius(sep) / corr_length);
                          });
}

LongitudinalProfile gaussian_profile(double ell) {
  if (!(ell > 0.0)) throw InvalidArgument("Taylor microscale must be positive");
  const double a = 1.0 / (ell * ell);
  LongitudinalProfile p;
  p.name = "gaussian";
  p.f = [a](double x) { return std::exp(-0.5 * a * x * x); };
  p.df = [a](double x) { return -a * x * std::exp(-0.5 * a * x * x); };
  p.d2f = [a](double x) { return a * (a * x * x - 1.0) * std::exp(-0.5 * a * x * x); };
  return p;
}

LongitudinalProfile exponential_profile(double ell) {
  if (!(ell > 0.0)) throw InvalidArgument("Taylor microscale must be positive");
  LongitudinalProfile p;
  p.name = "exponential";
  p.f = [ell](double x) { return std::exp(-std::abs(x) / ell); };
  p.df = [ell](double x) { return -(x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0)) * std::exp(-std::abs(x) / ell) / ell; };
  p.d2f = [ell](double x) { return std::exp(-std::abs(x) / ell) / (ell * ell); };
  p.twice_differentiable = false;
  return p;
}

Eigen::Matrix3d IsotropicFlowKernel::block(const Eigen::Vector3d& sep) const {
  const double x = sep.norm();
  Eigen::Matrix3d b = (2.0 * energy / 3.0) * profile.f(x) * Eigen::Matrix3d::Identity();
  if (x > 0.0) {
    const Eigen::Vector3d e = sep / x;
    b += (energy / 3.0) * x * profile.df(x) * (Eigen::Matrix3d::Identity() - e * e.transpose());
  }
  return b;
}

CovarianceKernel IsotropicFlowKernel::as_kernel() const {
  return CovarianceKernel("flow_" + profile.name, 3, 3,
                          [self = *this](std::span<const double> sep, std::span<double> out) {
                            const Eigen::Matrix3d b = self.block(Eigen::Vector3d(sep[0], sep[1], sep[2]));
                            for (int i = 0; i < 3; ++i)
                              for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(3 * i + j)] = b(i, j);
                          });
}

IsotropicFlowKernel make_flow_kernel(double energy, double ell, LongitudinalProfile profile) {
  if (!(energy > 0.0)) throw InvalidArgument("flow kernel needs E > 0");
  if (!(ell > 0.0)) throw InvalidArgument("flow kernel needs ell > 0");
  if (!profile.twice_differentiable)
    throw InvalidArgument("flow kernel profile '" + profile.name + "' is not twice differentiable");
  if (std::abs(profile.f(0.0) - 1.0) > 1e-10) throw InvalidArgument("flow profile must satisfy f(0) = 1");
  if (std::abs(profile.df(0.0)) > 1e-10) throw InvalidArgument("flow profile must satisfy f'(0) = 0");
  for (double s : {1e-4, 1e-3, 1e-2}) {
    const double x = s * ell;
    const double remainder = std::abs(profile.f(x) - 1.0 + 0.5 * (x / ell) * (x / ell));
    if (remainder > std::pow(x / ell, 4)) {
      std::ostringstream os;
      os << "flow profile '" << profile.name << "' does not behave as 1 - x^2/2ell^2 near 0 (x = " << x
         << ", remainder " << remainder << ")";
      throw InvalidArgument(os.str());
    }
  }
  return IsotropicFlowKernel{energy, ell, std::move(profile)};
}

IsotropicFlowKernel make_flow_kernel(double energy, double ell) {
  return make_flow_kernel(energy, ell, gaussian_profile(ell));
}

}  // namespace qdgf
