#include "qdgf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qdgf/errors.hpp"

namespace qdgf {

namespace {
using cplx = std::complex<double>;
}

SpectralSampler::SpectralSampler(const CovarianceOperator& c, const SignedSpectrum& spectrum)
    : cov_(&c), spectrum_(spectrum), kind_(c.grid().kind()) {
  const CovarianceModes& modes = c.modes();
  if (modes.mu.size() != spectrum.mode_count)
    throw InvalidArgument("spectrum was built on a different covariance mode set");
  mu_ = modes.mu;
  lambda_ = spectrum.values();
  vectors_ = spectrum.vectors;
  qr_.compute(vectors_);
  const Eigen::Index r = lambda_.size();
  r_top_ = qr_.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
}

void SpectralSampler::check(const SpectralCoefficients& t) const {
  if (t.values.size() != mode_count()) {
    std::ostringstream os;
    os << "coefficient count " << t.values.size() << " does not match the " << mode_count() << " kept modes";
    throw InvalidArgument(os.str());
  }
  if (t.kind != kind_) throw InvalidArgument("coefficient kind does not match the field kind");
}

void SpectralSampler::draw_nonzero(RngStream& rng, const Eigen::VectorXd& scale, Eigen::VectorXcd& out) const {
  const Eigen::Index r = nonzero_count();
  out.resize(r);
  if (kind_ == FieldKind::complex) {
    for (Eigen::Index i = 0; i < r; ++i) out[i] = scale[i] * rng.complex_normal();
  } else {
    for (Eigen::Index i = 0; i < r; ++i) out[i] = scale[i] * rng.normal();
  }
}

SpectralCoefficients SpectralSampler::complete(const Eigen::VectorXcd& nonzero, RngStream& rng) const {
  SpectralCoefficients t;
  t.kind = kind_;
  t.values.resize(mode_count());
  const Eigen::Index r = nonzero_count();
  t.values.head(r) = nonzero;
  if (kind_ == FieldKind::complex) {
    for (Eigen::Index i = r; i < mode_count(); ++i) t.values[i] = rng.complex_normal();
  } else {
    for (Eigen::Index i = r; i < mode_count(); ++i) t.values[i] = rng.normal();
  }
  return t;
}

SpectralCoefficients SpectralSampler::draw(RngStream& rng) const {
  Eigen::VectorXcd nz;
  draw_nonzero(rng, Eigen::VectorXd::Ones(nonzero_count()), nz);
  return complete(nz, rng);
}

double SpectralSampler::quadratic_value_nonzero(const Eigen::VectorXcd& t) const {
  double q = 0.0;
  for (Eigen::Index i = 0; i < lambda_.size(); ++i) q += lambda_[i] * std::norm(t[i]);
  return q;
}

double SpectralSampler::quadratic_value(const SpectralCoefficients& t) const {
  check(t);
  return quadratic_value_nonzero(t.values.head(nonzero_count()));
}

Eigen::VectorXcd SpectralSampler::mode_coordinates(const SpectralCoefficients& t) const {
  check(t);
  const Eigen::Index r = nonzero_count();
  Eigen::VectorXcd y = t.values;
  y.head(r) = r_top_ * t.values.head(r);
  return qr_.householderQ() * y;
}

Eigen::VectorXcd SpectralSampler::fundamental_coordinates(const SpectralCoefficients& t, int sign) const {
  check(t);
  const int g = spectrum_.degeneracy(sign);
  if (g == 0) throw InvalidArgument("no fundamental eigenspace for this sign");
  const Eigen::Index off = spectrum_.branch_offset(sign);
  return vectors_.middleCols(off, g) * t.values.segment(off, g);
}

Field SpectralSampler::field_from_coordinates(const Eigen::VectorXcd& a) const {
  const CovarianceModes& modes = cov_->modes();
  const Eigen::VectorXcd scaled = a.array() * mu_.array().sqrt().cast<cplx>();
  return Field::from_weighted(cov_->grid_ptr(), modes.vectors.cast<cplx>() * scaled);
}

Field SpectralSampler::reconstruct(const SpectralCoefficients& t) const {
  return field_from_coordinates(mode_coordinates(t));
}

Field SpectralSampler::fundamental_projection(const SpectralCoefficients& t, int sign) const {
  return field_from_coordinates(fundamental_coordinates(t, sign));
}

SampleGeometry SpectralSampler::geometry(const SpectralCoefficients& t, int sign) const {
  const Eigen::VectorXcd a = mode_coordinates(t);
  const Eigen::VectorXcd abar = fundamental_coordinates(t, sign);
  double nn = 0.0, nf = 0.0, nr = 0.0, ov = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    nn += mu_[i] * std::norm(a[i]);
    nf += mu_[i] * std::norm(abar[i]);
    nr += mu_[i] * std::norm(a[i] - abar[i]);
    ov += mu_[i] * (std::conj(abar[i]) * a[i]).real();
  }
  SampleGeometry g;
  g.q = quadratic_value(t);
  g.norm = std::sqrt(nn);
  g.fundamental_norm = std::sqrt(nf);
  g.residual_norm = std::sqrt(nr);
  g.overlap = ov;
  if (!(g.norm > 0.0) || !(g.fundamental_norm > 0.0))
    throw NumericalError("undefined distance: zero-norm field or fundamental projection");
  g.distance = std::sqrt(std::max(0.0, 2.0 - 2.0 * ov / (g.norm * g.fundamental_norm)));
  return g;
}

std::vector<SpectralCoefficients> sample_coefficients(RngStream& rng, const SpectralSampler& sampler,
                                                      std::size_t count) {
  std::vector<SpectralCoefficients> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.draw(rng));
  return out;
}

Field reconstruct_field(const SpectralCoefficients& t, const SpectralSampler& sampler) {
  return sampler.reconstruct(t);
}

double quadratic_value(const SpectralCoefficients& t, const SpectralSampler& sampler) {
  return sampler.quadratic_value(t);
}

Field fundamental_projection(const SpectralCoefficients& t, const SignedSpectrum& spectrum,
                             const FundamentalBasis& basis) {
  const int g = basis.degeneracy();
  if (g != spectrum.degeneracy(basis.sign)) throw InvalidArgument("basis does not match the spectrum");
  if (t.values.size() != spectrum.mode_count) throw InvalidArgument("coefficient count mismatch");
  const Eigen::Index off = spectrum.branch_offset(basis.sign);
  return Field::from_weighted(basis.grid, basis.betas * t.values.segment(off, g));
}

Field residual(const Field& phi, const Field& phi_bar) {
  if (!phi.grid().same_layout(phi_bar.grid())) throw InvalidArgument("fields live on different grids");
  return Field(phi.grid_ptr(), phi.values() - phi_bar.values());
}

double distance_statistic(const Field& phi, const Field& phi_bar) {
  const double a = l2_norm(phi);
  const double b = l2_norm(phi_bar);
  if (!(a > 0.0) || !(b > 0.0)) throw NumericalError("undefined distance: zero-norm field");
  const Field diff(phi.grid_ptr(), phi.values() / a - phi_bar.values() / b);
  return l2_norm(diff);
}

std::string to_string(SamplingMethod m) {
  switch (m) {
    case SamplingMethod::automatic: return "auto";
    case SamplingMethod::rejection: return "rejection";
    case SamplingMethod::tilted: return "tilted";
  }
  return "?";
}

SamplingMethod sampling_method_from_string(const std::string& s) {
  if (s == "auto") return SamplingMethod::automatic;
  if (s == "rejection") return SamplingMethod::rejection;
  if (s == "tilted") return SamplingMethod::tilted;
  throw InvalidArgument("unknown sampling method '" + s + "' (expected auto, rejection or tilted)");
}

namespace {

double tilted_mean(const Eigen::VectorXd& lp, double theta, double c) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) m += lp[i] / (1.0 - c * theta * lp[i]);
  return m;
}

}  // namespace

double tilt_parameter(const Eigen::VectorXd& lambda, int sign, double u, FieldKind kind) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const Eigen::VectorXd lp = sign * lambda;
  const double top = lp.size() ? lp.maxCoeff() : 0.0;
  if (!(top > 0.0)) throw InvalidArgument("tilt needs a nonempty branch for this sign");
  const double c = kind == FieldKind::complex ? 1.0 : 2.0;
  if (u <= tilted_mean(lp, 0.0, c)) return 0.0;
  const double cap = (1.0 - 1e-6) / (c * top);
  if (tilted_mean(lp, cap, c) < u) {
    std::ostringstream os;
    os << "tilt infeasible: threshold " << u << " exceeds the tilted mean at the cap";
    throw NumericalError(os.str());
  }
  double lo = 0.0, hi = cap;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (tilted_mean(lp, mid, c) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double tilt_log_normalizer(const Eigen::VectorXd& lambda, int sign, double theta, FieldKind kind) {
  const double c = kind == FieldKind::complex ? 1.0 : 2.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) s -= std::log1p(-c * theta * sign * lambda[i]);
  return kind == FieldKind::complex ? s : 0.5 * s;
}

ConditionalEnsemble conditional_ensemble(const SpectralSampler& sampler, int sign, double u, SamplingMethod method,
                                         std::size_t count, RngStream& rng, const EnsembleOptions& opts) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  if (sampler.spectrum().degeneracy(sign) == 0) throw InvalidArgument("no fundamental eigenspace for this sign");
  const FieldKind kind = sampler.kind();
  const Eigen::VectorXd& lambda = sampler.eigenvalues();

  ConditionalEnsemble ens;
  ens.sign = sign;
  ens.threshold = u;
  if (method == SamplingMethod::automatic)
    method = tilt_parameter(lambda, sign, u, kind) > 0.0 ? SamplingMethod::tilted : SamplingMethod::rejection;
  ens.method = method;
  const bool tilted = method == SamplingMethod::tilted;
  ens.theta = tilted ? tilt_parameter(lambda, sign, u, kind) : 0.0;

  const double c = kind == FieldKind::complex ? 1.0 : 2.0;
  Eigen::VectorXd scale(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) scale[i] = 1.0 / std::sqrt(1.0 - c * ens.theta * sign * lambda[i]);
  const double log_z = tilt_log_normalizer(lambda, sign, ens.theta, kind);

  double sum_h = 0.0, sum_h2 = 0.0;
  Eigen::VectorXcd nz;
  ens.samples.reserve(count);
  while (ens.samples.size() < count) {
    if (ens.proposals >= opts.max_proposals) {
      std::ostringstream os;
      os << "conditional sampler exceeded " << opts.max_proposals << " proposals with " << ens.samples.size()
         << " acceptances at u = " << u;
      throw NumericalError(os.str());
    }
    if (!tilted && ens.proposals >= 10'000'000 && ens.samples.size() < 10)
      throw NumericalError("rejection acceptance below 1e-6 (fewer than 10 acceptances in 1e7 draws); use the tilted method");
    ++ens.proposals;
    sampler.draw_nonzero(rng, scale, nz);
    const double q = sampler.quadratic_value_nonzero(nz);
    if (!(sign * q > u)) continue;
    if (tilted) {
      const double h = std::exp(log_z - ens.theta * sign * q);
      sum_h += h;
      sum_h2 += h * h;
    }
    EnsembleSample s;
    s.t = sampler.complete(nz, rng);
    s.q = q;
    s.weight = tilted ? std::exp(-ens.theta * (sign * q - u)) : 1.0;
    ens.samples.push_back(std::move(s));
  }

  const auto n = static_cast<double>(ens.proposals);
  ens.acceptance_rate = ens.proposals ? static_cast<double>(ens.samples.size()) / n : 0.0;
  if (ens.proposals) {
    if (tilted) {
      ens.tail_probability = sum_h / n;
      ens.tail_error = std::sqrt(std::max(0.0, sum_h2 / n - ens.tail_probability * ens.tail_probability) / n);
    } else {
      ens.tail_probability = ens.acceptance_rate;
      ens.tail_error = std::sqrt(ens.acceptance_rate * (1.0 - ens.acceptance_rate) / n);
    }
  }
  std::vector<double> w;
  w.reserve(ens.samples.size());
  for (const auto& s : ens.samples) w.push_back(s.weight);
  ens.ess = effective_sample_size(w);
  return ens;
}

double effective_sample_size(const std::vector<double>& weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

WeightedMean weighted_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.size() != weights.size() || values.empty()) throw InvalidArgument("weighted mean needs matching, nonempty inputs");
  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sw += weights[i];
    swy += weights[i] * values[i];
  }
  WeightedMean out;
  out.mean = swy / sw;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = weights[i] * (values[i] - out.mean);
    var += d * d;
  }
  out.error = std::sqrt(var) / sw;
  return out;
}

double weighted_median(std::vector<double> values, std::vector<double> weights) {
  if (values.size() != weights.size() || values.empty()) throw InvalidArgument("weighted median needs matching, nonempty inputs");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double acc = 0.0;
  for (std::size_t i : idx) {
    acc += weights[i];
    if (acc >= 0.5 * total) return values[i];
  }
  return values[idx.back()];
}

}  // namespace qdgf
