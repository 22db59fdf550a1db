#include "qdgf/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qdgf/errors.hpp"
#include "qdgf/exemplars.hpp"

namespace qdgf {
namespace {

constexpr double kTwoSidedOnePercent = 2.5758293035489004;

std::uint64_t pilot_stream(int sign) { return sign > 0 ? 1 : 2; }
std::uint64_t point_stream(int sign, std::size_t j) { return (sign > 0 ? 1000 : 2000) + j; }

std::vector<double> pilot_values(const SpectralSampler& sampler, int sign, std::size_t draws, std::uint64_t seed) {
  if (draws == 0) throw InvalidArgument("pilot needs at least one draw");
  RngStream rng(seed, pilot_stream(sign));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(sampler.nonzero_count());
  Eigen::VectorXcd nz;
  std::vector<double> q(draws);
  for (auto& v : q) {
    sampler.draw_nonzero(rng, ones, nz);
    v = sign * sampler.quadratic_value_nonzero(nz);
  }
  std::sort(q.begin(), q.end());
  return q;
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// diag(sqrt mu) U^T w for a weighted vector w: <w|phi> = coords^H a.
Eigen::VectorXcd mode_projection(const SpectralSampler& sampler, const Eigen::VectorXcd& weighted) {
  const CovarianceModes& modes = sampler.covariance().modes();
  Eigen::VectorXcd c = modes.vectors.transpose().cast<std::complex<double>>() * weighted;
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= std::sqrt(modes.mu[i]);
  return c;
}

double mode_norm(const SpectralSampler& sampler, const Eigen::VectorXcd& a) {
  const Eigen::VectorXd& mu = sampler.covariance().modes().mu;
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += mu[i] * std::norm(a[i]);
  return std::sqrt(s);
}

void finish_report(AlignmentReport& rep, bool with_phases) {
  if (rep.errors.empty()) return;
  rep.median_error = weighted_median(rep.errors, rep.weights);
  if (with_phases) rep.ks_statistic = ks_uniform(rep.phases, rep.weights);
  if (!rep.cosines.empty()) rep.min_cosine = *std::min_element(rep.cosines.begin(), rep.cosines.end());
}

}  // namespace

std::vector<double> pilot_quantiles(const SpectralSampler& sampler, int sign, const std::vector<double>& probs,
                                    std::size_t draws, std::uint64_t seed) {
  const auto q = pilot_values(sampler, sign, draws, seed);
  std::vector<double> out;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile level outside [0, 1]");
    out.push_back(sorted_quantile(q, p));
  }
  return out;
}

std::vector<double> default_thresholds(const SpectralSampler& sampler, int sign, std::size_t draws,
                                       std::uint64_t seed) {
  const auto q = pilot_quantiles(sampler, sign, {0.5, 0.9, 0.99}, draws, seed);
  return {q[0], q[1], q[2], 2.0 * q[2], 4.0 * q[2]};
}

ConcentrationCurve concentration_curve(const SpectralSampler& sampler, int sign, const std::vector<double>& u,
                                       const ConcentrationOptions& opts) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  if (!(opts.epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (opts.samples_per_u == 0) throw InvalidArgument("samples_per_u must be positive");
  if (sampler.spectrum().degeneracy(sign) == 0) throw InvalidArgument("no fundamental eigenspace for this sign");

  ConcentrationCurve curve;
  curve.sign = sign;
  curve.epsilon = opts.epsilon;
  curve.seed = opts.seed;

  std::vector<double> pilot;
  if (opts.method == SamplingMethod::automatic) pilot = pilot_values(sampler, sign, opts.pilot_draws, opts.seed);

  for (std::size_t j = 0; j < u.size(); ++j) {
    SamplingMethod method = opts.method;
    if (method == SamplingMethod::automatic) {
      const auto above = static_cast<double>(pilot.end() - std::upper_bound(pilot.begin(), pilot.end(), u[j]));
      method = above / static_cast<double>(pilot.size()) >= opts.rejection_min_acceptance ? SamplingMethod::rejection
                                                                                           : SamplingMethod::tilted;
    }
    RngStream rng(opts.seed, point_stream(sign, j));
    ConditionalEnsemble ens = conditional_ensemble(sampler, sign, u[j], method, opts.samples_per_u, rng, opts.ensemble);

    std::vector<double> exceed, dist, q, w;
    for (const auto& s : ens.samples) {
      const SampleGeometry g = sampler.geometry(s.t, sign);
      dist.push_back(g.distance);
      exceed.push_back(g.distance > opts.epsilon ? 1.0 : 0.0);
      q.push_back(s.q);
      w.push_back(s.weight);
    }
    ConcentrationPoint p;
    p.u = u[j];
    p.method = ens.method;
    p.theta = ens.theta;
    const WeightedMean m = weighted_mean(exceed, w);
    p.p_exceed = m.mean;
    p.p_error = m.error;
    p.median_distance = weighted_median(dist, w);
    p.mean_q = weighted_mean(q, w).mean;
    p.ess = ens.ess;
    p.acceptance = ens.acceptance_rate;
    p.proposals = ens.proposals;
    p.samples = ens.samples.size();
    p.tail_probability = ens.tail_probability;
    p.tail_error = ens.tail_error;
    p.unreliable = ens.ess < opts.min_ess;
    curve.points.push_back(p);
    if (opts.keep_ensembles) curve.ensembles.push_back(std::move(ens));
  }
  return curve;
}

SignSplitResult sign_split(const SpectralSampler& sampler, const std::vector<double>& u,
                           const ConcentrationOptions& opts) {
  const SignedSpectrum& s = sampler.spectrum();
  if (s.g_plus == 0 || s.g_minus == 0) throw InvalidArgument("sign split needs both branches of the spectrum");
  for (double v : u)
    if (!(v > 0.0)) throw InvalidArgument("sign split thresholds must be positive");
  SignSplitResult r;
  r.u = u;
  r.plus = concentration_curve(sampler, 1, u, opts);
  r.minus = concentration_curve(sampler, -1, u, opts);
  for (std::size_t j = 0; j < u.size(); ++j) {
    const auto& a = r.plus.points[j];
    const auto& b = r.minus.points[j];
    const double pp = a.tail_probability, pm = b.tail_probability;
    const double tot = pp + pm;
    if (!(tot > 0.0)) throw NumericalError("sign split: both tail estimates vanish");
    const double comb = (pp * a.p_exceed + pm * b.p_exceed) / tot;
    // Delta method over (p+, m+, p-, m-) treated as independent.
    const double d_pp = (a.p_exceed - comb) / tot, d_pm = (b.p_exceed - comb) / tot;
    const double var = std::pow(d_pp * a.tail_error, 2) + std::pow(pp / tot * a.p_error, 2) +
                       std::pow(d_pm * b.tail_error, 2) + std::pow(pm / tot * b.p_error, 2);
    r.combined.push_back(comb);
    r.combined_error.push_back(std::sqrt(var));
    r.bound.push_back(a.p_exceed + b.p_exceed);
    const double se = std::hypot(a.p_error, b.p_error);
    const double z = se > 0.0 ? (a.p_exceed - b.p_exceed) / se : (a.p_exceed == b.p_exceed ? 0.0 : INFINITY);
    r.z.push_back(z);
    if (std::abs(z) >= kTwoSidedOnePercent) r.symmetric = false;
  }
  return r;
}

double AlignmentReport::fraction_below(double eps) const {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    den += weights[i];
    if (errors[i] < eps) num += weights[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

double ks_uniform(std::vector<double> x, std::vector<double> weights) {
  if (x.size() != weights.size() || x.empty()) throw InvalidArgument("KS statistic needs matching, nonempty inputs");
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cdf = 0.0, d = 0.0;
  for (std::size_t i : idx) {
    d = std::max(d, std::abs(x[i] - cdf));
    cdf += weights[i] / total;
    d = std::max(d, std::abs(cdf - x[i]));
  }
  return d;
}

AlignmentReport phase_alignment(const SpectralSampler& sampler, const ConditionalEnsemble& ensemble,
                                const Field& predicted) {
  if (!predicted.grid_ptr()->same_layout(sampler.covariance().grid()))
    throw InvalidArgument("predicted profile lives on a different grid");
  const Eigen::VectorXcd c = mode_projection(sampler, predicted.weighted());
  const double pnorm = l2_norm(predicted);
  if (!(pnorm > 0.0)) throw InvalidArgument("predicted profile has zero norm");
  const bool complex = sampler.kind() == FieldKind::complex;

  AlignmentReport rep;
  for (const auto& s : ensemble.samples) {
    const Eigen::VectorXcd a = sampler.mode_coordinates(s.t);
    const double norm = mode_norm(sampler, a);
    if (!(norm > 0.0)) throw NumericalError("undefined alignment: zero-norm sample");
    const std::complex<double> z = c.dot(a);
    const double overlap = complex ? std::abs(z) : std::abs(z.real());
    rep.errors.push_back(std::sqrt(std::max(0.0, 2.0 - 2.0 * overlap / (pnorm * norm))));
    if (complex) rep.phases.push_back((std::arg(z) + M_PI) / (2.0 * M_PI));
    rep.weights.push_back(s.weight);
  }
  finish_report(rep, complex);
  return rep;
}

AlignmentReport helicity_alignment(const SpectralSampler& sampler, const ConditionalEnsemble& ensemble,
                                   const IsotropicFlowKernel& kernel) {
  const CovarianceOperator& cov = sampler.covariance();
  const GridPtr grid = cov.grid_ptr();
  if (grid->dim() != 3 || grid->components() != 3 || sampler.kind() != FieldKind::real)
    throw InvalidArgument("helicity alignment needs a real 3D vector field");
  const int sign = ensemble.sign;

  // Rows of U diag(sqrt mu) at the origin, scaled back to function values.
  const CovarianceModes& modes = cov.modes();
  const std::size_t o = grid->origin_node();
  Eigen::MatrixXd origin_rows(3, modes.mu.size());
  for (int m = 0; m < 3; ++m)
    origin_rows.row(m) = modes.vectors.row(static_cast<Eigen::Index>(grid->dof(o, m))).cwiseProduct(
                             modes.mu.cwiseSqrt().transpose()) /
                         std::sqrt(grid->weight(o));

  std::vector<Eigen::VectorXcd> c(3);
  Eigen::Matrix3d gamma;
  std::vector<Eigen::VectorXcd> basis(3);
  for (int l = 0; l < 3; ++l) {
    basis[static_cast<std::size_t>(l)] =
        helicity_prediction(kernel, grid, sign, Eigen::Vector3d::Unit(l)).weighted();
    c[static_cast<std::size_t>(l)] = mode_projection(sampler, basis[static_cast<std::size_t>(l)]);
  }
  for (int l = 0; l < 3; ++l)
    for (int g = 0; g < 3; ++g)
      gamma(l, g) = basis[static_cast<std::size_t>(l)].dot(basis[static_cast<std::size_t>(g)]).real();

  AlignmentReport rep;
  for (const auto& s : ensemble.samples) {
    const Eigen::VectorXcd a = sampler.mode_coordinates(s.t);
    const Eigen::VectorXcd abar = sampler.fundamental_coordinates(s.t, sign);
    const Eigen::Vector3d at_origin = (origin_rows * abar).real();
    const double on = at_origin.norm();
    if (!(on > 0.0)) throw NumericalError("undefined alignment: fundamental field vanishes at the origin");
    const Eigen::Vector3d e = at_origin / on;
    const double unorm = std::sqrt(e.dot(gamma * e));
    double ov = 0.0, ovbar = 0.0;
    for (int l = 0; l < 3; ++l) {
      ov += e[l] * c[static_cast<std::size_t>(l)].dot(a).real();
      ovbar += e[l] * c[static_cast<std::size_t>(l)].dot(abar).real();
    }
    const double norm = mode_norm(sampler, a);
    const double nbar = mode_norm(sampler, abar);
    rep.errors.push_back(std::sqrt(std::max(0.0, 2.0 - 2.0 * ov / (unorm * norm))));
    rep.cosines.push_back(ovbar / (unorm * nbar));
    rep.weights.push_back(s.weight);
  }
  finish_report(rep, false);
  return rep;
}

}  // namespace qdgf
