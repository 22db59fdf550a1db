#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdgf/kernels.hpp"
#include "qdgf/sampling.hpp"

namespace qdgf {

struct ConcentrationOptions {
  double epsilon = 0.25;
  std::size_t samples_per_u = 2000;
  std::size_t pilot_draws = 100'000;
  SamplingMethod method = SamplingMethod::automatic;
  /// auto picks rejection when the pilot acceptance at u is at least this.
  double rejection_min_acceptance = 1e-3;
  /// Points whose ensemble ESS is below this are flagged unreliable.
  double min_ess = 30.0;
  std::uint64_t seed = 1;
  bool keep_ensembles = false;
  EnsembleOptions ensemble;
};

struct ConcentrationPoint {
  double u = 0.0;
  SamplingMethod method = SamplingMethod::rejection;
  double theta = 0.0;
  /// P_u(D > eps) with delta-method standard error.
  double p_exceed = 0.0;
  double p_error = 0.0;
  double median_distance = 0.0;
  double mean_q = 0.0;
  double ess = 0.0;
  double acceptance = 0.0;
  std::size_t proposals = 0;
  std::size_t samples = 0;
  double tail_probability = 0.0;
  double tail_error = 0.0;
  bool unreliable = false;
};

struct ConcentrationCurve {
  int sign = 1;
  double epsilon = 0.25;
  std::uint64_t seed = 1;
  std::vector<ConcentrationPoint> points;
  std::vector<ConditionalEnsemble> ensembles;  // filled when keep_ensembles
};

/// Quantiles of sign*Q from `draws` unconditional draws.
std::vector<double> pilot_quantiles(const SpectralSampler& sampler, int sign, const std::vector<double>& probs,
                                    std::size_t draws, std::uint64_t seed);
/// {q50, q90, q99, 2 q99, 4 q99} of sign*Q.
std::vector<double> default_thresholds(const SpectralSampler& sampler, int sign, std::size_t draws,
                                       std::uint64_t seed);

ConcentrationCurve concentration_curve(const SpectralSampler& sampler, int sign, const std::vector<double>& u,
                                       const ConcentrationOptions& opts = {});

/// Conditioning on |Q| > u with the fundamental field of the realized sign.
struct SignSplitResult {
  ConcentrationCurve plus;
  ConcentrationCurve minus;
  std::vector<double> u;
  std::vector<double> combined;        // (p+ m+ + p- m-) / (p+ + p-)
  std::vector<double> combined_error;
  std::vector<double> bound;           // m+ + m-
  std::vector<double> z;               // (m+ - m-) / sqrt(e+^2 + e-^2)
  bool symmetric = true;               // every |z| below the 1% two-sided critical value
};
SignSplitResult sign_split(const SpectralSampler& sampler, const std::vector<double>& u,
                           const ConcentrationOptions& opts = {});

/// Per-sample alignment of conditional draws with a predicted profile.
struct AlignmentReport {
  std::vector<double> errors;   // sqrt(2 - 2 |<p|phi>| / (||p|| ||phi||)) or the real analogue
  std::vector<double> phases;   // arg <p|phi>, complex kind only
  std::vector<double> weights;
  std::vector<double> cosines;  // helicity: fitted profile vs phi_bar
  double median_error = 0.0;
  double ks_statistic = 0.0;    // phases against the uniform law
  double min_cosine = 1.0;

  double fraction_below(double eps) const;
};

/// Complex or real alignment against a fixed profile. For the complex kind the
/// best global phase is removed and its distribution tested for uniformity.
AlignmentReport phase_alignment(const SpectralSampler& sampler, const ConditionalEnsemble& ensemble,
                                const Field& predicted);

/// Helicity alignment: e_t is read off phi_bar(0) and the analytic profile
/// u_sign(x; e_t) is compared with the whole sample.
AlignmentReport helicity_alignment(const SpectralSampler& sampler, const ConditionalEnsemble& ensemble,
                                   const IsotropicFlowKernel& kernel);

/// Weighted Kolmogorov-Smirnov distance of x in [0, 1) from the uniform law.
double ks_uniform(std::vector<double> x, std::vector<double> weights);

}  // namespace qdgf
