#include "qdgf/tails.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qdgf/errors.hpp"
#include "qdgf/rng.hpp"

namespace qdgf {

namespace {

using cplx = std::complex<double>;

double order_scale(FieldKind kind) { return kind == FieldKind::complex ? 1.0 : 2.0; }

}  // namespace

EigenvalueProfile EigenvalueProfile::from_values(FieldKind kind, const std::vector<double>& values, double rel_tol) {
  double top = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("eigenvalues must be finite");
    top = std::max(top, std::abs(v));
  }
  std::vector<double> sorted;
  for (double v : values)
    if (std::abs(v) > rel_tol * top && v != 0.0) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  EigenvalueProfile p;
  p.kind = kind;
  for (double v : sorted) {
    if (!p.values.empty() && std::abs(v - p.values.back()) <= rel_tol * top) {
      ++p.multiplicities.back();
    } else {
      p.values.push_back(v);
      p.multiplicities.push_back(1);
    }
  }
  if (p.values.empty()) throw InvalidArgument("eigenvalue profile needs at least one nonzero eigenvalue");
  return p;
}

bool EigenvalueProfile::has_positive() const { return !values.empty() && values.front() > 0.0; }
bool EigenvalueProfile::has_negative() const { return !values.empty() && values.back() < 0.0; }
double EigenvalueProfile::lambda_one() const { return has_positive() ? values.front() : 0.0; }
int EigenvalueProfile::g_one() const { return has_positive() ? multiplicities.front() : 0; }

EigenvalueProfile EigenvalueProfile::mirrored() const {
  EigenvalueProfile p;
  p.kind = kind;
  for (std::size_t i = values.size(); i-- > 0;) {
    p.values.push_back(-values[i]);
    p.multiplicities.push_back(multiplicities[i]);
  }
  return p;
}

double EigenvalueProfile::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += multiplicities[i] * values[i];
  return m;
}

double EigenvalueProfile::variance() const {
  double v = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) v += multiplicities[i] * values[i] * values[i];
  return kind == FieldKind::complex ? v : 2.0 * v;
}

double EigenvalueProfile::total_order() const {
  double s = 0.0;
  for (int m : multiplicities) s += m;
  return s / order_scale(kind);
}

EigenvalueProfile full_profile(const SignedSpectrum& spectrum, double rel_tol) {
  const Eigen::VectorXd v = spectrum.values();
  return EigenvalueProfile::from_values(spectrum.kind, std::vector<double>(v.data(), v.data() + v.size()), rel_tol);
}

EigenvalueProfile fundamental_profile(const SignedSpectrum& spectrum, int sign) {
  const int g = spectrum.degeneracy(sign);
  if (g == 0) throw InvalidArgument("no fundamental eigenspace for this sign");
  // Leading cluster collapsed onto its representative value, then the
  // whole opposite branch.
  std::vector<double> vals(static_cast<std::size_t>(g), spectrum.leading(sign));
  const Eigen::VectorXd& other = sign > 0 ? spectrum.negative : spectrum.positive;
  for (Eigen::Index i = 0; i < other.size(); ++i) vals.push_back(other[i]);
  return EigenvalueProfile::from_values(spectrum.kind, vals);
}

namespace {

/// log of the characteristic function E[exp(i k Q)] at complex k, principal
/// branch per factor. On the contours used below every factor keeps a
/// positive real part or a fixed-sign imaginary part, so the principal
/// branch is continuous along the path.
cplx log_cf(const EigenvalueProfile& p, cplx k) {
  const double s = order_scale(p.kind);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i)
    acc -= (p.multiplicities[i] / s) * std::log(cplx(1.0, 0.0) - cplx(0.0, s) * k * p.values[i]);
  return acc;
}

constexpr double kSaddleWidths = 8.0;

struct ContourResult {
  double value = 0.0;
  double error = 0.0;
};

/// (1/pi) [ int_0^K Re h(x - i gamma) dx + int_gamma^inf Im h(K - i y) dy ],
/// which equals (1/2pi) times the integral of h along the deformed real line
/// when h(-conj k) = conj h(k). Takes log h; the modulus at the start point
/// is factored out so the quadrature sees O(1) values far in the tail.
template <class LogH>
ContourResult contour_integral(const LogH& log_h, double gamma, double K, double first_width, double ray_width) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr unsigned kDepth = 12;
  constexpr double kTol = 1e-11;
  ContourResult out;
  double total = 0.0, err_total = 0.0;
  double shift = log_h(cplx(0.0, -gamma)).real();
  if (!std::isfinite(shift)) shift = 0.0;
  auto h = [&](cplx k) { return std::exp(log_h(k) - shift); };
  // Relative tolerance per panel, floored at the roundoff level of the panel's
  // L1 norm. The exponent is O(|shift|) before the shift cancels, so the
  // integrand carries ~|shift| eps relative noise.
  const double noise = 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(shift));
  auto integrate_panel = [&](const auto& f, double lo, double hi, double& err) {
    double l1 = 0.0;
    const double rough = gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0.0, nullptr, &l1);
    const double floor = noise * l1;
    const double tol = std::abs(rough) > floor / kTol ? kTol : floor / std::max(std::abs(rough), 1e-300);
    return gauss_kronrod<double, 31>::integrate(f, lo, hi, kDepth, tol, &err);
  };

  auto horizontal = [&](double x) { return h(cplx(x, -gamma)).real(); };
  double a = 0.0;
  double w = std::min(first_width, K);
  while (a < K) {
    const double b = std::min(K, a + w);
    double err = 0.0;
    total += integrate_panel(horizontal, a, b, err);
    err_total += err;
    a = b;
    w *= 2.0;
  }

  auto ray = [&](double y) { return h(cplx(K, -y)).imag(); };
  double y0 = gamma;
  double width = ray_width;
  int quiet = 0;
  for (int panel = 0; panel < 400; ++panel) {
    double err = 0.0;
    const double part = integrate_panel(ray, y0, y0 + width, err);
    total += part;
    err_total += err;
    y0 += width;
    width *= 2.0;
    if (std::abs(part) <= 1e-15 * std::abs(total) + 1e-300) {
      if (++quiet == 2) break;
    } else {
      quiet = 0;
    }
    if (!std::isfinite(y0)) break;
  }
  const double scale = std::exp(shift) / std::numbers::pi;
  out.value = total * scale;
  out.error = err_total * scale;
  return out;
}

/// Density for v > 0 with at least one positive eigenvalue.
ContourResult pdf_positive(const EigenvalueProfile& p, double v) {
  const double s = order_scale(p.kind);
  const double a = 1.0 / (s * p.lambda_one());
  const double p1 = p.g_one() / s;
  const double gamma = std::max(0.0, a - p1 / v);
  // The horizontal leg only has to cover a few saddle widths; beyond that the
  // descent ray is smooth while the horizontal integrand would oscillate.
  const double K = std::min(a, kSaddleWidths * std::max(p1, 1.0) / v);
  const double first = std::min(K, gamma > 0.0 ? a - gamma : a);
  auto log_h = [&](cplx k) { return cplx(0.0, -1.0) * k * v + log_cf(p, k); };
  return contour_integral(log_h, gamma, K, first, std::min(K, 1.0 / v));
}

/// P(Q > u) for u >= 0 with at least one positive eigenvalue.
ContourResult survival_nonnegative(const EigenvalueProfile& p, double u) {
  const double s = order_scale(p.kind);
  const double a = 1.0 / (s * p.lambda_one());
  const double p1 = p.g_one() / s;
  double lo = 0.0, hi = a;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = -u - 1.0 / mid + p1 / (a - mid);
    (f < 0 ? lo : hi) = mid;
  }
  const double gamma = 0.5 * (lo + hi);
  const double K = u > 0.0 ? std::min(a, kSaddleWidths * std::max(p1, 1.0) / u) : a;
  const double first = std::min({gamma, a - gamma, K});
  auto log_h = [&](cplx k) { return cplx(0.0, -1.0) * k * u + log_cf(p, k) - std::log(cplx(0.0, 1.0) * k); };
  const double ray = u > 0.0 ? std::min(K, 1.0 / u) : K;
  return contour_integral(log_h, gamma, K, first, ray);
}

ContourResult survival(const EigenvalueProfile& p, double u) {
  if (u > 0.0 || (u == 0.0 && p.has_positive() && p.has_negative())) {
    if (!p.has_positive()) return {};
    return survival_nonnegative(p, u);
  }
  if (u == 0.0) return {p.has_positive() ? 1.0 : 0.0, 0.0};
  if (!p.has_negative()) return {1.0, 0.0};
  const ContourResult m = survival_nonnegative(p.mirrored(), -u);
  return {1.0 - m.value, m.error};
}

}  // namespace

double pdf_inversion(const EigenvalueProfile& p, double v) {
  if (!std::isfinite(v)) throw InvalidArgument("pdf argument must be finite");
  if (v > 0.0) return p.has_positive() ? pdf_positive(p, v).value : 0.0;
  if (v < 0.0) return p.has_negative() ? pdf_positive(p.mirrored(), -v).value : 0.0;
  if (p.total_order() <= 1.0)
    throw InvalidArgument("pdf at v = 0 is not finite for this profile (total order <= 1)");
  // Real axis, no exponential damping: the characteristic function decays
  // like |k|^{-total_order}.
  const double s = order_scale(p.kind);
  double top = 0.0;
  for (double l : p.values) top = std::max(top, std::abs(l));
  const double K = 1.0 / (s * top);
  auto log_h = [&](cplx k) { return log_cf(p, k); };
  return contour_integral(log_h, 0.0, K, K, K).value;
}

std::string to_string(TailMethod m) {
  switch (m) {
    case TailMethod::inversion: return "inversion";
    case TailMethod::closed_form: return "closed_form";
    case TailMethod::monte_carlo: return "monte_carlo";
  }
  return "?";
}

namespace {

double closed_form_tail(const EigenvalueProfile& p, double u) {
  if (p.kind != FieldKind::complex) throw InvalidArgument("closed form requires the complex kind");
  for (int m : p.multiplicities)
    if (m != 1) throw InvalidArgument("closed form needs distinct eigenvalues; use inversion");
  auto residue_weight = [&](std::size_t n) {
    double a = 1.0;
    for (std::size_t m = 0; m < p.values.size(); ++m)
      if (m != n) a *= p.values[n] / (p.values[n] - p.values[m]);
    return a;
  };
  double s = 0.0;
  if (u >= 0.0) {
    for (std::size_t n = 0; n < p.values.size(); ++n)
      if (p.values[n] > 0.0) s += residue_weight(n) * std::exp(-u / p.values[n]);
    return s;
  }
  for (std::size_t n = 0; n < p.values.size(); ++n)
    if (p.values[n] < 0.0) s += residue_weight(n) * std::exp(-u / p.values[n]);
  return 1.0 - s;
}

TailEstimate monte_carlo_tail(const EigenvalueProfile& p, double u, const TailOptions& opts) {
  if (opts.mc_draws == 0) throw InvalidArgument("Monte Carlo tail needs at least one draw");
  RngStream rng(opts.seed, opts.stream);
  std::size_t hits = 0;
  for (std::size_t d = 0; d < opts.mc_draws; ++d) {
    double q = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      double acc = 0.0;
      for (int m = 0; m < p.multiplicities[i]; ++m) {
        if (p.kind == FieldKind::complex) {
          acc += std::norm(rng.complex_normal());
        } else {
          const double z = rng.normal();
          acc += z * z;
        }
      }
      q += p.values[i] * acc;
    }
    if (q > u) ++hits;
  }
  const double n = static_cast<double>(opts.mc_draws);
  const double est = hits / n;
  return {est, 3.0 * std::sqrt(est * (1.0 - est) / n)};
}

}  // namespace

TailEstimate tail_probability(const EigenvalueProfile& p, double u, TailMethod method, const TailOptions& opts) {
  if (std::isnan(u)) throw InvalidArgument("threshold must not be NaN");
  if (std::isinf(u)) return {u > 0 ? 0.0 : 1.0, 0.0};
  switch (method) {
    case TailMethod::inversion: {
      const ContourResult r = survival(p, u);
      return {r.value, r.error};
    }
    case TailMethod::closed_form:
      return {closed_form_tail(p, u), 0.0};
    case TailMethod::monte_carlo:
      return monte_carlo_tail(p, u, opts);
  }
  throw InvalidArgument("unknown tail method");
}

namespace {

/// prod over every eigenvalue other than the leading one of
/// (1 - lambda_j / lambda_1)^{-m_j / s}; negatives_only restricts the product.
double leading_residue_product(const EigenvalueProfile& p, bool negatives_only) {
  const double s = order_scale(p.kind);
  const double l1 = p.lambda_one();
  double prod = 1.0;
  for (std::size_t j = 1; j < p.values.size(); ++j) {
    if (negatives_only && p.values[j] > 0.0) continue;
    prod *= std::pow(1.0 - p.values[j] / l1, -p.multiplicities[j] / s);
  }
  return prod;
}

}  // namespace

double pdf_asymptotic(const EigenvalueProfile& p, double v) {
  if (!p.has_positive()) throw InvalidArgument("asymptotic density needs a positive eigenvalue");
  if (!(v > 0.0)) throw InvalidArgument("asymptotic density needs v > 0");
  const double s = order_scale(p.kind);
  const double l1 = p.lambda_one();
  const double half_g = p.g_one() / s;
  const double x = v / (s * l1);
  return leading_residue_product(p, false) / std::tgamma(half_g) * std::pow(x, half_g - 1.0) * std::exp(-x) /
         (s * l1);
}

LowerBound tail_lower_bound(const EigenvalueProfile& p, double u, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (!p.has_positive()) throw InvalidArgument("tail lower bound needs a positive eigenvalue");
  const double s = order_scale(p.kind);
  const double l1 = p.lambda_one();
  const double half_g = p.g_one() / s;
  LowerBound lb;
  lb.c1 = std::pow(1.0 - alpha, s) / (std::tgamma(half_g) * std::pow(s * l1, half_g - 1.0)) *
          leading_residue_product(p, true);
  lb.bound = lb.c1 * std::pow(u, half_g - 1.0) * std::exp(-u / (s * l1));
  return lb;
}

AsymptoticOnset asymptotic_onset(const EigenvalueProfile& p, double band, int points) {
  if (!p.has_positive()) throw InvalidArgument("asymptotic onset needs a positive eigenvalue");
  if (points < 2) throw InvalidArgument("asymptotic scan needs at least 2 points");
  const double scale = order_scale(p.kind) * p.lambda_one();
  const double lo = 0.25 * scale;
  const double hi = 450.0 * scale;
  AsymptoticOnset out;
  for (int i = 0; i < points; ++i) {
    const double v = lo + (hi - lo) * i / (points - 1);
    out.v.push_back(v);
    out.ratio.push_back(pdf_inversion(p, v) / pdf_asymptotic(p, v));
  }
  std::size_t first_inside = out.v.size();
  for (std::size_t i = out.v.size(); i-- > 0;) {
    if (std::abs(out.ratio[i] - 1.0) > band) break;
    first_inside = i;
  }
  if (first_inside < out.v.size()) {
    out.found = true;
    out.v_star = out.v[first_inside];
  }
  return out;
}

}  // namespace qdgf
