#include "qdgf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include "qdgf/concentration.hpp"
#include "qdgf/errors.hpp"
#include "qdgf/exemplars.hpp"
#include "qdgf/io.hpp"
#include "qdgf/tails.hpp"

namespace qdgf::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum class KeyType { integer, number, text, number_list, integer_list };

struct KeySpec {
  std::string key;
  KeyType type;
  std::string help;
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"output_dir", KeyType::text, "output directory (default: $QDGF_OUTPUT_DIR or ./qdgf_out)"},
      {"seed", KeyType::integer, "random seed"},
      {"workers", KeyType::integer, "worker count, 0 = available cores"},
      {"dim", KeyType::integer, "grid dimension"},
      {"half_width", KeyType::number_list, "box half widths, one value or one per axis"},
      {"points", KeyType::integer_list, "odd points per axis, one value or one per axis"},
      {"kind", KeyType::text, "real or complex"},
      {"kernel", KeyType::text, "gaussian, exponential or flow"},
      {"sigma", KeyType::number, "gaussian kernel width"},
      {"corr_length", KeyType::number, "exponential kernel correlation length"},
      {"energy", KeyType::number, "flow kernel energy E"},
      {"taylor_scale", KeyType::number, "flow kernel Taylor microscale"},
      {"profile", KeyType::text, "flow longitudinal profile: gaussian or exponential"},
      {"observable", KeyType::text, "point, identity or helicity"},
      {"spectrum_path", KeyType::text, "auto, dense or low_rank"},
      {"tol_deg", KeyType::number, "relative degeneracy tolerance"},
      {"samples", KeyType::integer, "draws (sample) or conditional samples per threshold"},
      {"field_files", KeyType::integer, "number of draws written as field files"},
      {"u", KeyType::number_list, "conditioning or tail thresholds"},
      {"quantiles", KeyType::number_list, "thresholds as pilot quantiles of sign*Q"},
      {"epsilon", KeyType::number, "distance threshold"},
      {"method", KeyType::text, "auto, rejection or tilted"},
      {"pilot_draws", KeyType::integer, "unconditional pilot draws"},
      {"sign", KeyType::text, "+, - or both"},
      {"eigs", KeyType::number_list, "eigenvalues of the quadratic form"},
      {"tail_method", KeyType::text, "auto, inversion, closed_form, monte_carlo or all"},
      {"mc_draws", KeyType::integer, "Monte Carlo draws per threshold"},
      {"alpha", KeyType::number, "lower-bound parameter in (0, 1)"},
      {"h_list", KeyType::number_list, "stencil widths for the curl-curl check"},
      {"et", KeyType::number_list, "direction e_t of the predicted helicity profile"},
  };
  return keys;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : schema())
    if (k.key == key) return &k;
  return nullptr;
}

const std::vector<std::string> kCommon = {"output_dir", "seed", "workers"};
const std::vector<std::string> kProblem = {"dim", "half_width", "points", "kind", "kernel", "sigma",
                                           "corr_length", "energy", "taylor_scale", "profile", "observable",
                                           "spectrum_path", "tol_deg"};

struct Experiment {
  std::string name;
  std::string help;
  std::vector<std::string> keys;  // on top of kCommon
};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> list = {
      {"spectrum", "signed spectrum of the covariance-observable product", kProblem},
      {"sample", "unconditional KL draws", cat(kProblem, {"samples", "field_files"})},
      {"condition", "conditional ensemble at one threshold",
       cat(kProblem, {"samples", "u", "quantiles", "method", "pilot_draws", "sign"})},
      {"concentration", "P_u(D > eps) across thresholds",
       cat(kProblem, {"samples", "u", "quantiles", "epsilon", "method", "pilot_draws", "sign"})},
      {"tail", "tail probability and density of Q", {"kind", "eigs", "u", "tail_method", "mc_draws", "alpha"}},
      {"exemplar-point", "point-intensity exemplar", {"sigma", "half_width", "points", "kind"}},
      {"exemplar-helicity", "helicity exemplar",
       {"energy", "taylor_scale", "profile", "half_width", "points", "h_list", "et"}},
  };
  return list;
}

const Experiment& experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return e;
  throw InvalidArgument("unknown experiment '" + name + "'");
}

std::string kebab(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  out.push_back(item);
  return out;
}

json parse_flag(const KeySpec& spec, const std::string& raw) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) throw InvalidArgument("bad number '" + s + "' for key '" + spec.key + "'");
    return v;
  };
  auto integer = [&](const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) throw InvalidArgument("bad integer '" + s + "' for key '" + spec.key + "'");
    return v;
  };
  switch (spec.type) {
    case KeyType::integer:
      return integer(raw);
    case KeyType::number:
      return number(raw);
    case KeyType::text:
      return raw;
    case KeyType::number_list: {
      json a = json::array();
      if (!raw.empty())
        for (const auto& s : split_list(raw)) a.push_back(number(s));
      return a;
    }
    case KeyType::integer_list: {
      json a = json::array();
      if (!raw.empty())
        for (const auto& s : split_list(raw)) a.push_back(integer(s));
      return a;
    }
  }
  return raw;
}

// Checks a config-file value against the key type; scalars are promoted to
// one-element lists.
json check_value(const KeySpec& spec, const json& v) {
  auto bad = [&]() { return InvalidArgument("config key '" + spec.key + "' has the wrong type"); };
  switch (spec.type) {
    case KeyType::integer:
      if (!v.is_number_integer()) throw bad();
      return v;
    case KeyType::number:
      if (!v.is_number()) throw bad();
      return v;
    case KeyType::text:
      if (!v.is_string()) throw bad();
      return v;
    case KeyType::number_list:
    case KeyType::integer_list: {
      const bool ints = spec.type == KeyType::integer_list;
      auto ok = [&](const json& x) { return ints ? x.is_number_integer() : x.is_number(); };
      if (ok(v)) return json::array({v});
      if (!v.is_array()) throw bad();
      for (const auto& x : v)
        if (!ok(x)) throw bad();
      return v;
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Resolved configuration access.

class Config {
 public:
  Config(std::string experiment, json values) : experiment_(std::move(experiment)), v_(std::move(values)) {}

  const std::string& experiment() const { return experiment_; }
  const json& values() const { return v_; }
  bool has(const std::string& k) const { return v_.contains(k); }
  void set_default(const std::string& k, json value) {
    if (!v_.contains(k)) v_[k] = std::move(value);
  }

  long long integer(const std::string& k) const { return at(k).get<long long>(); }
  double number(const std::string& k) const { return at(k).get<double>(); }
  std::string text(const std::string& k) const { return at(k).get<std::string>(); }
  std::vector<double> numbers(const std::string& k) const { return at(k).get<std::vector<double>>(); }
  std::vector<int> integers(const std::string& k) const { return at(k).get<std::vector<int>>(); }

  std::size_t count(const std::string& k) const {
    const long long n = integer(k);
    if (n < 0) throw InvalidArgument("config key '" + k + "' must be non-negative");
    return static_cast<std::size_t>(n);
  }
  double positive(const std::string& k) const {
    const double x = number(k);
    if (!(x > 0.0)) throw InvalidArgument("config key '" + k + "' must be positive");
    return x;
  }

 private:
  const json& at(const std::string& k) const {
    if (!v_.contains(k)) throw InvalidArgument("missing config key '" + k + "'");
    return v_.at(k);
  }

  std::string experiment_;
  json v_;
};

void apply_defaults(Config& c) {
  const std::string& e = c.experiment();
  c.set_default("seed", e == "tail" ? 12345 : 1);
  c.set_default("workers", 0);
  const bool problem = e == "spectrum" || e == "sample" || e == "condition" || e == "concentration";
  if (problem) {
    c.set_default("kernel", "gaussian");
    const bool flow = c.text("kernel") == "flow";
    c.set_default("energy", 3.0);
    c.set_default("taylor_scale", 1.0);
    c.set_default("profile", "gaussian");
    c.set_default("sigma", 1.0);
    c.set_default("corr_length", 1.0);
    c.set_default("dim", flow ? 3 : 1);
    c.set_default("kind", flow ? "real" : "complex");
    c.set_default("half_width", json::array({flow ? 2.0 * c.number("taylor_scale") : 3.0}));
    c.set_default("points", json::array({flow ? 9 : 61}));
    c.set_default("observable", flow ? "helicity" : "point");
    c.set_default("spectrum_path", "auto");
    c.set_default("tol_deg", 1e-6);
  }
  if (e == "sample") {
    c.set_default("samples", 1000);
    c.set_default("field_files", 1);
  }
  if (e == "condition" || e == "concentration") {
    c.set_default("samples", 2000);
    c.set_default("u", json::array());
    c.set_default("quantiles", json::array());
    c.set_default("method", "auto");
    c.set_default("pilot_draws", 100000);
    c.set_default("sign", "+");
  }
  if (e == "concentration") c.set_default("epsilon", 0.25);
  if (e == "tail") {
    c.set_default("kind", "complex");
    c.set_default("eigs", json::array({2.0, 1.0}));
    c.set_default("u", json::array({1.0}));
    c.set_default("tail_method", "auto");
    c.set_default("mc_draws", 1000000);
    c.set_default("alpha", 0.5);
  }
  if (e == "exemplar-point") {
    c.set_default("sigma", 1.0);
    c.set_default("half_width", json::array({3.0 * c.number("sigma")}));
    c.set_default("points", json::array({61}));
    c.set_default("kind", "complex");
  }
  if (e == "exemplar-helicity") {
    c.set_default("energy", 3.0);
    c.set_default("taylor_scale", 1.0);
    c.set_default("profile", "gaussian");
    c.set_default("half_width", json::array({2.0 * c.number("taylor_scale")}));
    c.set_default("points", json::array({13}));
    c.set_default("h_list", json::array({0.1, 0.05, 0.025, 0.0125}));
    c.set_default("et", json::array({0.0, 0.0, 1.0}));
  }
}

// ---------------------------------------------------------------------------
// Output bookkeeping.

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void open() {
    std::error_code ec;
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_, ec);
      if (ec) throw InvalidArgument("cannot create output directory '" + dir_.string() + "'");
      created_ = true;
    }
  }
  std::string path(const std::string& name) {
    names_.push_back(name);
    return (dir_ / name).string();
  }
  const std::vector<std::string>& names() const { return names_; }
  const fs::path& dir() const { return dir_; }

  void discard() {
    std::error_code ec;
    for (const auto& n : names_) fs::remove(dir_ / n, ec);
    if (created_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

 private:
  fs::path dir_;
  bool created_ = false;
  std::vector<std::string> names_;
};

std::string fmt(double x) { return format_double(x); }

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Problem assembly.

std::vector<double> broadcast(std::vector<double> v, int dim, const std::string& key) {
  if (v.size() == 1) v.assign(static_cast<std::size_t>(dim), v[0]);
  if (v.size() != static_cast<std::size_t>(dim)) throw InvalidArgument("config key '" + key + "' needs 1 or dim values");
  return v;
}

std::vector<int> broadcast(std::vector<int> v, int dim, const std::string& key) {
  if (v.size() == 1) v.assign(static_cast<std::size_t>(dim), v[0]);
  if (v.size() != static_cast<std::size_t>(dim)) throw InvalidArgument("config key '" + key + "' needs 1 or dim values");
  return v;
}

LongitudinalProfile flow_profile(const Config& c) {
  const std::string p = c.text("profile");
  if (p == "gaussian") return gaussian_profile(c.positive("taylor_scale"));
  if (p == "exponential") return exponential_profile(c.positive("taylor_scale"));
  throw InvalidArgument("config key 'profile' must be gaussian or exponential");
}

struct Problem {
  GridPtr grid;
  std::optional<IsotropicFlowKernel> flow;
  std::optional<CovarianceKernel> scalar;
  std::unique_ptr<CovarianceOperator> cov;
  std::optional<QuadraticForm> form;
};

Problem build_problem(const Config& c, bool decompose) {
  Problem p;
  const std::string kernel = c.text("kernel");
  const auto dim = static_cast<int>(c.integer("dim"));
  if (dim < 1) throw InvalidArgument("config key 'dim' must be positive");
  const FieldKind kind = field_kind_from_string(c.text("kind"));
  int components = 1;
  if (kernel == "flow") {
    if (dim != 3 || kind != FieldKind::real) throw InvalidArgument("the flow kernel needs dim 3 and kind real");
    p.flow = make_flow_kernel(c.positive("energy"), c.positive("taylor_scale"), flow_profile(c));
    components = 3;
  } else if (kernel == "gaussian") {
    p.scalar = gaussian_kernel(c.positive("sigma"));
  } else if (kernel == "exponential") {
    p.scalar = exponential_kernel(c.positive("corr_length"));
  } else {
    throw InvalidArgument("config key 'kernel' must be gaussian, exponential or flow");
  }
  p.grid = build_grid(dim, broadcast(c.numbers("half_width"), dim, "half_width"),
                      broadcast(c.integers("points"), dim, "points"), components, kind);
  CovarianceAssembly opts;
  opts.materialize = decompose;
  opts.decompose = decompose;
  p.cov = std::make_unique<CovarianceOperator>(p.grid, p.flow ? p.flow->as_kernel() : *p.scalar, opts);

  const std::string obs = c.text("observable");
  if (obs == "point") p.form = point_intensity_form(p.grid);
  else if (obs == "identity") p.form = identity_form(p.grid);
  else if (obs == "helicity") p.form = helicity_form(p.grid);
  else throw InvalidArgument("config key 'observable' must be point, identity or helicity");
  return p;
}

SpectrumOptions spectrum_options(const Config& c) {
  SpectrumOptions o;
  o.tol_deg = c.positive("tol_deg");
  const std::string path = c.text("spectrum_path");
  if (path == "auto") o.path = SpectrumPath::automatic;
  else if (path == "dense") o.path = SpectrumPath::dense;
  else if (path == "low_rank") o.path = SpectrumPath::low_rank;
  else throw InvalidArgument("config key 'spectrum_path' must be auto, dense or low_rank");
  return o;
}

std::vector<int> signs_from(const Config& c, bool allow_both) {
  const std::string s = c.text("sign");
  if (s == "+" || s == "plus") return {1};
  if (s == "-" || s == "minus") return {-1};
  if (allow_both && s == "both") return {1, -1};
  throw InvalidArgument(std::string("config key 'sign' must be +, -") + (allow_both ? " or both" : ""));
}

std::string sign_name(int sign) { return sign > 0 ? "plus" : "minus"; }

// Spectrum table with the signed numbering n = +1, +2, ... and -1, -2, ...
void write_spectrum(const std::string& path, const Eigen::VectorXd& values, const std::vector<int>& clusters) {
  CsvTable t{{"n", "eigenvalue", "cluster"}, {}};
  int np = 0, nm = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int n = values[i] > 0.0 ? ++np : -(++nm);
    t.add_row({std::to_string(n), fmt(values[i]),
               std::to_string(clusters.empty() ? 0 : clusters[static_cast<std::size_t>(i)])});
  }
  t.write(path);
}

json spectrum_summary(const Eigen::VectorXd& values, int g_plus, int g_minus) {
  json s;
  s["nonzero_count"] = values.size();
  s["g_plus"] = g_plus;
  s["g_minus"] = g_minus;
  s["lambda_plus"] = g_plus ? json(values.maxCoeff()) : json(nullptr);
  s["lambda_minus"] = g_minus ? json(values.minCoeff()) : json(nullptr);
  s["trace_abs"] = values.cwiseAbs().sum();
  return s;
}

void write_basis_fields(Outputs& out, const FundamentalBasis& b, json& summary) {
  json files = json::array();
  for (int n = 0; n < b.degeneracy(); ++n) {
    const std::string name = "fundamental_" + sign_name(b.sign) + "_" + std::to_string(n) + ".field";
    write_field(out.path(name), b.field(n));
    files.push_back(name);
  }
  summary["fundamental_fields_" + sign_name(b.sign)] = files;
}

// ---------------------------------------------------------------------------
// Experiments. Each writes its artifacts and returns a JSON summary.

json run_spectrum(const Config& c, Outputs& out) {
  const SpectrumOptions opts = spectrum_options(c);
  const bool lazy = opts.path == SpectrumPath::low_rank;
  Problem p = build_problem(c, !lazy);
  json s;
  if (lazy) {
    const CoEigenpairs co = low_rank_spectrum(*p.cov, *p.form, opts);
    write_spectrum(out.path("spectrum.csv"), co.values, co.cluster_ids);
    s = spectrum_summary(co.values, co.g_plus, co.g_minus);
    s["path"] = "low_rank";
    s["max_residual"] = co.residuals.size() ? co.residuals.maxCoeff() : 0.0;
    for (int sign : {1, -1})
      if ((sign > 0 ? co.g_plus : co.g_minus) > 0) write_basis_fields(out, fundamental_basis(co, *p.cov, sign), s);
    return s;
  }
  const SignedSpectrum sp = build_m_spectrum(*p.cov, *p.form, opts);
  write_spectrum(out.path("spectrum.csv"), sp.values(), sp.cluster_ids);
  s = spectrum_summary(sp.values(), sp.g_plus, sp.g_minus);
  s["path"] = sp.low_rank ? "low_rank" : "dense";
  s["mode_count"] = sp.mode_count;
  s["zero_dimension"] = sp.zero_dimension();
  s["trace_product"] = sp.trace_product;
  s["dropped_covariance_modes"] = p.cov->modes().dropped;
  for (int sign : {1, -1})
    if (sp.degeneracy(sign) > 0) write_basis_fields(out, fundamental_basis(sp, *p.cov, sign), s);
  return s;
}

json run_sample(const Config& c, Outputs& out) {
  Problem p = build_problem(c, true);
  const SignedSpectrum sp = build_m_spectrum(*p.cov, *p.form, spectrum_options(c));
  const SpectralSampler sampler(*p.cov, sp);
  const std::size_t n = c.count("samples");
  const std::size_t files = c.count("field_files");
  RngStream rng(static_cast<std::uint64_t>(c.integer("seed")), 0);
  CsvTable t{{"index", "q", "norm"}, {}};
  double mean_q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const SpectralCoefficients coeffs = sampler.draw(rng);
    const double q = sampler.quadratic_value(coeffs);
    const Field f = sampler.reconstruct(coeffs);
    mean_q += q / static_cast<double>(n);
    t.add_row({std::to_string(i), fmt(q), fmt(l2_norm(f))});
    if (i < files) write_field(out.path("sample_" + std::to_string(i) + ".field"), f);
  }
  t.write(out.path("samples.csv"));
  json s;
  s["samples"] = n;
  s["mean_q"] = mean_q;
  s["expected_mean_q"] = sp.values().sum();
  return s;
}

std::vector<double> thresholds(const Config& c, const SpectralSampler& sampler, int sign) {
  const auto u = c.numbers("u");
  const auto q = c.numbers("quantiles");
  if (!u.empty() && !q.empty()) throw InvalidArgument("give either 'u' or 'quantiles', not both");
  if (!u.empty()) return u;
  const auto seed = static_cast<std::uint64_t>(c.integer("seed"));
  const std::size_t pilot = c.count("pilot_draws");
  if (!q.empty()) return pilot_quantiles(sampler, sign, q, pilot, seed);
  if (c.experiment() == "condition") return pilot_quantiles(sampler, sign, {0.99}, pilot, seed);
  return default_thresholds(sampler, sign, pilot, seed);
}

json run_condition(const Config& c, Outputs& out) {
  Problem p = build_problem(c, true);
  const SignedSpectrum sp = build_m_spectrum(*p.cov, *p.form, spectrum_options(c));
  const SpectralSampler sampler(*p.cov, sp);
  const int sign = signs_from(c, false)[0];
  const auto u = thresholds(c, sampler, sign);
  if (u.size() != 1) throw InvalidArgument("condition takes exactly one threshold");
  RngStream rng(static_cast<std::uint64_t>(c.integer("seed")), 1000);
  const ConditionalEnsemble ens = conditional_ensemble(sampler, sign, u[0], sampling_method_from_string(c.text("method")),
                                                       c.count("samples"), rng);
  CsvTable t{{"index", "q", "weight", "distance", "norm", "fundamental_norm"}, {}};
  for (std::size_t i = 0; i < ens.samples.size(); ++i) {
    const auto& smp = ens.samples[i];
    const SampleGeometry g = sampler.geometry(smp.t, sign);
    t.add_row({std::to_string(i), fmt(smp.q), fmt(smp.weight), fmt(g.distance), fmt(g.norm), fmt(g.fundamental_norm)});
  }
  t.write(out.path("ensemble.csv"));
  json s;
  s["u"] = u[0];
  s["sign"] = sign;
  s["method"] = to_string(ens.method);
  s["theta"] = ens.theta;
  s["proposals"] = ens.proposals;
  s["acceptance_rate"] = ens.acceptance_rate;
  s["ess"] = ens.ess;
  s["tail_probability"] = ens.tail_probability;
  s["tail_error"] = ens.tail_error;
  return s;
}

// Alignment against the exemplar prediction when the problem is one of the
// two exemplars; empty otherwise.
std::function<AlignmentReport(const ConditionalEnsemble&)> exemplar_alignment(const Config& c, const Problem& p,
                                                                               const SpectralSampler& sampler) {
  const std::string obs = c.text("observable");
  if (obs == "point" && p.scalar) {
    auto pred = std::make_shared<Field>(point_prediction(*p.scalar, p.grid).profile);
    return [&sampler, pred](const ConditionalEnsemble& e) { return phase_alignment(sampler, e, *pred); };
  }
  if (obs == "helicity" && p.flow) {
    const IsotropicFlowKernel k = *p.flow;
    return [&sampler, k](const ConditionalEnsemble& e) { return helicity_alignment(sampler, e, k); };
  }
  return {};
}

CsvTable curve_table(const ConcentrationCurve& curve, const std::vector<AlignmentReport>& align, bool phases,
                     bool helicity) {
  CsvTable t{{"u", "method", "theta", "p_exceed", "p_error", "median_distance", "mean_q", "ess", "acceptance",
              "proposals", "samples", "tail_probability", "tail_error", "unreliable"},
             {}};
  if (!align.empty()) {
    t.header.insert(t.header.end(), {"align_median", "align_fraction_below_eps"});
    if (phases) t.header.push_back("phase_ks");
    if (helicity) t.header.push_back("align_min_cosine");
  }
  for (std::size_t j = 0; j < curve.points.size(); ++j) {
    const auto& p = curve.points[j];
    std::vector<std::string> row = {fmt(p.u), to_string(p.method), fmt(p.theta), fmt(p.p_exceed), fmt(p.p_error),
                                    fmt(p.median_distance), fmt(p.mean_q), fmt(p.ess), fmt(p.acceptance),
                                    std::to_string(p.proposals), std::to_string(p.samples),
                                    fmt(p.tail_probability), fmt(p.tail_error), p.unreliable ? "1" : "0"};
    if (!align.empty()) {
      row.push_back(fmt(align[j].median_error));
      row.push_back(fmt(align[j].fraction_below(curve.epsilon)));
      if (phases) row.push_back(fmt(align[j].ks_statistic));
      if (helicity) row.push_back(fmt(align[j].min_cosine));
    }
    t.add_row(std::move(row));
  }
  return t;
}

json run_concentration(const Config& c, Outputs& out) {
  Problem p = build_problem(c, true);
  const SignedSpectrum sp = build_m_spectrum(*p.cov, *p.form, spectrum_options(c));
  const SpectralSampler sampler(*p.cov, sp);
  const auto signs = signs_from(c, true);
  ConcentrationOptions opts;
  opts.epsilon = c.positive("epsilon");
  opts.samples_per_u = c.count("samples");
  opts.pilot_draws = c.count("pilot_draws");
  opts.method = sampling_method_from_string(c.text("method"));
  opts.seed = static_cast<std::uint64_t>(c.integer("seed"));
  const auto align_fn = exemplar_alignment(c, p, sampler);
  opts.keep_ensembles = static_cast<bool>(align_fn);
  const bool phases = align_fn && sampler.kind() == FieldKind::complex && !p.flow;
  const bool helicity = align_fn && p.flow.has_value();

  json s;
  s["epsilon"] = opts.epsilon;
  auto emit = [&](ConcentrationCurve& curve) {
    std::vector<AlignmentReport> align;
    if (align_fn)
      for (const auto& e : curve.ensembles) align.push_back(align_fn(e));
    curve.ensembles.clear();
    curve_table(curve, align, phases, helicity).write(out.path("concentration_" + sign_name(curve.sign) + ".csv"));
    json pts = json::array();
    for (const auto& pt : curve.points) pts.push_back(pt.unreliable);
    s["unreliable_" + sign_name(curve.sign)] = pts;
  };

  if (signs.size() == 2) {
    const auto u = thresholds(c, sampler, 1);
    SignSplitResult r = sign_split(sampler, u, opts);
    emit(r.plus);
    emit(r.minus);
    CsvTable t{{"u", "combined", "combined_error", "bound", "z"}, {}};
    for (std::size_t j = 0; j < u.size(); ++j)
      t.add_row({fmt(u[j]), fmt(r.combined[j]), fmt(r.combined_error[j]), fmt(r.bound[j]), fmt(r.z[j])});
    t.write(out.path("sign_split.csv"));
    s["sign_symmetric"] = r.symmetric;
    return s;
  }
  const int sign = signs[0];
  ConcentrationCurve curve = concentration_curve(sampler, sign, thresholds(c, sampler, sign), opts);
  emit(curve);
  return s;
}

json run_tail(const Config& c, Outputs& out) {
  const FieldKind kind = field_kind_from_string(c.text("kind"));
  const EigenvalueProfile prof = EigenvalueProfile::from_values(kind, c.numbers("eigs"));
  if (prof.values.empty()) throw InvalidArgument("config key 'eigs' needs at least one nonzero eigenvalue");
  const std::string m = c.text("tail_method");
  const std::set<std::string> known = {"auto", "inversion", "closed_form", "monte_carlo", "all"};
  if (!known.count(m)) throw InvalidArgument("config key 'tail_method' must be one of auto, inversion, closed_form, monte_carlo, all");
  bool distinct = kind == FieldKind::complex;
  for (int mult : prof.multiplicities) distinct = distinct && mult == 1;
  const bool want_inv = m != "closed_form" && m != "monte_carlo";
  const bool want_cf = (m == "auto" && distinct) || m == "closed_form" || m == "all";
  const bool want_mc = m == "monte_carlo" || m == "all";
  const double alpha = c.number("alpha");
  TailOptions topts;
  topts.mc_draws = c.count("mc_draws");
  topts.seed = static_cast<std::uint64_t>(c.integer("seed"));

  CsvTable t{{"u", "inversion", "inversion_error", "closed_form", "monte_carlo", "monte_carlo_error", "lower_bound",
              "density", "density_asymptotic"},
             {}};
  const auto us = c.numbers("u");
  for (std::size_t j = 0; j < us.size(); ++j) {
    const double u = us[j];
    std::vector<std::string> row(t.header.size());
    row[0] = fmt(u);
    if (want_inv) {
      const TailEstimate e = tail_probability(prof, u, TailMethod::inversion);
      row[1] = fmt(e.value);
      row[2] = fmt(e.error);
    }
    if (want_cf) row[3] = fmt(tail_probability(prof, u, TailMethod::closed_form).value);
    if (want_mc) {
      topts.stream = j;
      const TailEstimate e = tail_probability(prof, u, TailMethod::monte_carlo, topts);
      row[4] = fmt(e.value);
      row[5] = fmt(e.error);
    }
    if (prof.has_positive() && u > 0.0) {
      row[6] = fmt(tail_lower_bound(prof, u, alpha).bound);
      row[8] = fmt(pdf_asymptotic(prof, u));
    }
    if (u != 0.0 || prof.total_order() > 1.0) row[7] = fmt(pdf_inversion(prof, u));
    t.add_row(std::move(row));
  }
  t.write(out.path("tail.csv"));
  json s;
  s["kind"] = to_string(kind);
  s["mean"] = prof.mean();
  s["variance"] = prof.variance();
  if (prof.has_positive()) {
    const AsymptoticOnset on = asymptotic_onset(prof);
    s["onset_found"] = on.found;
    s["v_star"] = on.found ? json(on.v_star) : json(nullptr);
  }
  return s;
}

json run_exemplar_point(const Config& c, Outputs& out) {
  const double sigma = c.positive("sigma");
  const auto hw = c.numbers("half_width");
  const auto pts = c.integers("points");
  if (hw.size() != 1 || pts.size() != 1) throw InvalidArgument("the point exemplar is one-dimensional");
  const GridPtr grid = build_grid(1, hw, pts, 1, field_kind_from_string(c.text("kind")));
  const CovarianceKernel kernel = gaussian_kernel(sigma);
  const CovarianceOperator cov(grid, kernel);
  const QuadraticForm form = point_intensity_form(grid);
  const SignedSpectrum sp = build_m_spectrum(cov, form);
  write_spectrum(out.path("spectrum.csv"), sp.values(), sp.cluster_ids);
  const FundamentalBasis basis = fundamental_basis(sp, cov, 1);
  const PointExemplarPrediction pred = point_prediction(kernel, grid);

  // Fix the global phase by the value at the origin, then compare with C(x)/sqrt(C(0)).
  const Field beta = basis.field(0);
  const std::complex<double> b0 = beta.value(grid->origin_node(), 0);
  const Field aligned(grid, beta.values() * (std::abs(b0) / b0));
  double sup = 0.0;
  for (std::size_t i = 0; i < grid->node_count(); ++i)
    sup = std::max(sup, std::abs(aligned.value(i, 0) - kernel.block(grid->coordinates(i))(0, 0) / std::sqrt(pred.lambda1)));
  write_field(out.path("profile.field"), aligned);
  write_field(out.path("prediction.field"), pred.profile);

  json s = spectrum_summary(sp.values(), sp.g_plus, sp.g_minus);
  s["lambda1"] = sp.leading(1);
  s["lambda1_predicted"] = pred.lambda1;
  s["lambda1_error"] = std::abs(sp.leading(1) - pred.lambda1);
  s["profile_cosine"] = std::abs(inner_product(pred.profile, aligned)) / l2_norm(aligned);
  s["beta_sup_error"] = sup;
  return s;
}

json run_exemplar_helicity(const Config& c, Outputs& out) {
  const double energy = c.positive("energy");
  const double ell = c.positive("taylor_scale");
  const IsotropicFlowKernel k = make_flow_kernel(energy, ell, flow_profile(c));
  const GridPtr grid = build_grid(3, broadcast(c.numbers("half_width"), 3, "half_width"),
                                  broadcast(c.integers("points"), 3, "points"), 3, FieldKind::real);
  CovarianceAssembly lazy;
  lazy.materialize = false;
  lazy.decompose = false;
  const CovarianceOperator cov(grid, k.as_kernel(), lazy);
  const QuadraticForm form = helicity_form(grid);
  const CoEigenpairs co = low_rank_spectrum(cov, form);
  write_spectrum(out.path("spectrum.csv"), co.values, co.cluster_ids);

  const HelicityExemplarPrediction pred = helicity_eigenvalues(energy, ell);
  const GramSpectrum analytic = gram_spectrum(helicity_analytic_gram(energy, ell), helicity_coefficients());
  json s = spectrum_summary(co.values, co.g_plus, co.g_minus);
  s["lambda_plus_predicted"] = pred.lambda_plus;
  s["lambda_minus_predicted"] = pred.lambda_minus;
  s["analytic_gram_eigenvalues"] = std::vector<double>(analytic.values.data(), analytic.values.data() + analytic.values.size());
  s["relative_discrepancy"] = co.g_plus ? std::abs(co.values[0] - pred.lambda_plus) / pred.lambda_plus : 1.0;
  s["trace_abs_predicted"] = std::sqrt(5.0) * energy / ell;

  CsvTable cc{{"nu", "h", "value", "limit", "error", "order"}, {}};
  for (int nu = 1; nu <= 3; ++nu) {
    const CurlCurlReport r = curl_curl_identity_check(k, nu, c.numbers("h_list"));
    for (std::size_t i = 0; i < r.h.size(); ++i)
      cc.add_row({std::to_string(nu), fmt(r.h[i]), fmt(r.value[i]), fmt(r.limit), fmt(r.error[i]),
                  i ? fmt(r.order[i - 1]) : ""});
  }
  cc.write(out.path("curl_curl.csv"));

  const auto et_v = c.numbers("et");
  if (et_v.size() != 3) throw InvalidArgument("config key 'et' needs 3 values");
  Eigen::Vector3d et(et_v[0], et_v[1], et_v[2]);
  if (!(et.norm() > 0.0)) throw InvalidArgument("config key 'et' must be nonzero");
  et.normalize();
  for (int sign : {1, -1}) {
    const std::string tag = sign_name(sign);
    const GramIdentityReport gr = gram_identity_check(cov, form, sign, energy, ell);
    s["gram_diagonal_" + tag] = std::vector<double>{gr.raw(0, 0), gr.raw(1, 1), gr.raw(2, 2)};
    s["gram_expected_diagonal"] = gr.expected_diagonal;
    s["gram_offdiagonal_ratio_" + tag] = gr.offdiagonal_ratio;
    write_field(out.path("prediction_" + tag + ".field"), helicity_prediction(k, grid, sign, et));
    if ((sign > 0 ? co.g_plus : co.g_minus) == 3) {
      const FundamentalBasis b = fundamental_basis(co, cov, sign);
      Eigen::MatrixXcd a(static_cast<Eigen::Index>(grid->dof_count()), 3);
      for (int l = 0; l < 3; ++l) a.col(l) = helicity_prediction(k, grid, sign, Eigen::Vector3d::Unit(l)).weighted();
      s["principal_angles_deg_" + tag] = principal_angles_degrees(b.betas, a);
    }
  }
  return s;
}

json dispatch(const Config& c, Outputs& out) {
  const std::string& e = c.experiment();
  if (e == "spectrum") return run_spectrum(c, out);
  if (e == "sample") return run_sample(c, out);
  if (e == "condition") return run_condition(c, out);
  if (e == "concentration") return run_concentration(c, out);
  if (e == "tail") return run_tail(c, out);
  if (e == "exemplar-point") return run_exemplar_point(c, out);
  if (e == "exemplar-helicity") return run_exemplar_helicity(c, out);
  throw InvalidArgument("unknown experiment '" + e + "'");
}

json versions() {
  json v;
  v["qdgf"] = QDGF_VERSION;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = BOOST_LIB_VERSION;
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  v["compiler"] = __VERSION__;
  return v;
}

Config resolve(const std::string& name, const std::string& config_path,
               const std::map<std::string, std::string>& flags) {
  const Experiment& exp = experiment(name);
  std::set<std::string> allowed(kCommon.begin(), kCommon.end());
  allowed.insert(exp.keys.begin(), exp.keys.end());

  json user = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw InvalidArgument("cannot open config file '" + config_path + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InvalidArgument(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!file.is_object()) throw InvalidArgument("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key == "experiment") {
        if (!value.is_string() || value.get<std::string>() != name)
          throw InvalidArgument("config key 'experiment' does not match the subcommand '" + name + "'");
        continue;
      }
      const KeySpec* spec = find_key(key);
      if (!spec) throw InvalidArgument("unknown config key '" + key + "'");
      if (!allowed.count(key)) throw InvalidArgument("config key '" + key + "' does not apply to " + name);
      user[key] = check_value(*spec, value);
    }
  }
  for (const auto& [key, raw] : flags) user[key] = parse_flag(*find_key(key), raw);

  Config c(name, std::move(user));
  apply_defaults(c);
  if (!c.has("output_dir")) {
    const char* env = std::getenv("QDGF_OUTPUT_DIR");
    c.set_default("output_dir", env && *env ? std::string(env) : std::string("qdgf_out"));
  }
  return c;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"qdgf: Gaussian random fields conditioned on a large quadratic form", "qdgf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QDGF_VERSION));

  std::string config_path;
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, CLI::App*> subs;
  for (const auto& exp : experiments()) {
    CLI::App* sub = app.add_subcommand(exp.name, exp.help);
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    std::vector<std::string> keys = kCommon;
    keys.insert(keys.end(), exp.keys.begin(), exp.keys.end());
    for (const auto& key : keys)
      sub->add_option("--" + kebab(key), raw[exp.name][key], find_key(key)->help);
    subs[exp.name] = sub;
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  std::map<std::string, std::string> flags;
  for (const auto& [key, value] : raw[name])
    if (subs[name]->get_option("--" + kebab(key))->count() > 0) flags[key] = value;

  std::unique_ptr<Outputs> out;
  try {
    Config c = resolve(name, config_path, flags);
    const long long workers = c.integer("workers");
    if (workers < 0) throw InvalidArgument("config key 'workers' must be non-negative");
    const unsigned resolved_workers =
        workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : static_cast<unsigned>(workers);

    out = std::make_unique<Outputs>(c.text("output_dir"));
    out->open();
    json summary = dispatch(c, *out);

    json manifest;
    manifest["experiment"] = name;
    manifest["config"] = c.values();
    manifest["seed"] = c.values().at("seed");
    manifest["workers"] = resolved_workers;
    manifest["versions"] = versions();
    manifest["outputs"] = out->names();
    manifest["summary"] = summary;
    manifest["created_utc"] = utc_timestamp();
    std::ofstream mf(out->path("manifest.json"));
    mf << manifest.dump(2) << "\n";
    if (!mf) throw InvalidArgument("failed writing manifest.json");
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const InvalidArgument& e) {
    if (out) out->discard();
    std::cerr << "qdgf: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    if (out) out->discard();
    std::cerr << "qdgf: numerical failure: " << e.what() << "\n";
    return 3;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace qdgf::cli
