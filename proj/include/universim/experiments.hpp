#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "universim/distributions.hpp"
#include "universim/errors.hpp"
#include "universim/nonuniversal.hpp"
#include "universim/numeric.hpp"
#include "universim/squeeze.hpp"
#include "universim/universal_ac.hpp"
#include "universim/universal_types.hpp"

namespace universim {

struct ConfigError : Error {
  using Error::Error;
};

enum class Experiment { sawtooth_sweep, quantized_seed, type_decay, markov_decay, squeeze_sweep, clt_baseline };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::sawtooth_sweep: return "sawtooth_sweep";
    case Experiment::quantized_seed: return "quantized_seed";
    case Experiment::type_decay: return "type_decay";
    case Experiment::markov_decay: return "markov_decay";
    case Experiment::squeeze_sweep: return "squeeze_sweep";
    case Experiment::clt_baseline: return "clt_baseline";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (auto e : {Experiment::sawtooth_sweep, Experiment::quantized_seed, Experiment::type_decay, Experiment::markov_decay,
                 Experiment::squeeze_sweep, Experiment::clt_baseline})
    if (s == to_string(e)) return e;
  throw ConfigError("experiment: unknown experiment '" + s + "'");
}

// Function on [a,b] built from a config literal; used for squeeze windows and integrands.
struct FunctionLiteral {
  std::string kind;
  std::function<double(double)> eval;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> breakpoints;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::sawtooth_sweep;
  std::vector<ScalarDistribution> seeds;
  std::optional<ScalarDistribution> target;
  std::vector<double> delta_grid;
  std::vector<int> n_grid;
  std::uint64_t rng_seed = 0;
  std::string output_path;
  std::vector<double> renyi_alphas;
  long long quantize_n = 10000;
  std::optional<DiscretePmf> greedy_target;
  std::optional<MarkovChainSpec> chain;
  std::optional<FunctionLiteral> window;
  std::optional<FunctionLiteral> integrand;

  ScalarDistribution target_or_uniform() const { return target ? *target : uniform(); }
};

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline const json& require_key(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number_at(const json& j, const std::string& where, const char* key, std::optional<double> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing key '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline ScalarDistribution parse_distribution(const nlohmann::json& j, const std::string& where) {
  using detail::allow_keys;
  using detail::number_at;
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError(where + ": distribution literal needs a string 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "normal") {
      allow_keys(j, where, {"kind", "mu", "sigma"});
      return normal(number_at(j, where, "mu", 0.0), number_at(j, where, "sigma", 1.0));
    }
    if (kind == "uniform") {
      allow_keys(j, where, {"kind", "a", "b"});
      return uniform(number_at(j, where, "a", 0.0), number_at(j, where, "b", 1.0));
    }
    if (kind == "exp") {
      allow_keys(j, where, {"kind", "lambda"});
      return exponential(number_at(j, where, "lambda", 1.0));
    }
    if (kind == "neglog") {
      allow_keys(j, where, {"kind"});
      return neglog();
    }
    if (kind == "powerlaw") {
      allow_keys(j, where, {"kind", "r"});
      return powerlaw(number_at(j, where, "r"));
    }
    if (kind == "pmf") {
      allow_keys(j, where, {"kind", "support", "probs"});
      auto s = detail::numbers(detail::require_key(j, where, "support"), where + ".support");
      auto p = detail::numbers(detail::require_key(j, where, "probs"), where + ".probs");
      return from_pmf(DiscretePmf(std::move(s), std::move(p)));
    }
    if (kind == "cantor") {
      allow_keys(j, where, {"kind"});
      return cantor();
    }
    if (kind == "quantized") {
      allow_keys(j, where, {"kind", "base", "n"});
      const double n = number_at(j, where, "n");
      if (!(n >= 1 && n == std::floor(n) && n <= 1e9)) throw ConfigError(where + ".n: expected an integer in [1,1e9]");
      return quantize(parse_distribution(detail::require_key(j, where, "base"), where + ".base"), (long long)n);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown distribution kind '" + kind + "'");
}

inline FunctionLiteral parse_function(const nlohmann::json& j, const std::string& where) {
  using detail::number_at;
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError(where + ": function literal needs a string 'kind'");
  FunctionLiteral f;
  f.kind = j.at("kind").get<std::string>();
  auto window = [&](std::initializer_list<const char*> extra) {
    std::vector<const char*> keys{"kind", "a", "b"};
    keys.insert(keys.end(), extra.begin(), extra.end());
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
      if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
    f.a = number_at(j, where, "a", 0.0);
    f.b = number_at(j, where, "b", 1.0);
    if (!(f.b > f.a) || !std::isfinite(f.a) || !std::isfinite(f.b)) throw ConfigError(where + ": needs finite a < b");
  };
  if (f.kind == "power") {
    window({"k"});
    const double k = number_at(j, where, "k", 1.0);
    if (k < 0) throw ConfigError(where + ".k: must be non-negative");
    f.eval = [k](double u) { return std::pow(u, k); };
  } else if (f.kind == "sin") {
    window({"frequency"});
    const double w = number_at(j, where, "frequency", 1.0);
    f.eval = [w](double u) { return std::sin(2 * std::numbers::pi * w * u); };
  } else if (f.kind == "step") {
    window({"at"});
    const double t = number_at(j, where, "at");
    f.eval = [t](double u) { return u < t ? -1.0 : 1.0; };
    f.breakpoints = {t};
  } else if (f.kind == "constant") {
    window({"value"});
    const double c = number_at(j, where, "value");
    f.eval = [c](double) { return c; };
  } else {
    throw ConfigError(where + ": unknown function kind '" + f.kind + "'");
  }
  return f;
}

inline MarkovChainSpec parse_chain(const nlohmann::json& j, const std::string& where) {
  detail::allow_keys(j, where, {"states", "order", "initial_state", "transitions"});
  const double states = detail::number_at(j, where, "states");
  const double order = detail::number_at(j, where, "order", 1.0);
  if (!(states >= 1 && states <= 256 && states == std::floor(states))) throw ConfigError(where + ".states: expected an integer in [1,256]");
  if (!(order >= 0 && order <= 16 && order == std::floor(order))) throw ConfigError(where + ".order: expected an integer in [0,16]");
  Sequence init(std::size_t(order), 0);
  if (j.contains("initial_state")) {
    init.clear();
    for (double s : detail::numbers(j.at("initial_state"), where + ".initial_state")) {
      if (!(s >= 0 && s < states && s == std::floor(s))) throw ConfigError(where + ".initial_state: symbols must be state indices");
      init.push_back(std::uint8_t(s));
    }
  }
  const auto& t = detail::require_key(j, where, "transitions");
  if (!t.is_array()) throw ConfigError(where + ".transitions: expected an array of rows");
  std::vector<std::vector<double>> rows;
  for (const auto& r : t) rows.push_back(detail::numbers(r, where + ".transitions"));
  try {
    return MarkovChainSpec(int(states), int(order), std::move(init), std::move(rows));
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("experiment") || !j.at("experiment").is_string()) throw ConfigError("experiment: missing or not a string");
  ExperimentConfig c;
  c.experiment = parse_experiment(j.at("experiment").get<std::string>());
  const std::string name = to_string(c.experiment);

  std::initializer_list<const char*> common = {"experiment", "output_path", "rng_seed"};
  std::vector<const char*> keys(common);
  auto extend = [&](std::initializer_list<const char*> more) { keys.insert(keys.end(), more.begin(), more.end()); };
  switch (c.experiment) {
    case Experiment::sawtooth_sweep:
      extend({"seed_distribution", "seed_distributions", "target_distribution", "delta_grid", "renyi_alphas"});
      break;
    case Experiment::quantized_seed:
      extend({"seed_distribution", "seed_distributions", "target_distribution", "delta_grid", "quantize_n"});
      break;
    case Experiment::type_decay: extend({"seed_distribution", "target_distribution", "n_grid", "greedy_target"}); break;
    case Experiment::markov_decay: extend({"chain", "target_distribution", "n_grid"}); break;
    case Experiment::squeeze_sweep: extend({"seed_distribution", "f", "window", "delta_grid"}); break;
    case Experiment::clt_baseline: extend({"seed_distribution", "n_grid"}); break;
  }
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(name + ": unknown key '" + k + "'");

  if (j.contains("output_path")) {
    if (!j.at("output_path").is_string()) throw ConfigError("output_path: expected a string");
    c.output_path = j.at("output_path").get<std::string>();
  }
  if (j.contains("rng_seed")) {
    if (!j.at("rng_seed").is_number_unsigned()) throw ConfigError("rng_seed: expected a non-negative 64-bit integer");
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  }
  if (j.contains("seed_distribution") && j.contains("seed_distributions"))
    throw ConfigError(name + ": give seed_distribution or seed_distributions, not both");
  if (j.contains("seed_distribution")) c.seeds.push_back(parse_distribution(j.at("seed_distribution"), "seed_distribution"));
  if (j.contains("seed_distributions")) {
    const auto& a = j.at("seed_distributions");
    if (!a.is_array() || a.empty()) throw ConfigError("seed_distributions: expected a non-empty array");
    for (std::size_t i = 0; i < a.size(); ++i)
      c.seeds.push_back(parse_distribution(a[i], "seed_distributions[" + std::to_string(i) + "]"));
  }
  if (j.contains("target_distribution")) c.target = parse_distribution(j.at("target_distribution"), "target_distribution");
  if (j.contains("delta_grid")) {
    c.delta_grid = numbers(j.at("delta_grid"), "delta_grid");
    if (c.delta_grid.empty()) throw ConfigError("delta_grid: must not be empty");
    for (double d : c.delta_grid)
      if (!(d > 0 && std::isfinite(d))) throw ConfigError("delta_grid: entries must be positive and finite");
  }
  if (j.contains("n_grid")) {
    const auto v = numbers(j.at("n_grid"), "n_grid");
    if (v.empty()) throw ConfigError("n_grid: must not be empty");
    for (double n : v) {
      if (!(n >= 1 && n <= 1e6 && n == std::floor(n))) throw ConfigError("n_grid: entries must be positive integers");
      c.n_grid.push_back(int(n));
    }
  }
  if (j.contains("renyi_alphas")) {
    const auto& a = j.at("renyi_alphas");
    if (!a.is_array()) throw ConfigError("renyi_alphas: expected an array");
    for (const auto& x : a) {
      if (x.is_string() && x.get<std::string>() == "inf")
        c.renyi_alphas.push_back(kInf);
      else if (x.is_number() && x.get<double>() >= 0)
        c.renyi_alphas.push_back(x.get<double>());
      else
        throw ConfigError("renyi_alphas: entries must be non-negative numbers or \"inf\"");
    }
  }
  if (j.contains("quantize_n")) {
    const double n = number_at(j, "config", "quantize_n");
    if (!(n >= 1 && n <= 1e9 && n == std::floor(n))) throw ConfigError("quantize_n: expected an integer in [1,1e9]");
    c.quantize_n = (long long)n;
  }
  if (j.contains("greedy_target")) {
    auto q = parse_distribution(j.at("greedy_target"), "greedy_target");
    if (!q.is_discrete()) throw ConfigError("greedy_target: must be a pmf literal");
    c.greedy_target = q.pmf();
  }
  if (j.contains("chain")) c.chain = parse_chain(j.at("chain"), "chain");
  if (j.contains("window")) c.window = parse_function(j.at("window"), "window");
  if (j.contains("f")) c.integrand = parse_function(j.at("f"), "f");

  auto need = [&](bool present, const char* what) {
    if (!present) throw ConfigError(name + ": missing key '" + what + "'");
  };
  switch (c.experiment) {
    case Experiment::sawtooth_sweep:
    case Experiment::quantized_seed:
      need(!c.seeds.empty(), "seed_distribution");
      need(!c.delta_grid.empty(), "delta_grid");
      break;
    case Experiment::type_decay:
      need(!c.seeds.empty(), "seed_distribution");
      need(!c.n_grid.empty(), "n_grid");
      if (!c.seeds[0].is_discrete()) throw ConfigError("seed_distribution: type_decay needs a pmf literal");
      break;
    case Experiment::markov_decay:
      need(c.chain.has_value(), "chain");
      need(!c.n_grid.empty(), "n_grid");
      break;
    case Experiment::squeeze_sweep:
      need(c.window.has_value(), "window");
      need(!c.delta_grid.empty(), "delta_grid");
      if (c.seeds.empty() == !c.integrand.has_value())
        throw ConfigError("squeeze_sweep: give exactly one of seed_distribution and f");
      break;
    case Experiment::clt_baseline:
      need(!c.seeds.empty(), "seed_distribution");
      need(!c.n_grid.empty(), "n_grid");
      break;
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------- output

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  static std::string field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  }
  static std::string num(double x) { return format_real(x); }
  static std::string num_or_blank(std::optional<double> x) { return x ? format_real(*x) : std::string(); }

  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw Error("csv row width differs from the header");
    rows_.push_back(std::move(row));
  }
  std::size_t size() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + field(r[i]);
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct RunOptions {
  std::uint64_t samples = 0;
  std::optional<std::uint64_t> rng_seed;
};

struct ExperimentResult {
  std::string csv;
  std::string histogram_csv;       // only with samples > 0
  std::vector<std::string> notes;  // fit summaries
  std::vector<std::string> violations;
};

namespace detail {

// bound >= achieved up to rounding
inline bool dominates(double bound, double achieved, double slack = 1e-9) {
  return achieved <= bound + slack * std::max(1.0, std::abs(bound));
}

inline std::string row_context(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + " (" + what + ")";
}

// uniform in (0,1) from 53 random bits
inline double open_unit(std::mt19937_64& rng) { return (double(rng() >> 11) + 0.5) * 0x1.0p-53; }

inline constexpr int kHistogramBins = 50;
inline constexpr std::uint64_t kSampleCap = 100'000'000;

// Histogram of G(Y) for Y = sim(X), X drawn from the seed by inversion.
inline void sample_histogram(CsvTable& hist, const std::string& label, double delta, const ScalarDistribution& seed,
                             const ScalarDistribution& target, std::uint64_t samples, std::mt19937_64& rng) {
  SawtoothSimulator sim(delta, target);
  std::vector<std::uint64_t> counts(kHistogramBins, 0);
  for (std::uint64_t s = 0; s < samples; ++s) {
    const double u = target.cdf(sim(seed.quantile(open_unit(rng))));
    const int bin = std::clamp(int(std::ceil(u * kHistogramBins)) - 1, 0, kHistogramBins - 1);
    ++counts[std::size_t(bin)];
  }
  for (int b = 0; b < kHistogramBins; ++b)
    hist.add({label, CsvTable::num(delta), std::to_string(b), CsvTable::num(double(b) / kHistogramBins),
              CsvTable::num(double(b + 1) / kHistogramBins), std::to_string(counts[std::size_t(b)]),
              CsvTable::num(double(samples) / kHistogramBins)});
}

inline std::vector<std::string> histogram_header() { return {"seed", "delta", "bin", "u_lo", "u_hi", "count", "expected"}; }

}  // namespace detail

// ---------------------------------------------------------------- CLT baseline

// Atoms x0 + k h, k = 0..K, of a pmf on an arithmetic lattice.
struct LatticePmf {
  double origin = 0.0;
  double step = 1.0;
  std::vector<double> masses;
};

inline LatticePmf to_lattice(const DiscretePmf& p) {
  LatticePmf l;
  const auto s = p.support();
  l.origin = s.front();
  if (s.size() == 1) {
    l.masses = {1.0};
    return l;
  }
  double h = kInf;
  for (std::size_t i = 1; i < s.size(); ++i) h = std::min(h, s[i] - s[i - 1]);
  const double span = s.back() - s.front();
  if (span / h > 5e7) throw SizeError("lattice of the seed pmf has more than 5e7 points");
  l.step = h;
  l.masses.assign(std::size_t(std::llround(span / h)) + 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double k = (s[i] - l.origin) / h;
    if (std::abs(k - std::round(k)) > 1e-6) throw PreconditionError("clt baseline needs a seed pmf on an arithmetic lattice");
    l.masses[std::size_t(std::llround(k))] += p.probs()[i];
  }
  return l;
}

namespace detail {

inline std::vector<double> convolve_direct(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != 0.0)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// n-fold self-convolution by raising the real-to-complex transform to the n-th power
inline std::vector<double> convolve_power_fft(const std::vector<double>& p, int n) {
  const std::size_t len = std::size_t(n) * (p.size() - 1) + 1;
  std::size_t size = 1;
  while (size < len) size <<= 1;
  if (size > (std::size_t(1) << 27)) throw SizeError("convolution length exceeds 2^27");
  double* in = fftw_alloc_real(size);
  fftw_complex* freq = fftw_alloc_complex(size / 2 + 1);
  fftw_plan fwd = fftw_plan_dft_r2c_1d(int(size), in, freq, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_1d(int(size), freq, in, FFTW_ESTIMATE);
  std::fill(in, in + size, 0.0);
  std::copy(p.begin(), p.end(), in);
  fftw_execute(fwd);
  for (std::size_t k = 0; k <= size / 2; ++k) {
    const auto z = std::pow(std::complex<double>(freq[k][0], freq[k][1]), n);
    freq[k][0] = z.real();
    freq[k][1] = z.imag();
  }
  fftw_execute(bwd);
  std::vector<double> out(in, in + len);
  for (double& x : out) x /= double(size);
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  fftw_free(in);
  fftw_free(freq);
  return out;
}

}  // namespace detail

// pmf of X_1 + ... + X_n on the lattice n*origin + k*step
inline LatticePmf convolution_power(const LatticePmf& p, int n) {
  if (n < 1) throw DomainError("convolution power needs n >= 1");
  LatticePmf out{p.origin * n, p.step, {}};
  const double k = double(p.masses.size());
  if (0.5 * double(n) * double(n) * k * k <= 2e8) {
    out.masses = p.masses;
    for (int i = 1; i < n; ++i) out.masses = detail::convolve_direct(out.masses, p.masses);
  } else {
    out.masses = detail::convolve_power_fft(p.masses, n);
  }
  return out;
}

// sup_z |P((S_n - n mu)/(sigma sqrt n) <= z) - Phi(z)|
inline double standardized_sum_ks(const DiscretePmf& p, int n) {
  const double mu = p.mean(), sd = std::sqrt(p.variance());
  if (!(sd > 0)) throw PreconditionError("clt baseline needs a seed with positive variance");
  const auto sum = convolution_power(to_lattice(p), n);
  const double scale = sd * std::sqrt(double(n));
  double best = 0.0;
  CompensatedSum cum;
  for (std::size_t k = 0; k < sum.masses.size(); ++k) {
    const double z = (sum.origin + double(k) * sum.step - double(n) * mu) / scale;
    const double phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double before = cum.value();
    cum.add(sum.masses[k]);
    best = std::max({best, std::abs(before - phi), std::abs(std::min(1.0, cum.value()) - phi)});
  }
  return best;
}

inline constexpr long long kCltQuantizeStep = 1000;

// ---------------------------------------------------------------- runners

namespace detail {

inline std::string renyi_label(double a) { return std::isinf(a) ? std::string("inf") : format_real(a); }

inline ExperimentResult run_sawtooth_sweep(const ExperimentConfig& c, const RunOptions& o) {
  const auto target = c.target_or_uniform();
  CsvTable t({"seed", "delta", "ks_exact", "tv_upper_bound", "renyi_alpha", "renyi_value"});
  CsvTable hist(histogram_header());
  std::mt19937_64 rng(o.rng_seed.value_or(c.rng_seed));
  ExperimentResult r;
  for (const auto& seed : c.seeds) {
    if (!(seed.has_density() || seed.is_discrete()))
      throw PreconditionError("seed " + seed.name() + " must be absolutely continuous or quantized");
    for (double delta : c.delta_grid) {
      const double ks = exact_ks_sawtooth(seed, delta, target);
      std::optional<double> tv;
      if (seed.has_density()) tv = tv_upper_bound(seed, delta);
      if (tv && !dominates(0.5 * *tv, ks))
        r.violations.push_back(row_context(t.size() + 1, seed.name() + ", delta=" + format_real(delta)) + ": ks_exact " +
                               format_real(ks) + " exceeds tv_upper_bound/2 = " + format_real(0.5 * *tv));
      const std::vector<double> alphas = seed.has_density() ? c.renyi_alphas : std::vector<double>{};
      if (alphas.empty()) t.add({seed.name(), CsvTable::num(delta), CsvTable::num(ks), CsvTable::num_or_blank(tv), "", ""});
      if (!alphas.empty()) {
        CellOffsetLaw law(seed, delta);
        for (double a : alphas)
          t.add({seed.name(), CsvTable::num(delta), CsvTable::num(ks), CsvTable::num_or_blank(tv), renyi_label(a),
                 CsvTable::num(renyi_sawtooth(law, a))});
      }
      if (o.samples) sample_histogram(hist, seed.name(), delta, seed, target, o.samples, rng);
    }
  }
  r.csv = t.str();
  if (o.samples) r.histogram_csv = hist.str();
  return r;
}

inline constexpr double kCoarseDefect = 0.5;

inline ExperimentResult run_quantized_seed(const ExperimentConfig& c, const RunOptions& o) {
  const auto target = c.target_or_uniform();
  CsvTable t({"seed", "delta", "quantize_n", "ks_continuous", "ks_quantized", "smoothness_defect", "ks_bound", "flag"});
  CsvTable hist(histogram_header());
  std::mt19937_64 rng(o.rng_seed.value_or(c.rng_seed));
  ExperimentResult r;
  for (const auto& base : c.seeds) {
    if (!base.is_continuous()) throw PreconditionError("quantized_seed needs a continuous base, got " + base.name());
    const auto q = quantize(base, c.quantize_n);
    for (double delta : c.delta_grid) {
      const double ks_c = exact_ks_sawtooth(base, delta, target);
      const double ks_q = exact_ks_sawtooth(q, delta, target);
      const double defect = smoothness_defect(q, delta);
      const double bound = 2.0 * ks_c + defect;
      if (!dominates(bound, ks_q))
        r.violations.push_back(row_context(t.size() + 1, base.name() + ", delta=" + format_real(delta)) + ": ks_quantized " +
                               format_real(ks_q) + " exceeds 2*ks_continuous + defect = " + format_real(bound));
      t.add({base.name(), CsvTable::num(delta), std::to_string(c.quantize_n), CsvTable::num(ks_c), CsvTable::num(ks_q),
             CsvTable::num(defect), CsvTable::num(bound), defect >= kCoarseDefect ? "coarse" : ""});
      if (o.samples) sample_histogram(hist, q.name(), delta, q, target, o.samples, rng);
    }
  }
  r.csv = t.str();
  if (o.samples) r.histogram_csv = hist.str();
  return r;
}

// slope of log y against x over rows with x >= from; nullopt with fewer than 3 such rows
inline std::optional<double> tail_log_slope(const std::vector<double>& xs, const std::vector<double>& ys, double from) {
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] >= from && ys[i] > 0) {
      fx.push_back(xs[i]);
      fy.push_back(std::log(ys[i]));
    }
  if (fx.size() < 3) return std::nullopt;
  return fit_slope(fx, fy);
}

inline constexpr double kDecayFitFrom = 7;
inline constexpr double kDecaySlopeTolerance = 0.15;

inline ExperimentResult run_type_decay(const ExperimentConfig& c) {
  const auto target = c.target_or_uniform();
  if (!target.is_continuous()) throw PreconditionError("type_decay needs a continuous target; use greedy_target for pmfs");
  const DiscretePmf p = c.seeds[0].pmf();
  const std::vector<double> probs(p.probs().begin(), p.probs().end());
  const int m = int(p.size());
  std::vector<std::string> header{"n", "universal_ks", "nonuniversal_ks", "universal_bound"};
  if (c.greedy_target) header.insert(header.end(), {"greedy_ks", "greedy_bound", "greedy_threshold_met"});
  CsvTable t(header);
  ExperimentResult r;
  std::vector<double> ns, ks_list;
  for (int n : c.n_grid) {
    const double ks = typeclass_simulator(n, m, target).with_iid(probs).ks_error(target);
    const double lower = 0.5 * std::pow(p.max_mass(), n);
    const double upper = universal_error_bound(probs, n);
    const std::string ctx = row_context(t.size() + 1, "n=" + std::to_string(n));
    if (!dominates(ks, lower, 1e-12)) r.violations.push_back(ctx + ": universal_ks " + format_real(ks) + " below the optimal non-universal error " + format_real(lower));
    if (!dominates(upper, ks)) r.violations.push_back(ctx + ": universal_ks " + format_real(ks) + " exceeds the bound " + format_real(upper));
    std::vector<std::string> row{std::to_string(n), CsvTable::num(ks), CsvTable::num(lower), CsvTable::num(upper)};
    if (c.greedy_target) {
      const auto table = greedy_discrete_map(p, *c.greedy_target, n);
      const double gks = table.ks_error(from_pmf(*c.greedy_target));
      const double gb = greedy_error_bound(p, n);
      const bool met = double(n) >= greedy_threshold(p, c.greedy_target->size());
      if (met && !dominates(gb, gks))
        r.violations.push_back(ctx + ": greedy_ks " + format_real(gks) + " exceeds the greedy bound " + format_real(gb));
      row.insert(row.end(), {CsvTable::num(gks), CsvTable::num(gb), met ? "1" : "0"});
    }
    t.add(std::move(row));
    ns.push_back(n);
    ks_list.push_back(ks);
  }
  if (auto s = tail_log_slope(ns, ks_list, kDecayFitFrom)) {
    const double expect = std::log(p.max_mass());
    r.notes.push_back("log-slope of universal_ks over n >= 7: " + format_real(*s) + " (log max p = " + format_real(expect) + ")");
    if (std::abs(*s - expect) > kDecaySlopeTolerance * std::abs(expect))
      r.violations.push_back("fit: log-slope " + format_real(*s) + " is not within 15% of log max p = " + format_real(expect));
  }
  r.csv = t.str();
  return r;
}

inline ExperimentResult run_markov_decay(const ExperimentConfig& c) {
  const auto target = c.target_or_uniform();
  if (!target.is_continuous()) throw PreconditionError("markov_decay needs a continuous target");
  const auto& chain = *c.chain;
  std::optional<double> rate;
  if (chain.order() == 1 && chain.state_count() <= kLoopStateCap && chain.irreducible()) rate = chain.min_entropy_rate_loops();
  CsvTable t({"n", "universal_ks", "lower_bound", "upper_bound", "min_entropy_rate"});
  ExperimentResult r;
  for (int n : c.n_grid) {
    const auto table = markov_typeclass_simulator(n, chain.state_count(), chain.order(), chain.initial_state(), target);
    const double ks = table.with_law(chain.path_law(n)).ks_error(target);
    const double lower = 0.5 * chain.max_path_probability(n);
    const double upper = markov_error_bound(chain, n);
    const std::string ctx = row_context(t.size() + 1, "n=" + std::to_string(n));
    if (!dominates(ks, lower, 1e-12)) r.violations.push_back(ctx + ": universal_ks " + format_real(ks) + " below half the max path probability " + format_real(lower));
    if (!dominates(upper, ks)) r.violations.push_back(ctx + ": universal_ks " + format_real(ks) + " exceeds the bound " + format_real(upper));
    t.add({std::to_string(n), CsvTable::num(ks), CsvTable::num(lower), CsvTable::num(upper), CsvTable::num_or_blank(rate)});
  }
  r.csv = t.str();
  return r;
}

inline ExperimentResult run_squeeze_sweep(const ExperimentConfig& c) {
  SupportedFunction f;
  if (c.integrand) {
    f = {c.integrand->eval, {c.integrand->a, c.integrand->b}, c.integrand->breakpoints, 0.0};
  } else {
    f = truncated_density(c.seeds[0]);
  }
  const WindowFunction g{c.window->eval, c.window->a, c.window->b, c.window->breakpoints};
  CsvTable t({"delta", "L_delta", "L", "defect", "bound"});
  ExperimentResult r;
  for (double delta : c.delta_grid) {
    const auto d = correlation_defect(f, g, delta);
    if (!dominates(d.bound + 1e-8, d.defect, 0.0))
      r.violations.push_back(row_context(t.size() + 1, "delta=" + format_real(delta)) + ": defect " + format_real(d.defect) +
                             " exceeds the bound " + format_real(d.bound));
    t.add({CsvTable::num(delta), CsvTable::num(d.L_delta), CsvTable::num(d.L), CsvTable::num(d.defect), CsvTable::num(d.bound)});
  }
  if (f.discarded_mass > 0) r.notes.push_back("f truncated to [" + format_real(f.support.lo) + ", " + format_real(f.support.hi) + "], discarded mass " + format_real(f.discarded_mass));
  r.csv = t.str();
  return r;
}

inline constexpr double kCltSlope = -0.5;
inline constexpr double kCltSlopeTolerance = 0.1;
inline constexpr double kCltFitFrom = 4;
inline constexpr double kUniversalSequenceCap = 1e6;

inline ExperimentResult run_clt_baseline(const ExperimentConfig& c) {
  const auto& seed = c.seeds[0];
  ExperimentResult r;
  DiscretePmf p = DiscretePmf::point_mass(0.0);
  if (seed.is_discrete()) {
    p = seed.pmf();
  } else if (seed.is_continuous()) {
    p = quantize(seed, kCltQuantizeStep).pmf();
    r.notes.push_back(seed.name() + " quantized at step 1/" + std::to_string(kCltQuantizeStep) + " for the convolution");
  } else {
    throw PreconditionError("clt baseline needs a pmf or a continuous seed, got " + seed.name());
  }
  const std::vector<double> probs(p.probs().begin(), p.probs().end());
  CsvTable t({"n", "clt_ks", "universal_ks"});
  std::vector<double> log_n, log_ks;
  for (int n : c.n_grid) {
    const double clt = standardized_sum_ks(p, n);
    std::optional<double> uni;
    if (std::pow(double(p.size()), n) <= kUniversalSequenceCap) {
      const auto target = normal();
      uni = typeclass_simulator(n, int(p.size()), target).with_iid(probs).ks_error(target);
    }
    t.add({std::to_string(n), CsvTable::num(clt), CsvTable::num_or_blank(uni)});
    if (n >= kCltFitFrom && clt > 0) {
      log_n.push_back(std::log(double(n)));
      log_ks.push_back(std::log(clt));
    }
  }
  if (log_n.size() >= 3) {
    const double s = fit_slope(log_n, log_ks);
    r.notes.push_back("log-log slope of clt_ks over n >= 4: " + format_real(s));
    if (std::abs(s - kCltSlope) > kCltSlopeTolerance)
      r.violations.push_back("fit: clt log-log slope " + format_real(s) + " is outside -0.5 +- 0.1");
  }
  r.csv = t.str();
  return r;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& c, const RunOptions& o = {}) {
  if (o.samples > detail::kSampleCap) throw SizeError("--samples exceeds 1e8");
  if (o.samples && c.experiment != Experiment::sawtooth_sweep && c.experiment != Experiment::quantized_seed)
    throw ConfigError("--samples applies to sawtooth_sweep and quantized_seed only");
  switch (c.experiment) {
    case Experiment::sawtooth_sweep: return detail::run_sawtooth_sweep(c, o);
    case Experiment::quantized_seed: return detail::run_quantized_seed(c, o);
    case Experiment::type_decay: return detail::run_type_decay(c);
    case Experiment::markov_decay: return detail::run_markov_decay(c);
    case Experiment::squeeze_sweep: return detail::run_squeeze_sweep(c);
    case Experiment::clt_baseline: return detail::run_clt_baseline(c);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace universim
