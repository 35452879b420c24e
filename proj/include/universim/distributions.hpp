#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "universim/errors.hpp"
#include "universim/numeric.hpp"

namespace universim {

enum class DistributionClass { discrete, absolutely_continuous, singular_continuous, mixture };

inline const char* to_string(DistributionClass c) {
  switch (c) {
    case DistributionClass::discrete: return "discrete";
    case DistributionClass::absolutely_continuous: return "absolutely_continuous";
    case DistributionClass::singular_continuous: return "singular_continuous";
    case DistributionClass::mixture: return "mixture";
  }
  return "unknown";
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

// Finite law on strictly ascending real support points.
class DiscretePmf {
 public:
  static constexpr double kMassTolerance = 1e-12;

  DiscretePmf(std::vector<double> support, std::vector<double> probs)
      : support_(std::move(support)), probs_(std::move(probs)) {
    if (support_.empty() || support_.size() != probs_.size())
      throw ValidationError("pmf: support and probs must be non-empty and of equal length");
    CompensatedSum total;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!(probs_[i] > 0.0) || !std::isfinite(probs_[i]))
        throw ValidationError("pmf: mass at index " + std::to_string(i) + " is not positive");
      if (!std::isfinite(support_[i]))
        throw ValidationError("pmf: support point " + std::to_string(i) + " is not finite");
      if (i > 0 && !(support_[i] > support_[i - 1]))
        throw ValidationError("pmf: support must be strictly ascending");
      total.add(probs_[i]);
    }
    if (std::abs(total.value() - 1.0) > kMassTolerance)
      throw ValidationError("pmf: masses sum to " + format_real(total.value()));
    cumulative_.resize(probs_.size());
    CompensatedSum run;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      run.add(probs_[i]);
      cumulative_[i] = run.value();
    }
  }

  static DiscretePmf point_mass(double x) { return DiscretePmf({x}, {1.0}); }

  // Drops non-positive entries, sorts, merges equal support points.
  static DiscretePmf from_unsorted(std::vector<std::pair<double, double>> atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> s, p;
    for (const auto& [x, m] : atoms) {
      if (!(m > 0.0)) continue;
      if (!s.empty() && s.back() == x)
        p.back() += m;
      else {
        s.push_back(x);
        p.push_back(m);
      }
    }
    return DiscretePmf(std::move(s), std::move(p));
  }

  std::span<const double> support() const noexcept { return support_; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const double> cumulative() const noexcept { return cumulative_; }
  std::size_t size() const noexcept { return support_.size(); }

  double cdf(double x) const {
    auto it = std::upper_bound(support_.begin(), support_.end(), x);
    if (it == support_.begin()) return 0.0;
    return cumulative_[std::size_t(it - support_.begin()) - 1];
  }

  double cdf_left(double x) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), x);
    if (it == support_.begin()) return 0.0;
    return cumulative_[std::size_t(it - support_.begin()) - 1];
  }

  double mass_at(double x) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), x);
    if (it == support_.end() || *it != x) return 0.0;
    return probs_[std::size_t(it - support_.begin())];
  }

  double quantile(double t) const {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("quantile level must lie in (0,1]");
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), t);
    if (it == cumulative_.end()) return support_.back();
    return support_[std::size_t(it - cumulative_.begin())];
  }

  double max_mass() const { return *std::max_element(probs_.begin(), probs_.end()); }

  double mean() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < size(); ++i) s.add(support_[i] * probs_[i]);
    return s.value();
  }

  double variance() const {
    const double m = mean();
    CompensatedSum s;
    for (std::size_t i = 0; i < size(); ++i) s.add((support_[i] - m) * (support_[i] - m) * probs_[i]);
    return s.value();
  }

  bool operator==(const DiscretePmf& o) const {
    return support_ == o.support_ && probs_ == o.probs_;
  }

 private:
  std::vector<double> support_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

// Everything needed to assemble a ScalarDistribution. The continuous part is a
// normalised CDF; the discrete part carries total weight atom_weight.
struct LawDefinition {
  std::string name;
  DistributionClass kind = DistributionClass::absolutely_continuous;
  std::function<double(double)> continuous_cdf;
  std::function<double(double)> quantile;  // closed form, pure continuous laws only
  std::function<double(double)> density;
  std::function<double(double)> density_derivative;
  std::optional<DiscretePmf> atoms;
  double atom_weight = 0.0;
  Interval support;
  std::vector<double> breakpoints;
};

class ScalarDistribution {
 public:
  explicit ScalarDistribution(LawDefinition def)
      : def_(std::make_shared<const LawDefinition>(validated(std::move(def)))) {}

  DistributionClass kind() const noexcept { return def_->kind; }
  const std::string& name() const noexcept { return def_->name; }
  Interval support() const noexcept { return def_->support; }
  const std::vector<double>& breakpoints() const noexcept { return def_->breakpoints; }

  bool is_discrete() const noexcept { return def_->kind == DistributionClass::discrete; }
  bool is_continuous() const noexcept { return def_->atom_weight == 0.0; }
  bool has_density() const noexcept {
    return def_->kind == DistributionClass::absolutely_continuous && bool(def_->density);
  }
  bool has_density_derivative() const noexcept { return bool(def_->density_derivative); }

  const DiscretePmf* discrete_part() const noexcept {
    return def_->atoms ? &*def_->atoms : nullptr;
  }
  double discrete_weight() const noexcept { return def_->atom_weight; }

  const DiscretePmf& pmf() const {
    if (!is_discrete()) throw PreconditionError(name() + " is not a discrete law");
    return *def_->atoms;
  }

  // atoms with their absolute masses
  std::vector<std::pair<double, double>> atoms() const {
    std::vector<std::pair<double, double>> out;
    if (!def_->atoms) return out;
    for (std::size_t i = 0; i < def_->atoms->size(); ++i)
      out.emplace_back(def_->atoms->support()[i], def_->atom_weight * def_->atoms->probs()[i]);
    return out;
  }

  double cdf(double x) const {
    const double w = def_->atom_weight;
    if (w == 1.0) return def_->atoms->cdf(x);
    const double c = std::clamp(def_->continuous_cdf(x), 0.0, 1.0);
    if (w == 0.0) return c;
    return w * def_->atoms->cdf(x) + (1.0 - w) * c;
  }

  double cdf_left(double x) const {
    const double w = def_->atom_weight;
    if (w == 0.0) return cdf(x);
    if (w == 1.0) return def_->atoms->cdf_left(x);
    return w * def_->atoms->cdf_left(x) + (1.0 - w) * std::clamp(def_->continuous_cdf(x), 0.0, 1.0);
  }

  double mass_at(double x) const {
    return def_->atoms ? def_->atom_weight * def_->atoms->mass_at(x) : 0.0;
  }

  // min{y : cdf(y) >= t}
  double quantile(double t) const {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("quantile level must lie in (0,1]");
    if (is_discrete()) return def_->atoms->quantile(t);
    if (def_->quantile) {
      const double y = def_->quantile(t);
      if (std::isfinite(y)) return y;
    }
    return bisect_quantile(t);
  }

  double density(double x) const {
    if (!has_density()) throw PreconditionError(name() + " has no density");
    return def_->density(x);
  }

  double density_derivative(double x) const {
    if (def_->density_derivative) return def_->density_derivative(x);
    constexpr double h = 1e-6;
    return (density(x + h) - density(x - h)) / (2.0 * h);
  }

  const LawDefinition& definition() const noexcept { return *def_; }

 private:
  static LawDefinition validated(LawDefinition d) {
    if (d.name.empty()) throw ValidationError("distribution needs a name");
    if (!(d.atom_weight >= 0.0 && d.atom_weight <= 1.0))
      throw ValidationError(d.name + ": discrete weight outside [0,1]");
    if (d.atom_weight > 0.0 && !d.atoms) throw ValidationError(d.name + ": missing atoms");
    if (d.atom_weight < 1.0 && !d.continuous_cdf)
      throw ValidationError(d.name + ": missing continuous cdf");
    if (!(d.support.hi >= d.support.lo)) throw ValidationError(d.name + ": empty support");
    const bool discrete = d.atom_weight == 1.0;
    if (discrete != (d.kind == DistributionClass::discrete))
      throw ValidationError(d.name + ": class tag disagrees with discrete weight");
    if (d.kind == DistributionClass::mixture && !(d.atom_weight > 0.0 && d.atom_weight < 1.0))
      throw ValidationError(d.name + ": mixture weight must lie in (0,1)");
    std::sort(d.breakpoints.begin(), d.breakpoints.end());
    return d;
  }

  double bisect_quantile(double t) const {
    const Interval s = def_->support;
    double w = std::max(s.width(), 1.0);
    double lo = s.lo;
    for (int k = 0; k < 64 && cdf(lo) >= t; ++k, w *= 2) lo -= w;
    w = std::max(s.width(), 1.0);
    double hi = s.hi;
    for (int k = 0; k < 64 && cdf(hi) < t; ++k, w *= 2) hi += w;
    if (cdf(hi) < t) return hi;
    return bisect_threshold([&](double y) { return cdf(y) >= t; }, lo, hi, 1e-15);
  }

  std::shared_ptr<const LawDefinition> def_;
};

namespace detail {

inline std::string short_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace detail

inline ScalarDistribution uniform(double a = 0.0, double b = 1.0) {
  if (!(b > a)) throw DomainError("uniform: need a < b");
  LawDefinition d;
  d.name = "uniform(" + detail::short_real(a) + "," + detail::short_real(b) + ")";
  d.continuous_cdf = [a, b](double x) { return std::clamp((x - a) / (b - a), 0.0, 1.0); };
  d.quantile = [a, b](double t) { return a + (b - a) * t; };
  d.density = [a, b](double x) { return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0; };
  d.density_derivative = [](double) { return 0.0; };
  d.support = {a, b};
  d.breakpoints = {a, b};
  return ScalarDistribution(std::move(d));
}

inline ScalarDistribution normal(double mu = 0.0, double sigma = 1.0) {
  if (!(sigma > 0.0)) throw DomainError("normal: sigma must be positive");
  LawDefinition d;
  d.name = "normal(" + detail::short_real(mu) + "," + detail::short_real(sigma) + ")";
  d.continuous_cdf = [mu, sigma](double x) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
  };
  d.quantile = [mu, sigma](double t) {
    if (t >= 1.0) return kInf;
    return mu - sigma * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * t);
  };
  const double c = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  d.density = [mu, sigma, c](double x) {
    const double z = (x - mu) / sigma;
    return c * std::exp(-0.5 * z * z);
  };
  d.density_derivative = [mu, sigma, c](double x) {
    const double z = (x - mu) / sigma;
    return -z / sigma * c * std::exp(-0.5 * z * z);
  };
  d.support = {mu - 12.0 * sigma, mu + 12.0 * sigma};
  return ScalarDistribution(std::move(d));
}

inline ScalarDistribution exponential(double lambda = 1.0) {
  if (!(lambda > 0.0)) throw DomainError("exp: lambda must be positive");
  LawDefinition d;
  d.name = "exp(" + detail::short_real(lambda) + ")";
  d.continuous_cdf = [lambda](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-lambda * x); };
  d.quantile = [lambda](double t) { return -std::log1p(-t) / lambda; };
  d.density = [lambda](double x) { return x < 0.0 ? 0.0 : lambda * std::exp(-lambda * x); };
  d.density_derivative = [lambda](double x) {
    return x < 0.0 ? 0.0 : -lambda * lambda * std::exp(-lambda * x);
  };
  d.support = {0.0, 50.0 / lambda};
  d.breakpoints = {0.0};
  return ScalarDistribution(std::move(d));
}

// density -log x on (0,1]
inline ScalarDistribution neglog() {
  LawDefinition d;
  d.name = "neglog";
  d.continuous_cdf = [](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x - x * std::log(x);
  };
  d.density = [](double x) {
    if (x < 0.0 || x > 1.0) return 0.0;
    return x == 0.0 ? kInf : -std::log(x);
  };
  d.density_derivative = [](double x) { return (x > 0.0 && x < 1.0) ? -1.0 / x : 0.0; };
  d.support = {0.0, 1.0};
  d.breakpoints = {0.0, 1.0};
  return ScalarDistribution(std::move(d));
}

// density (1-r) x^{-r} on (0,1]
inline ScalarDistribution powerlaw(double r) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("powerlaw: r must lie in (0,1)");
  LawDefinition d;
  d.name = "powerlaw(" + detail::short_real(r) + ")";
  d.continuous_cdf = [r](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return std::pow(x, 1.0 - r);
  };
  d.quantile = [r](double t) { return std::pow(t, 1.0 / (1.0 - r)); };
  d.density = [r](double x) {
    if (x < 0.0 || x > 1.0) return 0.0;
    return x == 0.0 ? kInf : (1.0 - r) * std::pow(x, -r);
  };
  d.density_derivative = [r](double x) {
    return (x > 0.0 && x < 1.0) ? -r * (1.0 - r) * std::pow(x, -r - 1.0) : 0.0;
  };
  d.support = {0.0, 1.0};
  d.breakpoints = {0.0, 1.0};
  return ScalarDistribution(std::move(d));
}

inline ScalarDistribution from_pmf(DiscretePmf pmf, std::string name = {}) {
  LawDefinition d;
  if (name.empty()) {
    name = "pmf[";
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      if (i) name += ";";
      name += detail::short_real(pmf.support()[i]) + ":" + detail::short_real(pmf.probs()[i]);
    }
    name += "]";
  }
  d.name = std::move(name);
  d.kind = DistributionClass::discrete;
  d.support = {pmf.support().front(), pmf.support().back()};
  d.breakpoints.assign(pmf.support().begin(), pmf.support().end());
  d.atoms = std::move(pmf);
  d.atom_weight = 1.0;
  return ScalarDistribution(std::move(d));
}

inline ScalarDistribution point_mass(double x) {
  return from_pmf(DiscretePmf::point_mass(x), "point(" + detail::short_real(x) + ")");
}

inline ScalarDistribution bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli: p must lie in [0,1]");
  const std::string name = "bernoulli(" + detail::short_real(p) + ")";
  if (p == 0.0) return from_pmf(DiscretePmf::point_mass(0.0), name);
  if (p == 1.0) return from_pmf(DiscretePmf::point_mass(1.0), name);
  return from_pmf(DiscretePmf({0.0, 1.0}, {1.0 - p, p}), name);
}

// Cantor function by ternary expansion to 64 digits.
inline double cantor_cdf(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double result = 0.0;
  double scale = 0.5;
  for (int k = 0; k < 64; ++k) {
    x *= 3.0;
    const double digit = std::floor(x);
    x -= digit;
    if (digit == 1.0) return result + scale;
    if (digit >= 2.0) result += scale;
    scale *= 0.5;
  }
  return result;
}

inline ScalarDistribution cantor() {
  LawDefinition d;
  d.name = "cantor";
  d.kind = DistributionClass::singular_continuous;
  d.continuous_cdf = cantor_cdf;
  d.support = {0.0, 1.0};
  return ScalarDistribution(std::move(d));
}

// Generic absolutely continuous law from a CDF and density.
inline ScalarDistribution absolutely_continuous(std::string name, std::function<double(double)> cdf,
                                                std::function<double(double)> density,
                                                Interval support,
                                                std::vector<double> breakpoints = {},
                                                std::function<double(double)> derivative = {},
                                                std::function<double(double)> quantile = {}) {
  LawDefinition d;
  d.name = std::move(name);
  d.continuous_cdf = std::move(cdf);
  d.density = std::move(density);
  d.density_derivative = std::move(derivative);
  d.quantile = std::move(quantile);
  d.support = support;
  d.breakpoints = std::move(breakpoints);
  return ScalarDistribution(std::move(d));
}

// weight * atoms + (1 - weight) * continuous
inline ScalarDistribution mixture(DiscretePmf atoms, double weight, const ScalarDistribution& continuous) {
  if (!continuous.is_continuous()) throw PreconditionError("mixture: second component must be continuous");
  if (!(weight > 0.0 && weight < 1.0)) throw DomainError("mixture: weight must lie in (0,1)");
  LawDefinition d;
  d.name = "mixture(" + detail::short_real(weight) + "," + continuous.name() + ")";
  d.kind = DistributionClass::mixture;
  d.continuous_cdf = [c = continuous](double x) { return c.cdf(x); };
  d.support = {std::min(atoms.support().front(), continuous.support().lo),
               std::max(atoms.support().back(), continuous.support().hi)};
  d.breakpoints = continuous.breakpoints();
  d.breakpoints.insert(d.breakpoints.end(), atoms.support().begin(), atoms.support().end());
  d.atoms = std::move(atoms);
  d.atom_weight = weight;
  return ScalarDistribution(std::move(d));
}

// Law of floor(nX)/n on the grid i/n.
inline ScalarDistribution quantize(const ScalarDistribution& base, long long n) {
  if (n < 1) throw DomainError("quantize: n must be positive");
  const Interval s = base.support();
  const double nd = double(n);
  const long long first = (long long)std::floor(s.lo * nd) - 1;
  const long long last = (long long)std::ceil(s.hi * nd);
  if (last - first > 50'000'000) throw SizeError("quantize: too many candidate atoms");
  // masses below 1e-15 are folded into the next retained atom (the last one for the tail)
  std::vector<double> support, probs;
  double prev = base.cdf(double(first) / nd);
  double pending = prev;
  for (long long i = first; i <= last; ++i) {
    const double next = base.cdf(double(i + 1) / nd);
    const double m = next - prev;
    prev = next;
    if (m < 1e-15) {
      pending += std::max(m, 0.0);
      continue;
    }
    support.push_back(double(i) / nd);
    probs.push_back(m + pending);
    pending = 0.0;
  }
  if (support.empty()) throw NumericError("quantize: no atom above the mass floor");
  probs.back() += pending + (1.0 - prev);
  return from_pmf(DiscretePmf(std::move(support), std::move(probs)),
                  "quantized(" + base.name() + "," + std::to_string(n) + ")");
}

}  // namespace universim
