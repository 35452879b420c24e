#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "universim/distributions.hpp"
#include "universim/errors.hpp"
#include "universim/numeric.hpp"

namespace universim {

enum class MetricMethod { exact_discrete, sup_grid, quadrature };

struct DistancePair {
  double value = 0.0;
  MetricMethod method = MetricMethod::exact_discrete;
  int grid_resolution = 0;
};

inline constexpr int kKsGridPoints = 100000;

namespace detail {

inline std::vector<double> atom_union(const ScalarDistribution& p, const ScalarDistribution& q) {
  std::vector<double> pts;
  for (const auto* d : {p.discrete_part(), q.discrete_part()})
    if (d) pts.insert(pts.end(), d->support().begin(), d->support().end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// (p_i, q_i) over the union of both supports
inline std::vector<std::pair<double, double>> aligned_masses(const DiscretePmf& p, const DiscretePmf& q) {
  std::vector<std::pair<double, double>> out;
  std::size_t i = 0, j = 0;
  const auto ps = p.support(), qs = q.support();
  while (i < ps.size() || j < qs.size()) {
    if (j == qs.size() || (i < ps.size() && ps[i] < qs[j]))
      out.emplace_back(p.probs()[i++], 0.0);
    else if (i == ps.size() || qs[j] < ps[i])
      out.emplace_back(0.0, q.probs()[j++]);
    else
      out.emplace_back(p.probs()[i++], q.probs()[j++]);
  }
  return out;
}

inline std::vector<double> joint_cuts(const ScalarDistribution& p, const ScalarDistribution& q) {
  const double lo = std::min(p.support().lo, q.support().lo);
  const double hi = std::max(p.support().hi, q.support().hi);
  std::vector<double> cuts{lo, hi};
  for (const auto* d : {&p, &q})
    for (double b : d->breakpoints())
      if (b > lo && b < hi) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace detail

// sup_x |F(x) - G(x)|
inline DistancePair ks_distance(const ScalarDistribution& p, const ScalarDistribution& q) {
  const std::vector<double> atoms = detail::atom_union(p, q);
  double best = 0.0;
  for (double x : atoms) {
    best = std::max(best, std::abs(p.cdf(x) - q.cdf(x)));
    best = std::max(best, std::abs(p.cdf_left(x) - q.cdf_left(x)));
  }
  // between atoms a discrete side is flat and the other monotone
  if (p.is_discrete() || q.is_discrete()) return {best, MetricMethod::exact_discrete, 0};

  const double lo = std::min(p.support().lo, q.support().lo);
  const double hi = std::max(p.support().hi, q.support().hi);
  const int m = kKsGridPoints;
  const double h = (hi - lo) / m;
  auto gap = [&](double x) { return std::abs(p.cdf(x) - q.cdf(x)); };
  std::vector<double> vals(std::size_t(m) + 1);
  for (int k = 0; k <= m; ++k) {
    vals[std::size_t(k)] = gap(lo + k * h);
    best = std::max(best, vals[std::size_t(k)]);
  }
  for (std::size_t k : top_local_maxima(vals, 3)) {
    const double a = lo + (double(k) - 1.0) * h;
    const double b = lo + (double(k) + 1.0) * h;
    best = std::max(best, golden_section_max(gap, a, b, 1e-9 * std::max(1.0, h)).value);
  }
  return {best, MetricMethod::sup_grid, m};
}

inline double tv_distance(const DiscretePmf& p, const DiscretePmf& q) {
  CompensatedSum s;
  for (const auto& [a, b] : detail::aligned_masses(p, q)) s.add(std::abs(a - b));
  return 0.5 * s.value();
}

// sup_A |P(A) - Q(A)|
inline DistancePair tv_distance(const ScalarDistribution& p, const ScalarDistribution& q) {
  if (p.is_discrete() && q.is_discrete()) return {tv_distance(p.pmf(), q.pmf()), MetricMethod::exact_discrete, 0};
  if (!(p.has_density() && q.has_density()))
    throw UnsupportedPairError("total variation needs two discrete or two densities: " + p.name() +
                               " vs " + q.name());
  auto r = integrate_pieces([&](double x) { return std::abs(p.density(x) - q.density(x)); },
                            detail::joint_cuts(p, q), 1e-8);
  if (!r.converged) throw NumericError("total variation quadrature did not converge");
  return {0.5 * r.value, MetricMethod::quadrature, 0};
}

inline double renyi_divergence(const DiscretePmf& p, const DiscretePmf& q, double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("renyi order must be nonnegative");
  const auto pairs = detail::aligned_masses(p, q);
  if (alpha == 0.0) {
    CompensatedSum s;
    for (const auto& [a, b] : pairs)
      if (a > 0.0) s.add(b);
    return s.value() > 0.0 ? -std::log(s.value()) : kInf;
  }
  if (std::isinf(alpha)) {
    double best = 0.0;
    for (const auto& [a, b] : pairs) {
      if (a <= 0.0) continue;
      if (b <= 0.0) return kInf;
      best = std::max(best, a / b);
    }
    return std::log(best);
  }
  if (alpha == 1.0) {
    CompensatedSum s;
    for (const auto& [a, b] : pairs) {
      if (a <= 0.0) continue;
      if (b <= 0.0) return kInf;
      s.add(a * std::log(a / b));
    }
    return s.value();
  }
  CompensatedSum s;
  for (const auto& [a, b] : pairs) {
    if (a <= 0.0) continue;
    if (b <= 0.0) {
      if (alpha > 1.0) return kInf;
      continue;
    }
    s.add(std::pow(a, alpha) * std::pow(b, 1.0 - alpha));
  }
  if (s.value() <= 0.0) return kInf;
  return std::log(s.value()) / (alpha - 1.0);
}

// (1/(alpha-1)) log ∫ (dP/dQ)^alpha dQ with continuous extension at 0, 1 and infinity
inline double renyi_divergence(const ScalarDistribution& p, const ScalarDistribution& q, double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("renyi order must be nonnegative");
  if (p.is_discrete() && q.is_discrete()) return renyi_divergence(p.pmf(), q.pmf(), alpha);
  if (!(p.has_density() && q.has_density()))
    throw UnsupportedPairError("renyi divergence needs two discrete or two densities: " + p.name() +
                               " vs " + q.name());
  const auto cuts = detail::joint_cuts(p, q);
  bool singular = false;
  if (std::isinf(alpha)) {
    double best = 0.0;
    const double lo = cuts.front(), hi = cuts.back();
    const int m = kKsGridPoints;
    for (int k = 0; k < m; ++k) {
      const double x = lo + (k + 0.5) * (hi - lo) / m;
      const double a = p.density(x), b = q.density(x);
      if (a <= 0.0) continue;
      if (b <= 0.0) return kInf;
      best = std::max(best, a / b);
    }
    return std::log(best);
  }
  auto integrand = [&](double x) {
    const double a = p.density(x), b = q.density(x);
    if (alpha == 0.0) return a > 0.0 ? b : 0.0;
    if (a <= 0.0) return 0.0;
    if (b <= 0.0) {
      if (alpha >= 1.0) singular = true;
      return 0.0;
    }
    if (alpha == 1.0) return a * std::log(a / b);
    return std::pow(a, alpha) * std::pow(b, 1.0 - alpha);
  };
  auto r = integrate_pieces(integrand, cuts, 1e-10);
  if (!r.converged) throw NumericError("renyi quadrature did not converge");
  if (singular) return kInf;
  if (alpha == 0.0) return r.value > 0.0 ? -std::log(r.value) : kInf;
  if (alpha == 1.0) return std::max(0.0, r.value);
  if (r.value <= 0.0) return kInf;
  return std::log(r.value) / (alpha - 1.0);
}

struct RenyiSandwich {
  double lower = 0.0;
  double value = 0.0;
  double upper = 0.0;
  double tv = 0.0;
  bool holds(double slack = 1e-12) const { return lower <= value + slack && value <= upper + slack; }
};

// (1/(a-1)) log(1 + TV) <= D_a <= (1/(a-1)) log(1 - TV) for a in (0,1), TV = sup_A |P(A)-Q(A)|
inline RenyiSandwich renyi_tv_sandwich(const ScalarDistribution& p, const ScalarDistribution& q, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("sandwich needs alpha in (0,1)");
  RenyiSandwich s;
  s.tv = tv_distance(p, q).value;
  s.value = renyi_divergence(p, q, alpha);
  s.lower = std::log1p(s.tv) / (alpha - 1.0);
  s.upper = s.tv >= 1.0 ? kInf : std::log1p(-s.tv) / (alpha - 1.0);
  return s;
}

}  // namespace universim
