#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "universim/distributions.hpp"
#include "universim/errors.hpp"
#include "universim/metrics.hpp"
#include "universim/numeric.hpp"

namespace universim {

inline constexpr double kCellSnap = 1e-9;
inline constexpr double kCellMassFloor = 1e-12;
inline constexpr int kOffsetGridPoints = 10000;

struct SawtoothCell {
  long long index;
  double frac;  // in (0,1]
};

// Cell (iΔ,(i+1)Δ] containing x and the offset (x - iΔ)/Δ. Points within
// 1e-9 cell widths of a boundary iΔ are taken to lie on it (offset 1 in cell i-1).
inline SawtoothCell sawtooth_cell(double x, double delta) {
  const double q = x / delta;
  const double r = std::round(q);
  if (std::abs(q - r) <= kCellSnap) return {(long long)r - 1, 1.0};
  const long long i = (long long)std::ceil(q) - 1;
  return {i, std::clamp((x - double(i) * delta) / delta, 0.0, 1.0)};
}

namespace detail {

inline void require_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("cell width must be positive and finite");
}

inline std::pair<long long, long long> cell_range(Interval support, double delta) {
  const double lo = std::floor(support.lo / delta) - 1;
  const double hi = std::ceil(support.hi / delta);
  if (hi - lo > 5e7) throw SizeError("more than 5e7 cells of width " + format_real(delta));
  return {(long long)lo, (long long)hi};
}

inline double nudge_inside(double x, double toward) {
  return x + 1e-12 * (toward - x);
}

}  // namespace detail

// Law of the in-cell offset U of X on [0,1]. Its CDF is
// S(u) = sum_i [F(iΔ + uΔ) - F(iΔ)]; cells of the continuous part are kept in
// decreasing mass order until the residual mass is below 1e-12.
class CellOffsetLaw {
 public:
  CellOffsetLaw(ScalarDistribution seed, double delta) : seed_(std::move(seed)), delta_(delta) {
    detail::require_delta(delta);
    std::vector<std::pair<double, double>> offsets;
    for (const auto& [x, m] : seed_.atoms()) offsets.emplace_back(sawtooth_cell(x, delta).frac, m);
    std::sort(offsets.begin(), offsets.end());
    CompensatedSum cum;
    for (const auto& [u, m] : offsets) {
      if (!atom_u_.empty() && atom_u_.back() == u) {
        cum.add(m);
        atom_mass_.back() += m;
        atom_cum_.back() = cum.value();
        continue;
      }
      cum.add(m);
      atom_u_.push_back(u);
      atom_mass_.push_back(m);
      atom_cum_.push_back(cum.value());
    }
    wc_ = 1.0 - seed_.discrete_weight();
    if (wc_ > 0.0) build_cells();
  }

  const ScalarDistribution& seed() const noexcept { return seed_; }
  double delta() const noexcept { return delta_; }
  double continuous_weight() const noexcept { return wc_; }
  std::span<const long long> cells() const noexcept { return cells_; }
  std::span<const double> atom_offsets() const noexcept { return atom_u_; }
  std::span<const double> atom_masses() const noexcept { return atom_mass_; }

  // continuous contribution to S(u), weighted
  double continuous_cdf(double u) const {
    if (wc_ == 0.0 || u <= 0.0) return 0.0;
    if (u >= 1.0) return wc_;
    const auto& fc = seed_.definition().continuous_cdf;
    CompensatedSum s;
    for (std::size_t k = 0; k < cells_.size(); ++k)
      s.add(std::clamp(fc((double(cells_[k]) + u) * delta_), 0.0, 1.0) - base_[k]);
    return wc_ * s.value();
  }

  double atom_cdf(double u) const {
    const auto it = std::upper_bound(atom_u_.begin(), atom_u_.end(), u);
    return it == atom_u_.begin() ? 0.0 : atom_cum_[std::size_t(it - atom_u_.begin()) - 1];
  }
  double atom_cdf_left(double u) const {
    const auto it = std::lower_bound(atom_u_.begin(), atom_u_.end(), u);
    return it == atom_u_.begin() ? 0.0 : atom_cum_[std::size_t(it - atom_u_.begin()) - 1];
  }

  double cdf(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return atom_cdf(u) + continuous_cdf(u);
  }
  double cdf_left(double u) const {
    if (u <= 0.0) return 0.0;
    if (u > 1.0) return 1.0;
    return atom_cdf_left(u) + continuous_cdf(u);
  }

  // r(u) = Δ sum_i p(iΔ + uΔ), the density of U
  double density(double u) const {
    if (!seed_.has_density()) throw PreconditionError(seed_.name() + " has no density");
    CompensatedSum s;
    for (long long i : cells_) s.add(seed_.density((double(i) + u) * delta_));
    return delta_ * s.value();
  }

  // offsets of the seed's breakpoints, where r may have kinks or jumps
  std::vector<double> density_cuts() const {
    std::vector<double> cuts{0.0, 1.0};
    for (double b : seed_.breakpoints()) {
      const double f = sawtooth_cell(b, delta_).frac;
      if (f > 0.0 && f < 1.0) cuts.push_back(f);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
  }

 private:
  void build_cells() {
    const auto& fc = seed_.definition().continuous_cdf;
    auto F = [&](double x) { return std::clamp(fc(x), 0.0, 1.0); };
    const auto [first, last] = detail::cell_range(seed_.support(), delta_);
    std::vector<std::pair<double, long long>> masses;
    double prev = F(double(first) * delta_);
    for (long long i = first; i <= last; ++i) {
      const double next = F(double(i + 1) * delta_);
      if (next - prev > 0.0) masses.emplace_back(next - prev, i);
      prev = next;
    }
    std::stable_sort(masses.begin(), masses.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    CompensatedSum kept;
    std::size_t count = 0;
    while (count < masses.size() && 1.0 - kept.value() >= kCellMassFloor) kept.add(masses[count++].first);
    for (std::size_t k = 0; k < count; ++k) cells_.push_back(masses[k].second);
    std::sort(cells_.begin(), cells_.end());
    base_.reserve(cells_.size());
    for (long long i : cells_) base_.push_back(F(double(i) * delta_));
  }

  ScalarDistribution seed_;
  double delta_;
  double wc_ = 0.0;
  std::vector<long long> cells_;
  std::vector<double> base_;
  std::vector<double> atom_u_, atom_mass_, atom_cum_;
};

// sup_u |S(u) - u|: the KS error of the sawtooth output against any continuous
// target. Exact for discrete seeds; otherwise a 10^4-point grid in u, the atom
// offsets from both sides, and golden-section refinement of the top three maxima.
inline double exact_ks_sawtooth(const CellOffsetLaw& law) {
  double best = 0.0;
  const auto us = law.atom_offsets();
  const auto ms = law.atom_masses();
  if (law.continuous_weight() == 0.0) {
    CompensatedSum cum;
    for (std::size_t k = 0; k < us.size(); ++k) {
      best = std::max(best, std::abs(cum.value() - us[k]));
      cum.add(ms[k]);
      best = std::max(best, std::abs(cum.value() - us[k]));
    }
    return best;
  }
  for (double u : us) best = std::max({best, std::abs(law.cdf(u) - u), std::abs(law.cdf_left(u) - u)});
  auto gap = [&](double u) { return std::abs(law.cdf(u) - u); };
  std::vector<double> vals(kOffsetGridPoints + 1);
  for (int j = 0; j <= kOffsetGridPoints; ++j) vals[std::size_t(j)] = gap(double(j) / kOffsetGridPoints);
  best = std::max(best, *std::max_element(vals.begin(), vals.end()));
  for (std::size_t idx : top_local_maxima(vals, 3)) {
    const double a = double(idx == 0 ? 0 : idx - 1) / kOffsetGridPoints;
    const double b = double(std::min<std::size_t>(idx + 1, kOffsetGridPoints)) / kOffsetGridPoints;
    best = std::max(best, golden_section_max(gap, a, b, 1e-9).value);
  }
  return best;
}

inline double exact_ks_sawtooth(const ScalarDistribution& seed, double delta) {
  return exact_ks_sawtooth(CellOffsetLaw(seed, delta));
}

// KS of the output against a given target. Continuous targets give the
// u-supremum above; a discrete target only sees u at its CDF levels.
inline double exact_ks_sawtooth(const ScalarDistribution& seed, double delta, const ScalarDistribution& target) {
  CellOffsetLaw law(seed, delta);
  if (target.is_continuous()) return exact_ks_sawtooth(law);
  if (!target.is_discrete()) throw PreconditionError("target " + target.name() + " mixes atoms and a continuous part");
  double best = 0.0;
  for (double level : target.pmf().cumulative()) best = std::max(best, std::abs(law.cdf(level) - level));
  return best;
}

// f_Δ(x) = G^{-1}((x - iΔ)/Δ) on (iΔ,(i+1)Δ].
class SawtoothSimulator {
 public:
  SawtoothSimulator(double delta, ScalarDistribution target) : delta_(delta), target_(std::move(target)) {
    detail::require_delta(delta);
  }

  double delta() const noexcept { return delta_; }
  const ScalarDistribution& target() const noexcept { return target_; }

  double operator()(double x) const { return target_.quantile(sawtooth_cell(x, delta_).frac); }

  // P(f(X) <= y) = S(G(y)), built straight from the seed CDF
  ScalarDistribution output_law(const ScalarDistribution& seed) const {
    auto law = std::make_shared<const CellOffsetLaw>(seed, delta_);
    const std::string name = "sawtooth(" + detail::short_real(delta_) + "," + seed.name() + "->" + target_.name() + ")";
    if (target_.is_discrete()) {
      std::vector<std::pair<double, double>> atoms;
      double prev = 0.0;
      const auto& q = target_.pmf();
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double s = law->cdf(q.cumulative()[j]);
        atoms.emplace_back(q.support()[j], s - prev);
        prev = s;
      }
      return from_pmf(DiscretePmf::from_unsorted(std::move(atoms)), name);
    }
    if (!target_.is_continuous()) throw PreconditionError("target " + target_.name() + " mixes atoms and a continuous part");
    std::vector<std::pair<double, double>> images;
    for (const auto& [x, m] : seed.atoms()) images.emplace_back((*this)(x), m);
    const double wc = law->continuous_weight();
    if (wc == 0.0) return from_pmf(DiscretePmf::from_unsorted(std::move(images)), name);

    LawDefinition d;
    d.name = name;
    auto G = target_;
    d.continuous_cdf = [law, G, wc](double y) { return law->continuous_cdf(G.cdf(y)) / wc; };
    const bool ac = seed.has_density() && target_.has_density();
    d.kind = ac ? DistributionClass::absolutely_continuous : DistributionClass::singular_continuous;
    if (ac) d.density = [law, G](double y) { return law->density(G.cdf(y)) * G.density(y); };
    d.support = target_.support();
    d.breakpoints = target_.breakpoints();
    if (images.empty()) return ScalarDistribution(std::move(d));
    for (auto& [y, m] : images) m /= seed.discrete_weight();
    auto atoms = DiscretePmf::from_unsorted(std::move(images));
    d.kind = DistributionClass::mixture;
    d.density = nullptr;
    d.atoms = atoms;
    d.atom_weight = seed.discrete_weight();
    d.support = {std::min(d.support.lo, atoms.support().front()), std::max(d.support.hi, atoms.support().back())};
    return ScalarDistribution(std::move(d));
  }

 private:
  double delta_;
  ScalarDistribution target_;
};

inline double sawtooth_eval(const SawtoothSimulator& sim, double x) { return sim(x); }

// p̂: the seed density averaged over each cell (iΔ,(i+1)Δ].
struct AveragedDensity {
  double delta = 1.0;
  long long first_index = 0;
  std::vector<double> cell_means;
  std::function<double(double)> source;

  double operator()(double x) const {
    const long long i = sawtooth_cell(x, delta).index - first_index;
    return (i >= 0 && i < (long long)cell_means.size()) ? cell_means[std::size_t(i)] : 0.0;
  }

  double mean(long long cell) const {
    const long long i = cell - first_index;
    return (i >= 0 && i < (long long)cell_means.size()) ? cell_means[std::size_t(i)] : 0.0;
  }

  double total_mass() const {
    CompensatedSum s;
    for (double m : cell_means) s.add(m * delta);
    return s.value();
  }
};

// Cell means from CDF differences; the outermost cells also carry the mass
// of the seed beyond them.
inline AveragedDensity averaged_density(const ScalarDistribution& seed, double delta) {
  detail::require_delta(delta);
  if (!seed.has_density()) throw PreconditionError(seed.name() + " has no density");
  const auto [first, last] = detail::cell_range(seed.support(), delta);
  AveragedDensity out;
  out.delta = delta;
  out.first_index = first;
  out.source = [seed](double x) { return seed.density(x); };
  double prev = seed.cdf(double(first) * delta);
  const double lower_tail = prev;
  for (long long i = first; i <= last; ++i) {
    const double next = seed.cdf(double(i + 1) * delta);
    out.cell_means.push_back((next - prev) / delta);
    prev = next;
  }
  out.cell_means.front() += lower_tail / delta;
  out.cell_means.back() += (1.0 - prev) / delta;
  return out;
}

// Cell means by adaptive Simpson over cell ∩ support; p must vanish off the support.
inline AveragedDensity averaged_density(std::function<double(double)> p, double delta, Interval support,
                                        double tol = 1e-10) {
  detail::require_delta(delta);
  const auto [first, last] = detail::cell_range(support, delta);
  AveragedDensity out;
  out.delta = delta;
  out.first_index = first;
  out.source = p;
  const double cell_tol = tol / double(last - first + 1);
  for (long long i = first; i <= last; ++i) {
    const double a = std::max(double(i) * delta, support.lo);
    const double b = std::min(double(i + 1) * delta, support.hi);
    if (!(b > a)) {
      out.cell_means.push_back(0.0);
      continue;
    }
    const auto r = adaptive_simpson(p, a, b, cell_tol);
    if (!r.converged) throw NumericError("cell " + std::to_string(i) + ": quadrature did not converge");
    out.cell_means.push_back(r.value / delta);
  }
  if (std::abs(out.total_mass() - 1.0) > 1e-8)
    throw NumericError("averaged density has mass " + format_real(out.total_mass()));
  return out;
}

namespace detail {

// Points in [a,b] where p - c changes sign, from 32 sub-samples, the seed's
// breakpoints and bisection.
inline std::vector<double> sign_change_points(const std::function<double(double)>& p, double c, double a, double b,
                                              const std::vector<double>& breakpoints) {
  std::vector<double> xs;
  constexpr int kSamples = 32;
  for (int k = 0; k <= kSamples; ++k) xs.push_back(a + (b - a) * k / kSamples);
  for (double bp : breakpoints)
    if (bp > a && bp < b) xs.push_back(bp);
  std::sort(xs.begin(), xs.end());
  auto sign_at = [&](double x) {
    double v = p(x);
    if (!std::isfinite(v)) v = p(nudge_inside(x, 0.5 * (a + b)));
    const double d = v - c;
    return d > 0 ? 1 : (d < 0 ? -1 : 0);
  };
  std::vector<double> cuts;
  int prev_sign = sign_at(nudge_inside(xs.front(), b));
  double prev_x = xs.front();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const double x = xs[k] == b ? nudge_inside(b, a) : xs[k];
    const int s = sign_at(x);
    if (s == 0) continue;
    if (prev_sign != 0 && s != prev_sign) {
      const int from = prev_sign;
      cuts.push_back(bisect_threshold([&](double t) { return sign_at(t) != from; }, prev_x, x, 1e-15));
    }
    prev_sign = s;
    prev_x = x;
  }
  return cuts;
}

}  // namespace detail

// ∫|p - p̂| = 2∫[p - p̂]^+, which bounds twice the sup-over-sets TV of the
// output. Each cell is split where p crosses its mean, and each piece is a
// CDF difference.
inline double tv_upper_bound(const ScalarDistribution& seed, double delta) {
  detail::require_delta(delta);
  if (!seed.has_density()) throw PreconditionError(seed.name() + " has no density");
  const auto [first, last] = detail::cell_range(seed.support(), delta);
  const std::function<double(double)> p = [&](double x) { return seed.density(x); };
  CompensatedSum total;
  for (long long i = first; i <= last; ++i) {
    const double a = double(i) * delta;
    const double b = double(i + 1) * delta;
    const double fa = seed.cdf(a);
    const double fb = seed.cdf(b);
    const double mass = fb - fa;
    if (!(mass > 0.0)) continue;
    const double c = mass / delta;
    double x0 = a, f0 = fa;
    for (double x : detail::sign_change_points(p, c, a, b, seed.breakpoints())) {
      const double fx = seed.cdf(x);
      total.add(std::abs(fx - f0 - c * (x - x0)));
      x0 = x;
      f0 = fx;
    }
    total.add(std::abs(fb - f0 - c * (b - x0)));
  }
  return total.value();
}

// Same bound from a bare density evaluator by adaptive Simpson.
inline double tv_upper_bound(const std::function<double(double)>& p, double delta, Interval support,
                             double tol = 1e-10) {
  const AveragedDensity avg = averaged_density(p, delta, support, tol);
  const double cell_tol = tol / double(avg.cell_means.size());
  CompensatedSum total;
  for (std::size_t k = 0; k < avg.cell_means.size(); ++k) {
    const long long i = avg.first_index + (long long)k;
    const double a = std::max(double(i) * delta, support.lo);
    const double b = std::min(double(i + 1) * delta, support.hi);
    if (!(b > a)) continue;
    const double c = avg.cell_means[k];
    std::vector<double> cuts = detail::sign_change_points(p, c, a, b, {});
    cuts.push_back(a);
    cuts.push_back(b);
    const auto r = integrate_pieces([&](double x) { return std::abs(p(x) - c); }, cuts, cell_tol);
    if (!r.converged) throw NumericError("cell " + std::to_string(i) + ": quadrature did not converge");
    total.add(r.value);
    // parts of the cell off the support, where p = 0
    total.add(c * (delta - (b - a)));
  }
  return total.value();
}

struct RateSlope {
  double interior = 0.0;  // ∫|p'| away from jumps
  double jumps = 0.0;     // sum of jump sizes of p at breakpoints and support ends
  double value() const { return interior + jumps; }
  bool finite() const { return std::isfinite(value()); }
};

// Jump sizes |p(b+) - p(b-)| at the support ends and breakpoints.
inline double density_jump_total(const ScalarDistribution& seed) {
  if (!seed.has_density()) throw PreconditionError(seed.name() + " has no density");
  std::vector<double> points = seed.breakpoints();
  points.push_back(seed.support().lo);
  points.push_back(seed.support().hi);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  CompensatedSum total;
  for (double b : points) {
    const double h = 1e-9 * std::max(1.0, std::abs(b));
    const double left = b - h < seed.support().lo ? 0.0 : seed.density(b - h);
    const double right = b + h > seed.support().hi ? 0.0 : seed.density(b + h);
    total.add(std::abs(right - left));
  }
  return total.value();
}

// ∫|p'| by adaptive Simpson between breakpoints. Near each end of a piece the
// integral is taken over a ladder of segments down to 1e-12 of the piece; if
// the innermost segment still adds more than 1e-8 the integral is reported as
// divergent (+inf).
inline RateSlope rate_slope(const ScalarDistribution& seed) {
  if (!seed.has_density()) throw PreconditionError(seed.name() + " has no density");
  std::vector<double> cuts = seed.breakpoints();
  cuts.push_back(seed.support().lo);
  cuts.push_back(seed.support().hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::erase_if(cuts, [&](double c) { return c < seed.support().lo || c > seed.support().hi; });
  auto dp = [&](double x) { return std::abs(seed.density_derivative(x)); };
  CompensatedSum interior;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const double e0 = 0.01 * (b - a);
    const auto core = adaptive_simpson(dp, a + e0, b - e0, 1e-10);
    if (!core.converged) throw NumericError("rate slope: quadrature did not converge on the core of a piece");
    interior.add(core.value);
    for (int side = 0; side < 2; ++side) {
      double len = e0;
      double last = 0.0;
      for (int step = 0; step < 5; ++step) {
        const double inner = len * 1e-2;
        const double lo = side == 0 ? a + inner : b - len;
        const double hi = side == 0 ? a + len : b - inner;
        last = adaptive_simpson(dp, lo, hi, 1e-12).value;
        interior.add(last);
        len = inner;
      }
      if (!(last <= 1e-8)) return {kInf, density_jump_total(seed)};
    }
  }
  return {interior.value(), density_jump_total(seed)};
}

namespace detail {

struct LadderIntegral {
  double value = 0.0;
  bool divergent = false;
};

// ∫f over each piece: a core rule plus a ladder of segments shrinking by 100x
// towards both ends. A ladder whose segments stop shrinking (ratio above 1/2)
// is divergent; otherwise the geometric remainder is added.
template <class F>
LadderIntegral integrate_with_end_ladders(F&& f, const std::vector<double>& cuts, double tol) {
  CompensatedSum total;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (!(b > a)) continue;
    const double e0 = 0.01 * (b - a);
    const auto core = adaptive_simpson(f, a + e0, b - e0, tol);
    if (!core.converged) throw NumericError("Renyi quadrature did not converge");
    total.add(core.value);
    for (int side = 0; side < 2; ++side) {
      double len = e0, prev = 0.0, last = 0.0;
      for (int step = 0; step < 6; ++step) {
        const double inner = len * 1e-2;
        const double lo = side == 0 ? a + inner : b - len;
        const double hi = side == 0 ? a + len : b - inner;
        const auto seg = adaptive_simpson(f, lo, hi, tol);
        if (!seg.converged && !std::isfinite(seg.value)) return {kInf, true};
        prev = last;
        last = seg.value;
        total.add(last);
        len = inner;
      }
      const double ratio = prev > 0.0 ? last / prev : 0.0;
      if (last > 1e-10 && ratio > 0.5) return {kInf, true};
      if (ratio > 0.0) total.add(last * ratio / (1.0 - ratio));
    }
  }
  return {total.value(), false};
}

// r grows without bound at a piece end when its increments along u = 1e-3,
// 1e-6, 1e-9, 1e-12 of the piece do not shrink.
template <class F>
bool unbounded_at_ends(F&& r, const std::vector<double>& cuts) {
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (!(b > a)) continue;
    for (int side = 0; side < 2; ++side) {
      double v[4];
      for (int j = 0; j < 4; ++j) {
        const double h = (b - a) * std::pow(1e-3, j + 1);
        v[j] = r(side == 0 ? a + h : b - h);
      }
      const double d1 = v[2] - v[1], d2 = v[3] - v[2];
      if (v[1] > v[0] && d1 > 0.0 && d2 >= 0.5 * d1 && d2 > 1e-9 * std::max(1.0, v[3])) return true;
    }
  }
  return false;
}

}  // namespace detail

// D_α of the output against a continuous target, through r(u):
// (1/(α-1)) log ∫ r^α, with the α = 0, 1, ∞ limits. +inf when ∫ r^α or sup r
// diverges.
inline double renyi_sawtooth(const CellOffsetLaw& law, double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("Renyi order must be non-negative");
  auto r = [&](double u) { return law.density(u); };
  const auto cuts = law.density_cuts();
  if (alpha == 0.0) {
    int positive = 0;
    for (int j = 0; j < kOffsetGridPoints; ++j)
      if (r((j + 0.5) / kOffsetGridPoints) > 0.0) ++positive;
    return std::max(0.0, -std::log(double(positive) / kOffsetGridPoints));
  }
  if (std::isinf(alpha)) {
    if (detail::unbounded_at_ends(r, cuts)) return kInf;
    std::vector<double> vals(kOffsetGridPoints + 1);
    for (int j = 0; j <= kOffsetGridPoints; ++j) {
      const double u = double(j) / kOffsetGridPoints;
      vals[std::size_t(j)] = r(j == 0 ? 1e-12 : u);
    }
    double best = *std::max_element(vals.begin(), vals.end());
    for (std::size_t idx : top_local_maxima(vals, 3)) {
      const double a = double(idx == 0 ? 0 : idx - 1) / kOffsetGridPoints;
      const double b = double(std::min<std::size_t>(idx + 1, kOffsetGridPoints)) / kOffsetGridPoints;
      best = std::max(best, golden_section_max(r, std::max(a, 1e-12), b, 1e-12).value);
    }
    return std::max(0.0, std::log(best));
  }
  if (alpha == 1.0) {
    const auto q = detail::integrate_with_end_ladders(
        [&](double u) {
          const double v = r(u);
          return v > 0.0 ? v * std::log(v) : 0.0;
        },
        cuts, 1e-11);
    return q.divergent ? kInf : std::max(0.0, q.value);
  }
  const auto q = detail::integrate_with_end_ladders([&](double u) { return std::pow(r(u), alpha); }, cuts, 1e-11);
  if (q.divergent) {
    if (alpha < 1.0) throw NumericError("Renyi quadrature diverged below order one");
    return kInf;
  }
  return std::max(0.0, std::log(q.value) / (alpha - 1.0));
}

inline double renyi_sawtooth(const ScalarDistribution& seed, double delta, double alpha) {
  return renyi_sawtooth(CellOffsetLaw(seed, delta), alpha);
}

// sup over windows [x1, x1+Δ] with F(x1+Δ) - F(x1) > 1e-12 of
// |(F(x1+x) - F(x1)) / (F(x1+Δ) - F(x1)) - x/Δ|.
// Window starts: a 1000-point grid over the support, the cell edges iΔ, and
// each atom and a point just below it. Offsets: 100 grid points plus every
// atom in the window from both sides.
inline double smoothness_defect(const ScalarDistribution& seed, double delta) {
  detail::require_delta(delta);
  Interval s = seed.support();
  if (!std::isfinite(s.lo)) s.lo = seed.quantile(kCellMassFloor);
  if (!std::isfinite(s.hi)) s.hi = seed.quantile(1.0 - kCellMassFloor);
  // windows stay inside the support hull; a hull shorter than Δ gets windows covering it
  double a = s.lo, b = s.hi - delta;
  if (b < a) std::swap(a, b);
  std::vector<double> starts;
  for (int k = 0; k <= 1000; ++k) starts.push_back(a + (b - a) * k / 1000.0);
  const auto [first, last] = detail::cell_range(s, delta);
  for (long long i = first; i <= last; ++i) starts.push_back(double(i) * delta);
  const auto atoms = seed.atoms();
  std::vector<double> atom_x;
  for (const auto& [x, m] : atoms) {
    atom_x.push_back(x);
    starts.push_back(x);
    starts.push_back(x - 1e-9 * delta);
  }
  std::erase_if(starts, [&](double x) { return x < a || x > b; });
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  const bool discrete = seed.is_discrete();
  double best = 0.0;
  for (double x1 : starts) {
    const double f1 = seed.cdf(x1);
    const double m = seed.cdf(x1 + delta) - f1;
    if (!(m > kCellMassFloor)) continue;
    // atoms in (x1, x1 + Δ]
    auto lo = std::upper_bound(atom_x.begin(), atom_x.end(), x1);
    auto hi = std::upper_bound(atom_x.begin(), atom_x.end(), x1 + delta);
    for (auto it = lo; it != hi; ++it) {
      const double t = (*it - x1) / delta;
      best = std::max({best, std::abs((seed.cdf(*it) - f1) / m - t), std::abs((seed.cdf_left(*it) - f1) / m - t)});
    }
    if (discrete) continue;
    for (int k = 1; k < 100; ++k) {
      const double t = k / 100.0;
      best = std::max(best, std::abs((seed.cdf(x1 + t * delta) - f1) / m - t));
    }
  }
  return best;
}

}  // namespace universim
