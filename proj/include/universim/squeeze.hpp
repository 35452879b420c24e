#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "universim/distributions.hpp"
#include "universim/errors.hpp"
#include "universim/numeric.hpp"
#include "universim/universal_ac.hpp"

namespace universim {

inline constexpr double kSqueezeTail = 1e-10;
inline constexpr long long kSqueezeCellCap = 10'000'000;

// Integrable f on a finite support. discarded_mass records what truncation dropped.
struct SupportedFunction {
  std::function<double(double)> eval;
  Interval support;
  std::vector<double> breakpoints;
  double discarded_mass = 0.0;

  double operator()(double x) const { return (x < support.lo || x > support.hi) ? 0.0 : eval(x); }
};

// Density of d restricted to the central 1 - tail of its mass.
inline SupportedFunction truncated_density(const ScalarDistribution& d, double tail = kSqueezeTail) {
  if (!d.has_density()) throw PreconditionError(d.name() + " has no density");
  SupportedFunction f;
  f.support = d.support();
  const double lo = d.quantile(0.5 * tail), hi = d.quantile(1.0 - 0.5 * tail);
  if (lo > f.support.lo) {
    f.support.lo = lo;
    f.discarded_mass += d.cdf(lo);
  }
  if (hi < f.support.hi) {
    f.support.hi = hi;
    f.discarded_mass += 1.0 - d.cdf(hi);
  }
  f.eval = [d](double x) { return d.density(x); };
  f.breakpoints = d.breakpoints();
  return f;
}

// Bounded g on [a,b]. sup = NaN means estimate esssup|g| by sampling.
struct WindowFunction {
  std::function<double(double)> eval;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> breakpoints;
  double sup = std::numeric_limits<double>::quiet_NaN();
};

// g_Δ(x) = g(a + (b-a)(x - iΔ)/Δ) on (iΔ,(i+1)Δ].
class PeriodicizedFunction {
 public:
  PeriodicizedFunction(WindowFunction base, double delta) : base_(std::move(base)), delta_(delta) {
    if (!(delta > 0.0 && std::isfinite(delta))) throw DomainError("period must be positive and finite");
    if (!(base_.b > base_.a)) throw DomainError("window needs a < b");
  }

  double operator()(double x) const {
    const auto c = sawtooth_cell(x, delta_);
    return base_.eval(base_.a + (base_.b - base_.a) * c.frac);
  }

  double delta() const noexcept { return delta_; }
  const WindowFunction& base() const noexcept { return base_; }

 private:
  WindowFunction base_;
  double delta_;
};

struct CorrelationDefect {
  double delta = 0.0;
  double L_delta = 0.0;
  double L = 0.0;
  double defect = 0.0;
  double bound = 0.0;
  double g_sup = 0.0;
  double cell_deviation = 0.0;  // sum_i ∫ |f - f̂_i| over cell i
  double discarded_mass = 0.0;

  static constexpr const char* csv_header = "delta,L_delta,L,defect,bound";
  std::string csv_row() const {
    return format_real(delta) + "," + format_real(L_delta) + "," + format_real(L) + "," + format_real(defect) + "," +
           format_real(bound);
  }
};

namespace detail {

struct SqueezeCell {
  long long index;
  double x0, x1;  // cell ∩ support
  std::vector<double> f_cuts;
  double mass = 0.0;
  double deviation = 0.0;
};

inline void require_quadrature(const QuadratureResult& r, const std::string& what) {
  if (!r.converged) throw NumericError("quadrature failed: " + what);
}

inline std::vector<double> piece_cuts(double x0, double x1, const std::vector<double>& inner) {
  std::vector<double> cuts{x0, x1};
  for (double c : inner)
    if (c > x0 && c < x1) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

// Cells of width Δ meeting the support with their mass and ∫|f - f̂|.
inline std::vector<SqueezeCell> squeeze_cells(const SupportedFunction& f, double delta) {
  if (!(delta > 0.0 && std::isfinite(delta))) throw DomainError("Δ must be positive and finite");
  const Interval s = f.support;
  if (!(std::isfinite(s.lo) && std::isfinite(s.hi) && s.hi > s.lo))
    throw PreconditionError("f needs a finite support interval; truncate it first");
  const double first = std::floor(s.lo / delta);
  const double last = std::ceil(s.hi / delta) - 1;
  if (last - first + 1 > double(kSqueezeCellCap)) throw SizeError("more than 1e7 cells of width " + format_real(delta));
  std::vector<SqueezeCell> cells;
  const double tol = 1e-11 * std::max(delta, 1e-3);
  for (long long i = (long long)first; i <= (long long)last; ++i) {
    SqueezeCell c{i, std::max(double(i) * delta, s.lo), std::min(double(i + 1) * delta, s.hi), {}, 0.0, 0.0};
    if (!(c.x1 > c.x0)) continue;
    c.f_cuts = piece_cuts(c.x0, c.x1, f.breakpoints);
    auto m = integrate_pieces(f, c.f_cuts, tol, 50);
    require_quadrature(m, "mass of cell " + std::to_string(i));
    c.mass = m.value;
    const double fhat = c.mass / delta;
    auto cuts = c.f_cuts;
    for (double x : sign_change_points(f.eval, fhat, c.x0, c.x1, f.breakpoints)) cuts.push_back(x);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto d = integrate_pieces([&](double x) { return std::abs(f(x) - fhat); }, cuts, tol, 50);
    require_quadrature(d, "deviation on cell " + std::to_string(i));
    c.deviation = d.value + std::abs(fhat) * (delta - (c.x1 - c.x0));
    cells.push_back(std::move(c));
  }
  return cells;
}

inline double sampled_sup(const std::function<double(double)>& h, double a, double b,
                          const std::vector<double>& breakpoints) {
  double best = 0.0;
  auto probe = [&](double x) {
    const double v = std::abs(h(x));
    if (std::isfinite(v)) best = std::max(best, v);
  };
  for (int k = 0; k <= 10000; ++k) probe(a + (b - a) * k / 10000.0);
  for (double bp : breakpoints)
    if (bp >= a && bp <= b) {
      probe(std::max(a, bp - 1e-12 * (b - a)));
      probe(std::min(b, bp + 1e-12 * (b - a)));
    }
  return best;
}

// x-positions in cell c of the window breakpoints
inline std::vector<double> mapped_breaks(const SqueezeCell& c, double delta, double a, double b,
                                         const std::vector<double>& window_breaks) {
  std::vector<double> out;
  for (double bp : window_breaks) out.push_back(double(c.index) * delta + delta * (bp - a) / (b - a));
  return out;
}

}  // namespace detail

// |∫ f g_Δ - (1/(b-a)) ∫f ∫g| with the bound esssup|g| · Σ_i ∫|f - f̂_i|.
inline CorrelationDefect correlation_defect(const SupportedFunction& f, const WindowFunction& g, double delta) {
  if (!(g.b > g.a)) throw DomainError("window needs a < b");
  const auto cells = detail::squeeze_cells(f, delta);
  const double a = g.a, b = g.b;
  CompensatedSum ld, total, dev;
  const double tol = 1e-11 * std::max(delta, 1e-3);
  for (const auto& c : cells) {
    auto cuts = c.f_cuts;
    for (double x : detail::mapped_breaks(c, delta, a, b, g.breakpoints)) cuts.push_back(x);
    cuts = detail::piece_cuts(c.x0, c.x1, cuts);
    const double base = double(c.index) * delta;
    auto r = integrate_pieces([&](double x) { return f(x) * g.eval(a + (b - a) * (x - base) / delta); }, cuts, tol, 50);
    detail::require_quadrature(r, "L_delta on cell " + std::to_string(c.index));
    ld.add(r.value);
    total.add(c.mass);
    dev.add(c.deviation);
  }
  auto gi = integrate_pieces(g.eval, detail::piece_cuts(a, b, g.breakpoints), 1e-13, 50);
  detail::require_quadrature(gi, "integral of g");

  CorrelationDefect out;
  out.delta = delta;
  out.L_delta = ld.value();
  out.L = total.value() * gi.value / (b - a);
  out.defect = std::abs(out.L_delta - out.L);
  out.g_sup = std::isnan(g.sup) ? detail::sampled_sup(g.eval, a, b, g.breakpoints) : g.sup;
  out.cell_deviation = dev.value();
  out.bound = out.g_sup * out.cell_deviation;
  out.discarded_mass = f.discarded_mass;
  return out;
}

// g(x,y) = g1(x,y) + g3(x) δ(y - g2(x)) on [a,b] × ℝ. Either part may be empty.
// g2 must be strictly monotone; slope is g2' (central differences when empty).
struct BivariateKernel {
  double a = 0.0;
  double b = 1.0;
  std::function<double(double, double)> regular;
  std::vector<double> x_breakpoints;
  std::function<double(double)> dirac_weight;
  std::function<double(double)> dirac_curve;
  std::function<double(double)> dirac_slope;
};

struct BivariateDefect {
  double delta = 0.0;
  double defect = 0.0;  // ∫ |L_Δ(y) - L(y)| dy on the y-grid
  double bound = 0.0;
  double kernel_sup = 0.0;  // esssup_x (∫|g1(x,y)|dy + |g3(x)|)
  double cell_deviation = 0.0;
  double discarded_mass = 0.0;
  std::vector<double> ys;
  std::vector<double> L_delta;
  std::vector<double> L;

  std::string csv_row() const {
    return format_real(delta) + "," + format_real(trapezoid(L_delta)) + "," + format_real(trapezoid(L)) + "," +
           format_real(defect) + "," + format_real(bound);
  }
  double trapezoid(const std::vector<double>& v) const {
    CompensatedSum s;
    for (std::size_t k = 1; k < ys.size(); ++k) s.add(0.5 * (ys[k] - ys[k - 1]) * (v[k] + v[k - 1]));
    return s.value();
  }
};

namespace detail {

struct MonotoneCurve {
  std::function<double(double)> g2, slope;
  double a, b;
  bool increasing;

  MonotoneCurve(const BivariateKernel& k) : g2(k.dirac_curve), slope(k.dirac_slope), a(k.a), b(k.b) {
    constexpr int n = 2000;
    double prev = g2(a);
    const double first_step = g2(a + (b - a) / n) - prev;
    increasing = first_step > 0;
    for (int j = 1; j <= n; ++j) {
      const double y = g2(a + (b - a) * j / n);
      const double step = y - prev;
      if (!(increasing ? step > 0 : step < 0)) throw PreconditionError("dirac curve g2 must be strictly monotone on [a,b]");
      prev = y;
    }
    if (!slope) {
      slope = [g = g2, a = a, b = b](double x) {
        const double h = 1e-6 * (b - a);
        const double lo = std::max(a, x - h), hi = std::min(b, x + h);
        return (g(hi) - g(lo)) / (hi - lo);
      };
    }
  }

  double ymin() const { return increasing ? g2(a) : g2(b); }
  double ymax() const { return increasing ? g2(b) : g2(a); }

  // s in [a,b] with g2(s) = y, for y inside the range
  double root(double y) const {
    return bisect_threshold([&](double s) { return increasing ? g2(s) >= y : g2(s) <= y; }, a, b, 1e-15);
  }
};

}  // namespace detail

// L1-in-y defect of f against the periodicized kernel, on the y-grid ys (trapezoid rule).
inline BivariateDefect correlation_defect_bivariate(const SupportedFunction& f, const BivariateKernel& g, double delta,
                                                    const std::vector<double>& ys) {
  if (!(g.b > g.a)) throw DomainError("kernel needs a < b");
  if (ys.size() < 2 || !std::is_sorted(ys.begin(), ys.end())) throw PreconditionError("y-grid must be sorted with >= 2 points");
  if (bool(g.dirac_weight) != bool(g.dirac_curve)) throw PreconditionError("dirac part needs both weight and curve");
  const auto cells = detail::squeeze_cells(f, delta);
  const double a = g.a, b = g.b, w = b - a;
  std::optional<detail::MonotoneCurve> curve;
  if (g.dirac_curve) curve.emplace(g);

  BivariateDefect out;
  out.delta = delta;
  out.ys = ys;
  out.discarded_mass = f.discarded_mass;
  CompensatedSum mass, dev;
  for (const auto& c : cells) {
    mass.add(c.mass);
    dev.add(c.deviation);
  }
  out.cell_deviation = dev.value();
  const double f_total = mass.value();
  const double tol = 1e-11 * std::max(delta, 1e-3);

  // cuts per cell do not depend on y
  std::vector<std::vector<double>> cell_cuts;
  for (const auto& c : cells) {
    auto cuts = c.f_cuts;
    for (double x : detail::mapped_breaks(c, delta, a, b, g.x_breakpoints)) cuts.push_back(x);
    cell_cuts.push_back(detail::piece_cuts(c.x0, c.x1, cuts));
  }
  const auto window_cuts = detail::piece_cuts(a, b, g.x_breakpoints);

  for (double y : ys) {
    CompensatedSum ld, l;
    if (g.regular) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        const double base = double(cells[j].index) * delta;
        auto r = integrate_pieces([&](double x) { return f(x) * g.regular(a + w * (x - base) / delta, y); }, cell_cuts[j], tol,
                                  50);
        detail::require_quadrature(r, "L_delta(y) on cell " + std::to_string(cells[j].index));
        ld.add(r.value);
      }
      auto gi = integrate_pieces([&](double x) { return g.regular(x, y); }, window_cuts, 1e-13, 50);
      detail::require_quadrature(gi, "integral of g(., y)");
      l.add(f_total * gi.value / w);
    }
    if (curve && y >= curve->ymin() && y <= curve->ymax()) {
      const double s = curve->root(y);
      const double jac = g.dirac_weight(s) / std::abs(curve->slope(s));
      const double t = (s - a) / w;
      CompensatedSum hits;
      for (const auto& c : cells) hits.add(f(double(c.index) * delta + delta * t));
      ld.add(delta / w * jac * hits.value());
      l.add(f_total / w * jac);
    }
    out.L_delta.push_back(ld.value());
    out.L.push_back(l.value());
  }
  std::vector<double> gap(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) gap[k] = std::abs(out.L_delta[k] - out.L[k]);
  out.defect = out.trapezoid(gap);

  // esssup_x of ∫|g(x,y)|dy with the same y-rule
  std::vector<double> xs;
  for (int k = 0; k <= 1000; ++k) xs.push_back(a + w * k / 1000.0);
  for (double bp : g.x_breakpoints)
    if (bp > a && bp < b) {
      xs.push_back(bp - 1e-12 * w);
      xs.push_back(bp + 1e-12 * w);
    }
  std::vector<double> row(ys.size());
  for (double x : xs) {
    double v = 0.0;
    if (g.regular) {
      for (std::size_t k = 0; k < ys.size(); ++k) row[k] = std::abs(g.regular(x, ys[k]));
      v += out.trapezoid(row);
    }
    if (g.dirac_weight) v += std::abs(g.dirac_weight(x));
    if (std::isfinite(v)) out.kernel_sup = std::max(out.kernel_sup, v);
  }
  out.bound = out.kernel_sup * out.cell_deviation;
  return out;
}

}  // namespace universim
