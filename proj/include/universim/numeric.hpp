#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "universim/errors.hpp"

namespace universim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier-compensated running sum
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // accumulated |S2 - S1| / 15 over accepted panels
  bool converged = true;
};

namespace detail {

template <class F>
double guarded_eval(F& f, double x, double toward) {
  double v = f(x);
  if (std::isfinite(v)) return v;
  for (double s : {1e-12, 1e-9, 1e-6}) {
    v = f(x + (toward - x) * s);
    if (std::isfinite(v)) return v;
  }
  throw NumericError("integrand not finite near x = " + std::to_string(x));
}

struct SimpsonState {
  CompensatedSum value;
  CompensatedSum error;
  CompensatedSum capped_error;
};

template <class F>
void simpson_recurse(F& f, double a, double b, double fa, double fm, double fb, double whole,
                     double tol, int depth, SimpsonState& st) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  const bool small = std::abs(delta) <= 15.0 * tol;
  if (small || depth <= 0 || lm <= a || rm >= b) {
    st.value.add(left + right + delta / 15.0);
    st.error.add(std::abs(delta) / 15.0);
    if (!small) st.capped_error.add(std::abs(delta) / 15.0);
    return;
  }
  simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, st);
  simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, st);
}

}  // namespace detail

// Adaptive Simpson on [a,b]. Non-finite endpoint values are replaced by values
// just inside the interval, which handles integrable endpoint singularities.
template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double tol = 1e-8, int max_depth = 40,
                                  int panels = 8) {
  QuadratureResult out;
  if (!(b > a)) return out;
  detail::SimpsonState st;
  const double h = (b - a) / panels;
  const double panel_tol = tol / panels;
  double x0 = a;
  double f0 = detail::guarded_eval(f, a, b);
  for (int k = 0; k < panels; ++k) {
    const double x1 = (k + 1 == panels) ? b : a + (k + 1) * h;
    const double f1 = (k + 1 == panels) ? detail::guarded_eval(f, b, a) : f(x1);
    const double xm = 0.5 * (x0 + x1);
    const double fm = f(xm);
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    detail::simpson_recurse(f, x0, x1, f0, fm, f1, whole, panel_tol, max_depth, st);
    x0 = x1;
    f0 = f1;
  }
  out.value = st.value.value();
  out.error = st.error.value();
  out.converged = std::isfinite(out.value) && st.capped_error.value() <= tol;
  return out;
}

// Integrate across sorted breakpoints so that kinks and jumps sit on panel edges.
template <class F>
QuadratureResult integrate_pieces(F&& f, std::vector<double> cuts, double tol = 1e-8,
                                  int max_depth = 40) {
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  QuadratureResult out;
  CompensatedSum v, e;
  const double piece_tol = cuts.size() > 1 ? tol / double(cuts.size() - 1) : tol;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto r = adaptive_simpson(f, cuts[i], cuts[i + 1], piece_tol, max_depth);
    v.add(r.value);
    e.add(r.error);
    out.converged = out.converged && r.converged;
  }
  out.value = v.value();
  out.error = e.value();
  return out;
}

// Smallest x in [lo,hi] (to resolution tol) with pred(x) true, given pred(hi) true
// and pred monotone false→true. Returns a point where pred holds.
template <class Pred>
double bisect_threshold(Pred&& pred, double lo, double hi, double tol = 1e-13, int max_iter = 300) {
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (hi - lo <= tol * std::max(1.0, std::abs(lo) + std::abs(hi))) break;
    if (pred(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

struct Extremum {
  double x;
  double value;
};

// Golden-section search for a maximum of a unimodal function on [a,b].
template <class F>
Extremum golden_section_max(F&& f, double a, double b, double tol = 1e-9) {
  constexpr double invphi = 0.6180339887498949;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? Extremum{c, fc} : Extremum{d, fd};
}

// Indices of the k largest strict-or-plateau local maxima of a sampled curve.
inline std::vector<std::size_t> top_local_maxima(std::span<const double> ys, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const bool left_ok = i == 0 || ys[i] >= ys[i - 1];
    const bool right_ok = i + 1 == ys.size() || ys[i] >= ys[i + 1];
    if (left_ok && right_ok) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return ys[a] != ys[b] ? ys[a] > ys[b] : a < b;
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

// Shortest round-trip decimal for CSV output; inf and nan spelled out.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// least-squares slope of ys against xs
inline double fit_slope(std::span<const double> xs, std::span<const double> ys) {
  const double n = double(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace universim
