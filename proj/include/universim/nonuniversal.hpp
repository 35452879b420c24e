#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "universim/distributions.hpp"
#include "universim/errors.hpp"
#include "universim/metrics.hpp"
#include "universim/numeric.hpp"

namespace universim {

using Sequence = std::vector<std::uint8_t>;
using SeedAtom = std::variant<double, Sequence>;

inline constexpr std::uint64_t kEnumerationCap = 10'000'000;

// alphabet^n, or throws SizeError when it exceeds cap
inline std::uint64_t checked_power(std::uint64_t alphabet, int n, std::uint64_t cap) {
  if (alphabet == 0 || n < 0) throw DomainError("alphabet must be non-empty and n >= 0");
  std::uint64_t v = 1;
  for (int i = 0; i < n; ++i) {
    if (v > cap / alphabet)
      throw SizeError(std::to_string(alphabet) + "^" + std::to_string(n) + " sequences exceed the cap of " +
                      std::to_string(cap));
    v *= alphabet;
  }
  return v;
}

// all sequences of length n in lexicographic order
inline std::vector<Sequence> enumerate_sequences(int alphabet, int n, std::uint64_t cap = kEnumerationCap) {
  if (alphabet < 1 || alphabet > 256) throw DomainError("alphabet size must lie in [1,256]");
  const std::uint64_t count = checked_power(std::uint64_t(alphabet), n, cap);
  std::vector<Sequence> out;
  out.reserve(count);
  Sequence s(std::size_t(n), 0);
  for (std::uint64_t k = 0; k < count; ++k) {
    out.push_back(s);
    for (int i = n - 1; i >= 0; --i) {
      if (++s[std::size_t(i)] < alphabet) break;
      s[std::size_t(i)] = 0;
    }
  }
  return out;
}

inline std::string format_seed_atom(const SeedAtom& a) {
  if (const double* x = std::get_if<double>(&a)) return format_real(*x);
  const Sequence& s = std::get<Sequence>(a);
  const bool wide = std::any_of(s.begin(), s.end(), [](auto c) { return c >= 10; });
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (wide && i) out += ':';
    out += std::to_string(unsigned(s[i]));
  }
  return out;
}

// Finite law over sequences, kept in lexicographic order.
struct SequenceLaw {
  int alphabet = 0;
  std::vector<Sequence> sequences;
  std::vector<double> probs;
};

// Probability of a sequence under an i.i.d. law. Computed from symbol counts so
// that sequences of the same type get bit-identical values.
inline double iid_sequence_probability(std::span<const double> symbol_probs, const Sequence& s) {
  std::vector<int> counts(symbol_probs.size(), 0);
  for (auto c : s) ++counts.at(c);
  double p = 1.0;
  for (std::size_t a = 0; a < counts.size(); ++a)
    if (counts[a]) p *= std::pow(symbol_probs[a], counts[a]);
  return p;
}

inline SequenceLaw iid_sequence_law(std::span<const double> symbol_probs, int n,
                                    std::uint64_t cap = kEnumerationCap) {
  SequenceLaw law;
  law.alphabet = int(symbol_probs.size());
  law.sequences = enumerate_sequences(law.alphabet, n, cap);
  law.probs.reserve(law.sequences.size());
  for (const auto& s : law.sequences) law.probs.push_back(iid_sequence_probability(symbol_probs, s));
  return law;
}

struct MappingEntry {
  SeedAtom seed_atom;
  double probability = 0.0;
  double target_value = 0.0;
};

// Explicit finite simulator: seed atoms with their probabilities and images.
class MappingTable {
 public:
  explicit MappingTable(std::vector<MappingEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ValidationError("mapping table is empty");
    CompensatedSum total;
    std::vector<std::pair<double, double>> image;
    image.reserve(entries_.size());
    for (const auto& e : entries_) {
      if (!(e.probability >= 0.0)) throw ValidationError("mapping table: negative probability");
      if (!std::isfinite(e.target_value)) throw ValidationError("mapping table: non-finite target value");
      total.add(e.probability);
      image.emplace_back(e.target_value, e.probability);
    }
    if (std::abs(total.value() - 1.0) > DiscretePmf::kMassTolerance)
      throw ValidationError("mapping table probabilities sum to " + format_real(total.value()));
    std::stable_sort(entries_.begin(), entries_.end(), [](const MappingEntry& a, const MappingEntry& b) {
      return a.seed_atom < b.seed_atom;
    });
    output_ = DiscretePmf::from_unsorted(std::move(image));
  }

  std::span<const MappingEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const DiscretePmf& output_law() const { return *output_; }
  double output_cdf(double y) const { return output_->cdf(y); }
  double output_cdf_left(double y) const { return output_->cdf_left(y); }

  double ks_error(const ScalarDistribution& target) const {
    return ks_distance(from_pmf(*output_, "output"), target).value;
  }
  double tv_error(const DiscretePmf& target) const { return tv_distance(*output_, target); }

  std::string to_csv() const {
    std::string out = "seed_atom,probability,target_value\n";
    for (const auto& e : entries_)
      out += format_seed_atom(e.seed_atom) + "," + format_real(e.probability) + "," +
             format_real(e.target_value) + "\n";
    return out;
  }

 private:
  std::vector<MappingEntry> entries_;
  std::optional<DiscretePmf> output_;
};

namespace detail {

inline void require_continuous_target(const ScalarDistribution& target) {
  if (!target.is_continuous())
    throw PreconditionError("target " + target.name() + " has atoms; use greedy_discrete_map");
}

inline double clamp_level(double t) {
  return std::clamp(t, std::numeric_limits<double>::min(), 1.0);
}

}  // namespace detail

// Atom x goes to G^{-1}(F(x-) + P(x)/2); the achieved KS is half the largest atom.
inline MappingTable atom_midpoint_map(const DiscretePmf& p, const ScalarDistribution& target) {
  detail::require_continuous_target(target);
  std::vector<MappingEntry> entries;
  entries.reserve(p.size());
  CompensatedSum prefix;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = p.probs()[i];
    entries.push_back({p.support()[i], m, target.quantile(detail::clamp_level(prefix.value() + 0.5 * m))});
    prefix.add(m);
  }
  return MappingTable(std::move(entries));
}

inline MappingTable atom_midpoint_map(const ScalarDistribution& p, const ScalarDistribution& target) {
  if (!p.is_discrete())
    throw PreconditionError(p.name() + " is not a finite discrete law; inverse_transform_map covers continuous seeds");
  return atom_midpoint_map(p.pmf(), target);
}

// Same rule over a sequence law, atoms taken in lexicographic order.
inline MappingTable atom_midpoint_map(const SequenceLaw& law, const ScalarDistribution& target) {
  detail::require_continuous_target(target);
  std::vector<MappingEntry> entries;
  entries.reserve(law.sequences.size());
  CompensatedSum prefix;
  for (std::size_t i = 0; i < law.sequences.size(); ++i) {
    const double m = law.probs[i];
    entries.push_back(
        {law.sequences[i], m, target.quantile(detail::clamp_level(prefix.value() + 0.5 * m))});
    prefix.add(m);
  }
  return MappingTable(std::move(entries));
}

// Non-decreasing scalar map applied to a continuous seed law.
class MonotoneSimulator {
 public:
  MonotoneSimulator(ScalarDistribution seed, std::function<double(double)> map)
      : seed_(std::move(seed)), map_(std::move(map)) {}

  double operator()(double x) const { return map_(x); }
  const ScalarDistribution& seed() const noexcept { return seed_; }

  // Pushforward law: P(f(X) <= y) = F_X(sup{x : f(x) <= y}).
  ScalarDistribution output_law() const {
    const Interval s = seed_.support();
    const double pad = std::max(s.width(), 1.0) * 1e-9;
    const double lo = s.lo - pad, hi = s.hi + pad;
    LawDefinition d;
    d.name = "pushforward(" + seed_.name() + ")";
    if (!seed_.is_continuous()) throw PreconditionError("pushforward law needs a continuous seed");
    d.kind = seed_.kind();
    d.continuous_cdf = [seed = seed_, map = map_, lo, hi](double y) {
      if (map(hi) <= y) return 1.0;
      if (map(lo) > y) return seed.cdf(lo);
      const double x = bisect_threshold([&](double v) { return map(v) > y; }, lo, hi, 1e-16);
      return seed.cdf(x);
    };
    d.support = {map_(s.lo), map_(s.hi)};
    if (!(d.support.hi >= d.support.lo)) throw PreconditionError("simulator map is not non-decreasing");
    return ScalarDistribution(std::move(d));
  }

 private:
  ScalarDistribution seed_;
  std::function<double(double)> map_;
};

// y = G^{-1}(F(x)) for a continuous seed
inline MonotoneSimulator inverse_transform_map(const ScalarDistribution& seed, const ScalarDistribution& target) {
  if (!seed.is_continuous())
    throw PreconditionError("seed " + seed.name() + " has atoms; use atom_midpoint_map");
  return MonotoneSimulator(seed, [seed, target](double x) {
    return target.quantile(detail::clamp_level(seed.cdf(x)));
  });
}

namespace detail {

inline void require_non_decreasing(const std::function<double(double)>& g, std::vector<double> points) {
  std::sort(points.begin(), points.end());
  double prev = -kInf;
  for (double y : points) {
    const double v = g(y);
    if (v < prev) throw PreconditionError("transfer map decreases near y = " + format_real(y));
    prev = v;
  }
}

inline std::vector<double> uniform_grid(double lo, double hi, int m) {
  std::vector<double> out;
  for (int k = 0; k <= m; ++k) out.push_back(lo + (hi - lo) * k / m);
  return out;
}

}  // namespace detail

// Compose a finite simulator with a non-decreasing g (checked on the image and on extra_grid).
inline MappingTable monotone_transfer(const MappingTable& table, const std::function<double(double)>& g,
                                      std::vector<double> extra_grid = {}) {
  const auto image = table.output_law().support();
  extra_grid.insert(extra_grid.end(), image.begin(), image.end());
  auto fill = detail::uniform_grid(image.front(), image.back(), 1000);
  extra_grid.insert(extra_grid.end(), fill.begin(), fill.end());
  detail::require_non_decreasing(g, std::move(extra_grid));
  std::vector<MappingEntry> entries(table.entries().begin(), table.entries().end());
  for (auto& e : entries) e.target_value = g(e.target_value);
  return MappingTable(std::move(entries));
}

inline MonotoneSimulator monotone_transfer(const MonotoneSimulator& sim, std::function<double(double)> g,
                                           std::vector<double> extra_grid = {}) {
  const Interval s = sim.seed().support();
  auto fill = detail::uniform_grid(sim(s.lo), sim(s.hi), 1000);
  extra_grid.insert(extra_grid.end(), fill.begin(), fill.end());
  detail::require_non_decreasing(g, std::move(extra_grid));
  return MonotoneSimulator(sim.seed(), [sim, g = std::move(g)](double x) { return g(sim(x)); });
}

// exact image of a finite law under g
inline DiscretePmf pushforward(const DiscretePmf& p, const std::function<double(double)>& g) {
  std::vector<std::pair<double, double>> atoms;
  for (std::size_t i = 0; i < p.size(); ++i) atoms.emplace_back(g(p.support()[i]), p.probs()[i]);
  return DiscretePmf::from_unsorted(std::move(atoms));
}

// |Y| * max_i P(x_i)/P(x_{i+1}) over probabilities sorted in decreasing order
inline double greedy_threshold(const DiscretePmf& p, std::size_t target_size) {
  std::vector<double> s(p.probs().begin(), p.probs().end());
  std::sort(s.begin(), s.end(), std::greater<>());
  double ratio = 1.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) ratio = std::max(ratio, s[i] / s[i + 1]);
  return double(target_size) * ratio;
}

// (1/2) P(x_{|X|-1}) P(x_{|X|})^{n-1}, probabilities sorted in decreasing order
inline double greedy_error_bound(const DiscretePmf& p, int n) {
  if (p.size() < 2) throw PreconditionError("greedy bound needs at least two seed symbols");
  std::vector<double> s(p.probs().begin(), p.probs().end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return 0.5 * s[s.size() - 2] * std::pow(s.back(), n - 1);
}

// Greedy discrete-to-discrete simulator over n-sequences of seed symbols.
// Symbols are indices into p's support; images are points of q's support.
inline MappingTable greedy_discrete_map(const DiscretePmf& p, const DiscretePmf& q, int n) {
  if (n < 1) throw DomainError("greedy map needs n >= 1");
  SequenceLaw law = iid_sequence_law(p.probs(), n);
  const std::size_t count = law.sequences.size();
  const std::size_t ny = q.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  // sequences are generated lexicographically, so index order breaks probability ties
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return law.probs[a] > law.probs[b]; });

  std::vector<std::size_t> assignment(count);
  std::vector<CompensatedSum> assigned(ny);
  const std::size_t greedy_count = count > ny + 1 ? count - ny - 1 : 0;
  for (std::size_t r = 0; r < greedy_count; ++r) {
    std::size_t best = 0;
    double best_deficit = -kInf;
    for (std::size_t y = 0; y < ny; ++y) {
      const double deficit = q.probs()[y] - assigned[y].value();
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = y;
      }
    }
    assigned[best].add(law.probs[order[r]]);
    assignment[order[r]] = best;
  }
  // remaining atoms: midpoint rule against the residual target masses
  std::vector<double> residual_cdf(ny);
  CompensatedSum run;
  for (std::size_t y = 0; y < ny; ++y) {
    run.add(q.probs()[y] - assigned[y].value());
    residual_cdf[y] = run.value();
  }
  CompensatedSum prefix;
  for (std::size_t r = greedy_count; r < count; ++r) {
    const double m = law.probs[order[r]];
    const double mid = prefix.value() + 0.5 * m;
    std::size_t y = 0;
    while (y + 1 < ny && residual_cdf[y] < mid) ++y;
    assignment[order[r]] = y;
    prefix.add(m);
  }

  std::vector<MappingEntry> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    entries.push_back({std::move(law.sequences[i]), law.probs[i], q.support()[assignment[i]]});
  return MappingTable(std::move(entries));
}

// Conditional quantile of coordinate j given the already generated coordinates.
using ConditionalQuantile = std::function<double(double t, std::span<const double> previous)>;

// Vector simulator: the bits of U = F_X(x) are dealt round-robin to d uniforms,
// each read at the midpoint of its dyadic cell, then pushed through a quantile chain.
class InterleavedVectorSimulator {
 public:
  InterleavedVectorSimulator(ScalarDistribution seed, std::vector<ConditionalQuantile> chain, int total_bits = 52)
      : seed_(std::move(seed)), chain_(std::move(chain)), total_bits_(total_bits) {
    if (!seed_.is_continuous()) throw PreconditionError("vector simulator needs a continuous seed");
    if (chain_.empty()) throw DomainError("vector simulator needs at least one coordinate");
    if (chain_.size() > 16)
      throw PrecisionError("at most 16 coordinates fit in " + std::to_string(total_bits_) + " bits");
    if (total_bits_ < 1 || total_bits_ > 52) throw DomainError("total_bits must lie in [1,52]");
  }

  std::size_t dimension() const noexcept { return chain_.size(); }
  int bits_per_coordinate() const noexcept { return total_bits_ / int(chain_.size()); }

  std::vector<double> uniforms(double u) const {
    const std::size_t d = chain_.size();
    if (d == 1) return {u};
    const int b = bits_per_coordinate();
    const std::uint64_t top = std::uint64_t(1) << total_bits_;
    const auto word = std::min<std::uint64_t>(std::uint64_t(std::max(u, 0.0) * double(top)), top - 1);
    std::vector<std::uint64_t> parts(d, 0);
    for (int k = 0; k < b * int(d); ++k) {
      const std::uint64_t bit = (word >> (total_bits_ - 1 - k)) & 1u;
      auto& part = parts[std::size_t(k) % d];
      part = (part << 1) | bit;
    }
    std::vector<double> out(d);
    const double cells = std::ldexp(1.0, b);
    for (std::size_t j = 0; j < d; ++j) out[j] = (double(parts[j]) + 0.5) / cells;
    return out;
  }

  std::vector<double> operator()(double x) const {
    const auto u = uniforms(seed_.cdf(x));
    std::vector<double> y;
    y.reserve(u.size());
    for (std::size_t j = 0; j < u.size(); ++j)
      y.push_back(chain_[j](detail::clamp_level(u[j]), std::span<const double>(y.data(), j)));
    return y;
  }

 private:
  ScalarDistribution seed_;
  std::vector<ConditionalQuantile> chain_;
  int total_bits_;
};

inline InterleavedVectorSimulator digit_interleave_vector(const ScalarDistribution& seed,
                                                          std::vector<ConditionalQuantile> chain,
                                                          int total_bits = 52) {
  return InterleavedVectorSimulator(seed, std::move(chain), total_bits);
}

}  // namespace universim
