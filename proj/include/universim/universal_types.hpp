#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "universim/distributions.hpp"
#include "universim/errors.hpp"
#include "universim/nonuniversal.hpp"
#include "universim/numeric.hpp"

namespace universim {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

inline constexpr std::uint64_t kTypeCap = 1'000'000;
inline constexpr int kLoopStateCap = 12;

enum class TypeKind { iid, markov };

class MarkovChainSpec;

namespace detail {

inline double log_big(const BigInt& x) {
  if (x <= 0) return -kInf;
  const std::size_t bits = boost::multiprecision::msb(x);
  if (bits < 1000) return std::log(x.convert_to<double>());
  const std::size_t shift = bits - 60;
  const BigInt top = x >> shift;
  return std::log(top.convert_to<double>()) + double(shift) * std::log(2.0);
}

inline BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline BigInt factorial(unsigned n) {
  BigInt r = 1;
  for (unsigned i = 2; i <= n; ++i) r *= i;
  return r;
}

inline std::uint64_t context_count(int alphabet, int order) {
  return checked_power(std::uint64_t(alphabet), order, kTypeCap);
}

inline std::size_t encode(std::span<const std::uint8_t> symbols, int alphabet) {
  std::size_t code = 0;
  for (auto c : symbols) code = code * std::size_t(alphabet) + c;
  return code;
}

}  // namespace detail

// Type of a sequence: symbol counts (iid), or counts of every window
// s in X^{k+1} of init ++ x (markov), indexed by base-|X| code of s.
struct TypeDescriptor {
  TypeKind kind = TypeKind::iid;
  int alphabet = 0;
  int n = 0;
  int order = 0;
  Sequence initial_state;
  std::vector<int> counts;
  BigInt class_size = 0;

  double log_class_size() const { return detail::log_big(class_size); }

  // log P(x^n) for any member x^n
  double sequence_log_prob(std::span<const double> symbol_probs) const;
  double sequence_log_prob(const MarkovChainSpec& chain) const;

  double class_log_prob(std::span<const double> symbol_probs) const {
    return log_class_size() + sequence_log_prob(symbol_probs);
  }
  double class_log_prob(const MarkovChainSpec& chain) const;

  std::string counts_string() const {
    std::string out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(counts[i]);
    }
    return out;
  }

  bool operator==(const TypeDescriptor&) const = default;
};

inline TypeDescriptor iid_type(const Sequence& x, int alphabet) {
  TypeDescriptor t;
  t.kind = TypeKind::iid;
  t.alphabet = alphabet;
  t.n = int(x.size());
  t.counts.assign(std::size_t(alphabet), 0);
  for (auto c : x) {
    if (c >= alphabet) throw DomainError("symbol outside alphabet");
    ++t.counts[c];
  }
  t.class_size = 1;
  unsigned partial = 0;
  for (int c : t.counts) {
    partial += unsigned(c);
    t.class_size *= detail::binomial(partial, unsigned(c));
  }
  return t;
}

inline BigInt number_of_types(int n, int alphabet) {
  return detail::binomial(unsigned(n + alphabet - 1), unsigned(alphabet - 1));
}

// All count vectors summing to n, in lexicographic order, with exact class sizes.
inline std::vector<TypeDescriptor> iid_types(int n, int alphabet) {
  if (n < 0 || alphabet < 1) throw DomainError("iid_types needs n >= 0 and a non-empty alphabet");
  if (number_of_types(n, alphabet) > kTypeCap)
    throw SizeError("C(" + std::to_string(n + alphabet - 1) + "," + std::to_string(alphabet - 1) +
                    ") types exceed the cap of " + std::to_string(kTypeCap));
  std::vector<TypeDescriptor> out;
  std::vector<int> c(std::size_t(alphabet), 0);
  const std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == alphabet - 1) {
      c[std::size_t(pos)] = left;
      Sequence rep;
      for (int a = 0; a < alphabet; ++a) rep.insert(rep.end(), std::size_t(c[std::size_t(a)]), std::uint8_t(a));
      out.push_back(iid_type(rep, alphabet));
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[std::size_t(pos)] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, n);
  return out;
}

// Universal map from sequences to target values; it never sees a seed law.
struct SequenceMapping {
  int alphabet = 0;
  int n = 0;
  std::vector<Sequence> sequences;  // lexicographic
  std::vector<double> targets;
  std::size_t class_count = 0;

  MappingTable with_law(const SequenceLaw& law) const {
    if (law.alphabet != alphabet || law.sequences != sequences)
      throw ValidationError("sequence law does not match the mapping's sequence set");
    std::vector<MappingEntry> entries;
    entries.reserve(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) entries.push_back({sequences[i], law.probs[i], targets[i]});
    return MappingTable(std::move(entries));
  }

  MappingTable with_iid(std::span<const double> symbol_probs) const {
    if (int(symbol_probs.size()) != alphabet) throw ValidationError("symbol law has the wrong alphabet size");
    SequenceLaw law{alphabet, sequences, {}};
    law.probs.reserve(sequences.size());
    for (const auto& s : sequences) law.probs.push_back(iid_sequence_probability(symbol_probs, s));
    return with_law(law);
  }

  bool operator==(const SequenceMapping&) const = default;
};

namespace detail {

// Class members in lexicographic order get rank j -> G^{-1}((j - 1/2)/|T|).
template <class Key>
SequenceMapping midpoint_by_class(int alphabet, int n, std::vector<Sequence> seqs, const ScalarDistribution& target,
                                  const std::function<Key(const Sequence&)>& key_of) {
  require_continuous_target(target);
  std::map<Key, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < seqs.size(); ++i) classes[key_of(seqs[i])].push_back(i);
  SequenceMapping m;
  m.alphabet = alphabet;
  m.n = n;
  m.targets.assign(seqs.size(), 0.0);
  m.class_count = classes.size();
  for (const auto& [key, members] : classes) {
    const double size = double(members.size());
    for (std::size_t j = 0; j < members.size(); ++j)
      m.targets[members[j]] = target.quantile((double(j) + 0.5) / size);
  }
  m.sequences = std::move(seqs);
  return m;
}

}  // namespace detail

inline SequenceMapping typeclass_simulator(int n, int alphabet, const ScalarDistribution& target) {
  if (number_of_types(n, alphabet) > kTypeCap) throw SizeError("type count exceeds the cap");
  return detail::midpoint_by_class<std::vector<int>>(alphabet, n, enumerate_sequences(alphabet, n), target,
                                                     [alphabet](const Sequence& s) {
                                                       return iid_type(s, alphabet).counts;
                                                     });
}

// ½ (n+1)^{|X|} (max p)^n; zero entries count toward |X|.
inline double universal_error_bound(std::span<const double> symbol_probs, int n) {
  const double mx = *std::max_element(symbol_probs.begin(), symbol_probs.end());
  return 0.5 * std::exp(double(n) * std::log(mx) + double(symbol_probs.size()) * std::log(n + 1.0));
}

inline double universal_error_bound(const DiscretePmf& p, int n) {
  return universal_error_bound(p.probs(), n);
}

// Buckets (-inf,-k], {-k+1}, ..., {k-1}, [k,inf) placed at -k..k; empty buckets dropped.
inline DiscretePmf truncate_countable(const std::function<double(long long)>& cdf_at, long long k) {
  if (k < 1) throw DomainError("truncate_countable needs k >= 1");
  std::vector<std::pair<double, double>> atoms;
  atoms.emplace_back(double(-k), cdf_at(-k));
  for (long long i = -k + 1; i <= k - 1; ++i) atoms.emplace_back(double(i), cdf_at(i) - cdf_at(i - 1));
  atoms.emplace_back(double(k), 1.0 - cdf_at(k - 1));
  return DiscretePmf::from_unsorted(std::move(atoms));
}

// Buckets (-inf,-kΔ), [iΔ,(i+1)Δ) for -k <= i < k, [kΔ,inf), each placed at its
// left end (the lower tail at -(k+1)Δ); empty buckets dropped.
inline DiscretePmf interval_quantize(const std::function<double(double)>& cdf, double delta, long long k) {
  if (!(delta > 0.0) || k < 1) throw DomainError("interval_quantize needs delta > 0 and k >= 1");
  std::vector<std::pair<double, double>> atoms;
  double prev = cdf(double(-k) * delta);
  atoms.emplace_back(double(-k - 1) * delta, prev);
  for (long long i = -k; i < k; ++i) {
    const double next = cdf(double(i + 1) * delta);
    atoms.emplace_back(double(i) * delta, next - prev);
    prev = next;
  }
  atoms.emplace_back(double(k) * delta, 1.0 - prev);
  return DiscretePmf::from_unsorted(std::move(atoms));
}

inline DiscretePmf interval_quantize(const ScalarDistribution& seed, double delta, long long k) {
  return interval_quantize([&](double x) { return seed.cdf(x); }, delta, k);
}

// Stationary order-k chain with a fixed initial context.
class MarkovChainSpec {
 public:
  // transitions[c][x] = P(next = x | context code c), with |X|^k rows
  MarkovChainSpec(int state_count, int order, Sequence initial_state, std::vector<std::vector<double>> transitions)
      : states_(state_count), order_(order), init_(std::move(initial_state)), rows_(std::move(transitions)) {
    if (states_ < 1 || states_ > 256) throw ValidationError("state count must lie in [1,256]");
    if (order_ < 0) throw ValidationError("order must be non-negative");
    if (int(init_.size()) != order_) throw ValidationError("initial state length differs from the order");
    for (auto c : init_)
      if (c >= states_) throw ValidationError("initial state symbol outside the alphabet");
    if (rows_.size() != detail::context_count(states_, order_))
      throw ValidationError("transition table needs |X|^k rows");
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (int(rows_[r].size()) != states_) throw ValidationError("transition row " + std::to_string(r) + " has wrong length");
      CompensatedSum s;
      for (double p : rows_[r]) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("transition row " + std::to_string(r) + " has an entry outside [0,1]");
        s.add(p);
      }
      if (std::abs(s.value() - 1.0) > DiscretePmf::kMassTolerance)
        throw ValidationError("transition row " + std::to_string(r) + " sums to " + format_real(s.value()));
    }
  }

  int state_count() const noexcept { return states_; }
  int order() const noexcept { return order_; }
  const Sequence& initial_state() const noexcept { return init_; }
  const std::vector<std::vector<double>>& transitions() const noexcept { return rows_; }
  std::size_t context_count() const noexcept { return rows_.size(); }

  double transition(std::size_t context, int next) const { return rows_[context][std::size_t(next)]; }

  std::size_t initial_context() const { return detail::encode(init_, states_); }
  std::size_t advance(std::size_t context, int next) const {
    if (order_ == 0) return 0;
    return (context * std::size_t(states_) + std::size_t(next)) % rows_.size();
  }

  double path_log_probability(const Sequence& x) const {
    double lp = 0;
    std::size_t c = initial_context();
    for (auto s : x) {
      lp += std::log(transition(c, s));
      c = advance(c, s);
    }
    return lp;
  }

  double path_probability(const Sequence& x) const {
    double p = 1;
    std::size_t c = initial_context();
    for (auto s : x) {
      p *= transition(c, s);
      c = advance(c, s);
    }
    return p;
  }

  SequenceLaw path_law(int n, std::uint64_t cap = kTypeCap) const {
    SequenceLaw law;
    law.alphabet = states_;
    law.sequences = enumerate_sequences(states_, n, cap);
    law.probs.reserve(law.sequences.size());
    for (const auto& s : law.sequences) law.probs.push_back(path_probability(s));
    return law;
  }

  // max over x^n of log P(x^n), by max-product recursion over contexts
  double max_path_log_probability(int n) const {
    std::vector<double> best(rows_.size(), -kInf), next(rows_.size());
    best[initial_context()] = 0.0;
    for (int step = 0; step < n; ++step) {
      std::fill(next.begin(), next.end(), -kInf);
      for (std::size_t c = 0; c < rows_.size(); ++c) {
        if (best[c] == -kInf) continue;
        for (int x = 0; x < states_; ++x) {
          const double p = rows_[c][std::size_t(x)];
          if (p <= 0.0) continue;
          const std::size_t d = advance(c, x);
          next[d] = std::max(next[d], best[c] + std::log(p));
        }
      }
      best.swap(next);
    }
    return *std::max_element(best.begin(), best.end());
  }

  double max_path_probability(int n) const { return std::exp(max_path_log_probability(n)); }

  // -(1/n) max log P(x^n)
  double min_entropy_rate_dp(int n = 2000) const {
    if (n < 1) throw DomainError("DP length must be positive");
    return -max_path_log_probability(n) / double(n);
  }

  bool irreducible() const {
    const std::size_t m = rows_.size();
    auto reach_all = [&](bool forward) {
      std::vector<char> seen(m, 0);
      std::vector<std::size_t> stack{0};
      seen[0] = 1;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < m; ++v) {
          const bool edge = forward ? edge_weight(u, v) > 0 : edge_weight(v, u) > 0;
          if (edge && !seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
          }
        }
      }
      return std::all_of(seen.begin(), seen.end(), [](char s) { return s != 0; });
    };
    return reach_all(true) && reach_all(false);
  }

  // min over simple cycles of the mean of -log p along the cycle (order 1)
  double min_entropy_rate_loops() const {
    if (order_ != 1) throw PreconditionError("loop formula needs an order-1 chain");
    if (states_ > kLoopStateCap)
      throw SizeError("loop enumeration is capped at " + std::to_string(kLoopStateCap) + " states");
    if (!irreducible()) throw PreconditionError("loop formula needs an irreducible chain");
    double best = kInf;
    std::vector<int> path;
    std::vector<char> on_path(std::size_t(states_), 0);
    // cycles rooted at their smallest state
    const std::function<void(int, int, double)> dfs = [&](int root, int u, double cost) {
      for (int v = root; v < states_; ++v) {
        const double p = rows_[std::size_t(u)][std::size_t(v)];
        if (p <= 0.0) continue;
        const double c = cost - std::log(p);
        if (v == root) {
          best = std::min(best, c / double(path.size()));
        } else if (!on_path[std::size_t(v)]) {
          on_path[std::size_t(v)] = 1;
          path.push_back(v);
          dfs(root, v, c);
          path.pop_back();
          on_path[std::size_t(v)] = 0;
        }
      }
    };
    for (int root = 0; root < states_; ++root) {
      path.assign(1, root);
      on_path.assign(std::size_t(states_), 0);
      on_path[std::size_t(root)] = 1;
      dfs(root, root, 0.0);
    }
    return best;
  }

  // loop formula where it applies, DP at n = 2000 otherwise
  double min_entropy_rate() const {
    if (order_ == 1 && states_ <= kLoopStateCap && irreducible()) return min_entropy_rate_loops();
    return min_entropy_rate_dp(2000);
  }

 private:
  // probability of moving from context u to context v in one step
  double edge_weight(std::size_t u, std::size_t v) const {
    double w = 0;
    for (int x = 0; x < states_; ++x)
      if (advance(u, x) == v) w += rows_[u][std::size_t(x)];
    return w;
  }

  int states_;
  int order_;
  Sequence init_;
  std::vector<std::vector<double>> rows_;
};

inline double TypeDescriptor::sequence_log_prob(std::span<const double> symbol_probs) const {
  if (kind != TypeKind::iid) throw PreconditionError("markov type needs a chain");
  if (int(symbol_probs.size()) != alphabet) throw ValidationError("symbol law has the wrong alphabet size");
  double lp = 0;
  for (std::size_t a = 0; a < counts.size(); ++a)
    if (counts[a]) lp += counts[a] * std::log(symbol_probs[a]);
  return lp;
}

inline double TypeDescriptor::sequence_log_prob(const MarkovChainSpec& chain) const {
  if (kind != TypeKind::markov) throw PreconditionError("iid type needs a symbol law");
  if (chain.state_count() != alphabet || chain.order() != order || chain.initial_state() != initial_state)
    throw ValidationError("chain shape differs from the type");
  double lp = 0;
  const std::size_t a = std::size_t(alphabet);
  for (std::size_t s = 0; s < counts.size(); ++s)
    if (counts[s]) lp += counts[s] * std::log(chain.transition(s / a, int(s % a)));
  return lp;
}

inline double TypeDescriptor::class_log_prob(const MarkovChainSpec& chain) const {
  return log_class_size() + sequence_log_prob(chain);
}

namespace detail {

inline std::vector<int> markov_counts(const Sequence& x, int alphabet, int order, const Sequence& init) {
  if (int(init.size()) != order) throw DomainError("initial state length differs from the order");
  const std::uint64_t windows = checked_power(std::uint64_t(alphabet), order + 1, kTypeCap);
  std::vector<int> counts(windows, 0);
  Sequence full = init;
  full.insert(full.end(), x.begin(), x.end());
  for (auto c : full)
    if (c >= alphabet) throw DomainError("symbol outside alphabet");
  for (std::size_t i = 0; i < x.size(); ++i)
    ++counts[encode(std::span(full).subspan(i, std::size_t(order) + 1), alphabet)];
  return counts;
}

inline BigRational determinant(std::vector<std::vector<BigRational>> m) {
  const std::size_t n = m.size();
  BigRational det = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && m[pivot][col] == 0) ++pivot;
    if (pivot == n) return 0;
    if (pivot != col) {
      std::swap(m[pivot], m[col]);
      det = -det;
    }
    det *= m[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      if (m[r][col] == 0) continue;
      const BigRational f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

// Whittle's count of sequences from context u with transition counts F:
// prod_i F_i! / prod_j F_ij!  times the (v,u) cofactor of I - F_ij/F_i,
// v the final context.
inline BigInt markov_class_size(const std::vector<int>& counts, int alphabet, int order, std::size_t start) {
  const std::size_t a = std::size_t(alphabet);
  const std::size_t m = counts.size() / a;
  if (m > 64) throw SizeError("exact markov class size is limited to 64 contexts");
  std::vector<std::vector<int>> f(m, std::vector<int>(m, 0));
  std::vector<int> out(m, 0), in(m, 0);
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (!counts[s]) continue;
    const std::size_t u = s / a;
    const std::size_t v = order == 0 ? 0 : s % m;
    f[u][v] += counts[s];
    out[u] += counts[s];
    in[v] += counts[s];
  }
  // final context: the one with in-degree exceeding out-degree (or the start)
  std::size_t end = start;
  for (std::size_t c = 0; c < m; ++c)
    if (in[c] - out[c] + (c == start ? 1 : 0) == 1) end = c;
  BigRational multinomials = 1;
  for (std::size_t u = 0; u < m; ++u) {
    if (!out[u]) continue;
    BigInt num = factorial(unsigned(out[u]));
    BigInt den = 1;
    for (std::size_t x = 0; x < a; ++x) den *= factorial(unsigned(counts[u * a + x]));
    multinomials *= BigRational(num, den);
  }
  std::vector<std::vector<BigRational>> minor;
  for (std::size_t r = 0; r < m; ++r) {
    if (r == end) continue;
    std::vector<BigRational> row;
    for (std::size_t c = 0; c < m; ++c) {
      if (c == end) continue;
      BigRational e = (r == c) ? 1 : 0;
      if (out[r]) e -= BigRational(f[r][c], out[r]);
      row.push_back(e);
    }
    minor.push_back(std::move(row));
  }
  const BigRational size = multinomials * determinant(std::move(minor));
  if (boost::multiprecision::denominator(size) != 1) throw NumericError("markov class size is not an integer");
  return boost::multiprecision::numerator(size);
}

}  // namespace detail

// Markov type of x^n given the initial context; class_size is exact.
inline TypeDescriptor markov_type(const Sequence& x, int alphabet, int order, const Sequence& initial_state) {
  if (x.empty()) throw DomainError("markov_type needs n >= 1");
  TypeDescriptor t;
  t.kind = TypeKind::markov;
  t.alphabet = alphabet;
  t.n = int(x.size());
  t.order = order;
  t.initial_state = initial_state;
  t.counts = detail::markov_counts(x, alphabet, order, initial_state);
  t.class_size = detail::markov_class_size(t.counts, alphabet, order, detail::encode(initial_state, alphabet));
  return t;
}

// Distinct markov types of all |X|^n sequences, ordered by count table.
inline std::vector<TypeDescriptor> markov_types(int n, int alphabet, int order, const Sequence& initial_state) {
  std::map<std::vector<int>, TypeDescriptor> seen;
  for (const auto& s : enumerate_sequences(alphabet, n, kTypeCap)) {
    auto c = detail::markov_counts(s, alphabet, order, initial_state);
    if (!seen.contains(c)) seen.emplace(c, markov_type(s, alphabet, order, initial_state));
  }
  std::vector<TypeDescriptor> out;
  for (auto& [c, t] : seen) out.push_back(std::move(t));
  return out;
}

inline SequenceMapping markov_typeclass_simulator(int n, int alphabet, int order, const Sequence& initial_state,
                                                  const ScalarDistribution& target) {
  return detail::midpoint_by_class<std::vector<int>>(
      alphabet, n, enumerate_sequences(alphabet, n, kTypeCap), target,
      [&](const Sequence& s) { return detail::markov_counts(s, alphabet, order, initial_state); });
}

// ½ (n+1)^{|X|^{k+1}} max_{x^n} P(x^n)
inline double markov_error_bound(const MarkovChainSpec& chain, int n) {
  const double windows = std::pow(double(chain.state_count()), chain.order() + 1);
  return 0.5 * std::exp(windows * std::log(n + 1.0) + chain.max_path_log_probability(n));
}

inline std::string types_to_csv(std::span<const TypeDescriptor> types,
                                const std::function<double(const TypeDescriptor&)>& log_class_prob) {
  std::string out = "counts,class_size,log_class_prob\n";
  for (const auto& t : types)
    out += t.counts_string() + "," + t.class_size.str() + "," + format_real(log_class_prob(t)) + "\n";
  return out;
}

}  // namespace universim
