#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "universim/universal_types.hpp"

using namespace universim;

namespace {

double brute_ks_uniform(const MappingTable& t) {
  double best = 0;
  for (const auto& probe : t.entries()) {
    const double y = probe.target_value;
    double at = 0, below = 0;
    for (const auto& e : t.entries()) {
      if (e.target_value <= y) at += e.probability;
      if (e.target_value < y) below += e.probability;
    }
    best = std::max({best, std::abs(at - y), std::abs(below - y)});
  }
  return best;
}

std::vector<double> random_simplex(std::mt19937_64& rng, int size) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> w(size);
  double total = 0;
  for (double& x : w) total += (x = g(rng) + 1e-6);
  for (double& x : w) x /= total;
  return w;
}

MarkovChainSpec random_chain(std::mt19937_64& rng, int states) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < states; ++i) {
    auto r = random_simplex(rng, states);
    // exact row sum
    double rest = 1.0;
    for (int j = 0; j + 1 < states; ++j) rest -= r[j];
    r.back() = rest;
    rows.push_back(r);
  }
  return MarkovChainSpec(states, 1, Sequence{0}, rows);
}

// Karp's minimum mean cycle with weights -log p
double karp_min_mean(const MarkovChainSpec& c) {
  const int m = c.state_count();
  std::vector<std::vector<double>> d(m + 1, std::vector<double>(m, kInf));
  for (int v = 0; v < m; ++v) d[0][v] = 0;
  for (int k = 1; k <= m; ++k)
    for (int u = 0; u < m; ++u)
      for (int v = 0; v < m; ++v) {
        const double p = c.transition(u, v);
        if (p > 0 && d[k - 1][u] < kInf) d[k][v] = std::min(d[k][v], d[k - 1][u] - std::log(p));
      }
  double best = kInf;
  for (int v = 0; v < m; ++v) {
    if (d[m][v] == kInf) continue;
    double worst = -kInf;
    for (int k = 0; k < m; ++k)
      if (d[k][v] < kInf) worst = std::max(worst, (d[m][v] - d[k][v]) / (m - k));
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace

TEST(IidTypes, Examples) {
  auto t = iid_types(2, 2);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].class_size, 1);
  EXPECT_EQ(t[1].class_size, 2);
  EXPECT_EQ(t[2].class_size, 1);
  auto t4 = iid_types(4, 2);
  ASSERT_EQ(t4.size(), 5u);
  const int row[] = {1, 4, 6, 4, 1};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(t4[i].class_size, row[i]);
}

TEST(IidTypes, TernaryAgainstMultinomialOracle) {
  auto t = iid_types(3, 3);
  ASSERT_EQ(t.size(), 10u);
  BigInt total = 0;
  for (const auto& d : t) {
    const double oracle = std::tgamma(4.0) / (std::tgamma(d.counts[0] + 1.0) * std::tgamma(d.counts[1] + 1.0) *
                                              std::tgamma(d.counts[2] + 1.0));
    EXPECT_EQ(d.class_size, BigInt(std::llround(oracle)));
    total += d.class_size;
  }
  EXPECT_EQ(total, 27);
}

TEST(IidTypes, ClassSizesSumToAllSequences) {
  for (auto [n, a] : {std::pair{30, 4}, {100, 2}, {12, 5}, {0, 3}}) {
    BigInt total = 0;
    const auto types = iid_types(n, a);
    EXPECT_EQ(BigInt(types.size()), number_of_types(n, a));
    for (const auto& d : types) {
      int s = 0;
      for (int c : d.counts) s += c;
      ASSERT_EQ(s, n);
      ASSERT_GE(d.class_size, 1);
      total += d.class_size;
    }
    EXPECT_EQ(total, boost::multiprecision::pow(BigInt(a), unsigned(n)));
  }
}

TEST(IidTypes, CountBoundAndCap) {
  for (int n = 1; n <= 20; ++n) EXPECT_LE(double(iid_types(n, 3).size()), std::pow(n + 1.0, 3));
  EXPECT_THROW(iid_types(1000, 4), SizeError);
}

TEST(IidTypes, HugeClassLogSize) {
  auto t = iid_types(2000, 2);
  // log C(2000,1000) by lgamma
  const double oracle = std::lgamma(2001.0) - 2 * std::lgamma(1001.0);
  EXPECT_NEAR(t[1000].log_class_size(), oracle, 1e-9);
}

TEST(TypeclassSimulator, BinaryPairExample) {
  auto m = typeclass_simulator(2, 2, uniform());
  ASSERT_EQ(m.sequences.size(), 4u);
  EXPECT_EQ(m.targets, (std::vector<double>{0.5, 0.25, 0.75, 0.5}));
  const double half[] = {0.5, 0.5};
  auto t = m.with_iid(half);
  EXPECT_NEAR(t.ks_error(uniform()), 0.25, 1e-15);
  EXPECT_NEAR(brute_ks_uniform(t), 0.25, 1e-15);
}

TEST(TypeclassSimulator, SingleSymbol) {
  auto m = typeclass_simulator(1, 5, uniform());
  for (double y : m.targets) EXPECT_EQ(y, 0.5);
  std::mt19937_64 rng(1);
  EXPECT_NEAR(m.with_iid(random_simplex(rng, 5)).ks_error(uniform()), 0.5, 1e-15);
}

TEST(TypeclassSimulator, BernoulliSevenTenthsLengthEight) {
  auto m = typeclass_simulator(8, 2, uniform());
  const double p[] = {0.3, 0.7};
  const double ks = brute_ks_uniform(m.with_iid(p));
  EXPECT_NEAR(ks, m.with_iid(p).ks_error(uniform()), 1e-14);
  EXPECT_GE(ks, 0.5 * std::pow(0.7, 8));
  EXPECT_LE(ks, 0.5 * 81 * std::pow(0.7, 8));
}

TEST(TypeclassSimulator, TableIgnoresSeedLaw) {
  auto m = typeclass_simulator(10, 2, uniform());
  std::mt19937_64 rng(2);
  std::string reference;
  for (int k = 0; k < 20; ++k) {
    auto t = m.with_iid(random_simplex(rng, 2));
    std::string projection;
    for (const auto& e : t.entries()) projection += format_seed_atom(e.seed_atom) + "," + format_real(e.target_value) + "\n";
    if (k == 0) reference = projection;
    ASSERT_EQ(projection, reference);
  }
  EXPECT_EQ(typeclass_simulator(10, 2, uniform()), m);
}

TEST(TypeclassSimulator, SandwichOnBernoulliSeeds) {
  for (double q : {0.5, 0.6, 0.7, 0.9}) {
    const double p[] = {1 - q, q};
    const double mx = std::max(q, 1 - q);
    for (int n = 1; n <= 12; ++n) {
      const double ks = typeclass_simulator(n, 2, uniform()).with_iid(p).ks_error(uniform());
      ASSERT_GE(ks, 0.5 * std::pow(mx, n) - 1e-15) << q << " n=" << n;
      ASSERT_LE(ks, universal_error_bound(p, n)) << q << " n=" << n;
    }
  }
}

TEST(TypeclassSimulator, SandwichOnRandomTernarySeeds) {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 7; ++n) {
    auto m = typeclass_simulator(n, 3, uniform());
    for (int k = 0; k < 10; ++k) {
      auto p = random_simplex(rng, 3);
      const double mx = *std::max_element(p.begin(), p.end());
      const double ks = m.with_iid(p).ks_error(uniform());
      ASSERT_GE(ks, 0.5 * std::pow(mx, n) - 1e-15);
      ASSERT_LE(ks, universal_error_bound(p, n));
    }
  }
}

TEST(TypeclassSimulator, ExponentialDecayRate) {
  const double p[] = {0.3, 0.7};
  const double ks = typeclass_simulator(12, 2, uniform()).with_iid(p).ks_error(uniform());
  EXPECT_NEAR(std::log(ks) / 12, std::log(0.7), 0.15 * std::abs(std::log(0.7)));
  for (double q : {0.5, 0.6, 0.7, 0.9}) {
    const double pq[] = {1 - q, q};
    std::vector<double> ns, logs;
    for (int n = 7; n <= 12; ++n) {
      ns.push_back(n);
      logs.push_back(std::log(typeclass_simulator(n, 2, uniform()).with_iid(pq).ks_error(uniform())));
    }
    EXPECT_NEAR(fit_slope(ns, logs), std::log(q), 0.15 * std::abs(std::log(q))) << q;
  }
}

TEST(TypeclassSimulator, ContinuousTargetsOnly) {
  EXPECT_THROW(typeclass_simulator(3, 2, bernoulli(0.5)), PreconditionError);
  EXPECT_THROW(typeclass_simulator(40, 2, uniform()), SizeError);
}

TEST(TypeclassSimulator, MidpointRuleIsOptimalPerClass) {
  // any T equiprobable points on a grid of step 1/(4T) are at least 1/(2T) from Unif[0,1]
  for (int size = 1; size <= 6; ++size) {
    const int grid = 4 * size;
    std::vector<int> idx(size, 0);
    double best = 1;
    std::function<void(int, int)> rec = [&](int pos, int from) {
      if (pos == size) {
        double ks = 0;
        for (int j = 0; j < size; ++j) {
          const double y = double(idx[j]) / grid;
          ks = std::max({ks, std::abs(double(j + 1) / size - y), std::abs(double(j) / size - y)});
        }
        best = std::min(best, ks);
        return;
      }
      for (int v = from; v <= grid; ++v) {
        idx[pos] = v;
        rec(pos + 1, v);
      }
    };
    rec(0, 0);
    EXPECT_NEAR(best, 0.5 / size, 1e-15) << size;
  }
}

TEST(ErrorBound, Examples) {
  const double half[] = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(universal_error_bound(half, 4), 0.78125);
  const double degenerate[] = {1.0, 0.0};
  for (int n : {1, 5, 50}) EXPECT_GE(universal_error_bound(degenerate, n), 0.5);
  const double skew[] = {0.9, 0.1};
  EXPECT_NEAR(universal_error_bound(skew, 10), 0.5 * 121 * std::pow(0.9, 10), 1e-12);
  EXPECT_DOUBLE_EQ(universal_error_bound(DiscretePmf({0, 1}, {0.5, 0.5}), 4), 0.78125);
}

TEST(TruncateCountable, Geometric) {
  auto geo = [](long long i) { return i < 0 ? 0.0 : 1.0 - std::pow(0.5, double(i + 1)); };
  auto p = truncate_countable(geo, 1);
  double total = 0;
  for (double m : p.probs()) total += m;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.mass_at(0), 0.5);
  EXPECT_DOUBLE_EQ(p.mass_at(1), 0.5);
  EXPECT_EQ(p.size(), 2u);
}

TEST(TruncateCountable, PointMass) {
  for (long long k : {1LL, 3LL, 10LL}) {
    auto p = truncate_countable([](long long i) { return i >= 0 ? 1.0 : 0.0; }, k);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.probs()[0], 1.0);
  }
}

TEST(TruncateCountable, PoissonMaxBucketDecreases) {
  auto pmf = [](long long i) { return i < 0 ? 0.0 : std::exp(-4.0 + double(i) * std::log(4.0) - std::lgamma(i + 1.0)); };
  auto cdf = [&](long long i) {
    double s = 0;
    for (long long j = 0; j <= i; ++j) s += pmf(j);
    return s;
  };
  const double max_pmf = pmf(3);
  EXPECT_NEAR(max_pmf, 0.1954, 5e-5);
  double prev = 1;
  for (long long k : {2LL, 4LL, 8LL, 16LL}) {
    const double mx = truncate_countable(cdf, k).max_mass();
    EXPECT_LE(mx, prev + 1e-15);
    EXPECT_GE(mx, max_pmf - 1e-15);
    prev = mx;
  }
  EXPECT_NEAR(prev, max_pmf, 1e-15);
}

TEST(IntervalQuantize, UniformQuarters) {
  auto p = interval_quantize(uniform(), 0.25, 8);
  ASSERT_EQ(p.size(), 4u);
  for (double m : p.probs()) EXPECT_DOUBLE_EQ(m, 0.25);
}

TEST(IntervalQuantize, CantorHolderBuckets) {
  const double alpha = std::log(2.0) / std::log(3.0);
  auto p = interval_quantize(cantor(), 1.0 / 27, 27);
  EXPECT_LE(p.max_mass(), 2 * std::pow(1.0 / 27, alpha));
  // oracle: cantor_cdf differences over the same cells
  double mx = 0;
  for (int i = 0; i < 27; ++i) mx = std::max(mx, cantor_cdf((i + 1) / 27.0) - cantor_cdf(i / 27.0));
  EXPECT_NEAR(p.max_mass(), mx, 1e-12);
  EXPECT_NEAR(mx, 0.125, 1e-12);
  for (int j = 2; j <= 8; ++j) {
    const double delta = std::pow(3.0, -j);
    EXPECT_LE(interval_quantize(cantor(), delta, std::llround(1 / delta)).max_mass(), 2 * std::pow(delta, alpha)) << j;
  }
}

TEST(IntervalQuantize, GaussianTails) {
  auto p = interval_quantize(normal(), 0.01, 500);
  const double tail = 0.5 * std::erfc(5 / std::sqrt(2.0));
  EXPECT_NEAR(p.mass_at(-5.01), tail, 1e-18);
  EXPECT_NEAR(p.mass_at(5.0), tail, 2e-16);  // 1 - F(5) carries the rounding of F near 1
  EXPECT_LT(p.mass_at(-5.01), 3e-7);
  EXPECT_LT(p.mass_at(5.0), 3e-7);
  EXPECT_EQ(p.size(), 1002u);
}

TEST(MarkovType, Examples) {
  auto a = markov_type({0, 0}, 2, 1, {0});
  EXPECT_EQ(a.counts, (std::vector<int>{2, 0, 0, 0}));
  auto b = markov_type({0, 1}, 2, 1, {0});
  EXPECT_EQ(b.counts, (std::vector<int>{1, 1, 0, 0}));
  EXPECT_EQ(a.class_size, 1);
  EXPECT_EQ(b.class_size, 1);
}

TEST(MarkovType, EqualCountsIffEqualProbability) {
  std::mt19937_64 rng(4);
  std::vector<MarkovChainSpec> chains;
  for (int k = 0; k < 100; ++k) chains.push_back(random_chain(rng, 2));
  const auto seqs = enumerate_sequences(2, 4);
  for (const auto& x : seqs)
    for (const auto& y : seqs) {
      const bool same_type = markov_type(x, 2, 1, {0}).counts == markov_type(y, 2, 1, {0}).counts;
      bool same_prob = true;
      for (const auto& c : chains) same_prob = same_prob && std::abs(c.path_log_probability(x) - c.path_log_probability(y)) < 1e-12;
      ASSERT_EQ(same_type, same_prob);
    }
}

TEST(MarkovType, ClassSizeMatchesEnumeration) {
  for (int a : {2, 3})
    for (int k : {0, 1, 2})
      for (int n = 1; n <= (a == 2 ? 9 : 5); ++n) {
        const Sequence init(std::size_t(k), std::uint8_t(a - 1));
        std::map<std::vector<int>, long> members;
        for (const auto& s : enumerate_sequences(a, n)) ++members[markov_type(s, a, k, init).counts];
        BigInt total = 0;
        for (const auto& t : markov_types(n, a, k, init)) {
          ASSERT_EQ(t.class_size, members[t.counts]) << a << " " << k << " " << n;
          total += t.class_size;
        }
        ASSERT_EQ(total, boost::multiprecision::pow(BigInt(a), unsigned(n)));
      }
}

TEST(MarkovSimulator, LengthTwoSingletons) {
  auto m = markov_typeclass_simulator(2, 2, 1, {0}, uniform());
  EXPECT_EQ(m.class_count, 4u);
  for (double y : m.targets) EXPECT_EQ(y, 0.5);
  MarkovChainSpec c(2, 1, {0}, {{0.9, 0.1}, {0.4, 0.6}});
  EXPECT_NEAR(m.with_law(c.path_law(2)).ks_error(uniform()), 0.5, 1e-15);
}

TEST(MarkovSimulator, SandwichOnRandomChains) {
  std::mt19937_64 rng(5);
  for (int n = 2; n <= 10; ++n) {
    auto m = markov_typeclass_simulator(n, 2, 1, {0}, uniform());
    for (int k = 0; k < 20; ++k) {
      auto c = random_chain(rng, 2);
      auto law = c.path_law(n);
      const double max_path = *std::max_element(law.probs.begin(), law.probs.end());
      ASSERT_NEAR(c.max_path_probability(n), max_path, 1e-12 * max_path);
      const double ks = m.with_law(law).ks_error(uniform());
      ASSERT_GE(ks, 0.5 * max_path - 1e-15);
      ASSERT_LE(ks, 0.5 * std::pow(n + 1.0, 4) * max_path);
      ASSERT_LE(ks, markov_error_bound(c, n) * (1 + 1e-12));
    }
  }
}

TEST(MarkovSimulator, DeterministicCycle) {
  MarkovChainSpec c(2, 1, {0}, {{0.0, 1.0}, {1.0, 0.0}});
  auto m = markov_typeclass_simulator(6, 2, 1, {0}, uniform());
  EXPECT_NEAR(m.with_law(c.path_law(6)).ks_error(uniform()), 0.5, 1e-15);
  EXPECT_EQ(c.max_path_probability(6), 1.0);
  EXPECT_GE(markov_error_bound(c, 6), 0.5);
}

TEST(MarkovSimulator, TableIgnoresTransitionLaw) {
  std::mt19937_64 rng(6);
  auto m = markov_typeclass_simulator(6, 2, 1, {1}, uniform());
  std::vector<double> first;
  for (int k = 0; k < 5; ++k) {
    MarkovChainSpec c(2, 1, {1}, random_chain(rng, 2).transitions());
    auto t = m.with_law(c.path_law(6));
    std::vector<double> targets;
    for (const auto& e : t.entries()) targets.push_back(e.target_value);
    if (k == 0) first = targets;
    ASSERT_EQ(targets, first);
  }
}

TEST(MarkovChainSpec, Validation) {
  EXPECT_THROW(MarkovChainSpec(2, 1, {0}, {{0.5, 0.6}, {0.5, 0.5}}), ValidationError);
  EXPECT_THROW(MarkovChainSpec(2, 1, {}, {{0.5, 0.5}, {0.5, 0.5}}), ValidationError);
  EXPECT_THROW(MarkovChainSpec(2, 1, {0}, {{0.5, 0.5}}), ValidationError);
  EXPECT_THROW(MarkovChainSpec(2, 1, {0}, {{1.5, -0.5}, {0.5, 0.5}}), ValidationError);
  EXPECT_NO_THROW(MarkovChainSpec(2, 2, {0, 1}, {{1, 0}, {0.5, 0.5}, {0.2, 0.8}, {0, 1}}));
}

TEST(MarkovChainSpec, SecondOrderPathProbability) {
  MarkovChainSpec c(2, 2, {0, 1}, {{1, 0}, {0.5, 0.5}, {0.2, 0.8}, {0, 1}});
  // contexts: 01 -> 0 (0.5), 10 -> 1 (0.8), 01 -> 1 (0.5), 11 -> 1 (1)
  EXPECT_DOUBLE_EQ(c.path_probability({0, 1, 1, 1}), 0.5 * 0.8 * 0.5 * 1.0);
  double total = 0;
  for (double p : c.path_law(6).probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(MinEntropy, Examples) {
  MarkovChainSpec fair(2, 1, {0}, {{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_NEAR(fair.min_entropy_rate_loops(), std::log(2.0), 1e-15);
  EXPECT_NEAR(fair.min_entropy_rate_dp(2000), std::log(2.0), 1e-12);
  MarkovChainSpec skew(2, 1, {0}, {{0.9, 0.1}, {0.5, 0.5}});
  const double hand = std::min({std::log(1 / 0.9), std::log(2.0), 0.5 * (std::log(10.0) + std::log(2.0))});
  EXPECT_NEAR(skew.min_entropy_rate_loops(), hand, 1e-15);
  EXPECT_NEAR(skew.min_entropy_rate_loops(), std::log(1 / 0.9), 1e-15);
  EXPECT_NEAR(skew.min_entropy_rate_dp(2000), std::log(1 / 0.9), 1e-12);
  MarkovChainSpec cycle(3, 1, {0}, {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  EXPECT_EQ(cycle.min_entropy_rate_loops(), 0.0);
  EXPECT_EQ(cycle.min_entropy_rate(), 0.0);
}

TEST(MinEntropy, LoopsAgreeWithKarpAndDp) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const int states = 2 + k % 3;
    auto c = random_chain(rng, states);
    const double loops = c.min_entropy_rate_loops();
    EXPECT_NEAR(loops, karp_min_mean(c), 1e-12);
    const double dp = c.min_entropy_rate_dp(2000);
    EXPECT_LE(std::abs(loops - dp), 2 * states * std::log(2001.0) / 2000 + 0.005);
    // a path is cycles plus fewer than |X| transient steps
    EXPECT_GE(dp, loops * (1 - double(states) / 2000) - 1e-12);
  }
}

TEST(MinEntropy, Preconditions) {
  MarkovChainSpec reducible(2, 1, {0}, {{1, 0}, {0.5, 0.5}});
  EXPECT_FALSE(reducible.irreducible());
  EXPECT_THROW(reducible.min_entropy_rate_loops(), PreconditionError);
  EXPECT_NEAR(reducible.min_entropy_rate(), 0.0, 1e-15);
  std::vector<std::vector<double>> rows(13, std::vector<double>(13, 0.0));
  for (int i = 0; i < 13; ++i) rows[i][(i + 1) % 13] = 1;
  EXPECT_THROW(MarkovChainSpec(13, 1, {0}, rows).min_entropy_rate_loops(), SizeError);
}

TEST(TypeCsv, Format) {
  auto types = iid_types(2, 2);
  const double p[] = {0.5, 0.5};
  const std::string csv = types_to_csv(types, [&](const TypeDescriptor& t) { return t.class_log_prob(p); });
  EXPECT_EQ(csv, "counts,class_size,log_class_prob\n0 2,1," + format_real(2 * std::log(0.5)) + "\n1 1,2," +
                     format_real(std::log(2.0) + 2 * std::log(0.5)) + "\n2 0,1," + format_real(2 * std::log(0.5)) +
                     "\n");
  // class probabilities over all types sum to one
  for (int n : {5, 20}) {
    const double q[] = {0.2, 0.3, 0.5};
    double total = 0;
    for (const auto& t : iid_types(n, 3)) total += std::exp(t.class_log_prob(q));
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  MarkovChainSpec c(2, 1, {0}, {{0.9, 0.1}, {0.4, 0.6}});
  double total = 0;
  for (const auto& t : markov_types(8, 2, 1, {0})) total += std::exp(t.class_log_prob(c));
  EXPECT_NEAR(total, 1.0, 1e-12);
}
