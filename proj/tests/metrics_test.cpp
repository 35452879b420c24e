#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "universim/metrics.hpp"

using namespace universim;

namespace {

DiscretePmf random_pmf(std::mt19937_64& rng, int size, double lo = 0.0) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> w(size);
  double total = 0;
  for (double& x : w) total += (x = g(rng) + 1e-12);
  std::vector<double> support(size);
  for (int i = 0; i < size; ++i) {
    support[i] = lo + i;
    w[i] /= total;
  }
  return DiscretePmf(support, w);
}

// Brute force oracles over integer support.
double ks_oracle(const DiscretePmf& p, const DiscretePmf& q) {
  double best = 0;
  for (double x = -1; x <= 100; x += 0.5) best = std::max(best, std::abs(p.cdf(x) - q.cdf(x)));
  return best;
}

}  // namespace

TEST(Ks, Examples) {
  EXPECT_EQ(ks_distance(uniform(), uniform()).value, 0.0);
  EXPECT_EQ(ks_distance(point_mass(0), uniform()).value, 1.0);
  EXPECT_NEAR(ks_distance(bernoulli(0.5), point_mass(0)).value, 0.5, 1e-15);
}

TEST(Ks, MethodTags) {
  EXPECT_EQ(ks_distance(bernoulli(0.5), normal()).method, MetricMethod::exact_discrete);
  auto grid = ks_distance(normal(), normal(0.1, 1));
  EXPECT_EQ(grid.method, MetricMethod::sup_grid);
  EXPECT_EQ(grid.grid_resolution, kKsGridPoints);
}

TEST(Ks, ShiftedGaussiansMatchClosedForm) {
  // sup |Phi(x) - Phi(x - d)| = 2 Phi(d/2) - 1
  const double d = 0.7;
  const double expect = std::erf(d / 2 / std::sqrt(2.0));
  EXPECT_NEAR(ks_distance(normal(0, 1), normal(d, 1)).value, expect, 1e-12);
}

TEST(Ks, AtomAgainstContinuousUsesBothLimits) {
  // atom at 0.5 of mass 1: sup is max(G(0.5), 1-G(0.5)) approached from either side
  EXPECT_NEAR(ks_distance(point_mass(0.3), uniform()).value, 0.7, 1e-15);
  EXPECT_NEAR(ks_distance(point_mass(0.8), uniform()).value, 0.8, 1e-15);
}

TEST(Ks, RandomDiscretePairsMatchOracle) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    auto p = random_pmf(rng, 2 + k % 9), q = random_pmf(rng, 2 + (k * 5) % 11);
    EXPECT_NEAR(ks_distance(from_pmf(p), from_pmf(q)).value, ks_oracle(p, q), 1e-14);
  }
}

TEST(Tv, Examples) {
  EXPECT_NEAR(tv_distance(DiscretePmf({0, 1}, {0.5, 0.5}), DiscretePmf::point_mass(0)), 0.5, 1e-15);
  EXPECT_NEAR(tv_distance(normal(), normal()).value, 0.0, 1e-12);
  EXPECT_NEAR(tv_distance(uniform(0, 1), uniform(0.5, 1.5)).value, 0.5, 1e-9);
}

TEST(Tv, GaussianShiftMatchesClosedForm) {
  const double d = 1.0;
  auto r = tv_distance(normal(0, 1), normal(d, 1));
  EXPECT_EQ(r.method, MetricMethod::quadrature);
  EXPECT_NEAR(r.value, std::erf(d / 2 / std::sqrt(2.0)), 1e-8);
}

TEST(Tv, MixedPairRefused) {
  EXPECT_THROW(tv_distance(bernoulli(0.5), uniform()), UnsupportedPairError);
  EXPECT_THROW(tv_distance(cantor(), uniform()), UnsupportedPairError);
  EXPECT_THROW(renyi_divergence(bernoulli(0.5), uniform(), 2.0), UnsupportedPairError);
}

TEST(Renyi, SelfDivergenceVanishes) {
  DiscretePmf p({0, 1, 2}, {0.2, 0.3, 0.5});
  for (double a : {0.0, 0.5, 1.0, 2.0, kInf}) {
    EXPECT_NEAR(renyi_divergence(p, p, a), 0.0, 1e-15) << a;
    EXPECT_NEAR(renyi_divergence(normal(), normal(), a), 0.0, 1e-9) << a;
  }
}

TEST(Renyi, Examples) {
  DiscretePmf p({0, 1}, {0.5, 0.5}), q({0, 1}, {0.25, 0.75});
  EXPECT_NEAR(renyi_divergence(p, q, kInf), std::log(2.0), 1e-15);
  EXPECT_NEAR(renyi_divergence(p, q, 1.0), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
}

TEST(Renyi, AbsoluteContinuityFailureIsInfinite) {
  DiscretePmf p({0, 1}, {0.5, 0.5});
  auto q = DiscretePmf::point_mass(0);
  for (double a : {1.0, 2.0, kInf}) EXPECT_TRUE(std::isinf(renyi_divergence(p, q, a)));
  EXPECT_TRUE(std::isfinite(renyi_divergence(p, q, 0.5)));
  EXPECT_NEAR(renyi_divergence(p, q, 0.0), std::log(1.0), 1e-15);
  EXPECT_TRUE(std::isinf(renyi_divergence(uniform(0, 2), uniform(0, 1), 2.0)));
  EXPECT_THROW(renyi_divergence(p, q, -1.0), DomainError);
}

TEST(Renyi, GaussianShiftClosedForm) {
  // D_a(N(m1,1) || N(m2,1)) = a (m1-m2)^2 / 2
  for (double a : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(renyi_divergence(normal(0.3, 1), normal(0, 1), a), a * 0.09 / 2, 1e-7) << a;
  }
}

TEST(Properties, KsBelowTvOnRandomPairs) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    auto p = random_pmf(rng, 2 + k % 20), q = random_pmf(rng, 2 + k % 20);
    auto P = from_pmf(p), Q = from_pmf(q);
    EXPECT_LE(ks_distance(P, Q).value, tv_distance(P, Q).value + 1e-15);
  }
}

TEST(Properties, MetricsVanishOnlyOnEqualPmfs) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    auto p = random_pmf(rng, 2 + k % 7);
    auto P = from_pmf(p);
    EXPECT_EQ(ks_distance(P, P).value, 0.0);
    EXPECT_EQ(tv_distance(p, p), 0.0);
    EXPECT_LE(std::abs(renyi_divergence(p, p, 2.0)), 1e-15);
    auto q = random_pmf(rng, 2 + k % 7);
    if (q == p) continue;
    EXPECT_GT(ks_distance(P, from_pmf(q)).value, 0.0);
    EXPECT_GT(tv_distance(p, q), 0.0);
    EXPECT_GT(renyi_divergence(p, q, 2.0), 0.0);
  }
}

TEST(Properties, RenyiNonDecreasingInOrder) {
  std::mt19937_64 rng(13);
  const double orders[] = {0.0, 0.25, 0.5, 0.75, 1.0, 2.0, kInf};
  for (int k = 0; k < 200; ++k) {
    auto p = random_pmf(rng, 2 + k % 10), q = random_pmf(rng, 2 + k % 10);
    double prev = -1;
    for (double a : orders) {
      const double d = renyi_divergence(p, q, a);
      EXPECT_GE(d, prev - 1e-12) << "alpha=" << a;
      prev = d;
    }
  }
}

TEST(Sandwich, Examples) {
  auto P = from_pmf(DiscretePmf({0, 1}, {0.5, 0.5}));
  auto s0 = renyi_tv_sandwich(P, P, 0.5);
  EXPECT_NEAR(s0.lower, 0, 1e-15);
  EXPECT_NEAR(s0.value, 0, 1e-15);
  EXPECT_NEAR(s0.upper, 0, 1e-15);

  auto s1 = renyi_tv_sandwich(P, from_pmf(DiscretePmf({0, 1}, {0.25, 0.75})), 0.5);
  EXPECT_NEAR(s1.tv, 0.25, 1e-15);
  EXPECT_TRUE(s1.holds());
  // direct value: -2 log(sqrt(0.125) + sqrt(0.375))
  EXPECT_NEAR(s1.value, -2 * std::log(std::sqrt(0.125) + std::sqrt(0.375)), 1e-14);

  auto s2 = renyi_tv_sandwich(from_pmf(DiscretePmf::point_mass(0)), P, 0.5);
  EXPECT_NEAR(s2.tv, 0.5, 1e-15);
  EXPECT_NEAR(s2.upper, -2 * std::log(0.5), 1e-14);
  EXPECT_NEAR(s2.value, std::log(2.0), 1e-14);
  EXPECT_TRUE(s2.holds());
}

TEST(Sandwich, HoldsOnRandomPairs) {
  std::mt19937_64 rng(14);
  int violations = 0;
  for (int k = 0; k < 1000; ++k) {
    auto P = from_pmf(random_pmf(rng, 2 + k % 12)), Q = from_pmf(random_pmf(rng, 2 + k % 12));
    for (int j = 1; j <= 9; ++j)
      if (!renyi_tv_sandwich(P, Q, j / 10.0).holds()) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Sandwich, ContinuousPair) {
  auto s = renyi_tv_sandwich(normal(0, 1), normal(1, 1), 0.5);
  EXPECT_NEAR(s.value, 0.25, 1e-7);
  EXPECT_TRUE(s.holds(1e-9));
  EXPECT_THROW(renyi_tv_sandwich(normal(), normal(), 1.5), DomainError);
}
