#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "support/test_support.hpp"

namespace aamatch {
namespace {

TEST(Rng, Mt19937_64CheckValue) {
  // The 10000th output of a default-seeded mt19937_64.
  Rng rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Rng, BelowIsInRangeAndCoversIt) {
  Rng rng(1);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) ++seen[rng.below(7)];
  for (int c : seen) EXPECT_GT(c, 800);
}

RegularityConstants base_constants() {
  RegularityConstants k;
  k.a = 0.25;
  k.lambda = 1.0;
  k.theta = 1.0;
  k.r = 1.0;
  k.k = 5;
  return k;
}

TEST(LowerBound, ThousandSchools) {
  const auto k = base_constants();
  EXPECT_EQ(k.reserve_bound(1000), 6u);
  EXPECT_NEAR(theoretical_lower_bound(1000, k), 0.4010, 1e-4);
  EXPECT_NEAR(theoretical_lower_bound(1000, k), std::pow(0.97, 30), 1e-12);
}

TEST(LowerBound, NoReservedSeatsGivesOne) {
  auto k = base_constants();
  k.theta = 0.0;
  EXPECT_EQ(theoretical_lower_bound(50, k), 1.0);
}

TEST(LowerBound, ClampedAtZero) {
  const auto k = base_constants();
  // R̄ = 2 at n = 10, so λkR̄r = 10 = n.
  EXPECT_EQ(theoretical_lower_bound(10, k), 0.0);
  EXPECT_EQ(theoretical_lower_bound(5, k), 0.0);
}

TEST(LowerBound, ContinuousFormIncreasesToOne) {
  const auto k = base_constants();
  double prev = 0.0;
  for (double n = 1e3; n <= 1e12; n *= 1.5) {
    const double b = continuous_lower_bound(n, k);
    ASSERT_GE(b, prev) << n;
    prev = b;
  }
  EXPECT_GT(prev, 0.99);
  EXPECT_GT(theoretical_lower_bound(1'000'000'000'000ULL, k), 0.99);
  EXPECT_NEAR(asymptotic_lower_bound(1e12, k), continuous_lower_bound(1e12, k), 1e-3);
}

TEST(Wilson, PinnedValues) {
  auto w = wilson_interval(0, 10);
  EXPECT_DOUBLE_EQ(w.lo, 0.0);
  EXPECT_NEAR(w.hi, 0.2775328, 1e-6);
  w = wilson_interval(5, 10);
  EXPECT_NEAR(w.lo, 0.2365931, 1e-6);
  EXPECT_NEAR(w.hi, 0.7634069, 1e-6);
  w = wilson_interval(990, 1000);
  EXPECT_NEAR(w.lo, 0.9816905, 1e-6);
  EXPECT_NEAR(w.hi, 0.9945592, 1e-6);
  w = wilson_interval(10, 10);
  EXPECT_DOUBLE_EQ(w.hi, 1.0);
  EXPECT_LE(w.lo, 1.0);
}

RandomMarketParams small_params(std::uint32_t n, std::uint32_t reserved) {
  RandomMarketParams p;
  p.num_schools = n;
  p.num_students = n;
  p.k = std::min<std::uint32_t>(5, n);
  p.capacity = 2;
  p.reserved_seats = reserved;
  p.weight_ratio = 2.0;
  return p;
}

TEST(StochasticSosm, LazyMatchesEagerOnRealizedMarket) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto p = small_params(8 + seed % 20, 1 + seed % 5);
    p.capacity = 1 + static_cast<int>(seed % 2);
    p.majority_share = 0.3 + 0.1 * static_cast<double>(seed % 5);
    for (auto kind : {PolicyKind::MajorityQuota, PolicyKind::MinorityReserve}) {
      Rng rng(derive_seed(seed, 1));
      const auto g = build_random_market(p, rng);
      const auto lazy = stochastic_sosm(g, kind, rng);
      const auto eager = run_mechanism(lazy.realized);
      ASSERT_EQ(lazy.realized.policy().kind(), kind);
      ASSERT_EQ(lazy.output.matching, eager.matching) << "seed " << seed << "\n" << serialize_market(lazy.realized);
    }
  }
}

TEST(StochasticSosm, NoReservesMatchesPlainSosm) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto g = build_random_market(small_params(15, 0), rng);
    const auto lazy = stochastic_sosm(g, PolicyKind::MajorityQuota, rng);
    ASSERT_EQ(lazy.output.matching, run_sosm(lazy.realized).matching);
  }
}

TEST(StochasticSosm, MajoritiesNeverDrawZeroQuotaSchools) {
  auto p = small_params(10, 4);
  p.capacity = 1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto g = build_random_market(p, rng);
    const auto lazy = stochastic_sosm(g, PolicyKind::MajorityQuota, rng);
    for (StudentIndex s = 0; s < g.num_students(); ++s) {
      if (g.types[s] != StudentType::Majority) continue;
      for (auto c : lazy.state.drawn[s]) ASSERT_GT(g.majority_quota(c), 0);
      for (auto c : lazy.realized.student(s).prefs) ASSERT_GT(g.majority_quota(c), 0);
    }
  }
}

TEST(StochasticSosm, DrawnSetsAreBoundedByK) {
  Rng rng(3);
  const auto g = build_random_market(small_params(20, 3), rng);
  const auto lazy = stochastic_sosm(g, PolicyKind::MinorityReserve, rng);
  for (const auto& d : lazy.state.drawn) {
    ASSERT_LE(d.size(), g.k);
    std::set<SchoolIndex> u(d.begin(), d.end());
    ASSERT_EQ(u.size(), d.size());
  }
}

TEST(Estimate, NoReservesIsCertain) {
  auto k = base_constants();
  k.theta = 0.0;
  const auto r = estimate_equivalence_probability(small_params(30, 0), k, 200, 9);
  EXPECT_EQ(r.equal, 200u);
  EXPECT_EQ(r.p_hat, 1.0);
  EXPECT_EQ(r.ci.hi, 1.0);
  EXPECT_EQ(r.max_eta_c, 0.0);
  EXPECT_EQ(r.bound, 1.0);
}

TEST(Estimate, SaturatedTinyMarketsDisagreeSometimes) {
  RandomMarketParams p;
  p.num_schools = 2;
  p.num_students = 4;
  p.k = 2;
  p.capacity = 2;
  p.reserved_seats = 2;
  p.placement = ReservePlacement::FixedSchools;
  p.fixed_schools = {1, 1};
  p.majority_weight_on_zero_quota = true;
  const auto r = estimate_equivalence_probability(p, base_constants(), 2000, 5);
  EXPECT_LT(r.p_hat, 1.0);
  EXPECT_GT(r.max_eta_c, 0.0);
}

TEST(Estimate, DeterministicInSeedAndJobs) {
  const auto p = small_params(40, 3);
  const auto k = base_constants();
  const auto a = estimate_equivalence_probability(p, k, 300, 42, 1);
  const auto b = estimate_equivalence_probability(p, k, 300, 42, 1);
  const auto c = estimate_equivalence_probability(p, k, 300, 42, 3);
  for (const auto* x : {&b, &c}) {
    EXPECT_EQ(a.equal, x->equal);
    EXPECT_EQ(a.max_eta_c, x->max_eta_c);
    EXPECT_EQ(a.mean_rounds, x->mean_rounds);
  }
  EXPECT_GE(a.p_hat, a.ci.lo);
  EXPECT_LE(a.p_hat, a.ci.hi);
}

TEST(Convergence, SingleTrialNoReserves) {
  ConvergenceConfig cfg{base_constants()};
  cfg.constants.theta = 0.0;
  const std::vector<std::uint32_t> sizes{10};
  const auto rows = convergence_report(sizes, cfg, 1, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].p_hat, 1.0);
  std::ostringstream os;
  write_convergence_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "n,trials,equal,p_hat,ci_lo,ci_hi,bound,max_eta_c,mean_rounds,seconds");
}

TEST(Convergence, InvalidConstantsRejected) {
  ConvergenceConfig cfg{base_constants()};
  cfg.constants.a = 0.5;
  const std::vector<std::uint32_t> sizes{10};
  EXPECT_THROW(convergence_report(sizes, cfg, 1, 1), std::invalid_argument);
}

TEST(Chains, ExampleOneEviction) {
  const auto m = testing::load_market("ex1.json");
  // Seats at c2 one at a time: the first leaves one majority seat for s3,
  // the second evicts her with nowhere left to go.
  const std::vector<SchoolIndex> seats{1, 1};
  const auto sum = rejection_chains(m, seats, 0.5);
  ASSERT_EQ(sum.records.size(), 2u);
  EXPECT_EQ(sum.records[0].length, 0u);
  EXPECT_EQ(sum.records[1].length, 1u);
  EXPECT_FALSE(sum.records[1].touched_reserved);
  EXPECT_EQ(sum.max_length, 1u);
}

TEST(Chains, NoEvictionMeansZeroLength) {
  const auto m = testing::load_market("ex1.json");
  // c1 holds one majority (s1), so one reserved seat there changes nothing.
  const std::vector<SchoolIndex> seats{0};
  EXPECT_EQ(rejection_chains(m, seats, 0.5).records[0].length, 0u);
}

TEST(Chains, BoundFormula) {
  EXPECT_NEAR(chain_length_bound(0.5, 1000), std::log(1000.0), 1e-12);
  EXPECT_NEAR(chain_length_bound(0.25, std::exp(3.0)), 1.0, 1e-12);
}

TEST(Chains, ExperimentIsDeterministic) {
  const auto p = chain_preset(200, 0.5, 5, base_constants());
  EXPECT_EQ(p.reserved_seats, 3u);
  const auto a = rejection_chain_experiment(p, 5);
  const auto b = rejection_chain_experiment(p, 5);
  ASSERT_EQ(a.records.size(), 3u);
  EXPECT_EQ(a.max_length, b.max_length);
  EXPECT_EQ(a.mean_length, b.mean_length);
  const auto e1 = chain_exceedance(p, 20, 3, 1);
  const auto e2 = chain_exceedance(p, 20, 3, 2);
  EXPECT_EQ(e1.exceeded, e2.exceeded);
  EXPECT_EQ(e1.max_length, e2.max_length);
}

}  // namespace
}  // namespace aamatch
