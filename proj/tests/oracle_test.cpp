#include <gtest/gtest.h>

#include "support/test_support.hpp"

namespace aamatch {
namespace {

using testing::load_market;
using testing::matching_of;

TEST(Enumerate, OneByOne) {
  const auto m = parse_market(R"({
    "students": [{"id":"s","type":"minority","prefs":["c"]}],
    "schools": [{"id":"c","capacity":1,"priority":["s"]}]})");
  const auto set = enumerate_stable(m);
  ASSERT_EQ(set.matchings.size(), 1u);
  EXPECT_EQ(set.matchings[0].school_of(0), SchoolIndex{0});
  EXPECT_EQ(set.examined, 2u);
  EXPECT_TRUE(verify_student_optimal(m, set.matchings[0], set));
}

TEST(Enumerate, ExampleOneQuota) {
  const auto m = load_market("ex1.json");
  const auto set = enumerate_stable(m);
  const auto fq = run_sosm_q(m).matching;
  EXPECT_TRUE(set.contains(fq));
  EXPECT_TRUE(verify_student_optimal(m, fq, set));
  for (const auto& mu : set.matchings) {
    EXPECT_TRUE(find_blocking_pairs_quota(m, mu).empty());
    EXPECT_TRUE(individually_rational(m, mu));
  }
}

TEST(Enumerate, ExampleOneReserve) {
  const auto m = load_market("ex1.json");
  const auto rm = m.with_policy(to_reserve(m));
  const auto set = enumerate_stable(rm);
  const auto fr = run_sosm_r(rm).matching;
  EXPECT_TRUE(set.contains(fr));
  EXPECT_TRUE(verify_student_optimal(rm, fr, set));
  // The quota outcome is not stable under the reserve definition.
  EXPECT_FALSE(set.contains(run_sosm_q(m).matching));
}

TEST(Enumerate, CapExceeded) {
  Rng rng(1);
  testing::SmallMarketShape shape;
  shape.max_students = 20;
  shape.max_k = 5;
  const auto m = testing::random_small_market(shape, rng);
  EXPECT_THROW(enumerate_stable(m, 1), SearchSpaceTooLarge);
}

TEST(VerifyOptimal, RejectsNonMember) {
  const auto m = load_market("ex1.json");
  const auto set = enumerate_stable(m);
  EXPECT_THROW(verify_student_optimal(m, Matching::empty(4, 2), set), NotStable);
}

TEST(VerifyOptimal, WorseStableMatchingIsNotOptimal) {
  // Two students, two schools, opposed priorities: both students getting
  // their first choice and both getting their second are stable.
  const auto m = parse_market(R"({
    "students": [{"id":"s1","type":"minority","prefs":["c1","c2"]},
                 {"id":"s2","type":"minority","prefs":["c2","c1"]}],
    "schools": [{"id":"c1","capacity":1,"priority":["s2","s1"]},
                {"id":"c2","capacity":1,"priority":["s1","s2"]}]})");
  const auto set = enumerate_stable(m);
  ASSERT_EQ(set.matchings.size(), 2u);
  const auto good = matching_of(m, {{"c1", {"s1"}}, {"c2", {"s2"}}});
  const auto bad = matching_of(m, {{"c1", {"s2"}}, {"c2", {"s1"}}});
  EXPECT_TRUE(verify_student_optimal(m, good, set));
  EXPECT_FALSE(verify_student_optimal(m, bad, set));
  EXPECT_EQ(run_sosm(m).matching, good);
}

TEST(OracleAgreement, RandomSmallMarkets) {
  Rng rng(41);
  testing::SmallMarketShape shape;
  shape.max_schools = 4;
  shape.max_students = 6;
  shape.max_k = 3;
  shape.max_capacity = 2;
  shape.truncate_priority = 0.2;
  for (int i = 0; i < 300; ++i) {
    const auto rm = testing::random_small_market(shape, rng);
    const auto qm = rm.with_policy(to_quota(rm));
    for (const auto* m : {&qm, &rm}) {
      const auto set = enumerate_stable(*m);
      const auto mu = run_mechanism(*m).matching;
      ASSERT_TRUE(set.contains(mu)) << serialize_market(*m);
      ASSERT_TRUE(verify_student_optimal(*m, mu, set)) << serialize_market(*m);
    }
  }
}

TEST(OracleAgreement, DetectorConsistency) {
  // Membership in the stable set matches the detectors on every feasible
  // assignment of a few small markets.
  Rng rng(42);
  testing::SmallMarketShape shape;
  shape.max_schools = 3;
  shape.max_students = 4;
  shape.max_k = 3;
  shape.max_capacity = 2;
  for (int i = 0; i < 40; ++i) {
    const auto rm = testing::random_small_market(shape, rng);
    const auto qm = rm.with_policy(to_quota(rm));
    const auto qset = enumerate_stable(qm);
    const auto rset = enumerate_stable(rm);
    const auto S = rm.num_students();
    std::vector<std::optional<SchoolIndex>> a(S);
    auto visit = [&](auto&& self, StudentIndex s) -> void {
      if (s == S) {
        const auto mu = Matching::from_assignment(a, rm.num_schools());
        const bool ir = individually_rational(rm, mu);
        if (validate_matching(qm, mu).feasible()) {
          ASSERT_EQ(qset.contains(mu), ir && find_blocking_pairs_quota(qm, mu).empty());
        }
        if (validate_matching(rm, mu).feasible()) {
          ASSERT_EQ(rset.contains(mu), ir && find_blocking_pairs_reserve(rm, mu).empty());
        }
        return;
      }
      a[s] = std::nullopt;
      self(self, s + 1);
      for (SchoolIndex c = 0; c < rm.num_schools(); ++c) {
        a[s] = c;
        self(self, s + 1);
      }
      a[s] = std::nullopt;
    };
    visit(visit, 0);
  }
}

}  // namespace
}  // namespace aamatch
