// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include "support/test_support.hpp"

namespace aamatch {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& body) {
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  if (!v.ok) ++failures;
  std::printf("%s criterion %d (%s): %s\n", v.ok ? "PASS" : "FAIL", id, name, v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Shared sweep for criteria 3, 4 and 6: small random markets with complete
// priorities, half of them biased toward effective competition.
struct Sweep {
  std::vector<Market> markets;  // reserve policy
  std::size_t competitive = 0;
};

Sweep build_sweep(std::size_t competitive_target) {
  Sweep s;
  Rng rng(derive_seed(2024, 3));
  testing::SmallMarketShape shape;  // ≤ 10 schools, ≤ 20 students, k ≤ 5
  while (s.competitive < competitive_target) {
    auto m = testing::random_small_market(shape, rng);
    if (effectively_competitive(m).verdict) ++s.competitive;
    s.markets.push_back(std::move(m));
  }
  return s;
}

Verdict example(const char* market_file, const char* quota_file, const char* reserve_file) {
  const auto m = testing::load_market(market_file);
  const auto want_q = testing::read_data(quota_file);
  const auto want_r = testing::read_data(reserve_file);
  const auto rm = m.with_policy(to_reserve(m));
  const auto t = Clock::now();
  const auto got_q = serialize_matching(m, run_sosm_q(m).matching);
  const auto got_r = serialize_matching(rm, run_sosm_r(rm).matching);
  const double ms = seconds_since(t) * 1e3;
  const bool ok = got_q == want_q && got_r == want_r && ms < 1.0;
  return {ok, fmt("quota %s, reserve %s, %.3f ms (limit 1 ms)", got_q == want_q ? "byte-exact" : "MISMATCH",
                  got_r == want_r ? "byte-exact" : "MISMATCH", ms)};
}

}  // namespace
}  // namespace aamatch

int main() {
  using namespace aamatch;

  report(1, "example 1 exact", [] { return example("ex1.json", "ex1_quota.matching.json", "ex1_reserve.matching.json"); });
  report(2, "example 2 exact", [] { return example("ex2.json", "ex2.matching.json", "ex2.matching.json"); });

  const auto sweep_start = Clock::now();
  const auto sweep = build_sweep(10'000);
  const double sweep_build = seconds_since(sweep_start);

  report(3, "equivalence under effective competition", [&] {
    const auto t = Clock::now();
    std::size_t checked = 0, equal = 0, traces = 0;
    for (const auto& m : sweep.markets) {
      if (!effectively_competitive(m).verdict) continue;
      const auto rep = check_equivalence(m);
      ++checked;
      equal += rep.matchings_equal;
      traces += rep.trace_equal;
    }
    const double s = seconds_since(t) + sweep_build;
    return Verdict{checked >= 10'000 && equal == checked && traces == checked && s < 60.0,
                   fmt("%zu competitive markets of %zu drawn, matchings equal %zu, traces equal %zu, %.2f s (limit 60 s)",
                       checked, sweep.markets.size(), equal, traces, s)};
  });

  report(4, "stability of mechanism outputs", [&] {
    const auto t = Clock::now();
    std::size_t stable = 0;
    for (const auto& rm : sweep.markets) {
      const auto qm = rm.with_policy(to_quota(rm));
      const auto q = run_sosm_q(qm).matching;
      const auto r = run_sosm_r(rm).matching;
      const bool ok = find_blocking_pairs_quota(qm, q).empty() && find_blocking_pairs_reserve(rm, r).empty() &&
                      individually_rational(qm, q) && individually_rational(rm, r);
      stable += ok;
    }
    const double s = seconds_since(t);
    return Verdict{stable == sweep.markets.size() && s < 60.0,
                   fmt("%zu / %zu markets with no blocking pair under either policy, %.2f s (limit 60 s)", stable,
                       sweep.markets.size(), s)};
  });

  report(5, "oracle certification", [] {
    const auto t = Clock::now();
    Rng rng(derive_seed(2024, 5));
    testing::SmallMarketShape shape;
    shape.max_schools = 4;
    shape.max_students = 6;
    shape.max_k = 3;
    shape.max_capacity = 2;
    constexpr int kMarkets = 1000;
    int certified = 0;
    for (int i = 0; i < kMarkets; ++i) {
      const auto rm = testing::random_small_market(shape, rng);
      const auto qm = rm.with_policy(to_quota(rm));
      bool ok = true;
      for (const auto* m : {&qm, &rm}) {
        const auto set = enumerate_stable(*m);
        const auto mu = run_mechanism(*m).matching;
        ok = ok && set.contains(mu) && verify_student_optimal(*m, mu, set);
      }
      certified += ok;
    }
    const double s = seconds_since(t);
    return Verdict{certified == kMarkets && s < 120.0,
                   fmt("%d / %d markets certified under both policies, %.2f s (limit 120 s)", certified, kMarkets, s)};
  });

  report(6, "welfare dominance", [&] {
    std::size_t violations = 0;
    for (const auto& rm : sweep.markets) {
      const auto q = run_sosm_q(rm.with_policy(to_quota(rm))).matching;
      const auto r = run_sosm_r(rm).matching;
      for (StudentIndex s = 0; s < rm.num_students(); ++s) {
        const auto at_q = q.school_of(s);
        if (at_q && rm.student_prefers(s, *at_q, r.school_of(s))) ++violations;
      }
    }
    return Verdict{violations == 0, fmt("%zu students prefer the quota outcome over %zu markets", violations,
                                        sweep.markets.size())};
  });

  report(7, "lazy and eager runs agree", [] {
    const auto t = Clock::now();
    constexpr int kRuns = 1000;
    int agree = 0;
    for (int i = 0; i < kRuns; ++i) {
      Rng rng(derive_seed(2024, 7000 + static_cast<std::uint64_t>(i)));
      RandomMarketParams p;
      p.num_schools = 10 + static_cast<std::uint32_t>(rng.below(90));
      p.num_students = p.num_schools;
      p.capacity = 1 + static_cast<int>(rng.below(2));
      p.k = 5;
      p.reserved_seats = 1 + static_cast<std::uint32_t>(rng.below(5));
      p.weight_ratio = 2.0;
      p.majority_share = 0.5;
      const auto kind = i % 2 ? PolicyKind::MinorityReserve : PolicyKind::MajorityQuota;
      const auto g = build_random_market(p, rng);
      const auto lazy = stochastic_sosm(g, kind, rng);
      agree += lazy.output.matching == run_mechanism(lazy.realized).matching;
    }
    const double s = seconds_since(t);
    return Verdict{agree == kRuns && s < 60.0, fmt("%d / %d seeded runs agree, %.2f s (limit 60 s)", agree, kRuns, s)};
  });

  report(8, "convergence of the equivalence probability", [] {
    const auto t = Clock::now();
    ConvergenceConfig cfg;
    cfg.constants.a = 0.25;
    cfg.constants.theta = 1.0;
    cfg.constants.k = 5;
    cfg.constants.lambda = 1.0;
    cfg.constants.kappa = 1.0;
    cfg.constants.q_bar = 2;
    cfg.constants.r = 2.0;
    const std::vector<std::uint32_t> sizes{50, 100, 200, 500, 1000};
    const auto rows = convergence_report(sizes, cfg, 1000, 2024, jobs());
    const double s = seconds_since(t);
    std::ostringstream detail;
    bool monotone = true, bound_ok = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double half = (rows[i].ci.hi - rows[i].ci.lo) / 2;
      bound_ok = bound_ok && rows[i].p_hat >= rows[i].bound - half;
      for (std::size_t j = i + 1; j < rows.size(); ++j)
        monotone = monotone && (rows[j].p_hat >= rows[i].p_hat || rows[j].ci.hi >= rows[i].ci.lo);
      detail << fmt("n=%u p=%.3f [%.3f,%.3f] bound=%.3f; ", static_cast<unsigned>(rows[i].n), rows[i].p_hat,
                    rows[i].ci.lo, rows[i].ci.hi, rows[i].bound);
    }
    const auto& last = rows.back();
    const bool high = last.p_hat >= 0.99 - (last.ci.hi - last.ci.lo) / 2;
    detail << fmt("(i) %s, (ii) %s, (iii) %s, %.1f s (limit 600 s)", monotone ? "ok" : "violated",
                  high ? "ok" : "violated", bound_ok ? "ok" : "violated", s);
    return Verdict{monotone && high && bound_ok && s < 600.0, detail.str()};
  });

  report(9, "rejection chain length", [] {
    const auto t = Clock::now();
    constexpr std::uint32_t n = 1000;
    constexpr std::uint64_t kTrials = 5000;
    RegularityConstants k;
    const auto p = chain_preset(n, 0.5, 5, k);
    const auto ex = chain_exceedance(p, kTrials, 2024, jobs());
    const double s = seconds_since(t);
    const double limit = 2.0 / n;
    return Verdict{ex.fraction() <= limit && s < 300.0,
                   fmt("%llu / %llu trials exceed %.3f (fraction %.4f, limit %.4f), longest chain %zu, %.1f s "
                       "(limit 300 s)",
                       static_cast<unsigned long long>(ex.exceeded), static_cast<unsigned long long>(ex.trials),
                       ex.bound, ex.fraction(), limit, ex.max_length, s)};
  });

  report(10, "order independence", [] {
    const auto t = Clock::now();
    Rng rng(derive_seed(2024, 10));
    int same = 0, total = 0;
    for (int i = 0; i < 100; ++i) {
      const auto rm = testing::random_small_market({}, rng);
      const auto qm = rm.with_policy(to_quota(rm));
      const auto q = run_sosm_q(qm).matching;
      const auto r = run_sosm_r(rm).matching;
      std::vector<StudentIndex> order(rm.num_students());
      std::iota(order.begin(), order.end(), 0);
      for (int j = 0; j < 20; ++j) {
        rng.shuffle(order);
        ++total;
        same += sequential_deferred_acceptance(qm, ChoiceRule::Quota, order).matching == q &&
                sequential_deferred_acceptance(rm, ChoiceRule::Reserve, order).matching == r;
      }
    }
    const double s = seconds_since(t);
    return Verdict{same == total && s < 30.0,
                   fmt("%d / %d permutations give identical matchings, %.2f s (limit 30 s)", same, total, s)};
  });

  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
