#pragma once

// Large-market experiments: the stochastic SOSM that draws preferences lazily
// while it runs, Monte Carlo estimation of how often SOSM-Q and SOSM-R agree,
// the closed-form lower bound on that probability, and the rejection-chain
// diagnostic.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "aamatch/market.hpp"
#include "aamatch/mechanisms.hpp"
#include "aamatch/random_markets.hpp"
#include "aamatch/rng.hpp"

namespace aamatch {

// ---------------------------------------------------------------------------
// Stochastic SOSM with deferred decisions

/// Bookkeeping of the lazy run. `drawn[s]` is A_s for a majority and B_s for a
/// minority: the schools s has drawn so far, in draw order, which is also her
/// realized preference prefix.
struct DeferredState {
  std::vector<std::vector<SchoolIndex>> drawn;
  std::uint32_t next_majority = 1;  // l(M)
  std::uint32_t next_minority = 1;  // l(m)
  std::vector<std::vector<StudentIndex>> holds;
  std::uint64_t redraws = 0;  // draws discarded because the school was already in the set
};

struct StochasticOutcome {
  MechanismOutput output;
  Market realized;  // market with the preferences drawn during (and after) the run
  DeferredState state;
};

namespace detail {

inline bool prefers(const RandomMarket& g, SchoolIndex c, StudentIndex s, StudentIndex t,
                    const std::vector<std::uint32_t>& rank) {
  const auto n = g.num_students();
  return rank[static_cast<std::size_t>(c) * n + s] < rank[static_cast<std::size_t>(c) * n + t];
}

}  // namespace detail

/// Acceptance/rejection when `s` applies to `c` holding `held`. Returns the
/// student who ends up rejected (s herself or an evicted holder), or nullopt
/// if s is accepted with no one displaced. `held` is updated in place.
///
/// Schools without reserved seats behave as in plain deferred acceptance.
/// Under a quota a majority can only enter by displacing a lower-priority
/// majority once q^M_c majorities are held. Under a reserve a full school
/// drops its lowest-priority student among those not protected by the reserve
/// (the top min(r^m_c, #minorities) minorities of held ∪ {s}).
inline std::optional<StudentIndex> admit(const RandomMarket& g, PolicyKind kind, SchoolIndex c, StudentIndex s,
                                         std::vector<StudentIndex>& held,
                                         const std::vector<std::uint32_t>& rank) {
  const auto lowest_of = [&](auto pred) -> std::optional<StudentIndex> {
    std::optional<StudentIndex> low;
    for (auto t : held)
      if (pred(t) && (!low || detail::prefers(g, c, *low, t, rank))) low = t;
    return low;
  };
  const auto any = [](StudentIndex) { return true; };
  const auto is_major = [&](StudentIndex t) { return g.types[t] == StudentType::Majority; };
  const auto replace = [&](StudentIndex out) {
    *std::find(held.begin(), held.end(), out) = s;
    return std::optional<StudentIndex>(out);
  };

  const auto capacity = static_cast<std::size_t>(g.schools[c].capacity);
  const int reserve = g.reserves[c];
  const bool full = held.size() >= capacity;

  // No affirmative action at c.
  if (reserve == 0) {
    if (!full) {
      held.push_back(s);
      return std::nullopt;
    }
    const auto low = *lowest_of(any);
    if (detail::prefers(g, c, s, low, rank)) return replace(low);
    return s;
  }

  if (kind == PolicyKind::MajorityQuota) {
    const int quota = g.schools[c].capacity - reserve;
    const int majorities = static_cast<int>(std::count_if(held.begin(), held.end(), is_major));
    if (is_major(s) && majorities >= quota) {
      // Must displace a held majority; with q^M_c = 0 there is none.
      const auto low = lowest_of(is_major);
      if (low && detail::prefers(g, c, s, *low, rank)) return replace(*low);
      return s;
    }
    if (!full) {
      held.push_back(s);
      return std::nullopt;
    }
    const auto low = *lowest_of(any);
    if (detail::prefers(g, c, s, low, rank)) return replace(low);
    return s;
  }

  // Minority reserve.
  if (!full) {
    held.push_back(s);
    return std::nullopt;
  }
  std::vector<StudentIndex> pool = held;
  pool.push_back(s);
  std::sort(pool.begin(), pool.end(), [&](StudentIndex a, StudentIndex b) { return detail::prefers(g, c, a, b, rank); });
  std::vector<bool> protect(pool.size(), false);
  int protected_minorities = 0;
  for (std::size_t i = 0; i < pool.size() && protected_minorities < reserve; ++i) {
    if (!is_major(pool[i])) {
      protect[i] = true;
      ++protected_minorities;
    }
  }
  for (std::size_t i = pool.size(); i-- > 0;) {
    if (protect[i]) continue;
    if (pool[i] == s) return s;
    return replace(pool[i]);
  }
  return s;  // unreachable: q+1 students, at most q protected
}

/// Runs deferred acceptance on g, drawing each student's next choice only
/// when she needs to apply. Every draw comes from the student's full type
/// distribution and is repeated until it lands outside her drawn set. After
/// the run, unfinished lists are completed to k schools so the realized
/// market is a full k-draw market.
inline StochasticOutcome stochastic_sosm(const RandomMarket& g, PolicyKind kind, Rng& rng) {
  if (kind == PolicyKind::None) throw PolicyMismatch("stochastic SOSM needs a quota or reserve policy");
  const auto S = g.num_students();
  const auto C = g.num_schools();
  const DiscreteSampler alpha(g.weights.alpha), beta(g.weights.beta);
  const auto sampler_for = [&](StudentIndex s) -> const DiscreteSampler& {
    return g.types[s] == StudentType::Majority ? alpha : beta;
  };

  std::vector<std::uint32_t> rank(C * S);
  for (SchoolIndex c = 0; c < C; ++c) {
    std::fill_n(rank.begin() + static_cast<std::ptrdiff_t>(c * S), S, Market::kUnacceptable);
    const auto& pr = g.schools[c].priority;
    for (std::uint32_t i = 0; i < pr.size(); ++i) rank[c * S + pr[i]] = i;
  }

  DeferredState st;
  st.drawn.assign(S, {});
  st.holds.assign(C, {});
  StochasticOutcome out;

  const auto draw_new = [&](StudentIndex s) {
    const auto& sampler = sampler_for(s);
    auto& set = st.drawn[s];
    for (;;) {
      const auto c = sampler.draw(rng);
      if (std::find(set.begin(), set.end(), c) == set.end()) {
        set.push_back(c);
        return c;
      }
      ++st.redraws;
    }
  };

  for (StudentIndex entrant = 0; entrant < S; ++entrant) {
    if (g.types[entrant] == StudentType::Majority) ++st.next_majority;
    else ++st.next_minority;
    StudentIndex s = entrant;
    for (;;) {
      if (st.drawn[s].size() >= g.k) break;  // exhausted: stays unmatched
      const auto c = draw_new(s);
      ++out.output.rounds;
      if (rank[c * S + s] == Market::kUnacceptable) continue;
      const auto rejected = admit(g, kind, c, s, st.holds[c], rank);
      if (!rejected) break;
      s = *rejected;
    }
  }

  std::vector<std::vector<SchoolIndex>> prefs(S);
  for (StudentIndex s = 0; s < S; ++s) {
    while (st.drawn[s].size() < g.k) draw_new(s);
    prefs[s] = st.drawn[s];
  }
  RandomMarket policy_view = g;  // only the policy kind differs
  policy_view.policy_kind = kind;
  out.realized = assemble_market(policy_view, std::move(prefs));
  out.output.matching = Matching::from_holds(st.holds, S);
  RoundRecord last;
  last.round = out.output.rounds;
  last.held = out.output.matching.school_assignment;
  last.rejected.assign(C, {});
  out.output.trace.push_back(std::move(last));
  out.state = std::move(st);
  return out;
}

// ---------------------------------------------------------------------------
// Lower bound

/// (1 - λ k R̄ r / n)^(λ k R̄) with R̄ = ⌈θ n^a⌉, clamped at 0.
inline double theoretical_lower_bound(std::uint64_t n, const RegularityConstants& k) {
  const double reserved = static_cast<double>(k.reserve_bound(n));
  if (reserved == 0.0) return 1.0;
  const double load = k.lambda * static_cast<double>(k.k) * reserved;
  const double base = 1.0 - load * k.r / static_cast<double>(n);
  if (base <= 0.0) return 0.0;
  return std::pow(base, load);
}

/// Same expression with the unrounded R̄ = θ n^a.
inline double continuous_lower_bound(double n, const RegularityConstants& k) {
  const double reserved = k.theta * std::pow(n, k.a);
  if (reserved == 0.0) return 1.0;
  const double load = k.lambda * static_cast<double>(k.k) * reserved;
  const double base = 1.0 - load * k.r / n;
  if (base <= 0.0) return 0.0;
  return std::pow(base, load);
}

/// exp(-λ k θ r)^(λ k θ n^(2a-1)), the limit form that tends to 1 for a < 1/2.
inline double asymptotic_lower_bound(double n, const RegularityConstants& k) {
  const double lk = k.lambda * static_cast<double>(k.k);
  return std::exp(-lk * k.theta * k.r * lk * k.theta * std::pow(n, 2.0 * k.a - 1.0));
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
  double half_width() const { return (hi - lo) / 2.0; }
};

/// 95% Wilson score interval for `successes` out of `trials`.
inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials) {
  constexpr double z = 1.959963984540054;
  if (trials == 0) return {};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval w{std::max(0.0, center - half), std::min(1.0, center + half)};
  // Guard against rounding at p = 0 or 1.
  w.lo = std::min(w.lo, p);
  w.hi = std::max(w.hi, p);
  return w;
}

struct SimulationResult {
  std::uint64_t n = 0;
  std::uint64_t trials = 0;
  std::uint64_t equal = 0;
  double p_hat = 0.0;
  WilsonInterval ci;
  double bound = 0.0;
  double max_eta_c = 0.0;  // max over schools of the fraction of trials where μ_Q(c) ≠ μ_R(c)
  double mean_rounds = 0.0;
  double seconds = 0.0;
};

namespace detail {

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Each index is
/// processed exactly once; callers write results into per-index slots.
template <class Body>
void parallel_for(std::size_t count, unsigned jobs, Body&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&, j] {
      for (std::size_t i = j; i < count; i += jobs) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

struct TrialOutcome {
  bool equal = false;
  int rounds = 0;
  std::vector<SchoolIndex> disagreeing;  // schools whose student sets differ
};

/// One paired trial: draw a random market, run SOSM-Q lazily, then SOSM-R on
/// the realized preferences.
inline TrialOutcome run_equivalence_trial(const RandomMarketParams& params, std::uint64_t seed, std::uint64_t trial) {
  Rng rng(derive_seed(seed, trial));
  const auto g = build_random_market(params, rng);
  auto lazy = stochastic_sosm(g, PolicyKind::MajorityQuota, rng);
  const auto reserve_market = lazy.realized.with_policy(to_reserve(lazy.realized));
  const auto r = deferred_acceptance(reserve_market, ChoiceRule::Reserve, false);
  TrialOutcome t;
  t.equal = lazy.output.matching == r.matching;
  t.rounds = r.rounds;
  if (!t.equal)
    for (SchoolIndex c = 0; c < reserve_market.num_schools(); ++c)
      if (lazy.output.matching.school_assignment[c] != r.matching.school_assignment[c]) t.disagreeing.push_back(c);
  return t;
}

/// Fraction of `trials` paired trials in which SOSM-Q and SOSM-R agree.
/// Trial i uses the stream derive_seed(seed, i), so the result does not
/// depend on `jobs`.
inline SimulationResult estimate_equivalence_probability(const RandomMarketParams& params,
                                                         const RegularityConstants& constants,
                                                         std::uint64_t trials, std::uint64_t seed,
                                                         unsigned jobs = 1) {
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  params.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<TrialOutcome> outcomes(trials);
  detail::parallel_for(trials, jobs, [&](std::size_t i) { outcomes[i] = run_equivalence_trial(params, seed, i); });

  SimulationResult res;
  res.n = params.num_schools;
  res.trials = trials;
  std::vector<std::uint64_t> per_school(params.num_schools, 0);
  double rounds = 0.0;
  for (const auto& o : outcomes) {
    res.equal += o.equal ? 1 : 0;
    rounds += o.rounds;
    for (auto c : o.disagreeing) ++per_school[c];
  }
  res.p_hat = static_cast<double>(res.equal) / static_cast<double>(trials);
  res.ci = wilson_interval(res.equal, trials);
  res.bound = theoretical_lower_bound(params.num_schools, constants);
  res.max_eta_c = static_cast<double>(*std::max_element(per_school.begin(), per_school.end())) /
                  static_cast<double>(trials);
  res.mean_rounds = rounds / static_cast<double>(trials);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// Experiment layout for a market of n schools: ⌊λn⌋ students, q̄ seats per
/// school, ⌊θ n^a⌋ single reserved seats at random distinct schools.
struct ConvergenceConfig {
  RegularityConstants constants;
  double majority_share = 0.5;
  ReservePlacement placement = ReservePlacement::RandomSchools;

  RandomMarketParams params_for(std::uint32_t n) const {
    RandomMarketParams p;
    p.num_schools = n;
    p.num_students = static_cast<std::uint32_t>(std::floor(constants.lambda * n + 1e-9));
    p.majority_share = majority_share;
    p.k = std::min<std::uint32_t>(constants.k, n);
    p.capacity = constants.q_bar;
    const double seats = constants.theta * std::pow(static_cast<double>(n), constants.a);
    p.reserved_seats = std::min<std::uint32_t>(static_cast<std::uint32_t>(std::floor(seats + 1e-9)), n);
    p.placement = placement;
    p.weight_ratio = constants.r;
    p.policy_kind = PolicyKind::MinorityReserve;
    return p;
  }
};

/// One row per market size. Each size uses its own seed stream.
inline std::vector<SimulationResult> convergence_report(std::span<const std::uint32_t> sizes,
                                                        const ConvergenceConfig& config, std::uint64_t trials,
                                                        std::uint64_t seed, unsigned jobs = 1) {
  if (auto p = config.constants.problem(); !p.empty()) throw std::invalid_argument(p);
  std::vector<SimulationResult> rows;
  for (auto n : sizes)
    rows.push_back(estimate_equivalence_probability(config.params_for(n), config.constants, trials,
                                                    derive_seed(seed, n), jobs));
  return rows;
}

inline constexpr const char* kConvergenceCsvHeader =
    "n,trials,equal,p_hat,ci_lo,ci_hi,bound,max_eta_c,mean_rounds,seconds";

inline void write_convergence_csv(std::ostream& os, std::span<const SimulationResult> rows) {
  os << kConvergenceCsvHeader << '\n';
  const auto old = os.precision(6);
  for (const auto& r : rows)
    os << r.n << ',' << r.trials << ',' << r.equal << ',' << r.p_hat << ',' << r.ci.lo << ',' << r.ci.hi << ','
       << r.bound << ',' << r.max_eta_c << ',' << r.mean_rounds << ',' << r.seconds << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Rejection chains

struct ChainRecord {
  std::size_t seat = 0;
  SchoolIndex school = 0;
  std::size_t length = 0;  // schools whose held set changed
  bool touched_reserved = false;
};

struct ChainSummary {
  std::vector<ChainRecord> records;
  double mean_length = 0.0;
  std::size_t max_length = 0;
  double bound = 0.0;  // λ log n / (1 - λ), natural log
  bool exceeds_bound() const { return static_cast<double>(max_length) > bound; }
};

/// λ log n / (1 - λ).
inline double chain_length_bound(double lambda, double n) { return lambda * std::log(n) / (1.0 - lambda); }

/// Reserved seats added one at a time to a market that starts with none. After
/// each addition SOSM-Q is rerun and the schools whose held sets changed form
/// the chain. `reserves` lists the school of each seat in order of addition.
inline ChainSummary rejection_chains(const Market& base, std::span<const SchoolIndex> reserves, double lambda) {
  std::vector<int> quota(base.num_schools());
  for (SchoolIndex c = 0; c < base.num_schools(); ++c) quota[c] = base.school(c).capacity;
  std::vector<int> reserved(base.num_schools(), 0);
  auto prev = deferred_acceptance(base.with_policy(Policy::majority_quota(quota)), ChoiceRule::Quota, false).matching;

  ChainSummary sum;
  sum.bound = chain_length_bound(lambda, static_cast<double>(base.num_schools()));
  for (std::size_t i = 0; i < reserves.size(); ++i) {
    const auto c = reserves[i];
    if (quota[c] == 0) throw std::invalid_argument("more reserved seats than capacity at a school");
    --quota[c];
    auto next = deferred_acceptance(base.with_policy(Policy::majority_quota(quota)), ChoiceRule::Quota, false).matching;
    ChainRecord rec{i, c, 0, false};
    for (SchoolIndex d = 0; d < base.num_schools(); ++d) {
      if (prev.school_assignment[d] == next.school_assignment[d]) continue;
      ++rec.length;
      if (d != c && reserved[d] > 0) rec.touched_reserved = true;
    }
    ++reserved[c];
    sum.records.push_back(rec);
    prev = std::move(next);
  }
  double total = 0.0;
  for (const auto& r : sum.records) {
    total += static_cast<double>(r.length);
    sum.max_length = std::max(sum.max_length, r.length);
  }
  if (!sum.records.empty()) sum.mean_length = total / static_cast<double>(sum.records.size());
  return sum;
}

/// Unit capacities, uniform weights on both sides, ⌊λn⌋ students and
/// ⌊θ n^a⌋ reserved seats at random distinct schools. Majorities keep weight
/// on every school because the seats are imposed after preferences exist.
inline RandomMarketParams chain_preset(std::uint32_t n, double lambda, std::uint32_t k,
                                       const RegularityConstants& constants) {
  RandomMarketParams p;
  p.num_schools = n;
  p.num_students = static_cast<std::uint32_t>(std::floor(lambda * n + 1e-9));
  p.k = k;
  p.capacity = 1;
  p.reserved_seats = std::min<std::uint32_t>(
      static_cast<std::uint32_t>(std::floor(constants.theta * std::pow(static_cast<double>(n), constants.a) + 1e-9)), n);
  p.weight_ratio = 1.0;
  p.majority_weight_on_zero_quota = true;
  p.policy_kind = PolicyKind::MajorityQuota;
  return p;
}

/// Draws one market from `params`, then measures the chain of each seat of
/// its reserve placement, added in random order.
inline ChainSummary rejection_chain_experiment(const RandomMarketParams& params, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  auto g = build_random_market(params, rng);
  std::vector<SchoolIndex> seats;
  for (SchoolIndex c = 0; c < g.num_schools(); ++c)
    for (int i = 0; i < g.reserves[c]; ++i) seats.push_back(c);
  rng.shuffle(seats);
  std::fill(g.reserves.begin(), g.reserves.end(), 0);
  g.policy_kind = PolicyKind::MajorityQuota;
  const auto market = realize_market(g, rng);
  const double lambda = static_cast<double>(params.num_students) / static_cast<double>(params.num_schools);
  return rejection_chains(market, seats, lambda);
}

struct ChainExceedance {
  std::uint64_t trials = 0;
  std::uint64_t exceeded = 0;
  std::size_t max_length = 0;
  double mean_max_length = 0.0;
  double bound = 0.0;
  double fraction() const { return trials ? static_cast<double>(exceeded) / static_cast<double>(trials) : 0.0; }
};

/// Fraction of independent markets whose longest chain exceeds λ log n/(1-λ).
inline ChainExceedance chain_exceedance(const RandomMarketParams& params, std::uint64_t trials, std::uint64_t seed,
                                        unsigned jobs = 1) {
  std::vector<ChainSummary> sums(trials);
  detail::parallel_for(trials, jobs,
                       [&](std::size_t i) { sums[i] = rejection_chain_experiment(params, derive_seed(seed, i)); });
  ChainExceedance ex;
  ex.trials = trials;
  double total = 0.0;
  for (const auto& s : sums) {
    ex.bound = s.bound;
    ex.exceeded += s.exceeds_bound() ? 1 : 0;
    ex.max_length = std::max(ex.max_length, s.max_length);
    total += static_cast<double>(s.max_length);
  }
  if (trials) ex.mean_max_length = total / static_cast<double>(trials);
  return ex;
}

}  // namespace aamatch
