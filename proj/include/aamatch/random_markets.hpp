#pragma once

// Random markets: k-draw preference generation from per-type school
// distributions, and checking of the regularity conditions a sequence of
// random markets must satisfy for the large-market result.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aamatch/market.hpp"
#include "aamatch/rng.hpp"

namespace aamatch {

enum class ReservePlacement : std::uint8_t {
  RandomSchools,  // one seat at each of a uniform random set of distinct schools
  FixedSchools,   // one seat per entry of fixed_schools (repeats stack)
  BetaWeighted,   // one seat at each of distinct schools drawn proportional to beta
};

struct RandomMarketParams {
  std::uint32_t num_schools = 10;
  std::uint32_t num_students = 10;
  double majority_share = 0.5;
  std::uint32_t k = 5;
  int capacity = 2;
  std::uint32_t reserved_seats = 0;
  ReservePlacement placement = ReservePlacement::RandomSchools;
  std::vector<std::uint32_t> fixed_schools;
  /// Weights are drawn uniformly from [1/r, 1] and normalized; r = 1 gives
  /// uniform weights.
  double weight_ratio = 1.0;
  /// When false, majorities get zero weight on schools whose majority quota
  /// is zero. Setting it true keeps full-support majority weights, which the
  /// rejection-chain diagnostic needs.
  bool majority_weight_on_zero_quota = false;
  PolicyKind policy_kind = PolicyKind::MinorityReserve;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_schools == 0) throw std::invalid_argument("num_schools must be positive");
    if (num_students == 0) throw std::invalid_argument("num_students must be positive");
    if (k == 0) throw std::invalid_argument("k must be positive");
    if (k > num_schools) throw std::invalid_argument("k must not exceed num_schools");
    if (capacity < 1) throw std::invalid_argument("capacity must be >= 1");
    if (!(majority_share > 0.0 && majority_share < 1.0))
      throw std::invalid_argument("majority_share must lie in (0, 1)");
    if (!(weight_ratio >= 1.0)) throw std::invalid_argument("weight_ratio must be >= 1");
    if (policy_kind == PolicyKind::None) throw std::invalid_argument("policy kind must be quota or reserve");
    const auto total_capacity = static_cast<std::uint64_t>(num_schools) * static_cast<std::uint64_t>(capacity);
    if (reserved_seats > total_capacity) throw std::invalid_argument("reserved seats exceed total capacity");
    switch (placement) {
      case ReservePlacement::RandomSchools:
      case ReservePlacement::BetaWeighted:
        if (reserved_seats > num_schools)
          throw std::invalid_argument("distinct-school placement needs reserved_seats <= num_schools");
        break;
      case ReservePlacement::FixedSchools: {
        if (fixed_schools.size() != reserved_seats)
          throw std::invalid_argument("fixed_schools must list exactly reserved_seats entries");
        std::vector<int> count(num_schools, 0);
        for (auto c : fixed_schools) {
          if (c >= num_schools) throw std::invalid_argument("fixed_schools entry out of range");
          if (++count[c] > capacity) throw std::invalid_argument("fixed placement exceeds a school's capacity");
        }
        break;
      }
    }
  }
};

struct SchoolWeights {
  std::vector<double> alpha;  // majority distribution over schools
  std::vector<double> beta;   // minority distribution over schools
};

/// A random market before preferences are drawn: schools with capacities,
/// reserves and priorities, typed students, and the two distributions.
struct RandomMarket {
  std::vector<std::string> student_ids;
  std::vector<StudentType> types;
  std::vector<School> schools;  // priority lists reference student positions
  std::vector<int> reserves;    // r^m_c
  SchoolWeights weights;
  std::uint32_t k = 0;
  PolicyKind policy_kind = PolicyKind::MinorityReserve;

  std::size_t num_schools() const noexcept { return schools.size(); }
  std::size_t num_students() const noexcept { return types.size(); }
  int majority_quota(SchoolIndex c) const { return schools[c].capacity - reserves[c]; }
  std::uint64_t total_reserved() const {
    std::uint64_t t = 0;
    for (int r : reserves) t += static_cast<std::uint64_t>(r);
    return t;
  }

  Policy policy() const {
    if (policy_kind == PolicyKind::MajorityQuota) {
      std::vector<int> q(schools.size());
      for (SchoolIndex c = 0; c < schools.size(); ++c) q[c] = majority_quota(c);
      return Policy::majority_quota(std::move(q));
    }
    return Policy::minority_reserve(reserves);
  }

  const std::vector<double>& weights_for(StudentType t) const {
    return t == StudentType::Majority ? weights.alpha : weights.beta;
  }
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t i, std::size_t count) {
  std::string digits = std::to_string(i + 1);
  const auto width = std::to_string(count).size();
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

inline std::vector<double> ratio_weights(std::size_t n, double r, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = r == 1.0 ? 1.0 : rng.uniform(1.0 / r, 1.0);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace detail

/// k distinct schools drawn one after another, each proportional to the
/// weights of the schools not yet drawn. Implemented by redrawing from the
/// full distribution until an undrawn school comes up, which has the same law.
inline std::vector<SchoolIndex> draw_preferences(const DiscreteSampler& sampler, std::uint32_t k, Rng& rng) {
  if (sampler.positive_count() < k)
    throw std::invalid_argument("fewer than k schools have positive weight");
  std::vector<SchoolIndex> out;
  out.reserve(k);
  while (out.size() < k) {
    const auto c = sampler.draw(rng);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

inline std::vector<SchoolIndex> draw_preferences(std::span<const double> weights, std::uint32_t k, Rng& rng) {
  return draw_preferences(DiscreteSampler(weights), k, rng);
}

/// Draws everything but preferences: student types, school priorities
/// (independent uniform permutations of all students), reserve placement and
/// the school weights.
inline RandomMarket build_random_market(const RandomMarketParams& p, Rng& rng) {
  p.validate();
  RandomMarket g;
  g.k = p.k;
  g.policy_kind = p.policy_kind;
  const auto S = p.num_students;
  const auto n = p.num_schools;

  auto majorities = static_cast<std::uint32_t>(std::llround(p.majority_share * S));
  majorities = std::min(majorities, S);
  g.types.assign(S, StudentType::Minority);
  for (std::uint32_t i = 0; i < majorities; ++i) g.types[i] = StudentType::Majority;
  rng.shuffle(g.types);
  g.student_ids.resize(S);
  for (std::uint32_t i = 0; i < S; ++i) g.student_ids[i] = detail::padded_id('s', i, S);

  g.weights.beta = detail::ratio_weights(n, p.weight_ratio, rng);

  g.reserves.assign(n, 0);
  switch (p.placement) {
    case ReservePlacement::RandomSchools:
      for (auto c : rng.sample_distinct(n, p.reserved_seats)) g.reserves[c] = 1;
      break;
    case ReservePlacement::FixedSchools:
      for (auto c : p.fixed_schools) ++g.reserves[c];
      break;
    case ReservePlacement::BetaWeighted: {
      std::vector<double> w = g.weights.beta;
      for (std::uint32_t i = 0; i < p.reserved_seats; ++i) {
        const auto c = DiscreteSampler(w).draw(rng);
        g.reserves[c] = 1;
        w[c] = 0.0;
      }
      break;
    }
  }

  g.weights.alpha = detail::ratio_weights(n, p.weight_ratio, rng);
  if (!p.majority_weight_on_zero_quota) {
    double total = 0.0;
    for (SchoolIndex c = 0; c < n; ++c) {
      if (p.capacity - g.reserves[c] == 0) g.weights.alpha[c] = 0.0;
      total += g.weights.alpha[c];
    }
    if (total > 0.0)
      for (auto& a : g.weights.alpha) a /= total;
  }

  g.schools.resize(n);
  std::vector<StudentIndex> perm(S);
  for (SchoolIndex c = 0; c < n; ++c) {
    for (std::uint32_t i = 0; i < S; ++i) perm[i] = i;
    rng.shuffle(perm);
    g.schools[c].id = detail::padded_id('c', c, n);
    g.schools[c].capacity = p.capacity;
    g.schools[c].priority = perm;
  }
  return g;
}

/// Materializes a market from given preference lists.
inline Market assemble_market(const RandomMarket& g, std::vector<std::vector<SchoolIndex>> prefs) {
  std::vector<Student> students(g.num_students());
  for (std::size_t s = 0; s < students.size(); ++s)
    students[s] = Student{g.student_ids[s], g.types[s], std::move(prefs[s])};
  return Market::create(std::move(students), g.schools, g.policy());
}

/// Draws every student's k-school preference list up front.
inline Market realize_market(const RandomMarket& g, Rng& rng) {
  const DiscreteSampler alpha(g.weights.alpha), beta(g.weights.beta);
  std::vector<std::vector<SchoolIndex>> prefs(g.num_students());
  for (std::size_t s = 0; s < prefs.size(); ++s)
    prefs[s] = draw_preferences(g.types[s] == StudentType::Majority ? alpha : beta, g.k, rng);
  return assemble_market(g, std::move(prefs));
}

/// Deterministic in params.seed.
inline Market generate_random_market(const RandomMarketParams& p) {
  Rng rng(derive_seed(p.seed, 0));
  const auto g = build_random_market(p, rng);
  return realize_market(g, rng);
}

// ---------------------------------------------------------------------------
// Regularity

struct RegularityConstants {
  double a = 0.25;
  double lambda = 1.0;
  double kappa = 1.0;
  double theta = 1.0;
  double r = 1.0;
  std::uint32_t k = 5;
  int q_bar = 2;

  /// Upper bound R̄ = ⌈θ n^a⌉ on the number of reserved seats.
  std::uint64_t reserve_bound(std::uint64_t n) const {
    return static_cast<std::uint64_t>(std::ceil(theta * std::pow(static_cast<double>(n), a) - 1e-12));
  }

  /// Empty string when valid, else the reason.
  std::string problem() const {
    if (!(a >= 0.0 && a < 0.5)) return "a must lie in [0, 0.5)";
    if (!(lambda > 0.0)) return "lambda must be positive";
    if (!(kappa > 0.0)) return "kappa must be positive";
    if (!(theta >= 0.0)) return "theta must be non-negative";
    if (!(r >= 1.0)) return "r must be >= 1";
    if (k < 1) return "k must be a positive integer";
    if (q_bar < 1) return "q_bar must be a positive integer";
    return {};
  }
  void validate() const {
    if (auto p = problem(); !p.empty()) throw std::invalid_argument(p);
  }
};

struct RegularityRow {
  std::size_t n = 0;
  bool preference_length = false;  // k^n <= k
  bool capacity_bound = false;     // q_c <= q̄
  bool student_growth = false;     // |S^n| <= λn and Σq_c - |S^n| >= κn
  bool reserve_growth = false;     // |r^{m,n}| <= θ n^a
  bool moderate_similarity = false;
  bool zero_quota_exclusion = false;  // α_c = 0 exactly where q^M_c = 0

  bool all() const {
    return preference_length && capacity_bound && student_growth && reserve_growth && moderate_similarity &&
           zero_quota_exclusion;
  }
};

struct RegularityReport {
  std::string constants_problem;  // non-empty: constants rejected, rows not evaluated
  std::vector<RegularityRow> rows;

  bool regular() const {
    if (!constants_problem.empty()) return false;
    for (const auto& r : rows)
      if (!r.all()) return false;
    return true;
  }
};

namespace detail {

inline bool ratio_within(const std::vector<double>& w, double r) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double x : w) {
    if (x <= 0.0) continue;
    if (!any) lo = hi = x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    any = true;
  }
  return !any || hi <= r * lo * (1.0 + 1e-12);
}

}  // namespace detail

inline RegularityRow check_regularity_one(const RandomMarket& g, const RegularityConstants& k) {
  RegularityRow row;
  const double n = static_cast<double>(g.num_schools());
  row.n = g.num_schools();
  row.preference_length = g.k <= k.k;
  row.capacity_bound = true;
  std::uint64_t total = 0;
  for (const auto& c : g.schools) {
    row.capacity_bound = row.capacity_bound && c.capacity <= k.q_bar;
    total += static_cast<std::uint64_t>(c.capacity);
  }
  const double students = static_cast<double>(g.num_students());
  row.student_growth = students <= k.lambda * n + 1e-9 && static_cast<double>(total) - students >= k.kappa * n - 1e-9;
  row.reserve_growth = static_cast<double>(g.total_reserved()) <= k.theta * std::pow(n, k.a) + 1e-9;
  row.moderate_similarity = detail::ratio_within(g.weights.alpha, k.r) && detail::ratio_within(g.weights.beta, k.r);
  row.zero_quota_exclusion = true;
  for (SchoolIndex c = 0; c < g.num_schools(); ++c) {
    const bool zero_quota = g.majority_quota(c) == 0;
    const bool zero_alpha = g.weights.alpha[c] == 0.0;
    row.zero_quota_exclusion = row.zero_quota_exclusion && zero_quota == zero_alpha;
  }
  return row;
}

inline RegularityReport check_regularity(std::span<const RandomMarket> sequence, const RegularityConstants& k) {
  RegularityReport rep;
  rep.constants_problem = k.problem();
  if (!rep.constants_problem.empty()) return rep;
  for (const auto& g : sequence) rep.rows.push_back(check_regularity_one(g, k));
  return rep;
}

// ---------------------------------------------------------------------------
// Params file

inline RandomMarketParams params_from_json(const nlohmann::json& j) {
  RandomMarketParams p;
  auto get = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
  };
  get("n_schools", p.num_schools);
  get("n_students", p.num_students);
  get("majority_share", p.majority_share);
  get("k", p.k);
  get("capacity", p.capacity);
  get("reserved_seats", p.reserved_seats);
  get("fixed_schools", p.fixed_schools);
  get("weight_ratio", p.weight_ratio);
  get("majority_weight_on_zero_quota", p.majority_weight_on_zero_quota);
  get("seed", p.seed);
  if (auto it = j.find("placement"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "random") p.placement = ReservePlacement::RandomSchools;
    else if (s == "fixed") p.placement = ReservePlacement::FixedSchools;
    else if (s == "beta_weighted") p.placement = ReservePlacement::BetaWeighted;
    else throw std::invalid_argument("placement must be random, fixed or beta_weighted");
  }
  if (auto it = j.find("policy"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "majority_quota") p.policy_kind = PolicyKind::MajorityQuota;
    else if (s == "minority_reserve") p.policy_kind = PolicyKind::MinorityReserve;
    else throw std::invalid_argument("policy must be majority_quota or minority_reserve");
  }
  return p;
}

inline RegularityConstants constants_from_json(const nlohmann::json& j, RegularityConstants c = {}) {
  auto get = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
  };
  get("a", c.a);
  get("lambda", c.lambda);
  get("kappa", c.kappa);
  get("theta", c.theta);
  get("r", c.r);
  get("k", c.k);
  get("q_bar", c.q_bar);
  return c;
}

}  // namespace aamatch
