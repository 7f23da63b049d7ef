#pragma once

// Student-proposing deferred acceptance under no policy, a majority quota
// (SOSM-Q) or a minority reserve (SOSM-R), and blocking-pair detection for the
// two stability notions.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aamatch/market.hpp"

namespace aamatch {

class PolicyMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// How a school picks from its applicant pool.
enum class ChoiceRule : std::uint8_t { Plain, Quota, Reserve };

inline ChoiceRule choice_rule_for(PolicyKind k) {
  switch (k) {
    case PolicyKind::None: return ChoiceRule::Plain;
    case PolicyKind::MajorityQuota: return ChoiceRule::Quota;
    case PolicyKind::MinorityReserve: return ChoiceRule::Reserve;
  }
  return ChoiceRule::Plain;
}

struct ChoiceResult {
  std::vector<StudentIndex> accepted;
  std::vector<StudentIndex> rejected;
};

/// School c's choice from `pool` under the market's current policy.
///
/// Plain: top q_c acceptable applicants by priority.
/// Quota: walk applicants by priority, skipping a majority once q^M_c
///        majorities are held, until q_c are held.
/// Reserve: first the top min(r^m_c, #minorities) minorities, then the best
///        remaining applicants until q_c are held.
/// Unacceptable applicants are always rejected. Both outputs are sorted by
/// student index.
inline ChoiceResult choose(const Market& m, SchoolIndex c, ChoiceRule rule,
                           std::span<const StudentIndex> pool) {
  ChoiceResult out;
  std::vector<StudentIndex> ranked;
  ranked.reserve(pool.size());
  for (auto s : pool) {
    if (m.acceptable_to_school(c, s)) ranked.push_back(s);
    else out.rejected.push_back(s);
  }
  std::sort(ranked.begin(), ranked.end(),
            [&](StudentIndex a, StudentIndex b) { return m.school_prefers(c, a, b); });

  const auto cap = static_cast<std::size_t>(m.school(c).capacity);
  std::vector<bool> take(ranked.size(), false);
  switch (rule) {
    case ChoiceRule::Plain:
      for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) take[i] = true;
      break;
    case ChoiceRule::Quota: {
      const int quota = m.majority_quota(c);
      std::size_t held = 0;
      int majorities = 0;
      for (std::size_t i = 0; i < ranked.size() && held < cap; ++i) {
        if (m.is_majority(ranked[i])) {
          if (majorities >= quota) continue;
          ++majorities;
        }
        take[i] = true;
        ++held;
      }
      break;
    }
    case ChoiceRule::Reserve: {
      const int reserve = m.minority_reserve(c);
      std::size_t held = 0;
      int minorities = 0;
      for (std::size_t i = 0; i < ranked.size() && minorities < reserve && held < cap; ++i) {
        if (m.is_minority(ranked[i])) {
          take[i] = true;
          ++minorities;
          ++held;
        }
      }
      for (std::size_t i = 0; i < ranked.size() && held < cap; ++i) {
        if (!take[i]) {
          take[i] = true;
          ++held;
        }
      }
      break;
    }
  }
  for (std::size_t i = 0; i < ranked.size(); ++i) (take[i] ? out.accepted : out.rejected).push_back(ranked[i]);
  std::sort(out.accepted.begin(), out.accepted.end());
  std::sort(out.rejected.begin(), out.rejected.end());
  return out;
}

struct MechanismOutput {
  Matching matching;
  RoundTrace trace;
  int rounds = 0;  // proposal rounds (batch) or single applications (sequential)
};

/// Batch deferred acceptance: every currently rejected student applies to her
/// next choice simultaneously each round. A student whose list is exhausted
/// stays unmatched.
inline MechanismOutput deferred_acceptance(const Market& m, ChoiceRule rule, bool record_trace = true) {
  const auto S = m.num_students();
  const auto C = m.num_schools();
  std::vector<std::size_t> next(S, 0);
  std::vector<std::vector<StudentIndex>> held(C);
  std::vector<StudentIndex> proposers;
  for (StudentIndex s = 0; s < S; ++s)
    if (!m.student(s).prefs.empty()) proposers.push_back(s);

  MechanismOutput out;
  std::vector<std::vector<StudentIndex>> applicants(C);
  std::vector<SchoolIndex> touched;
  while (!proposers.empty()) {
    ++out.rounds;
    RoundRecord rec;
    rec.round = out.rounds;
    touched.clear();
    for (auto s : proposers) {
      const SchoolIndex c = m.student(s).prefs[next[s]];
      if (applicants[c].empty()) touched.push_back(c);
      applicants[c].push_back(s);
      if (record_trace) rec.applications.emplace_back(s, c);
    }
    if (record_trace) rec.rejected.assign(C, {});
    std::sort(touched.begin(), touched.end());
    std::vector<StudentIndex> next_proposers;
    for (auto c : touched) {
      std::vector<StudentIndex> pool = held[c];
      pool.insert(pool.end(), applicants[c].begin(), applicants[c].end());
      applicants[c].clear();
      auto res = choose(m, c, rule, pool);
      held[c] = std::move(res.accepted);
      for (auto s : res.rejected) {
        if (++next[s] < m.student(s).prefs.size()) next_proposers.push_back(s);
      }
      if (record_trace) rec.rejected[c] = std::move(res.rejected);
    }
    std::sort(next_proposers.begin(), next_proposers.end());
    proposers = std::move(next_proposers);
    if (record_trace) {
      rec.held = held;
      out.trace.push_back(std::move(rec));
    }
  }
  out.matching = Matching::from_holds(std::move(held), S);
  return out;
}

/// Sequential deferred acceptance: students enter one at a time in `order`;
/// each displaced student keeps applying down her list before the next
/// student enters. Produces the same matching as the batch version.
inline MechanismOutput sequential_deferred_acceptance(const Market& m, ChoiceRule rule,
                                                      std::span<const StudentIndex> order) {
  const auto S = m.num_students();
  std::vector<std::size_t> next(S, 0);
  std::vector<std::vector<StudentIndex>> held(m.num_schools());
  MechanismOutput out;
  for (auto entrant : order) {
    std::vector<StudentIndex> pending{entrant};
    while (!pending.empty()) {
      const auto s = pending.back();
      pending.pop_back();
      if (next[s] >= m.student(s).prefs.size()) continue;
      const SchoolIndex c = m.student(s).prefs[next[s]];
      ++out.rounds;
      std::vector<StudentIndex> pool = held[c];
      pool.push_back(s);
      auto res = choose(m, c, rule, pool);
      held[c] = std::move(res.accepted);
      for (auto r : res.rejected) {
        ++next[r];
        pending.push_back(r);
      }
    }
  }
  out.matching = Matching::from_holds(std::move(held), S);
  RoundRecord last;
  last.round = out.rounds;
  last.held = out.matching.school_assignment;
  last.rejected.assign(m.num_schools(), {});
  out.trace.push_back(std::move(last));
  return out;
}

/// Standard student-optimal stable mechanism; any policy on the market is ignored.
inline MechanismOutput run_sosm(const Market& m) { return deferred_acceptance(m, ChoiceRule::Plain); }

inline MechanismOutput run_sosm_q(const Market& m) {
  if (m.policy().kind() != PolicyKind::MajorityQuota)
    throw PolicyMismatch("run_sosm_q requires a majority_quota policy");
  return deferred_acceptance(m, ChoiceRule::Quota);
}

inline MechanismOutput run_sosm_r(const Market& m) {
  if (m.policy().kind() != PolicyKind::MinorityReserve)
    throw PolicyMismatch("run_sosm_r requires a minority_reserve policy");
  return deferred_acceptance(m, ChoiceRule::Reserve);
}

/// Dispatches on the market's policy.
inline MechanismOutput run_mechanism(const Market& m) {
  return deferred_acceptance(m, choice_rule_for(m.policy().kind()));
}

// ---------------------------------------------------------------------------
// Blocking pairs

/// Which clause of the blocking definition fired. The numbered clauses share
/// their shape across the quota and reserve definitions:
///   MinorityOverAny      (i)   minority s has higher priority than some s' ∈ μ(c)
///   MajorityOverAny      (ii)  majority s, majority room (quota) or excess
///                              minorities (reserve), beats some s' ∈ μ(c)
///   MajorityOverMajority (iii) majority s beats some majority s' ∈ μ(c)
enum class BlockingClause : std::uint8_t { Vacancy, MinorityOverAny, MajorityOverAny, MajorityOverMajority };

inline const char* to_string(BlockingClause k) {
  switch (k) {
    case BlockingClause::Vacancy: return "vacancy";
    case BlockingClause::MinorityOverAny: return "i";
    case BlockingClause::MajorityOverAny: return "ii";
    case BlockingClause::MajorityOverMajority: return "iii";
  }
  return "?";
}

struct BlockingPair {
  StudentIndex student;
  SchoolIndex school;
  BlockingClause clause;

  friend bool operator==(const BlockingPair&, const BlockingPair&) = default;
};

class InfeasibleMatching : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline bool beats_any(const Market& m, SchoolIndex c, StudentIndex s, const std::vector<StudentIndex>& at,
                      bool majorities_only) {
  for (auto t : at) {
    if (majorities_only && !m.is_majority(t)) continue;
    if (m.school_prefers(c, s, t)) return true;
  }
  return false;
}

}  // namespace detail

/// First clause (in vacancy, i, ii, iii order) by which (s, c) blocks μ under
/// the quota definition, or nullopt. Requires c P_s μ(s) and s acceptable to c.
/// The vacancy clause only admits a majority while the school is below its
/// majority quota; an empty seat a majority cannot legally take is no vacancy.
inline std::optional<BlockingClause> quota_clause(const Market& m, const Matching& mu, StudentIndex s,
                                                  SchoolIndex c) {
  if (!m.acceptable_to_school(c, s) || !m.student_prefers(s, c, mu.school_of(s))) return std::nullopt;
  const auto& at = mu.students_at(c);
  const int majorities = static_cast<int>(std::count_if(at.begin(), at.end(), [&](auto t) { return m.is_majority(t); }));
  const int quota = m.majority_quota(c);
  const bool minority = m.is_minority(s);
  if (static_cast<int>(at.size()) < m.school(c).capacity && (minority || majorities < quota))
    return BlockingClause::Vacancy;
  if (minority) {
    if (detail::beats_any(m, c, s, at, false)) return BlockingClause::MinorityOverAny;
    return std::nullopt;
  }
  if (majorities < quota && detail::beats_any(m, c, s, at, false)) return BlockingClause::MajorityOverAny;
  if (majorities >= quota && detail::beats_any(m, c, s, at, true)) return BlockingClause::MajorityOverMajority;
  return std::nullopt;
}

/// Same as quota_clause for the reserve definition. A minority also blocks a
/// full school holding fewer than r^m_c minorities, whatever her priority.
inline std::optional<BlockingClause> reserve_clause(const Market& m, const Matching& mu, StudentIndex s,
                                                    SchoolIndex c) {
  if (!m.acceptable_to_school(c, s) || !m.student_prefers(s, c, mu.school_of(s))) return std::nullopt;
  const auto& at = mu.students_at(c);
  if (static_cast<int>(at.size()) < m.school(c).capacity) return BlockingClause::Vacancy;
  const int minorities = static_cast<int>(std::count_if(at.begin(), at.end(), [&](auto t) { return m.is_minority(t); }));
  const int reserve = m.minority_reserve(c);
  if (m.is_minority(s)) {
    // A reserved seat held by a majority is open to any acceptable minority.
    if (minorities < reserve || detail::beats_any(m, c, s, at, false)) return BlockingClause::MinorityOverAny;
    return std::nullopt;
  }
  if (minorities > reserve && detail::beats_any(m, c, s, at, false)) return BlockingClause::MajorityOverAny;
  if (minorities <= reserve && detail::beats_any(m, c, s, at, true)) return BlockingClause::MajorityOverMajority;
  return std::nullopt;
}

/// Evaluates the clause predicates over every pair without feasibility checks.
/// q^M / r^m are read through the market's policy, so any policy kind works.
inline std::vector<BlockingPair> evaluate_blocking_clauses(const Market& m, const Matching& mu, ChoiceRule rule) {
  std::vector<BlockingPair> out;
  for (StudentIndex s = 0; s < m.num_students(); ++s) {
    for (auto c : m.student(s).prefs) {
      const auto clause = rule == ChoiceRule::Reserve ? reserve_clause(m, mu, s, c) : quota_clause(m, mu, s, c);
      if (clause) out.push_back({s, c, *clause});
    }
  }
  return out;
}

/// Blocking pairs under the majority-quota definition. The market's policy
/// supplies q^M (None means q^M = q, the standard definition). Throws
/// InfeasibleMatching if μ violates consistency, capacity or the quota cap.
inline std::vector<BlockingPair> find_blocking_pairs_quota(const Market& m, const Matching& mu) {
  const Market quota_market = m.policy().kind() == PolicyKind::MajorityQuota ? m : m.with_policy(to_quota(m));
  const auto rep = validate_matching(quota_market, mu);
  if (!rep.feasible()) throw InfeasibleMatching("matching is infeasible: " + rep.issues.front().message);
  return evaluate_blocking_clauses(quota_market, mu, ChoiceRule::Quota);
}

/// Blocking pairs under the minority-reserve definition; r^m from the
/// market's policy. Throws InfeasibleMatching on consistency/capacity errors.
inline std::vector<BlockingPair> find_blocking_pairs_reserve(const Market& m, const Matching& mu) {
  const auto rep = validate_matching(m.policy().kind() == PolicyKind::MajorityQuota ? m.with_policy(to_reserve(m)) : m, mu);
  if (!rep.feasible()) throw InfeasibleMatching("matching is infeasible: " + rep.issues.front().message);
  return evaluate_blocking_clauses(m, mu, ChoiceRule::Reserve);
}

/// Stable under the definition matching `rule` (Plain uses the quota
/// definition with q^M = q): feasible, individually rational, no blocking pair.
inline bool is_stable(const Market& m, const Matching& mu, ChoiceRule rule) {
  if (!individually_rational(m, mu)) return false;
  switch (rule) {
    case ChoiceRule::Plain: {
      const auto plain = m.with_policy(Policy::none());
      return validate_matching(plain, mu).feasible() &&
             evaluate_blocking_clauses(plain, mu, ChoiceRule::Quota).empty();
    }
    case ChoiceRule::Quota: {
      const auto qm = m.policy().kind() == PolicyKind::MajorityQuota ? m : m.with_policy(to_quota(m));
      return validate_matching(qm, mu).feasible() && evaluate_blocking_clauses(qm, mu, ChoiceRule::Quota).empty();
    }
    case ChoiceRule::Reserve:
      return validate_matching(m.with_policy(Policy::none()), mu).feasible() &&
             evaluate_blocking_clauses(m, mu, ChoiceRule::Reserve).empty();
  }
  return false;
}

}  // namespace aamatch
