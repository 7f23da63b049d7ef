#pragma once

// Brute-force enumeration of stable matchings on small markets.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aamatch/market.hpp"
#include "aamatch/mechanisms.hpp"

namespace aamatch {

class SearchSpaceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

class NotStable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

struct StableSet {
  PolicyKind kind = PolicyKind::None;
  std::vector<Matching> matchings;
  std::uint64_t examined = 0;  // feasible matchings tested

  bool contains(const Matching& mu) const {
    return std::find(matchings.begin(), matchings.end(), mu) != matchings.end();
  }
};

/// Π_s (|prefs_s| + 1), saturating at UINT64_MAX.
inline std::uint64_t assignment_space(const Market& m) {
  std::uint64_t total = 1;
  for (const auto& s : m.students()) {
    const std::uint64_t f = s.prefs.size() + 1;
    if (total > UINT64_MAX / f) return UINT64_MAX;
    total *= f;
  }
  return total;
}

/// All matchings stable under the market's policy (None: standard
/// stability). Every student is tried unmatched or at each school she lists
/// that also finds her acceptable; capacity and the majority cap (quota
/// policy only) prune partial assignments.
inline StableSet enumerate_stable(const Market& m, std::uint64_t cap = kDefaultEnumerationCap) {
  const auto space = assignment_space(m);
  if (space > cap)
    throw SearchSpaceTooLarge("search space " + std::to_string(space) + " exceeds cap " + std::to_string(cap));

  const auto rule = choice_rule_for(m.policy().kind());
  // Stability is judged against a market whose policy speaks the right
  // definition; plain markets use the quota definition with q^M = q.
  const Market judge = rule == ChoiceRule::Plain ? m.with_policy(to_quota(m)) : m;
  const auto clause_rule = rule == ChoiceRule::Reserve ? ChoiceRule::Reserve : ChoiceRule::Quota;

  StableSet out;
  out.kind = m.policy().kind();
  const auto S = m.num_students();
  std::vector<std::optional<SchoolIndex>> assignment(S);
  std::vector<int> load(m.num_schools(), 0), majorities(m.num_schools(), 0);
  const bool quota_cap = rule == ChoiceRule::Quota;

  auto visit = [&](auto&& self, StudentIndex s) -> void {
    if (s == S) {
      ++out.examined;
      auto mu = Matching::from_assignment(assignment, m.num_schools());
      if (evaluate_blocking_clauses(judge, mu, clause_rule).empty()) out.matchings.push_back(std::move(mu));
      return;
    }
    assignment[s] = std::nullopt;
    self(self, s + 1);
    for (auto c : m.student(s).prefs) {
      if (!m.acceptable_to_school(c, s)) continue;
      if (load[c] >= m.school(c).capacity) continue;
      const bool major = m.is_majority(s);
      if (quota_cap && major && majorities[c] >= m.majority_quota(c)) continue;
      assignment[s] = c;
      ++load[c];
      if (major) ++majorities[c];
      self(self, s + 1);
      --load[c];
      if (major) --majorities[c];
    }
    assignment[s] = std::nullopt;
  };
  visit(visit, 0);
  return out;
}

/// True iff every student weakly prefers her school in `mu` to her school in
/// every member of `stable`. Throws NotStable if mu is not a member.
inline bool verify_student_optimal(const Market& m, const Matching& mu, const StableSet& stable) {
  if (!stable.contains(mu)) throw NotStable("matching is not in the stable set");
  for (const auto& other : stable.matchings) {
    for (StudentIndex s = 0; s < m.num_students(); ++s) {
      const auto theirs = other.school_of(s);
      if (theirs && m.student_prefers(s, *theirs, mu.school_of(s))) return false;
    }
  }
  return true;
}

}  // namespace aamatch
