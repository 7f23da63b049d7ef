#pragma once

// Effective competition, the sub-school split used to compare the quota and
// reserve priority structures, and the finite-market equivalence check.

#include <stdexcept>
#include <vector>

#include "aamatch/market.hpp"
#include "aamatch/mechanisms.hpp"

namespace aamatch {

struct SchoolCompetition {
  SchoolIndex school;
  int reserve;
  std::vector<StudentIndex> first_choice_minorities;  // sorted
  bool satisfied;
};

struct EffectiveCompetitionReport {
  std::vector<SchoolCompetition> schools;  // only schools with r^m_c > 0
  bool verdict = true;

  std::vector<SchoolIndex> offending() const {
    std::vector<SchoolIndex> out;
    for (const auto& sc : schools)
      if (!sc.satisfied) out.push_back(sc.school);
    return out;
  }
};

/// A market is effectively competitive when every school with r^m_c > 0 is
/// the first choice of at least r^m_c minorities. A minority the school deems
/// unacceptable cannot take a reserved seat and is not counted; with complete
/// priority lists this is exactly the first-choice count.
inline EffectiveCompetitionReport effectively_competitive(const Market& m) {
  if (m.policy().kind() == PolicyKind::None)
    throw PolicyMismatch("effective competition needs a quota or reserve policy");
  std::vector<std::vector<StudentIndex>> first(m.num_schools());
  for (StudentIndex s = 0; s < m.num_students(); ++s) {
    const auto& p = m.student(s).prefs;
    if (m.is_minority(s) && !p.empty() && m.acceptable_to_school(p.front(), s)) first[p.front()].push_back(s);
  }
  EffectiveCompetitionReport rep;
  for (SchoolIndex c = 0; c < m.num_schools(); ++c) {
    const int r = m.minority_reserve(c);
    if (r <= 0) continue;
    const bool ok = static_cast<int>(first[c].size()) >= r;
    rep.schools.push_back({c, r, std::move(first[c]), ok});
    rep.verdict = rep.verdict && ok;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Sub-school splits

enum class SubSchoolKind : std::uint8_t { Original, Quota, Unaffected, Reserve };

inline const char* to_string(SubSchoolKind k) {
  switch (k) {
    case SubSchoolKind::Original: return "original";
    case SubSchoolKind::Quota: return "quota";
    case SubSchoolKind::Unaffected: return "unaffected";
    case SubSchoolKind::Reserve: return "reserve";
  }
  return "?";
}

struct SubSchool {
  SchoolIndex parent;
  SubSchoolKind kind;
  int capacity;
  std::vector<StudentIndex> priority;  // acceptable students, highest first
};

/// Splits c into an original part (capacity q^M_c, priority unchanged) and a
/// quota part (capacity q_c - q^M_c) that keeps ≻_c on minorities and finds
/// every majority unacceptable.
inline std::pair<SubSchool, SubSchool> split_school_quota(const Market& m, SchoolIndex c, int majority_quota) {
  const auto& school = m.school(c);
  if (majority_quota < 0 || majority_quota > school.capacity)
    throw std::out_of_range("majority quota outside [0, capacity]");
  SubSchool original{c, SubSchoolKind::Original, majority_quota, school.priority};
  SubSchool quota{c, SubSchoolKind::Quota, school.capacity - majority_quota, {}};
  for (auto s : school.priority)
    if (m.is_minority(s)) quota.priority.push_back(s);
  return {std::move(original), std::move(quota)};
}

/// Splits c into an unaffected part (capacity q_c - r^m_c, priority
/// unchanged) and a reserve part (capacity r^m_c) ranking every acceptable
/// minority above every acceptable majority, preserving within-group order.
inline std::pair<SubSchool, SubSchool> split_school_reserve(const Market& m, SchoolIndex c, int minority_reserve) {
  const auto& school = m.school(c);
  if (minority_reserve < 0 || minority_reserve > school.capacity)
    throw std::out_of_range("minority reserve outside [0, capacity]");
  SubSchool unaffected{c, SubSchoolKind::Unaffected, school.capacity - minority_reserve, school.priority};
  SubSchool reserve{c, SubSchoolKind::Reserve, minority_reserve, {}};
  for (auto s : school.priority)
    if (m.is_minority(s)) reserve.priority.push_back(s);
  for (auto s : school.priority)
    if (m.is_majority(s)) reserve.priority.push_back(s);
  return {std::move(unaffected), std::move(reserve)};
}

// ---------------------------------------------------------------------------

struct EquivalenceReport {
  EffectiveCompetitionReport competition;
  MechanismOutput quota;
  MechanismOutput reserve;
  bool matchings_equal = false;
  bool trace_equal = false;

  bool ec_verdict() const noexcept { return competition.verdict; }
  /// An effectively competitive market must produce equal matchings.
  bool proposition_consistent() const noexcept { return !competition.verdict || matchings_equal; }
};

/// Runs SOSM-Q and SOSM-R on the counterpart policies derived from the
/// market's policy (r^m_c = q_c - q^M_c) and compares outcomes and per-round
/// tentative sets.
inline EquivalenceReport check_equivalence(const Market& m) {
  if (m.policy().kind() == PolicyKind::None)
    throw PolicyMismatch("equivalence check needs a quota or reserve policy");
  const auto quota_market = m.with_policy(to_quota(m));
  const auto reserve_market = m.with_policy(to_reserve(m));
  EquivalenceReport rep;
  rep.competition = effectively_competitive(m);
  rep.quota = run_sosm_q(quota_market);
  rep.reserve = run_sosm_r(reserve_market);
  rep.matchings_equal = rep.quota.matching == rep.reserve.matching;
  rep.trace_equal = same_tentative_sets(rep.quota.trace, rep.reserve.trace);
  return rep;
}

}  // namespace aamatch
