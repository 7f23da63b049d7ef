#pragma once

// School-choice market model: students with strict preferences, schools with
// capacities and strict priorities, and one affirmative-action policy.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace aamatch {

using StudentIndex = std::uint32_t;
using SchoolIndex = std::uint32_t;

enum class StudentType : std::uint8_t { Majority, Minority };

inline const char* to_string(StudentType t) {
  return t == StudentType::Majority ? "majority" : "minority";
}

struct Student {
  std::string id;
  StudentType type = StudentType::Majority;
  std::vector<SchoolIndex> prefs;  // most preferred first; unlisted = unacceptable
};

struct School {
  std::string id;
  int capacity = 1;
  std::vector<StudentIndex> priority;  // highest first; unlisted = unacceptable
};

enum class PolicyKind : std::uint8_t { None, MajorityQuota, MinorityReserve };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::None: return "none";
    case PolicyKind::MajorityQuota: return "majority_quota";
    case PolicyKind::MinorityReserve: return "minority_reserve";
  }
  return "?";
}

/// Error raised for malformed or inconsistent market data. `where` is a
/// JSON-pointer-like location ("students[2].prefs[0]") when one is known.
class MarketError : public std::runtime_error {
 public:
  MarketError(std::string where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what),
        where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Affirmative-action policy. Values are indexed by school and hold q^M_c for
/// a majority quota or r^m_c for a minority reserve; empty for None.
class Policy {
 public:
  Policy() = default;

  static Policy none() { return Policy{}; }
  static Policy majority_quota(std::vector<int> quotas) {
    return Policy(PolicyKind::MajorityQuota, std::move(quotas));
  }
  static Policy minority_reserve(std::vector<int> reserves) {
    return Policy(PolicyKind::MinorityReserve, std::move(reserves));
  }

  PolicyKind kind() const noexcept { return kind_; }
  std::span<const int> values() const noexcept { return values_; }
  int value(SchoolIndex c) const { return values_.at(c); }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  Policy(PolicyKind kind, std::vector<int> values)
      : kind_(kind), values_(std::move(values)) {}

  PolicyKind kind_ = PolicyKind::None;
  std::vector<int> values_;
};

/// Immutable market. Students and schools are stored sorted by id, so index
/// order is the lexicographic id order used for all deterministic iteration.
class Market {
 public:
  static constexpr std::uint32_t kUnacceptable = std::numeric_limits<std::uint32_t>::max();

  Market() = default;

  /// Validates and indexes. Input vectors may be in any order; references
  /// inside prefs/priority are positions in the given vectors and are
  /// remapped to sorted order.
  static Market create(std::vector<Student> students, std::vector<School> schools,
                       Policy policy = Policy::none());

  std::size_t num_students() const noexcept { return students_.size(); }
  std::size_t num_schools() const noexcept { return schools_.size(); }

  const std::vector<Student>& students() const noexcept { return students_; }
  const std::vector<School>& schools() const noexcept { return schools_; }
  const Student& student(StudentIndex s) const { return students_[s]; }
  const School& school(SchoolIndex c) const { return schools_[c]; }
  const Policy& policy() const noexcept { return policy_; }

  bool is_minority(StudentIndex s) const { return students_[s].type == StudentType::Minority; }
  bool is_majority(StudentIndex s) const { return students_[s].type == StudentType::Majority; }

  std::optional<StudentIndex> find_student(const std::string& id) const {
    auto it = student_index_.find(id);
    if (it == student_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<SchoolIndex> find_school(const std::string& id) const {
    auto it = school_index_.find(id);
    if (it == school_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Position of s in c's priority list, kUnacceptable if absent.
  std::uint32_t priority_rank(SchoolIndex c, StudentIndex s) const {
    return priority_rank_[static_cast<std::size_t>(c) * students_.size() + s];
  }
  bool acceptable_to_school(SchoolIndex c, StudentIndex s) const {
    return priority_rank(c, s) != kUnacceptable;
  }
  /// s ≻_c t. An unacceptable student never has higher priority than anyone.
  bool school_prefers(SchoolIndex c, StudentIndex s, StudentIndex t) const {
    return priority_rank(c, s) < priority_rank(c, t);
  }

  /// Position of c in s's preference list, kUnacceptable if absent.
  std::uint32_t preference_rank(StudentIndex s, SchoolIndex c) const {
    const auto& p = students_[s].prefs;
    auto it = std::find(p.begin(), p.end(), c);
    return it == p.end() ? kUnacceptable : static_cast<std::uint32_t>(it - p.begin());
  }
  /// c P_s d, where nullopt stands for being unmatched.
  bool student_prefers(StudentIndex s, SchoolIndex c, std::optional<SchoolIndex> d) const {
    const auto rc = preference_rank(s, c);
    if (rc == kUnacceptable) return false;
    return !d || rc < preference_rank(s, *d);
  }

  /// q^M_c under the current policy (capacity when no quota binds).
  int majority_quota(SchoolIndex c) const;
  /// r^m_c under the current policy (0 when no reserve).
  int minority_reserve(SchoolIndex c) const;

  /// Same students and schools under another policy; the policy is validated.
  Market with_policy(Policy policy) const;

  std::size_t max_preference_length() const {
    std::size_t k = 0;
    for (const auto& s : students_) k = std::max(k, s.prefs.size());
    return k;
  }

  friend bool operator==(const Market& a, const Market& b) {
    if (a.policy_ != b.policy_ || a.students_.size() != b.students_.size() ||
        a.schools_.size() != b.schools_.size())
      return false;
    for (std::size_t i = 0; i < a.students_.size(); ++i) {
      const auto &x = a.students_[i], &y = b.students_[i];
      if (x.id != y.id || x.type != y.type || x.prefs != y.prefs) return false;
    }
    for (std::size_t i = 0; i < a.schools_.size(); ++i) {
      const auto &x = a.schools_[i], &y = b.schools_[i];
      if (x.id != y.id || x.capacity != y.capacity || x.priority != y.priority) return false;
    }
    return true;
  }

 private:
  void validate_policy(const Policy& p) const;
  void build_indexes();

  std::vector<Student> students_;
  std::vector<School> schools_;
  Policy policy_;
  std::unordered_map<std::string, StudentIndex> student_index_;
  std::unordered_map<std::string, SchoolIndex> school_index_;
  std::vector<std::uint32_t> priority_rank_;  // schools x students
};

// ---------------------------------------------------------------------------
// Policy conversion. Counterpart policies satisfy r^m_c + q^M_c = q_c.

inline std::vector<int> quota_vector(const Market& m) {
  std::vector<int> out(m.num_schools());
  for (SchoolIndex c = 0; c < m.num_schools(); ++c) out[c] = m.majority_quota(c);
  return out;
}

inline std::vector<int> reserve_vector(const Market& m) {
  std::vector<int> out(m.num_schools());
  for (SchoolIndex c = 0; c < m.num_schools(); ++c) out[c] = m.minority_reserve(c);
  return out;
}

inline Policy to_quota(const Market& m) { return Policy::majority_quota(quota_vector(m)); }
inline Policy to_reserve(const Market& m) { return Policy::minority_reserve(reserve_vector(m)); }

inline int Market::majority_quota(SchoolIndex c) const {
  switch (policy_.kind()) {
    case PolicyKind::None: return schools_[c].capacity;
    case PolicyKind::MajorityQuota: return policy_.value(c);
    case PolicyKind::MinorityReserve: return schools_[c].capacity - policy_.value(c);
  }
  return schools_[c].capacity;
}

inline int Market::minority_reserve(SchoolIndex c) const {
  switch (policy_.kind()) {
    case PolicyKind::None: return 0;
    case PolicyKind::MajorityQuota: return schools_[c].capacity - policy_.value(c);
    case PolicyKind::MinorityReserve: return policy_.value(c);
  }
  return 0;
}

inline void Market::validate_policy(const Policy& p) const {
  if (p.kind() == PolicyKind::None) {
    if (!p.values().empty()) throw MarketError("policy", "policy 'none' takes no values");
    return;
  }
  if (p.values().size() != schools_.size())
    throw MarketError("policy.values", "expected one value per school");
  const bool quota = p.kind() == PolicyKind::MajorityQuota;
  for (SchoolIndex c = 0; c < schools_.size(); ++c) {
    const int v = p.value(c);
    const std::string where = "policy.values." + schools_[c].id;
    if (v < 0) throw MarketError(where, quota ? "negative quota" : "negative reserve");
    if (v > schools_[c].capacity)
      throw MarketError(where, quota ? "quota exceeds capacity" : "reserve exceeds capacity");
  }
}

inline Market Market::with_policy(Policy policy) const {
  validate_policy(policy);
  Market out = *this;
  out.policy_ = std::move(policy);
  return out;
}

inline void Market::build_indexes() {
  student_index_.clear();
  school_index_.clear();
  for (StudentIndex s = 0; s < students_.size(); ++s) student_index_.emplace(students_[s].id, s);
  for (SchoolIndex c = 0; c < schools_.size(); ++c) school_index_.emplace(schools_[c].id, c);
  priority_rank_.assign(schools_.size() * students_.size(), kUnacceptable);
  for (SchoolIndex c = 0; c < schools_.size(); ++c) {
    const auto& pr = schools_[c].priority;
    for (std::uint32_t i = 0; i < pr.size(); ++i)
      priority_rank_[static_cast<std::size_t>(c) * students_.size() + pr[i]] = i;
  }
}

inline Market Market::create(std::vector<Student> students, std::vector<School> schools,
                             Policy policy) {
  if (students.empty()) throw MarketError("students", "empty student set");
  if (schools.empty()) throw MarketError("schools", "empty school set");

  const auto check_unique_ids = [](const auto& items, const char* what) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].id.empty())
        throw MarketError(std::string(what) + "[" + std::to_string(i) + "].id", "empty id");
      if (!seen.emplace(items[i].id, i).second)
        throw MarketError(std::string(what) + "[" + std::to_string(i) + "].id",
                          "duplicate id '" + items[i].id + "'");
    }
  };
  check_unique_ids(students, "students");
  check_unique_ids(schools, "schools");

  for (std::size_t i = 0; i < students.size(); ++i) {
    std::vector<bool> seen(schools.size(), false);
    const auto& p = students[i].prefs;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const std::string where = "students[" + std::to_string(i) + "].prefs[" + std::to_string(j) + "]";
      if (p[j] >= schools.size()) throw MarketError(where, "unknown school");
      if (seen[p[j]]) throw MarketError(where, "duplicate school '" + schools[p[j]].id + "'");
      seen[p[j]] = true;
    }
  }
  for (std::size_t i = 0; i < schools.size(); ++i) {
    const std::string base = "schools[" + std::to_string(i) + "]";
    if (schools[i].capacity < 1) throw MarketError(base + ".capacity", "capacity must be >= 1");
    std::vector<bool> seen(students.size(), false);
    const auto& p = schools[i].priority;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const std::string where = base + ".priority[" + std::to_string(j) + "]";
      if (p[j] >= students.size()) throw MarketError(where, "unknown student");
      if (seen[p[j]]) throw MarketError(where, "duplicate student '" + students[p[j]].id + "'");
      seen[p[j]] = true;
    }
  }

  // Sort by id and remap cross references.
  const auto sorted_order = [](const auto& items) {
    std::vector<std::uint32_t> order(items.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return items[a].id < items[b].id; });
    return order;
  };
  const auto st_order = sorted_order(students);
  const auto sc_order = sorted_order(schools);
  std::vector<std::uint32_t> st_new(students.size()), sc_new(schools.size());
  for (std::uint32_t i = 0; i < st_order.size(); ++i) st_new[st_order[i]] = i;
  for (std::uint32_t i = 0; i < sc_order.size(); ++i) sc_new[sc_order[i]] = i;

  Market m;
  m.students_.reserve(students.size());
  for (auto i : st_order) {
    Student s = std::move(students[i]);
    for (auto& c : s.prefs) c = sc_new[c];
    m.students_.push_back(std::move(s));
  }
  m.schools_.reserve(schools.size());
  for (auto i : sc_order) {
    School c = std::move(schools[i]);
    for (auto& s : c.priority) s = st_new[s];
    m.schools_.push_back(std::move(c));
  }
  if (policy.kind() != PolicyKind::None && policy.values().size() == sc_order.size()) {
    std::vector<int> remapped(sc_order.size());
    for (std::uint32_t i = 0; i < sc_order.size(); ++i) remapped[i] = policy.values()[sc_order[i]];
    policy = policy.kind() == PolicyKind::MajorityQuota ? Policy::majority_quota(std::move(remapped))
                                                        : Policy::minority_reserve(std::move(remapped));
  }
  m.validate_policy(policy);
  m.policy_ = std::move(policy);
  m.build_indexes();
  return m;
}

// ---------------------------------------------------------------------------
// Matchings

/// A matching stored from both sides. `school_assignment[c]` is kept sorted by
/// student index.
struct Matching {
  std::vector<std::optional<SchoolIndex>> student_assignment;
  std::vector<std::vector<StudentIndex>> school_assignment;

  static Matching empty(std::size_t num_students, std::size_t num_schools) {
    Matching m;
    m.student_assignment.assign(num_students, std::nullopt);
    m.school_assignment.assign(num_schools, {});
    return m;
  }

  /// Builds the school side from the student side. Out-of-range school
  /// indices are dropped from the school side (validate_matching reports them).
  static Matching from_assignment(std::vector<std::optional<SchoolIndex>> assignment,
                                  std::size_t num_schools) {
    Matching m;
    m.school_assignment.assign(num_schools, {});
    for (StudentIndex s = 0; s < assignment.size(); ++s)
      if (assignment[s] && *assignment[s] < num_schools) m.school_assignment[*assignment[s]].push_back(s);
    m.student_assignment = std::move(assignment);
    return m;
  }

  /// Builds the student side from per-school holds.
  static Matching from_holds(std::vector<std::vector<StudentIndex>> holds, std::size_t num_students) {
    Matching m;
    m.student_assignment.assign(num_students, std::nullopt);
    for (SchoolIndex c = 0; c < holds.size(); ++c) {
      std::sort(holds[c].begin(), holds[c].end());
      for (auto s : holds[c]) m.student_assignment[s] = c;
    }
    m.school_assignment = std::move(holds);
    return m;
  }

  std::optional<SchoolIndex> school_of(StudentIndex s) const { return student_assignment[s]; }
  const std::vector<StudentIndex>& students_at(SchoolIndex c) const { return school_assignment[c]; }

  friend bool operator==(const Matching&, const Matching&) = default;
};

enum class Violation : std::uint8_t {
  UnknownSchool,   // student assigned to a school index outside the market
  Inconsistent,    // μ(s) = c does not agree with s ∈ μ(c)
  OverCapacity,    // |μ(c)| > q_c
  OverMajorityQuota,  // |μ(c) ∩ S^M| > q^M_c
};

inline const char* to_string(Violation v) {
  switch (v) {
    case Violation::UnknownSchool: return "unknown_school";
    case Violation::Inconsistent: return "inconsistent";
    case Violation::OverCapacity: return "over_capacity";
    case Violation::OverMajorityQuota: return "over_majority_quota";
  }
  return "?";
}

struct FeasibilityIssue {
  Violation kind;
  std::optional<StudentIndex> student;
  std::optional<SchoolIndex> school;
  std::string message;
};

struct FeasibilityReport {
  std::vector<FeasibilityIssue> issues;
  bool feasible() const noexcept { return issues.empty(); }
};

/// Checks consistency, capacity, and (under a majority quota) the majority
/// cap. The quota cap is only a feasibility condition when the market's
/// policy is MajorityQuota.
inline FeasibilityReport validate_matching(const Market& market, const Matching& mu) {
  FeasibilityReport rep;
  const auto S = market.num_students();
  const auto C = market.num_schools();
  auto add = [&](Violation v, std::optional<StudentIndex> s, std::optional<SchoolIndex> c, std::string msg) {
    rep.issues.push_back({v, s, c, std::move(msg)});
  };
  if (mu.student_assignment.size() != S || mu.school_assignment.size() != C) {
    add(Violation::Inconsistent, std::nullopt, std::nullopt, "matching dimensions do not match market");
    return rep;
  }
  for (StudentIndex s = 0; s < S; ++s) {
    const auto c = mu.student_assignment[s];
    if (!c) continue;
    if (*c >= C) {
      add(Violation::UnknownSchool, s, std::nullopt, market.student(s).id + " assigned to unknown school");
      continue;
    }
    const auto& at = mu.school_assignment[*c];
    if (std::find(at.begin(), at.end(), s) == at.end())
      add(Violation::Inconsistent, s, *c,
          market.student(s).id + " assigned to " + market.school(*c).id + " but not in its set");
  }
  for (SchoolIndex c = 0; c < C; ++c) {
    const auto& at = mu.school_assignment[c];
    std::vector<StudentIndex> sorted = at;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      add(Violation::Inconsistent, std::nullopt, c, market.school(c).id + " lists a student twice");
    int majorities = 0;
    for (auto s : at) {
      if (s >= S) {
        add(Violation::Inconsistent, std::nullopt, c, market.school(c).id + " holds an unknown student");
        continue;
      }
      if (mu.student_assignment[s] != c)
        add(Violation::Inconsistent, s, c,
            market.student(s).id + " in " + market.school(c).id + "'s set but assigned elsewhere");
      if (market.is_majority(s)) ++majorities;
    }
    if (static_cast<int>(at.size()) > market.school(c).capacity)
      add(Violation::OverCapacity, std::nullopt, c,
          market.school(c).id + " holds " + std::to_string(at.size()) + " > capacity " +
              std::to_string(market.school(c).capacity));
    if (market.policy().kind() == PolicyKind::MajorityQuota && majorities > market.majority_quota(c))
      add(Violation::OverMajorityQuota, std::nullopt, c,
          market.school(c).id + " holds " + std::to_string(majorities) + " majorities > quota " +
              std::to_string(market.majority_quota(c)));
  }
  return rep;
}

/// Every matched student lists her school and is acceptable to it.
inline bool individually_rational(const Market& market, const Matching& mu) {
  for (StudentIndex s = 0; s < market.num_students(); ++s) {
    const auto c = mu.student_assignment[s];
    if (!c) continue;
    if (market.preference_rank(s, *c) == Market::kUnacceptable) return false;
    if (!market.acceptable_to_school(*c, s)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Round traces

struct RoundRecord {
  int round = 0;
  std::vector<std::pair<StudentIndex, SchoolIndex>> applications;
  std::vector<std::vector<StudentIndex>> held;      // per school, sorted
  std::vector<std::vector<StudentIndex>> rejected;  // per school, sorted

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

using RoundTrace = std::vector<RoundRecord>;

/// Compares only the per-round tentative acceptance sets.
inline bool same_tentative_sets(const RoundTrace& a, const RoundTrace& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].held != b[i].held) return false;
  return true;
}

}  // namespace aamatch
