#pragma once

// JSON market and matching files.
//
// Market file:
//   {"students": [{"id": "s1", "type": "majority", "prefs": ["c1", "c2"]}, ...],
//    "schools":  [{"id": "c1", "capacity": 2, "priority": ["s1", "s2"]}, ...],
//    "policy":   {"kind": "majority_quota", "values": {"c1": 1, "c2": 0}}}
// "policy" may be omitted (kind none). Schools missing from "values" default
// to a non-binding value (q^M_c = q_c, r^m_c = 0).
//
// Matching file:
//   {"assignment": {"s1": "c1", "s3": null, ...}}

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "aamatch/market.hpp"

namespace aamatch {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw MarketError(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw MarketError(where, std::string("missing required field '") + key + "'");
  return *it;
}

inline std::string require_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw MarketError(where, "expected a string");
  return v.get<std::string>();
}

inline int require_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw MarketError(where, "expected an integer");
  const auto x = v.get<long long>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw MarketError(where, "integer out of range");
  return static_cast<int>(x);
}

inline const json& require_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw MarketError(where, "expected an array");
  return v;
}

}  // namespace detail

inline Market market_from_json(const json& doc) {
  using namespace detail;
  const auto& js = require_array(require(doc, "students", ""), "students");
  const auto& jc = require_array(require(doc, "schools", ""), "schools");
  if (js.empty()) throw MarketError("students", "empty student set");

  std::vector<Student> students(js.size());
  std::vector<School> schools(jc.size());
  std::unordered_map<std::string, std::uint32_t> sid, cid;

  for (std::size_t i = 0; i < js.size(); ++i) {
    const std::string base = "students[" + std::to_string(i) + "]";
    students[i].id = require_string(require(js[i], "id", base), base + ".id");
    const auto type = require_string(require(js[i], "type", base), base + ".type");
    if (type == "majority") students[i].type = StudentType::Majority;
    else if (type == "minority") students[i].type = StudentType::Minority;
    else throw MarketError(base + ".type", "expected \"majority\" or \"minority\"");
    if (!sid.emplace(students[i].id, static_cast<std::uint32_t>(i)).second)
      throw MarketError(base + ".id", "duplicate id '" + students[i].id + "'");
  }
  for (std::size_t i = 0; i < jc.size(); ++i) {
    const std::string base = "schools[" + std::to_string(i) + "]";
    schools[i].id = require_string(require(jc[i], "id", base), base + ".id");
    schools[i].capacity = require_int(require(jc[i], "capacity", base), base + ".capacity");
    if (!cid.emplace(schools[i].id, static_cast<std::uint32_t>(i)).second)
      throw MarketError(base + ".id", "duplicate id '" + schools[i].id + "'");
  }
  for (std::size_t i = 0; i < js.size(); ++i) {
    const std::string base = "students[" + std::to_string(i) + "].prefs";
    const auto& p = require_array(require(js[i], "prefs", "students[" + std::to_string(i) + "]"), base);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const std::string where = base + "[" + std::to_string(j) + "]";
      const auto id = require_string(p[j], where);
      auto it = cid.find(id);
      if (it == cid.end()) throw MarketError(where, "unknown school '" + id + "'");
      students[i].prefs.push_back(it->second);
    }
  }
  for (std::size_t i = 0; i < jc.size(); ++i) {
    const std::string base = "schools[" + std::to_string(i) + "].priority";
    const auto& p = require_array(require(jc[i], "priority", "schools[" + std::to_string(i) + "]"), base);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const std::string where = base + "[" + std::to_string(j) + "]";
      const auto id = require_string(p[j], where);
      auto it = sid.find(id);
      if (it == sid.end()) throw MarketError(where, "unknown student '" + id + "'");
      schools[i].priority.push_back(it->second);
    }
  }

  Policy policy;
  if (auto it = doc.find("policy"); it != doc.end()) {
    const auto kind = require_string(require(*it, "kind", "policy"), "policy.kind");
    if (kind == "none") {
      policy = Policy::none();
    } else if (kind == "majority_quota" || kind == "minority_reserve") {
      const bool quota = kind == "majority_quota";
      std::vector<int> values(schools.size());
      for (std::size_t c = 0; c < schools.size(); ++c) values[c] = quota ? schools[c].capacity : 0;
      if (auto vit = it->find("values"); vit != it->end()) {
        if (!vit->is_object()) throw MarketError("policy.values", "expected an object");
        for (const auto& [key, val] : vit->items()) {
          const std::string where = "policy.values." + key;
          auto c = cid.find(key);
          if (c == cid.end()) throw MarketError(where, "unknown school '" + key + "'");
          values[c->second] = require_int(val, where);
        }
      }
      policy = quota ? Policy::majority_quota(std::move(values)) : Policy::minority_reserve(std::move(values));
    } else {
      throw MarketError("policy.kind", "expected \"none\", \"majority_quota\" or \"minority_reserve\"");
    }
  }
  return Market::create(std::move(students), std::move(schools), std::move(policy));
}

/// Parses a market file. JSON syntax errors are reported as MarketError too.
inline Market parse_market(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MarketError("", std::string("malformed JSON: ") + e.what());
  }
  return market_from_json(doc);
}

inline json market_to_json(const Market& m) {
  json students = json::array();
  for (const auto& s : m.students()) {
    json prefs = json::array();
    for (auto c : s.prefs) prefs.push_back(m.school(c).id);
    students.push_back({{"id", s.id}, {"type", to_string(s.type)}, {"prefs", std::move(prefs)}});
  }
  json schools = json::array();
  for (const auto& c : m.schools()) {
    json priority = json::array();
    for (auto s : c.priority) priority.push_back(m.student(s).id);
    schools.push_back({{"id", c.id}, {"capacity", c.capacity}, {"priority", std::move(priority)}});
  }
  json policy = {{"kind", to_string(m.policy().kind())}};
  if (m.policy().kind() != PolicyKind::None) {
    json values = json::object();
    for (SchoolIndex c = 0; c < m.num_schools(); ++c) values[m.school(c).id] = m.policy().value(c);
    policy["values"] = std::move(values);
  }
  return {{"students", std::move(students)}, {"schools", std::move(schools)}, {"policy", std::move(policy)}};
}

inline std::string serialize_market(const Market& m) { return market_to_json(m).dump(2) + "\n"; }

inline json matching_to_json(const Market& m, const Matching& mu) {
  json assignment = json::object();
  for (StudentIndex s = 0; s < m.num_students(); ++s) {
    const auto c = mu.student_assignment[s];
    assignment[m.student(s).id] = c ? json(m.school(*c).id) : json(nullptr);
  }
  return {{"assignment", std::move(assignment)}};
}

/// Canonical matching file text: keys sorted by student id, two-space indent,
/// trailing newline.
inline std::string serialize_matching(const Market& m, const Matching& mu) {
  return matching_to_json(m, mu).dump(2) + "\n";
}

/// Students absent from "assignment" are unmatched.
inline Matching parse_matching(const Market& m, std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MarketError("", std::string("malformed JSON: ") + e.what());
  }
  const auto& a = detail::require(doc, "assignment", "");
  if (!a.is_object()) throw MarketError("assignment", "expected an object");
  std::vector<std::optional<SchoolIndex>> assignment(m.num_students());
  for (const auto& [key, val] : a.items()) {
    const std::string where = "assignment." + key;
    auto s = m.find_student(key);
    if (!s) throw MarketError(where, "unknown student '" + key + "'");
    if (val.is_null()) continue;
    auto c = m.find_school(detail::require_string(val, where));
    if (!c) throw MarketError(where, "unknown school '" + val.get<std::string>() + "'");
    assignment[*s] = *c;
  }
  return Matching::from_assignment(std::move(assignment), m.num_schools());
}

inline json trace_to_json(const Market& m, const RoundTrace& trace) {
  json rounds = json::array();
  for (const auto& r : trace) {
    json apps = json::array();
    for (auto [s, c] : r.applications) apps.push_back({m.student(s).id, m.school(c).id});
    json held = json::object(), rejected = json::object();
    for (SchoolIndex c = 0; c < m.num_schools(); ++c) {
      json h = json::array(), x = json::array();
      for (auto s : r.held[c]) h.push_back(m.student(s).id);
      for (auto s : r.rejected[c]) x.push_back(m.student(s).id);
      held[m.school(c).id] = std::move(h);
      if (!x.empty()) rejected[m.school(c).id] = std::move(x);
    }
    rounds.push_back({{"round", r.round}, {"applications", std::move(apps)},
                      {"held", std::move(held)}, {"rejected", std::move(rejected)}});
  }
  return rounds;
}

}  // namespace aamatch
