// aamatch: run the affirmative-action mechanisms, check effective
// competition, generate random markets, and run the large-market experiments.
//
// Exit codes: 0 success, 1 usage or input error, 2 verification failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aamatch/aamatch.hpp"

namespace {

using namespace aamatch;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerification = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

Market apply_policy_override(const Market& m, const std::string& policy) {
  if (policy.empty() || policy == "file") return m;
  if (policy == "none") return m.with_policy(Policy::none());
  if (policy == "quota") return m.with_policy(to_quota(m));
  if (policy == "reserve") return m.with_policy(to_reserve(m));
  throw UsageError("--policy must be none, quota, reserve or file");
}

std::string human_matching(const Market& m, const Matching& mu) {
  std::ostringstream os;
  for (SchoolIndex c = 0; c < m.num_schools(); ++c) {
    os << m.school(c).id << ": {";
    const auto& at = mu.students_at(c);
    for (std::size_t i = 0; i < at.size(); ++i) os << (i ? ", " : "") << m.student(at[i]).id;
    os << "}\n";
  }
  for (StudentIndex s = 0; s < m.num_students(); ++s)
    if (!mu.school_of(s)) os << m.student(s).id << ": unmatched\n";
  return os.str();
}

json competition_json(const Market& m, const EffectiveCompetitionReport& rep) {
  json schools = json::array();
  json offending = json::array();
  for (const auto& sc : rep.schools) {
    json firsts = json::array();
    for (auto s : sc.first_choice_minorities) firsts.push_back(m.student(s).id);
    schools.push_back({{"school", m.school(sc.school).id},
                       {"reserve", sc.reserve},
                       {"first_choice_minorities", std::move(firsts)},
                       {"satisfied", sc.satisfied}});
    if (!sc.satisfied) offending.push_back(m.school(sc.school).id);
  }
  return {{"effectively_competitive", rep.verdict}, {"schools", std::move(schools)}, {"offending", std::move(offending)}};
}

std::vector<std::uint32_t> parse_sizes(const std::string& list) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      const auto v = std::stoul(item);
      if (v == 0) throw UsageError("market sizes must be positive");
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::logic_error&) {
      throw UsageError("bad market size '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--n needs at least one size");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affirmative-action school choice: SOSM with majority quotas and minority reserves"};
  app.require_subcommand(1);

  // match
  std::string market_path, policy, out_path, trace_path, format = "json";
  auto* match = app.add_subcommand("match", "Run deferred acceptance on a market file");
  match->add_option("--market", market_path, "Market JSON file")->required();
  match->add_option("--policy", policy, "none | quota | reserve | file (default: the file's policy)");
  match->add_option("--out", out_path, "Matching output path (default stdout)");
  match->add_option("--trace", trace_path, "Write the per-round trace as JSON");
  match->add_option("--format", format, "json | human")->check(CLI::IsMember({"json", "human"}));

  // check-ec
  auto* check_ec = app.add_subcommand("check-ec", "Test a market for effective competition");
  check_ec->add_option("--market", market_path, "Market JSON file")->required();
  check_ec->add_option("--format", format, "json | human")->check(CLI::IsMember({"json", "human"}));

  // equivalence
  auto* equivalence = app.add_subcommand("equivalence", "Compare SOSM-Q and SOSM-R on counterpart policies");
  equivalence->add_option("--market", market_path, "Market JSON file")->required();

  // generate
  std::string params_path;
  std::uint64_t seed = 0;
  auto* generate = app.add_subcommand("generate", "Draw a random market");
  generate->add_option("--params", params_path, "Random market params JSON")->required();
  generate->add_option("--seed", seed, "Seed (overrides the params file)");
  generate->add_option("--out", out_path, "Market output path (default stdout)");

  // simulate
  std::string sizes = "50,100,200,500,1000";
  std::uint64_t trials = 1000;
  unsigned jobs = 1;
  RegularityConstants constants;
  constants.r = 2.0;
  double majority_share = 0.5;
  std::string sim_format = "csv";
  auto* simulate = app.add_subcommand("simulate", "Estimate P(SOSM-Q = SOSM-R) across market sizes");
  simulate->add_option("--params", params_path, "JSON with constants a, lambda, kappa, theta, r, k, q_bar");
  simulate->add_option("--n", sizes, "Comma-separated market sizes");
  simulate->add_option("--trials", trials, "Trials per size")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Seed")->required();
  simulate->add_option("--a", constants.a, "Reserve growth exponent, in [0, 0.5)");
  simulate->add_option("--theta", constants.theta, "Reserve growth scale");
  simulate->add_option("--lambda", constants.lambda, "Students per school");
  simulate->add_option("--kappa", constants.kappa, "Excess capacity per school");
  simulate->add_option("--r", constants.r, "Popularity ratio bound");
  simulate->add_option("--k", constants.k, "Preference length");
  simulate->add_option("--qbar", constants.q_bar, "Seats per school");
  simulate->add_option("--majority-share", majority_share, "Fraction of majority students");
  simulate->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", out_path, "Output path (default stdout)");
  simulate->add_option("--format", sim_format, "csv | json | human")->check(CLI::IsMember({"csv", "json", "human"}));

  // chains
  std::uint32_t chain_n = 1000, chain_k = 5;
  double chain_lambda = 0.5;
  auto* chains = app.add_subcommand("chains", "Rejection-chain lengths as reserved seats are added");
  chains->add_option("--n", chain_n, "Number of schools")->check(CLI::PositiveNumber);
  chains->add_option("--lambda", chain_lambda, "Students per school, in (0, 1)");
  chains->add_option("--k", chain_k, "Preference length");
  chains->add_option("--a", constants.a, "Reserve growth exponent");
  chains->add_option("--theta", constants.theta, "Reserve growth scale");
  chains->add_option("--trials", trials, "Independent markets")->check(CLI::PositiveNumber);
  chains->add_option("--seed", seed, "Seed")->required();
  chains->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  // oracle
  std::uint64_t cap = kDefaultEnumerationCap;
  auto* oracle = app.add_subcommand("oracle", "Certify the mechanism output against brute-force enumeration");
  oracle->add_option("--market", market_path, "Market JSON file")->required();
  oracle->add_option("--policy", policy, "none | quota | reserve | file");
  oracle->add_option("--cap", cap, "Maximum assignment vectors to enumerate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (match->parsed()) {
      const auto market = apply_policy_override(parse_market(read_file(market_path)), policy);
      const auto out = run_mechanism(market);
      write_output(out_path, format == "human" ? human_matching(market, out.matching)
                                               : serialize_matching(market, out.matching));
      if (!trace_path.empty()) write_output(trace_path, trace_to_json(market, out.trace).dump(2) + "\n");
      return kExitOk;
    }
    if (check_ec->parsed()) {
      auto market = parse_market(read_file(market_path));
      if (market.policy().kind() == PolicyKind::None) market = market.with_policy(to_reserve(market));
      const auto rep = effectively_competitive(market);
      if (format == "human") {
        std::cout << "effectively competitive: " << (rep.verdict ? "true" : "false") << '\n';
        for (auto c : rep.offending()) std::cout << "offending school: " << market.school(c).id << '\n';
      } else {
        std::cout << competition_json(market, rep).dump(2) << '\n';
      }
      return kExitOk;
    }
    if (equivalence->parsed()) {
      auto market = parse_market(read_file(market_path));
      if (market.policy().kind() == PolicyKind::None) market = market.with_policy(to_reserve(market));
      const auto rep = check_equivalence(market);
      json doc = {{"ec_verdict", rep.ec_verdict()},
                  {"matchings_equal", rep.matchings_equal},
                  {"trace_equal", rep.trace_equal},
                  {"proposition1_consistent", rep.proposition_consistent()},
                  {"competition", competition_json(market, rep.competition)},
                  {"quota_matching", matching_to_json(market, rep.quota.matching)["assignment"]},
                  {"reserve_matching", matching_to_json(market, rep.reserve.matching)["assignment"]}};
      std::cout << doc.dump(2) << '\n';
      return rep.proposition_consistent() ? kExitOk : kExitVerification;
    }
    if (generate->parsed()) {
      auto params = params_from_json(json::parse(read_file(params_path)));
      if (generate->count("--seed")) params.seed = seed;
      write_output(out_path, serialize_market(generate_random_market(params)));
      return kExitOk;
    }
    if (simulate->parsed()) {
      if (!params_path.empty()) constants = constants_from_json(json::parse(read_file(params_path)), constants);
      if (auto p = constants.problem(); !p.empty()) throw UsageError(p + " (regularity condition violated)");
      ConvergenceConfig config{constants, majority_share};
      const auto ns = parse_sizes(sizes);
      const auto rows = convergence_report(ns, config, trials, seed, jobs);
      std::ostringstream os;
      if (sim_format == "json") {
        json arr = json::array();
        for (const auto& r : rows)
          arr.push_back({{"n", r.n}, {"trials", r.trials}, {"equal", r.equal}, {"p_hat", r.p_hat},
                         {"ci_lo", r.ci.lo}, {"ci_hi", r.ci.hi}, {"bound", r.bound},
                         {"max_eta_c", r.max_eta_c}, {"mean_rounds", r.mean_rounds}, {"seconds", r.seconds}});
        os << arr.dump(2) << '\n';
      } else if (sim_format == "human") {
        for (const auto& r : rows)
          os << "n=" << r.n << "  p_hat=" << r.p_hat << "  95% CI [" << r.ci.lo << ", " << r.ci.hi
             << "]  bound=" << r.bound << '\n';
      } else {
        write_convergence_csv(os, rows);
      }
      write_output(out_path, os.str());
      return kExitOk;
    }
    if (chains->parsed()) {
      if (!(chain_lambda > 0.0 && chain_lambda < 1.0)) throw UsageError("--lambda must lie in (0, 1)");
      const auto params = chain_preset(chain_n, chain_lambda, chain_k, constants);
      const auto ex = chain_exceedance(params, trials, seed, jobs);
      std::cout << "n=" << chain_n << " seats=" << params.reserved_seats << " trials=" << ex.trials
                << " bound=" << ex.bound << " exceeded=" << ex.exceeded << " fraction=" << ex.fraction()
                << " max_length=" << ex.max_length << " mean_max_length=" << ex.mean_max_length << '\n';
      return kExitOk;
    }
    if (oracle->parsed()) {
      const auto market = apply_policy_override(parse_market(read_file(market_path)), policy);
      const auto out = run_mechanism(market);
      const auto stable = enumerate_stable(market, cap);
      const bool member = stable.contains(out.matching);
      const bool optimal = member && verify_student_optimal(market, out.matching, stable);
      std::cout << "stable matchings: " << stable.matchings.size() << " (examined " << stable.examined << ")\n"
                << "mechanism output stable and student-optimal: " << (optimal ? "true" : "false") << '\n';
      return optimal ? kExitOk : kExitVerification;
    }
  } catch (const MarketError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SearchSpaceTooLarge& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitVerification;
  }
  return kExitUsage;
}
