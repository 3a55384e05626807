#ifndef GRIDPRICE_CLI_HPP
#define GRIDPRICE_CLI_HPP

// Command-line front end. `run` returns the process exit code:
//   0 success, 1 domain error (message prefixed with its error code),
//   2 usage error.

#include "gridprice/experiments.hpp"
#include "gridprice/formulations.hpp"
#include "gridprice/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gridprice::cli {

/// Malformed command-line values; mapped to exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char *kSeedVariable = "GRIDPRICE_SEED";
inline constexpr const char *kDefaultWeights = "1,1,1";
inline constexpr const char *kReferenceWeights = "1,0.05,1";

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    parts.push_back(cur);
  if (!s.empty() && s.back() == sep)
    parts.emplace_back();
  return parts;
}

inline double parse_number(const std::string &text, const std::string &what) {
  const char *begin = text.c_str();
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE || !std::isfinite(v))
    throw UsageError(what + ": '" + text + "' is not a finite number");
  return v;
}

/// "e1,e2,e3" with an optional ":gamma" suffix.
inline Weights parse_weights(const std::string &text) {
  const auto colon = split(text, ':');
  if (colon.empty() || colon.size() > 2)
    throw UsageError("weights must look like e1,e2,e3 or e1,e2,e3:gamma");
  const auto parts = split(colon[0], ',');
  if (parts.size() != 3)
    throw UsageError("weights must have exactly three comma-separated values");
  Weights w;
  w.e1 = parse_number(parts[0], "e1");
  w.e2 = parse_number(parts[1], "e2");
  w.e3 = parse_number(parts[2], "e3");
  if (colon.size() == 2)
    w.gamma = parse_number(colon[1], "gamma");
  if (w.e1 < 0 || w.e2 < 0 || w.e3 < 0 || (w.gamma && *w.gamma < 0))
    throw UsageError("weights must be nonnegative");
  return w;
}

/// A number (a fixed bound), "inf" (no bound) or "free[:cost]".
inline Eta parse_eta(const std::string &text) {
  if (text == "inf" || text == "unbounded")
    return Eta::unbounded();
  if (text == "free")
    return Eta::free(0.0);
  if (text.rfind("free:", 0) == 0) {
    const double cost = parse_number(text.substr(5), "eta cost");
    if (cost < 0)
      throw UsageError("eta cost must be nonnegative");
    return Eta::free(cost);
  }
  const double v = parse_number(text, "eta");
  if (v < 0)
    throw UsageError("eta must be nonnegative");
  return Eta::bounded(v);
}

/// "a,b,c" or "start:stop:step" (inclusive, computed as start + k step).
inline std::vector<double> parse_grid(const std::string &text) {
  std::vector<double> grid;
  const auto range = split(text, ':');
  if (range.size() == 3) {
    const double start = parse_number(range[0], "grid start");
    const double stop = parse_number(range[1], "grid stop");
    const double step = parse_number(range[2], "grid step");
    if (!(step > 0) || stop < start)
      throw UsageError("grid range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    if (n > 100000)
      throw UsageError("grid range has too many points");
    for (long k = 0; k <= n; ++k)
      grid.push_back(start + static_cast<double>(k) * step);
    return grid;
  }
  if (range.size() != 1)
    throw UsageError("grid must be a comma list or start:stop:step");
  for (const auto &part : split(text, ','))
    grid.push_back(parse_number(part, "grid value"));
  if (grid.empty())
    throw UsageError("grid is empty");
  return grid;
}

inline std::uint64_t seed_from_environment() {
  const char *raw = std::getenv(kSeedVariable);
  if (!raw)
    return kReferenceSeed;
  const std::string text(raw);
  char *end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || text[0] == '-' || end != text.c_str() + text.size() || errno == ERANGE)
    throw UsageError(std::string(kSeedVariable) + " must be a nonnegative integer");
  return v;
}

inline std::string eta_kind(const Eta &eta) {
  switch (eta.kind) {
  case Eta::Kind::Bounded: return "bounded";
  case Eta::Kind::Unbounded: return "unbounded";
  case Eta::Kind::Free: return "free";
  }
  return "?";
}

inline nlohmann::json outcome_to_json(const PricingOutcome &o) {
  nlohmann::json j;
  j["formulation"] = std::string(tag(o.formulation));
  j["period"] = o.period + 1;
  j["weights"] = {{"e1", o.weights.e1},
                  {"e2", o.weights.e2},
                  {"e3", o.weights.e3},
                  {"gamma", o.weights.gamma ? nlohmann::json(*o.weights.gamma) : nullptr}};
  j["env"] = {{"p_b", o.env.p_b},
              {"price_cap", o.env.price_cap},
              {"eta", {{"kind", eta_kind(o.env.eta)}, {"value", o.env.eta.value}}}};
  j["prices"] = o.prices;
  j["demands"] = o.demands;
  j["revenue"] = o.revenue;
  j["cost_term"] = o.cost_term;
  j["welfare_penalty"] = o.welfare_penalty;
  j["objective"] = o.objective;
  j["solver_objective"] = o.solver_objective;
  j["penalty_term"] = o.penalty_term;
  j["price_spread"] = o.price_spread;
  j["status"] = qp::to_string(o.status);
  j["iterations"] = o.iterations;
  j["kkt"] = {{"stationarity", o.kkt.stationarity},
              {"primal", o.kkt.primal},
              {"complementarity", o.kkt.complementarity}};
  j["variables"] = o.variables;
  return j;
}

inline PricingOutcome outcome_from_json(const nlohmann::json &j) {
  using namespace scenario::detail;
  check_keys(j, "", {"formulation", "period", "weights", "env", "prices", "demands", "revenue",
                     "cost_term", "welfare_penalty", "objective", "solver_objective",
                     "penalty_term", "price_spread", "status", "iterations", "kkt",
                     "variables"});
  PricingOutcome o;
  if (!j["formulation"].is_string())
    schema_error("formulation", "expected a string");
  o.formulation = parse_formulation(j["formulation"].get<std::string>());
  const std::uint64_t period = count(j["period"], "period");
  if (period == 0)
    schema_error("period", "periods are numbered from 1");
  o.period = period - 1;

  const auto &w = j["weights"];
  check_keys(w, "weights", {"e1", "e2", "e3", "gamma"});
  o.weights.e1 = number(w["e1"], "weights.e1");
  o.weights.e2 = number(w["e2"], "weights.e2");
  o.weights.e3 = number(w["e3"], "weights.e3");
  if (!w["gamma"].is_null())
    o.weights.gamma = number(w["gamma"], "weights.gamma");

  const auto &env = j["env"];
  check_keys(env, "env", {"p_b", "price_cap", "eta"});
  o.env.p_b = number(env["p_b"], "env.p_b");
  o.env.price_cap = number(env["price_cap"], "env.price_cap");
  check_keys(env["eta"], "env.eta", {"kind", "value"});
  const auto &kind = env["eta"]["kind"];
  const double value = number(env["eta"]["value"], "env.eta.value");
  if (kind == "bounded")
    o.env.eta = Eta::bounded(value);
  else if (kind == "unbounded")
    o.env.eta = Eta::unbounded();
  else if (kind == "free")
    o.env.eta = Eta::free(value);
  else
    schema_error("env.eta.kind", "expected bounded, unbounded or free");

  auto vector = [&](const char *name) {
    const auto &v = j[name];
    if (!v.is_array())
      schema_error(name, "expected an array of numbers");
    return numbers(v, name, v.size());
  };
  o.prices = vector("prices");
  o.demands = vector("demands");
  if (o.prices.size() != o.demands.size())
    schema_error("demands", "expected as many entries as prices");
  o.variables = vector("variables");
  o.revenue = number(j["revenue"], "revenue");
  o.cost_term = number(j["cost_term"], "cost_term");
  o.welfare_penalty = number(j["welfare_penalty"], "welfare_penalty");
  o.objective = number(j["objective"], "objective");
  o.solver_objective = number(j["solver_objective"], "solver_objective");
  o.penalty_term = number(j["penalty_term"], "penalty_term");
  o.price_spread = number(j["price_spread"], "price_spread");
  const auto &status = j["status"];
  if (status == "optimal")
    o.status = qp::Status::Optimal;
  else if (status == "infeasible")
    o.status = qp::Status::Infeasible;
  else if (status == "max_iterations")
    o.status = qp::Status::MaxIterations;
  else
    schema_error("status", "unknown solver status");
  o.iterations = static_cast<int>(count(j["iterations"], "iterations"));
  const auto &kkt = j["kkt"];
  check_keys(kkt, "kkt", {"stationarity", "primal", "complementarity"});
  o.kkt.stationarity = number(kkt["stationarity"], "kkt.stationarity");
  o.kkt.primal = number(kkt["primal"], "kkt.primal");
  o.kkt.complementarity = number(kkt["complementarity"], "kkt.complementarity");
  return o;
}

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << text;
  if (!out)
    throw Error(ErrorCode::IoError, "failed writing " + path);
}

inline nlohmann::json read_json(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::SchemaViolation, path + ": malformed JSON: " + e.what());
  }
}

inline std::string format(const char *fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline std::string summary(const PricingOutcome &o, const PeriodData &d) {
  const bool nm = is_net_metering(o.formulation);
  std::ostringstream s;
  s << "formulation " << tag(o.formulation) << "  period " << o.period + 1 << "  status "
    << qp::to_string(o.status) << "  iterations " << o.iterations << '\n';
  s << "objective " << format("%.6f", o.objective) << "  revenue " << format("%.6f", o.revenue)
    << "  cost_term " << format("%.6f", o.cost_term) << "  welfare_penalty "
    << format("%.6f", o.welfare_penalty) << '\n';
  s << "solver_objective " << format("%.6f", o.solver_objective) << "  price_spread "
    << format("%.6f", o.price_spread) << '\n';
  s << (nm ? "user      omega      price        net\n" : "user      omega      price     demand\n");
  for (std::size_t i = 0; i < o.prices.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof line, "%4zu %10.4f %10.4f %10.4f\n", i + 1, d.omega[i],
                  o.prices[i], o.demands[i]);
    s << line;
  }
  return s.str();
}

/// One line per check of a stored outcome against its scenario.
struct CheckReport {
  std::vector<std::string> lines;
  int failures = 0;

  void add(const std::string &name, bool pass, const std::string &detail = {}) {
    lines.push_back(name + (pass ? " PASS" : " FAIL") + (detail.empty() ? "" : " " + detail));
    failures += pass ? 0 : 1;
  }
  void skip(const std::string &name, const std::string &why) {
    lines.push_back(name + " SKIP " + why);
  }
};

inline CheckReport validate_outcome(const Scenario &sc, const PricingOutcome &o, double tol) {
  CheckReport rep;
  if (o.period >= sc.n_periods)
    throw Error(ErrorCode::InvalidArgument, "outcome period is outside the scenario");
  const PeriodData d = scenario::period_data(sc, o.period);
  const std::size_t n = d.size();
  rep.add("shape", o.prices.size() == n && o.demands.size() == n,
          std::to_string(o.prices.size()) + " prices for " + std::to_string(n) + " users");
  if (o.prices.size() != n || o.demands.size() != n)
    return rep;
  const bool nm = is_net_metering(o.formulation);
  auto near = [&](double a, double b) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); };

  double lo = qp::kInf, hi = -qp::kInf;
  for (double p : o.prices) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  rep.add("price_bounds", lo >= -tol && hi <= o.env.price_cap + tol,
          "range [" + format("%.9g", lo) + ", " + format("%.9g", hi) + "]");
  if (o.env.eta.is_bounded())
    rep.add("discrimination_band", hi - lo <= o.env.eta.value + tol,
            "spread " + format("%.9g", hi - lo) + " bound " + format("%.9g", o.env.eta.value));
  else
    rep.skip("discrimination_band", "no fixed bound");

  bool demand_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double P = o.prices[i];
    double expect = o.demands[i];
    switch (o.formulation) {
    case Formulation::F1:
    case Formulation::F2:
    case Formulation::Oracle0:
      expect = consumer::best_response(d.omega[i], P + o.env.p_b, d.alpha[i]);
      break;
    case Formulation::F3:
      demand_ok = demand_ok && o.demands[i] >= -tol &&
                  o.demands[i] <= d.omega[i] / d.alpha[i] + tol;
      break;
    default:
      expect = consumer::prosumer_best_response(d.omega[i], P, d.alpha[i], d.m[i], d.s[i]).Z;
      break;
    }
    demand_ok = demand_ok && near(o.demands[i], expect);
  }
  rep.add("demand_rule", demand_ok);

  const Weights &w = o.weights;
  const EconomicTerms t = nm ? evaluate_net_metering(d, w, o.prices, o.demands)
                             : evaluate_plain(d, w, o.env.p_b, o.prices, o.demands);
  rep.add("objective_terms",
          near(o.revenue, t.revenue) && near(o.cost_term, t.cost_term) &&
              near(o.welfare_penalty, t.welfare_penalty) && near(o.objective, t.objective),
          "objective " + format("%.12g", o.objective) + " recomputed " +
              format("%.12g", t.objective));

  if (o.formulation == Formulation::Oracle0 || o.formulation == Formulation::Oracle4)
    rep.skip("kkt", "grid search has no multipliers");
  else
    rep.add("kkt",
            o.status == qp::Status::Optimal && o.kkt.stationarity <= tol &&
                o.kkt.primal <= tol && o.kkt.complementarity <= tol,
            "stationarity " + format("%.3g", o.kkt.stationarity) + " primal " +
                format("%.3g", o.kkt.primal) + " complementarity " +
                format("%.3g", o.kkt.complementarity));

  if (o.formulation == Formulation::F1 || o.formulation == Formulation::F2) {
    int violations = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        if (d.omega[i] > d.omega[k] && o.prices[i] < o.prices[k] - tol)
          ++violations;
        if (d.omega[i] == d.omega[k] && std::abs(o.prices[i] - o.prices[k]) > tol)
          ++violations;
      }
    rep.add("fairness", violations == 0, std::to_string(violations) + " violating pairs");
  } else {
    rep.skip("fairness", "only asserted for f1 and f2");
  }
  return rep;
}

struct Options {
  std::string scenario_path;
  std::string out;
  std::string weights;
  std::string eta;
  std::string grid;
  std::string formulation = "f1";
  std::string formulations = "f1,f2,f3";
  std::string model = "plain";
  std::string redistribution;
  std::string out_dir;
  std::string outcome;
  std::size_t period = 0;
  std::size_t users = kReferenceUsers;
  std::uint64_t seed = kReferenceSeed;
  double base_price = kReferenceBasePrice;
  double solar_scale = 0.0;
  double jitter = kDefaultSolarJitter;
  double grid_step = kDefaultGridStep;
  double tol = qp::kDefaultTol;
  double check_tol = 1e-6;
  int max_iter = qp::kDefaultMaxIter;
  bool json = false;
};

class Runner {
public:
  Runner(std::ostream &out, std::ostream &err) : out_(out), err_(err) {}

  int run(int argc, const char *const *argv) {
    CLI::App app{"Retail electricity pricing: solvers, oracles and sweep experiments", "gridprice"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");
    configure(app);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
      if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
        app.exit(e, out_, err_);
        return 0;
      }
      err_ << "usage error: " << e.what() << "\nRun with --help for usage.\n";
      return 2;
    }
    try {
      for (auto *sub : app.get_subcommands())
        dispatch(sub->get_name());
      return 0;
    } catch (const UsageError &e) {
      err_ << "usage error: " << e.what() << '\n';
      return 2;
    } catch (const Error &e) {
      err_ << "error: " << code_name(e.code()) << ": " << e.what() << '\n';
      return 1;
    } catch (const std::exception &e) {
      err_ << "error: INTERNAL: " << e.what() << '\n';
      return 1;
    }
  }

private:
  std::ostream &out_;
  std::ostream &err_;
  Options o_;
  bool seed_given_ = false;

  static void add_scenario(CLI::App *c, Options &o, const std::string &fallback) {
    c->add_option("--scenario", o.scenario_path,
                  "Scenario JSON file (default: " + fallback + ")");
  }

  void configure(CLI::App &app) {
    Options &o = o_;
    const std::string ref = "built-in reference population, seed from $GRIDPRICE_SEED or 42";
    const std::string nm_ref =
        "built-in reference population with p_b = 2 and the default solar profile";

    auto *gen = app.add_subcommand("generate", "Write a reference scenario as JSON");
    gen->add_option_function<std::uint64_t>(
        "--seed",
        [this](const std::uint64_t &s) {
          o_.seed = s;
          seed_given_ = true;
        },
        "Generator seed (default: $GRIDPRICE_SEED, else 42)");
    gen->add_option("--users", o.users, "Number of users")->capture_default_str();
    gen->add_option("--base-price", o.base_price, "Base price p_b")->capture_default_str();
    gen->add_option("--solar-scale", o.solar_scale,
                    "Scale of the default solar profile; 0 attaches none")
        ->capture_default_str();
    gen->add_option("--jitter", o.jitter, "Relative per-user solar jitter")->capture_default_str();
    gen->add_option("--out", o.out, "Output file (default: stdout)");

    auto *solve = app.add_subcommand("solve", "Solve one period with one formulation");
    add_scenario(solve, o, ref);
    solve->add_option("--period", o.period, "Period, numbered from 1")->required();
    solve->add_option("--formulation", o.formulation, "f1, f2, f3, f4r1, f4r2, oracle0, oracle4")
        ->capture_default_str();
    solve->add_option("--weights", o.weights, "e1,e2,e3[:gamma] (default 1,1,1)");
    solve->add_option("--eta", o.eta, "Bound, 'inf' or 'free[:cost]' (default inf)");
    solve->add_option("--tol", o.tol, "Solver tolerance")->capture_default_str();
    solve->add_option("--max-iter", o.max_iter, "Solver iteration limit")->capture_default_str();
    solve->add_option("--out", o.out, "Write the outcome JSON to this file");
    solve->add_flag("--json", o.json, "Print the outcome JSON instead of the summary");

    auto *oracle = app.add_subcommand("oracle", "Exhaustive grid search of the exact problem");
    add_scenario(oracle, o, ref);
    oracle->add_option("--period", o.period, "Period, numbered from 1")->required();
    oracle->add_option("--model", o.model, "plain or netmeter")->capture_default_str();
    oracle->add_option("--weights", o.weights, "e1,e2,e3 (default 1,1,1)");
    oracle->add_option("--eta", o.eta, "Bound or 'inf' (default inf)");
    oracle->add_option("--grid", o.grid_step, "Price grid step")->capture_default_str();
    oracle->add_option("--out", o.out, "Write the outcome JSON to this file");
    oracle->add_flag("--json", o.json, "Print the outcome JSON instead of the summary");

    auto *eta = app.add_subcommand("sweep-eta", "Sweep the discrimination bound over a day");
    add_scenario(eta, o, ref + "; " + nm_ref + " for netmeter");
    eta->add_option("--formulation", o.formulation, "f1, f2, f3 or netmeter")
        ->capture_default_str();
    eta->add_option("--weights", o.weights,
                    std::string("e1,e2,e3[:gamma] (default ") + kReferenceWeights + ")");
    eta->add_option("--grid", o.grid, "Comma list or start:stop:step (default 0:1.5:0.1)");
    eta->add_option("--out", o.out, "Sweep CSV file (default: stdout)");
    eta->add_option("--redistribution", o.redistribution,
                    "Per-user price and demand report at the grid ends");

    auto *e1 = app.add_subcommand("sweep-e1", "Sweep the revenue weight e1 over a day");
    add_scenario(e1, o, ref);
    e1->add_option("--formulations", o.formulations, "Comma list of formulations")
        ->capture_default_str();
    e1->add_option("--weights", o.weights, "Base weights (default 1,1,1)");
    e1->add_option("--eta", o.eta, "Discrimination bound (default 0)");
    e1->add_option("--grid", o.grid, "Comma list or start:stop:step (default 0.5:5:0.5)");
    e1->add_option("--out-dir", o.out_dir, "Write e1_<formulation>.csv files here");

    auto *cmp = app.add_subcommand("compare-nm", "Per-period plain vs net-metering comparison");
    add_scenario(cmp, o, nm_ref);
    cmp->add_option("--weights", o.weights,
                    std::string("e1,e2,e3 (default ") + kReferenceWeights + ")");
    cmp->add_option("--eta", o.eta, "Discrimination bound (default 0)");
    cmp->add_option("--out", o.out, "CSV file (default: stdout)");

    auto *e2 = app.add_subcommand("sweep-e2-sellback", "Sell-back against the cost weight e2");
    add_scenario(e2, o, nm_ref);
    e2->add_option("--weights", o.weights, "Base weights (default 1,1,1)");
    e2->add_option("--eta", o.eta, "Discrimination bound (default 0)");
    e2->add_option("--grid", o.grid, "Comma list or start:stop:step (default 0:5:0.5)");
    e2->add_option("--out", o.out, "CSV file (default: stdout)");

    auto *star = app.add_subcommand("eta-star", "Closed-form discrimination bound per period");
    add_scenario(star, o, ref);
    star->add_option("--weights", o.weights, "e1,e2,e3 (default 1,1,1)");

    auto *val = app.add_subcommand("validate", "Check a stored outcome against its scenario");
    add_scenario(val, o, ref);
    val->add_option("--outcome", o.outcome, "Outcome JSON written by solve or oracle")
        ->required();
    val->add_option("--tol", o.check_tol, "Check tolerance")->capture_default_str();
  }

  Weights weights(const char *fallback) const {
    const Weights w = parse_weights(o_.weights.empty() ? fallback : o_.weights);
    w.validate();
    return w;
  }

  Eta eta(const char *fallback) const { return parse_eta(o_.eta.empty() ? fallback : o_.eta); }

  std::vector<double> grid(std::vector<double> fallback) const {
    return o_.grid.empty() ? fallback : parse_grid(o_.grid);
  }

  Scenario scenario(bool net_metering) const {
    if (!o_.scenario_path.empty())
      return scenario::load(o_.scenario_path);
    const std::uint64_t seed = seed_from_environment();
    return net_metering ? experiments::net_metering_reference(seed, kReferenceUsers)
                        : scenario::generate_reference(seed, kReferenceUsers);
  }

  std::size_t period_index(const Scenario &sc) const {
    if (o_.period < 1 || o_.period > sc.n_periods)
      throw Error(ErrorCode::InvalidArgument,
                  "period must be between 1 and " + std::to_string(sc.n_periods));
    return o_.period - 1;
  }

  void emit(const std::string &text) const {
    if (o_.out.empty())
      out_ << text;
    else
      write_text(o_.out, text);
  }

  void report(const PricingOutcome &o, const Scenario &sc) const {
    const std::string json = outcome_to_json(o).dump(2) + "\n";
    if (!o_.out.empty())
      write_text(o_.out, json);
    out_ << (o_.json ? json : summary(o, scenario::period_data(sc, o.period)));
  }

  void dispatch(const std::string &cmd) {
    if (cmd == "generate")
      generate();
    else if (cmd == "solve")
      solve();
    else if (cmd == "oracle")
      oracle();
    else if (cmd == "sweep-eta")
      sweep_eta_cmd();
    else if (cmd == "sweep-e1")
      sweep_e1_cmd();
    else if (cmd == "compare-nm")
      emit(csv::comparison(
          compare_net_metering(scenario(true), weights(kReferenceWeights), eta("0"))));
    else if (cmd == "sweep-e2-sellback")
      emit(csv::sweep(sweep_e2_sellback(scenario(true), weights(kDefaultWeights),
                                        grid(experiments::default_e2_grid()), eta("0"))));
    else if (cmd == "eta-star")
      eta_star_cmd();
    else if (cmd == "validate")
      validate_cmd();
  }

  void generate() {
    const std::uint64_t seed = seed_given_ ? o_.seed : seed_from_environment();
    Scenario sc = scenario::generate_reference(seed, o_.users, o_.base_price);
    if (o_.solar_scale != 0.0)
      sc = scenario::attach_solar(sc, default_solar_profile(), o_.solar_scale, o_.jitter);
    emit(scenario::to_json(sc).dump(2) + "\n");
  }

  void solve() {
    const Formulation f = parse_formulation(o_.formulation);
    const Scenario sc = scenario(false);
    const std::size_t k = period_index(sc);
    const PricingOutcome o = solve_period(sc, k, f, weights(kDefaultWeights),
                                          RetailEnv::from(sc, eta("inf")), o_.tol, o_.max_iter);
    report(o, sc);
  }

  void oracle() {
    if (o_.model != "plain" && o_.model != "netmeter")
      throw UsageError("--model must be plain or netmeter");
    if (!(o_.grid_step > 0))
      throw UsageError("--grid must be positive");
    const Scenario sc = scenario(o_.model == "netmeter");
    const std::size_t k = period_index(sc);
    const PeriodData d = scenario::period_data(sc, k);
    const Weights w = weights(kDefaultWeights);
    const RetailEnv env = RetailEnv::from(sc, eta("inf"));
    PricingOutcome o = o_.model == "plain" ? oracle_f0(d, w, env, o_.grid_step)
                                           : oracle_f4(d, w, env, o_.grid_step);
    o.period = k;
    report(o, sc);
  }

  void sweep_eta_cmd() {
    const bool nm = o_.formulation == "netmeter";
    const Scenario sc = scenario(nm);
    const Weights w = weights(kReferenceWeights);
    const auto g = grid(experiments::default_eta_grid());
    const EtaSweep s = nm ? sweep_eta_net_metering(sc, w, g)
                          : sweep_eta(sc, parse_formulation(o_.formulation), w, g);
    emit(csv::sweep(s.sweep));
    if (!o_.redistribution.empty())
      write_text(o_.redistribution, csv::redistribution(s.redistribution));
  }

  void sweep_e1_cmd() {
    std::vector<Formulation> fs;
    for (const auto &t : split(o_.formulations, ','))
      fs.push_back(parse_formulation(t));
    if (fs.empty())
      throw UsageError("--formulations is empty");
    const auto results = sweep_e1(scenario(false), fs, weights(kDefaultWeights),
                                  grid(experiments::default_e1_grid()), eta("0"));
    if (!o_.out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(o_.out_dir, ec);
      if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + o_.out_dir + ": " + ec.message());
      for (const auto &r : results)
        write_text((std::filesystem::path(o_.out_dir) / ("e1_" + r.model + ".csv")).string(),
                   csv::sweep(r));
      return;
    }
    for (const auto &r : results)
      out_ << "# " << r.model << '\n' << csv::sweep(r);
  }

  void eta_star_cmd() {
    const Scenario sc = scenario(false);
    const Weights w = weights(kDefaultWeights);
    std::string text = csv::join({"period", "eta_star", "eta_star_net_metering"});
    for (std::size_t k = 0; k < sc.n_periods; ++k) {
      const PeriodData d = scenario::period_data(sc, k);
      const double alpha = common_alpha(d);
      text += csv::join({std::to_string(k + 1), csv::number(eta_star(d.omega, w, alpha)),
                         csv::number(eta_star_net_metering(d.omega, d.s, w, alpha))});
    }
    out_ << text;
  }

  void validate_cmd() {
    const PricingOutcome o = outcome_from_json(read_json(o_.outcome));
    const Scenario sc = scenario(is_net_metering(o.formulation));
    const CheckReport rep = validate_outcome(sc, o, o_.check_tol);
    for (const auto &line : rep.lines)
      out_ << line << '\n';
    if (rep.failures > 0)
      throw Error(ErrorCode::ValidationFailed, std::to_string(rep.failures) + " check(s) failed");
  }
};

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout,
               std::ostream &err = std::cerr) {
  return Runner(out, err).run(argc, argv);
}

} // namespace gridprice::cli

#endif
