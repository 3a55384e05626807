#include "gridprice/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace gridprice;
using namespace gridprice::cli;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "gridprice");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string sample(const std::string &name) {
  return std::string(GRIDPRICE_SAMPLES_DIR) + "/" + name;
}

std::string temp_path(const std::string &name) {
  return (std::filesystem::temp_directory_path() / ("gridprice_cli_" + name)).string();
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string &command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class SeedGuard {
public:
  explicit SeedGuard(const char *value) {
    if (value)
      setenv(kSeedVariable, value, 1);
    else
      unsetenv(kSeedVariable);
  }
  ~SeedGuard() { unsetenv(kSeedVariable); }
};

} // namespace

TEST(ParseWeights, TripleAndGamma) {
  const Weights w = parse_weights("1,0.5,2");
  EXPECT_EQ(w.e1, 1.0);
  EXPECT_EQ(w.e2, 0.5);
  EXPECT_EQ(w.e3, 2.0);
  EXPECT_FALSE(w.gamma);
  EXPECT_EQ(*parse_weights("1,1,1:7.5").gamma, 7.5);
}

TEST(ParseWeights, RejectsMalformed) {
  for (const char *bad : {"1,2", "1,2,3,4", "1,-1,2", "a,b,c", "1,2,3:", "1,2,3:x", "1,,3",
                          "1,2,3:1:2", "1,2,inf", ""})
    EXPECT_THROW(parse_weights(bad), UsageError) << bad;
}

TEST(ParseEta, Forms) {
  EXPECT_EQ(parse_eta("0.5").kind, Eta::Kind::Bounded);
  EXPECT_EQ(parse_eta("0.5").value, 0.5);
  EXPECT_EQ(parse_eta("inf").kind, Eta::Kind::Unbounded);
  EXPECT_EQ(parse_eta("free").kind, Eta::Kind::Free);
  EXPECT_EQ(parse_eta("free:0.25").value, 0.25);
  EXPECT_THROW(parse_eta("-1"), UsageError);
  EXPECT_THROW(parse_eta("free:-1"), UsageError);
  EXPECT_THROW(parse_eta("wide"), UsageError);
}

TEST(ParseGrid, ListAndRange) {
  EXPECT_EQ(parse_grid("0.1,0.2,0.4"), (std::vector<double>{0.1, 0.2, 0.4}));
  EXPECT_EQ(parse_grid("0:1:0.25"), (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(parse_grid("0:1.5:0.1").size(), 16u);
  EXPECT_THROW(parse_grid("1:0:1"), UsageError);
  EXPECT_THROW(parse_grid("0:1:0"), UsageError);
  EXPECT_THROW(parse_grid("0,x"), UsageError);
}

TEST(Run, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"solve"}).code, 2); // --period is required
  EXPECT_EQ(invoke({"solve", "--period", "1", "--weights", "1,2"}).code, 2);
  EXPECT_EQ(invoke({"solve", "--period", "x"}).code, 2);
  const Result r = invoke({"solve", "--period", "1", "--eta", "-2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("eta"), std::string::npos);
}

TEST(Run, HelpListsCommands) {
  const Result r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char *cmd : {"generate", "solve", "oracle", "sweep-eta", "sweep-e1", "compare-nm",
                          "sweep-e2-sellback", "eta-star", "validate"})
    EXPECT_NE(r.out.find(cmd), std::string::npos) << cmd;
  EXPECT_NE(invoke({"solve", "--help"}).out.find("e1,e2,e3[:gamma]"), std::string::npos);
}

TEST(Run, DomainErrorsExitOneWithCode) {
  const std::string tiny = sample("tiny3.json");
  Result r = invoke({"solve", "--scenario", tiny, "--period", "7"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("INVALID_ARGUMENT"), std::string::npos);
  r = invoke({"solve", "--scenario", tiny, "--period", "1", "--formulation", "f9"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("UNKNOWN_FORMULATION"), std::string::npos);
  r = invoke({"solve", "--scenario", "/nonexistent/s.json", "--period", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("IO_ERROR"), std::string::npos);
  const std::string broken = temp_path("broken.json");
  std::ofstream(broken) << R"({"version": 1, "label": 3})";
  r = invoke({"solve", "--scenario", broken, "--period", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("SCHEMA_VIOLATION"), std::string::npos);
  std::remove(broken.c_str());
  r = invoke({"solve", "--scenario", tiny, "--period", "1", "--weights", "0,0,0"});
  EXPECT_EQ(r.code, 1);
  r = invoke({"oracle", "--period", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("TOO_MANY_USERS"), std::string::npos);
}

TEST(Solve, SummaryAndJson) {
  const std::vector<std::string> args{"solve",     "--scenario", sample("tiny3.json"),
                                      "--period",  "3",          "--formulation",
                                      "f1",        "--weights",  "1,1,1",
                                      "--eta",     "0.5"};
  const Result text = invoke(args);
  EXPECT_EQ(text.code, 0) << text.err;
  EXPECT_NE(text.out.find("formulation f1  period 3  status optimal"), std::string::npos);
  auto json_args = args;
  json_args.push_back("--json");
  const Result js = invoke(json_args);
  ASSERT_EQ(js.code, 0);
  const auto j = nlohmann::json::parse(js.out);
  EXPECT_EQ(j["formulation"], "f1");
  EXPECT_EQ(j["period"], 3);
  EXPECT_EQ(j["prices"].size(), 3u);
  EXPECT_EQ(j["env"]["eta"]["kind"], "bounded");
  EXPECT_EQ(j["env"]["eta"]["value"], 0.5);
  EXPECT_TRUE(j["weights"]["gamma"].is_null());
  EXPECT_LE(j["price_spread"].get<double>(), 0.5 + 1e-9);
}

TEST(Solve, OutcomeJsonRoundTrip) {
  const Scenario sc = scenario::load(sample("tiny3.json"));
  Weights w;
  w.gamma = 3.0;
  const PricingOutcome o =
      solve_period(sc, 1, Formulation::F3, w, RetailEnv::from(sc, Eta::free(0.1)));
  const PricingOutcome back =
      outcome_from_json(nlohmann::json::parse(outcome_to_json(o).dump()));
  EXPECT_EQ(back.formulation, o.formulation);
  EXPECT_EQ(back.period, o.period);
  EXPECT_EQ(back.weights.gamma, o.weights.gamma);
  EXPECT_EQ(back.env.eta.kind, Eta::Kind::Free);
  EXPECT_EQ(back.env.eta.value, 0.1);
  EXPECT_EQ(back.prices, o.prices);
  EXPECT_EQ(back.demands, o.demands);
  EXPECT_EQ(back.variables, o.variables);
  EXPECT_EQ(back.objective, o.objective);
  EXPECT_EQ(back.solver_objective, o.solver_objective);
  EXPECT_EQ(back.penalty_term, o.penalty_term);
  EXPECT_EQ(back.kkt.complementarity, o.kkt.complementarity);
  EXPECT_EQ(back.iterations, o.iterations);
}

TEST(Oracle, AgreesWithF1OnTinySample) {
  const std::string tiny = sample("tiny3.json");
  for (const char *period : {"1", "4"}) {
    const Result a = invoke({"oracle", "--scenario", tiny, "--period", period, "--grid", "0.01",
                             "--json"});
    const Result b =
        invoke({"solve", "--scenario", tiny, "--period", period, "--formulation", "f1", "--json"});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    const auto ja = nlohmann::json::parse(a.out), jb = nlohmann::json::parse(b.out);
    for (const auto &x : jb["demands"])
      ASSERT_GT(x.get<double>(), 0.0);
    const double bound = 5 * 0.01 * 3 * 10.0;
    EXPECT_NEAR(ja["objective"].get<double>(), jb["objective"].get<double>(), bound);
    EXPECT_LE(ja["objective"].get<double>(), jb["objective"].get<double>() + 1e-9);
  }
}

TEST(EtaStar, SixPeriodsIdenticalInNormalModel) {
  const Scenario sc = scenario::generate_reference(kReferenceSeed, kReferenceUsers);
  const std::string path = temp_path("ref.json");
  scenario::save(sc, path);
  const Result r = invoke({"eta-star", "--scenario", path, "--weights", "1,1,1"});
  std::remove(path.c_str());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "period,eta_star,eta_star_net_metering");
  std::vector<double> values;
  while (std::getline(lines, line)) {
    const auto cells = split(line, ',');
    ASSERT_EQ(cells.size(), 3u);
    values.push_back(std::stod(cells[1]));
    EXPECT_EQ(cells[1], cells[2]); // no generation
  }
  ASSERT_EQ(values.size(), 6u);
  const PeriodData d = scenario::period_data(sc, 0);
  Weights w;
  for (double v : values)
    EXPECT_NEAR(v, eta_star(d.omega, w, 2.0), 1e-12);
}

TEST(Generate, SeedFromEnvironmentAndFlag) {
  {
    SeedGuard guard("7");
    const Result r = invoke({"generate"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, scenario::to_json(scenario::generate_reference(7, 20)).dump(2) + "\n");
    const Result flag = invoke({"generate", "--seed", "9", "--users", "4"});
    EXPECT_EQ(flag.out, scenario::to_json(scenario::generate_reference(9, 4)).dump(2) + "\n");
  }
  {
    SeedGuard guard(nullptr);
    EXPECT_EQ(invoke({"generate"}).out,
              scenario::to_json(scenario::generate_reference(42, 20)).dump(2) + "\n");
  }
  {
    SeedGuard guard("-3");
    EXPECT_EQ(invoke({"generate"}).code, 2);
    EXPECT_EQ(invoke({"eta-star"}).code, 2);
  }
}

TEST(Generate, SolarAndFileOutput) {
  const std::string path = temp_path("solar.json");
  ASSERT_EQ(invoke({"generate", "--users", "5", "--base-price", "2", "--solar-scale", "1",
                    "--out", path})
                .code,
            0);
  const Scenario sc = scenario::load(path);
  std::remove(path.c_str());
  EXPECT_TRUE(sc.has_solar());
  EXPECT_EQ(sc.p_b, 2.0);
  EXPECT_EQ(sc, experiments::net_metering_reference(42, 5));
}

TEST(Validate, AcceptsSolvedOutcomeAndFlagsTampering) {
  const std::string tiny = sample("tiny3.json");
  const std::string path = temp_path("outcome.json");
  ASSERT_EQ(invoke({"solve", "--scenario", tiny, "--period", "2", "--eta", "0.05", "--out", path})
                .code,
            0);
  Result r = invoke({"validate", "--scenario", tiny, "--outcome", path});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("fairness PASS"), std::string::npos);
  EXPECT_NE(r.out.find("discrimination_band PASS"), std::string::npos);

  auto j = nlohmann::json::parse(slurp(path));
  // Swap two users' prices so the richer one pays less.
  const Scenario sc = scenario::load(tiny);
  const PeriodData d = scenario::period_data(sc, 1);
  const std::size_t rich = d.omega[0] > d.omega[1] ? 0 : 1, poor = 1 - rich;
  j["prices"][rich] = j["prices"][poor].get<double>() - 0.01;
  std::ofstream(path) << j.dump();
  r = invoke({"validate", "--scenario", tiny, "--outcome", path});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("fairness FAIL"), std::string::npos);
  EXPECT_NE(r.err.find("VALIDATION_FAILED"), std::string::npos);

  j["extra"] = true;
  std::ofstream(path) << j.dump();
  r = invoke({"validate", "--scenario", tiny, "--outcome", path});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("SCHEMA_VIOLATION"), std::string::npos);
  std::remove(path.c_str());
}

TEST(Sweeps, CsvShapes) {
  const std::string tiny = sample("tiny3.json");
  Result r = invoke({"sweep-eta", "--scenario", tiny, "--grid", "0,0.5,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  EXPECT_EQ(r.out.rfind("eta,avg_price", 0), 0u);

  r = invoke({"compare-nm"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);

  r = invoke({"sweep-e2-sellback", "--grid", "0,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("e2,", 0), 0u);

  r = invoke({"sweep-eta", "--formulation", "netmeter", "--grid", "0,1"});
  ASSERT_EQ(r.code, 0) << r.err;

  const std::string dir = temp_path("e1");
  std::filesystem::remove_all(dir);
  r = invoke({"sweep-e1", "--scenario", tiny, "--grid", "1,2", "--out-dir", dir});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char *f : {"e1_f1.csv", "e1_f2.csv", "e1_f3.csv"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / f)) << f;
  std::filesystem::remove_all(dir);
}

TEST(Binary, ExitCodesAndByteStableSweep) {
  const std::string cli = GRIDPRICE_CLI_PATH;
  const std::string a = temp_path("sweep_a.csv"), b = temp_path("sweep_b.csv");
  ASSERT_EQ(shell(cli + " sweep-eta --out " + a), 0);
  ASSERT_EQ(shell(cli + " sweep-eta --out " + b), 0);
  const std::string bytes = slurp(a);
  EXPECT_FALSE(bytes.empty());
  EXPECT_EQ(bytes, slurp(b));
  std::remove(a.c_str());
  std::remove(b.c_str());
  EXPECT_EQ(shell(cli + " solve --period 0 2>/dev/null"), 1);
  EXPECT_EQ(shell(cli + " solve --bogus 2>/dev/null"), 2);
  EXPECT_EQ(shell(cli + " eta-star >/dev/null"), 0);
}
