// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "gridprice/experiments.hpp"
#include "gridprice/formulations.hpp"
#include "gridprice/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace gridprice;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> details;

  void note(const std::string &line) { details.push_back(line); }
  void fail(const std::string &line) {
    pass = false;
    note("violation: " + line);
  }
  void require(bool ok, const std::string &line) {
    if (!ok)
      fail(line);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return lo + (hi - lo) * scenario::unit_draw(rng);
}

PeriodData make_period(const std::vector<double> &omega, double alpha) {
  PeriodData d;
  d.omega = omega;
  d.alpha.assign(omega.size(), alpha);
  d.m.assign(omega.size(), 0.0);
  d.s.assign(omega.size(), 0.0);
  return d;
}

std::vector<double> random_omega(std::mt19937_64 &rng, std::size_t n) {
  std::vector<double> omega;
  for (std::size_t i = 0; i < n; ++i)
    omega.push_back(uniform(rng, 2.33, 5.64));
  return omega;
}

Weights random_weights(std::mt19937_64 &rng) {
  Weights w;
  w.e1 = uniform(rng, 0.2, 3.0);
  w.e2 = uniform(rng, 0.2, 3.0);
  w.e3 = uniform(rng, 0.2, 3.0);
  return w;
}

PricingOutcome solve(Formulation f, const PeriodData &d, const Weights &w, const RetailEnv &e,
                     double tol = qp::kDefaultTol) {
  return solve_lowered(build(f, d, w, e), d, w, e, tol);
}

std::string eta_name(const Eta &eta) {
  return eta.is_bounded() ? fmt(eta.value) : std::string("unbounded");
}

Verdict oracle_equivalence() {
  Verdict v;
  std::mt19937_64 rng(101);
  const std::vector<Eta> etas{Eta::bounded(0.0), Eta::bounded(0.3), Eta::unbounded()};
  const double step = kDefaultGridStep;
  const double cap = kReferencePriceCap;
  int accepted = 0, rejected = 0;
  double worst_gap = 0.0, slowest = 0.0;
  while (accepted < 25) {
    const std::size_t n = 1 + static_cast<std::size_t>(accepted % 3);
    const Eta eta = etas[static_cast<std::size_t>((accepted / 3) % 3)];
    const double p_b = (accepted / 9) % 2 == 0 ? 0.0 : 1.0;
    const PeriodData d = make_period(random_omega(rng, n), uniform(rng, 1.5, 3.0));
    const Weights w = random_weights(rng);
    const RetailEnv env{p_b, cap, eta};

    const auto start = std::chrono::steady_clock::now();
    const PricingOutcome oracle = oracle_f0(d, w, env, step);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (std::any_of(oracle.demands.begin(), oracle.demands.end(),
                    [](double x) { return !(x > 0.0); })) {
      ++rejected;
      continue;
    }
    ++accepted;
    slowest = std::max(slowest, seconds);
    const double bound = 5.0 * step * static_cast<double>(n) * cap;
    v.require(seconds <= 60.0, "oracle took " + fmt(seconds) + " s");
    for (Formulation f : {Formulation::F1, Formulation::F2}) {
      const PricingOutcome o = solve(f, d, w, env);
      const double gap = std::abs(o.objective - oracle.objective);
      worst_gap = std::max(worst_gap, gap);
      v.require(gap <= bound, std::string(tag(f)) + " N=" + std::to_string(n) + " eta=" +
                                  eta_name(eta) + " p_b=" + fmt(p_b) + " gap " + fmt(gap) +
                                  " > " + fmt(bound));
    }
  }
  v.note(std::to_string(accepted) + " instances (" + std::to_string(rejected) +
         " rejected with a zero demand), worst gap " + fmt(worst_gap) + ", slowest oracle " +
         fmt(slowest) + " s");
  return v;
}

Verdict fairness() {
  Verdict v;
  std::mt19937_64 rng(202);
  const std::vector<Eta> etas{Eta::bounded(0.0), Eta::bounded(0.5), Eta::unbounded()};
  const double tol = 1e-6;
  long checks = 0, ties = 0;
  for (int r = 0; r < 100; ++r) {
    Scenario sc = scenario::generate_reference(1000 + static_cast<std::uint64_t>(r), 20);
    // One exact tie per scenario exercises the equality case.
    sc.consumers[1].omega = sc.consumers[0].omega;
    const Weights w = random_weights(rng);
    for (const Eta &eta : etas) {
      const RetailEnv env = RetailEnv::from(sc, eta);
      for (std::size_t k = 0; k < sc.n_periods; ++k) {
        const PeriodData d = scenario::period_data(sc, k);
        for (Formulation f : {Formulation::F1, Formulation::F2}) {
          const PricingOutcome o = solve(f, d, w, env);
          for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t j = 0; j < d.size(); ++j) {
              if (d.omega[i] > d.omega[j]) {
                ++checks;
                v.require(o.prices[i] >= o.prices[j] - tol,
                          std::string(tag(f)) + " scenario " + std::to_string(r) + " period " +
                              std::to_string(k + 1) + " users " + std::to_string(i) + "," +
                              std::to_string(j));
              } else if (i < j && d.omega[i] == d.omega[j]) {
                ++ties;
                v.require(std::abs(o.prices[i] - o.prices[j]) <= tol,
                          std::string(tag(f)) + " tie scenario " + std::to_string(r));
              }
            }
        }
      }
    }
  }
  v.note(std::to_string(checks) + " ordered pairs and " + std::to_string(ties) +
         " tied pairs checked");
  return v;
}

Verdict swap_and_averaging() {
  Verdict v;
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 5);
    const double alpha = uniform(rng, 1.5, 3.0);
    const auto omega = random_omega(rng, n);
    const PeriodData d = make_period(omega, alpha);
    const Weights w = random_weights(rng);
    const double p_b = uniform(rng, 0.0, 1.0);
    const std::size_t i = 0, j = 1;
    const double room = std::min(omega[i], omega[j]) - p_b;
    std::vector<double> p;
    for (double om : omega)
      p.push_back(uniform(rng, 0.0, om - p_b));
    p[i] = uniform(rng, 0.0, room);
    p[j] = uniform(rng, 0.0, room);
    std::vector<double> swapped = p;
    std::swap(swapped[i], swapped[j]);
    const double delta = f1_objective(d, w, p_b, swapped) - f1_objective(d, w, p_b, p);
    const double expected = w.e1 / alpha * (omega[i] - omega[j]) * (p[j] - p[i]);
    worst = std::max(worst, std::abs(delta - expected));
  }
  v.require(worst <= 1e-10, "swap identity error " + fmt(worst));

  int improved = 0, trials = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 5);
    const double alpha = uniform(rng, 1.5, 3.0);
    auto omega = random_omega(rng, n);
    omega[1] = omega[0];
    const PeriodData d = make_period(omega, alpha);
    const Weights w = random_weights(rng);
    const double p_b = uniform(rng, 0.0, 1.0);
    std::vector<double> p;
    for (double om : omega)
      p.push_back(uniform(rng, 0.0, om - p_b));
    if (p[0] == p[1])
      continue;
    ++trials;
    std::vector<double> avg = p;
    avg[0] = avg[1] = 0.5 * (p[0] + p[1]);
    if (f1_objective(d, w, p_b, avg) > f1_objective(d, w, p_b, p))
      ++improved;
  }
  v.require(improved == trials, "averaging improved only " + std::to_string(improved) + " of " +
                                    std::to_string(trials));
  v.note("10000 swaps, worst error " + fmt(worst) + "; averaging improved " +
         std::to_string(improved) + "/" + std::to_string(trials));
  return v;
}

Verdict closed_form() {
  Verdict v;
  std::mt19937_64 rng(404);
  const std::vector<double> e2s{0.0, 0.5, 1.0};
  int accepted = 0, rejected = 0;
  double worst = 0.0;
  while (accepted < 50) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng() % 9);
    const double alpha = uniform(rng, 1.5, 3.0);
    const auto omega = random_omega(rng, n);
    Weights w = random_weights(rng);
    w.e2 = e2s[static_cast<std::size_t>(accepted % 3)];
    const auto cf = closed_form_prices(omega, w, alpha);
    bool interior = true;
    for (std::size_t i = 0; i < n; ++i)
      interior = interior && cf[i] > 1e-3 && cf[i] < omega[i] - 1e-3;
    if (!interior) {
      ++rejected;
      continue;
    }
    ++accepted;
    const PeriodData d = make_period(omega, alpha);
    const RetailEnv env{0.0, 1e3, Eta::unbounded()};
    const PricingOutcome o = solve(Formulation::F1, d, w, env);
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(o.prices[i] - cf[i]));
  }
  v.require(worst <= 1e-6, "price error " + fmt(worst));
  v.note("50 interior instances (" + std::to_string(rejected) + " rejected), worst error " +
         fmt(worst));
  return v;
}

double day_eta_star(const Scenario &sc, const Weights &w) {
  double best = 0.0;
  for (std::size_t k = 0; k < sc.n_periods; ++k) {
    const PeriodData d = scenario::period_data(sc, k);
    best = std::max(best, eta_star(d.omega, w, common_alpha(d)));
  }
  return best;
}

Verdict eta_star_checks() {
  Verdict v;
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 9);
    const double alpha = uniform(rng, 1.5, 3.0);
    const auto omega = random_omega(rng, n);
    Weights w = random_weights(rng);
    w.e2 = static_cast<double>(t % 3) * 0.5;
    const auto p = closed_form_prices(omega, w, alpha);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    worst = std::max(worst, std::abs((*hi - *lo) - eta_star(omega, w, alpha)));
  }
  v.require(worst <= 1e-10, "closed-form spread error " + fmt(worst));

  const Scenario sc = scenario::generate_reference(kReferenceSeed, kReferenceUsers);
  const Weights w = experiments::reference_weights();
  const double star = day_eta_star(sc, w);
  v.require(star < 1.0, "eta* = " + fmt(star) + " is not below 1");
  const EtaSweep sweep = sweep_eta(sc, Formulation::F1, w);
  double lo = 1e300, hi = -1e300;
  int points = 0;
  for (const SweepRow &row : sweep.sweep.rows)
    if (row.axis_value >= star) {
      ++points;
      lo = std::min(lo, row.metrics.revenue);
      hi = std::max(hi, row.metrics.revenue);
    }
  v.require(points >= 2, "fewer than two grid points past eta*");
  v.require(hi - lo <= 1e-6, "revenue varies by " + fmt(hi - lo) + " past eta*");
  v.note("1000 closed forms, worst spread error " + fmt(worst) + "; reference eta* = " +
         fmt(star) + ", revenue variation " + fmt(hi - lo) + " over " + std::to_string(points) +
         " grid points");
  return v;
}

Verdict net_metering_eta_star() {
  Verdict v;
  std::mt19937_64 rng(606);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 10);
    const double alpha = uniform(rng, 1.5, 3.0);
    const auto omega = random_omega(rng, n);
    const Weights w = random_weights(rng);
    const std::vector<double> s(n, uniform(rng, 0.0, 2.0));
    if (eta_star_net_metering(omega, s, w, alpha) != eta_star(omega, w, alpha))
      ++mismatches;
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " constant-s cases differ");

  const Scenario sc = experiments::net_metering_reference();
  const Weights w = experiments::reference_weights();
  std::vector<double> values;
  bool shifted = false;
  for (std::size_t k = 0; k < sc.n_periods; ++k) {
    const PeriodData d = scenario::period_data(sc, k);
    const double alpha = common_alpha(d);
    values.push_back(eta_star_net_metering(d.omega, d.s, w, alpha));
    shifted = shifted || values.back() != eta_star(d.omega, w, alpha);
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  v.require(*hi > *lo, "net-metering eta* is the same in every period");
  v.require(shifted, "varying s never changes eta*");
  std::string list;
  for (double x : values)
    list += (list.empty() ? "" : " ") + fmt(x);
  v.note("1000 constant-s cases exact; per-period values " + list);
  return v;
}

Verdict degeneracy() {
  Verdict v;
  std::mt19937_64 rng(707);
  const std::vector<Eta> etas{Eta::bounded(0.0), Eta::bounded(0.3), Eta::unbounded()};
  double worst_price = 0.0, worst_objective = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
    const PeriodData d = make_period(random_omega(rng, n), uniform(rng, 1.5, 3.0));
    const Weights w = random_weights(rng);
    const RetailEnv env{0.0, kReferencePriceCap, etas[static_cast<std::size_t>(t % 3)]};
    const PricingOutcome f1 = solve(Formulation::F1, d, w, env);
    const PricingOutcome f4 = solve(Formulation::F4R1, d, w, env);
    for (std::size_t i = 0; i < n; ++i)
      worst_price = std::max(worst_price, std::abs(f4.prices[i] - f1.prices[i]));
    worst_objective = std::max({worst_objective, std::abs(f4.objective - f1.objective),
                                std::abs(f4.solver_objective - f1.solver_objective)});
  }
  v.require(worst_price <= 1e-8, "price difference " + fmt(worst_price));
  v.require(worst_objective <= 1e-8, "objective difference " + fmt(worst_objective));
  v.note("20 instances, worst price difference " + fmt(worst_price) + ", worst objective " +
         "difference " + fmt(worst_objective));
  return v;
}

template <class Get>
bool monotone(const std::vector<SweepRow> &rows, Get get, int direction, double tol,
              double until = 1e300) {
  for (std::size_t g = 1; g < rows.size() && rows[g].axis_value <= until; ++g)
    if (direction * (get(rows[g].metrics) - get(rows[g - 1].metrics)) < -tol)
      return false;
  return true;
}

Verdict directional_trends() {
  Verdict v;
  const double tol = 1e-7;
  const Scenario sc = scenario::generate_reference(kReferenceSeed, kReferenceUsers);
  const Scenario nm = experiments::net_metering_reference();
  const Weights ref = experiments::reference_weights();
  const Weights ones;

  const auto e1 = sweep_e1(sc, {Formulation::F1, Formulation::F3, Formulation::F2}, ones);
  for (std::size_t g = 0; g < e1[0].rows.size(); ++g) {
    const double f1 = e1[0].rows[g].metrics.avg_price;
    const double f3 = e1[1].rows[g].metrics.avg_price;
    const double f2 = e1[2].rows[g].metrics.avg_price;
    const std::string at = "e1=" + fmt(e1[0].rows[g].axis_value) + " F1 " + fmt(f1) + " F3 " +
                           fmt(f3) + " F2 " + fmt(f2);
    v.require(f1 <= f3 + tol && f3 <= f2 + tol, "e1 sweep price ordering F1 <= F3 <= F2 at " + at);
  }

  const double star = day_eta_star(sc, ref);
  const EtaSweep eta = sweep_eta(sc, Formulation::F1, ref);
  const auto &rows = eta.sweep.rows;
  v.require(monotone(rows, [](const MetricRecord &m) { return m.revenue; }, +1, tol, star),
            "eta sweep: revenue decreases before eta*");
  v.require(
      monotone(rows, [](const MetricRecord &m) { return m.avg_consumer_utility; }, -1, tol),
      "eta sweep: consumer utility increases with eta");
  v.require(rows.back().metrics.demand_stddev < rows.front().metrics.demand_stddev,
            "eta sweep: demand stddev " + fmt(rows.back().metrics.demand_stddev) + " at eta_max vs " +
                fmt(rows.front().metrics.demand_stddev) + " at eta=0");

  const auto cmp = compare_net_metering(nm, ref);
  for (std::size_t k : {2u, 5u})
    v.require(cmp[k - 1].nm_price > cmp[k - 1].normal_price,
              "net metering: period " + std::to_string(k) + " NM price not above normal");
  for (std::size_t k : {3u, 4u})
    v.require(cmp[k - 1].nm_price < cmp[k - 1].normal_price,
              "net metering: period " + std::to_string(k) + " NM price not below normal");
  for (std::size_t k = 2; k <= 5; ++k)
    v.require(cmp[k - 1].nm_load < cmp[k - 1].normal_load,
              "net metering: period " + std::to_string(k) + " NM load not below normal");

  const SweepResult e2 = sweep_e2_sellback(nm, ones);
  v.require(monotone(e2.rows, [](const MetricRecord &m) { return m.sellback_total; }, +1, tol),
            "e2 sweep: sell-back decreases with e2");
  v.require(e2.rows.back().metrics.sellback_total > e2.rows.front().metrics.sellback_total,
            "e2 sweep: sell-back is flat in e2");

  const EtaSweep nm_eta = sweep_eta_net_metering(nm, ref);
  v.require(monotone(nm_eta.sweep.rows, [](const MetricRecord &m) { return m.sellback_total; },
                     -1, tol),
            "net-metering eta sweep: sell-back increases with eta");

  v.note("F1/F3/F2 avg price at e1=0.5: " + fmt(e1[0].rows[0].metrics.avg_price) + " / " +
         fmt(e1[1].rows[0].metrics.avg_price) + " / " + fmt(e1[2].rows[0].metrics.avg_price));
  v.note("eta* " + fmt(star) + "; revenue " + fmt(rows.front().metrics.revenue) + " -> " +
         fmt(rows.back().metrics.revenue) + "; stddev " +
         fmt(rows.front().metrics.demand_stddev) + " -> " +
         fmt(rows.back().metrics.demand_stddev));
  std::string prices;
  for (const auto &r : cmp)
    prices += " " + std::to_string(r.period) + ":" + fmt(r.normal_price) + "/" + fmt(r.nm_price);
  v.note("normal/NM price by period:" + prices);
  v.note("sell-back over e2 " + fmt(e2.rows.front().metrics.sellback_total) + " -> " +
         fmt(e2.rows.back().metrics.sellback_total) + "; over eta " +
         fmt(nm_eta.sweep.rows.front().metrics.sellback_total) + " -> " +
         fmt(nm_eta.sweep.rows.back().metrics.sellback_total));
  return v;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  Verdict v;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("gridprice_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  std::vector<std::string> outputs;
  for (int run = 0; run < 2; ++run) {
    const auto out = dir / ("sweep" + std::to_string(run) + ".csv");
    const std::string cmd = std::string("\"") + GRIDPRICE_CLI_PATH + "\" sweep-eta --out \"" +
                            out.string() + "\"";
    const int rc = std::system(cmd.c_str());
    v.require(rc == 0, "sweep-eta exited with status " + std::to_string(rc));
    outputs.push_back(slurp(out));
  }
  std::filesystem::remove_all(dir);
  v.require(!outputs[0].empty(), "sweep-eta wrote nothing");
  v.require(outputs[0] == outputs[1], "sweep-eta outputs differ");
  v.note("two runs, " + std::to_string(outputs[0].size()) + " bytes each");
  return v;
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"1 oracle equivalence", oracle_equivalence},
      {"2 fairness", fairness},
      {"3 swap and averaging identities", swap_and_averaging},
      {"4 closed-form prices", closed_form},
      {"5 eta*", eta_star_checks},
      {"6 net-metering eta*", net_metering_eta_star},
      {"7 degeneracy to F1", degeneracy},
      {"8 directional trends on the reference scenario", directional_trends},
      {"9 determinism", determinism},
  };
  int failed = 0;
  for (const auto &[name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception &e) {
      v.fail(std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << " (" << fmt(seconds) << " s)\n";
    for (const auto &line : v.details)
      std::cout << "    " << line << "\n";
    std::cout.flush();
    failed += v.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " failed") << "\n";
  return failed == 0 ? 0 : 1;
}
