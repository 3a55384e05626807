#ifndef GRIDPRICE_EXPERIMENTS_HPP
#define GRIDPRICE_EXPERIMENTS_HPP

// Deterministic parameter sweeps over a whole day of pricing periods, with
// day-level metrics and CSV output.
//
// A day is solved period by period. Under net metering the first and last
// periods (no generation) use the plain model and the rest use F4R1; this
// assignment is the "net-metering schedule" below.
//
// Day metrics:
//   avg_price             mean per-unit price paid over users and periods
//                         (p_b + p_i in the plain model, P_i under net metering)
//   revenue               sum over periods of the retailer revenue
//   total_elastic_load    sum of x_i (plain) or net purchases Z_i (net metering)
//   avg_consumer_utility  mean over users of their utility summed over periods
//   demand_stddev         population std. dev. over users of daily elastic demand
//   sellback_total        sum of max(0, -Z_i)

#include "gridprice/consumer.hpp"
#include "gridprice/formulations.hpp"
#include "gridprice/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace gridprice {

struct MetricRecord {
  double avg_price = 0.0;
  double revenue = 0.0;
  double total_elastic_load = 0.0;
  double avg_consumer_utility = 0.0;
  double demand_stddev = 0.0;
  double sellback_total = 0.0;
  // Bookkeeping, summed over periods.
  double objective = 0.0;
  double solver_objective = 0.0;
  double cost_term = 0.0;
  double welfare_penalty = 0.0;
  double penalty_term = 0.0;
  double price_spread = 0.0; // largest spread of any period
};

/// Per-user view of one period's outcome.
struct PeriodMetrics {
  std::vector<double> price;   // per-unit price paid
  std::vector<double> elastic; // elastic consumption
  std::vector<double> utility;
  std::vector<double> net;     // grid purchase (x, or Z)
  double revenue = 0.0;
  double sellback = 0.0;
};

struct SweepRow {
  double axis_value = 0.0;
  MetricRecord metrics;
};

struct SweepResult {
  std::string axis;
  std::string scenario_label;
  std::string model; // formulation tag, or "netmeter" for the schedule
  std::vector<SweepRow> rows;
};

struct RedistributionRow {
  std::size_t user_id = 0;
  double omega = 0.0; // mean over periods
  double price_at_eta_min = 0.0;
  double price_at_eta_max = 0.0;
  double demand_at_eta_min = 0.0;
  double demand_at_eta_max = 0.0;
};

struct EtaSweep {
  SweepResult sweep;
  std::vector<RedistributionRow> redistribution;
};

struct ComparisonRow {
  std::size_t period = 0; // one-based
  double normal_price = 0.0;
  double nm_price = 0.0;
  double normal_load = 0.0;
  double nm_load = 0.0;
  double normal_revenue = 0.0;
  double nm_revenue = 0.0;
  double nm_sellback = 0.0;
};

using Schedule = std::function<Formulation(std::size_t period)>;

namespace experiments {

/// Weights of the discrimination and net-metering experiments on the
/// reference scenario. A light cost weight keeps every user's unconstrained
/// price below their willingness, the regime in which the bound eta* is the
/// spread of the optimal prices; with e2 = 1 the willingness bounds bind for
/// the low-omega users and the price spread never reaches eta*.
inline Weights reference_weights() {
  Weights w;
  w.e2 = 0.05;
  return w;
}

inline std::vector<double> default_e1_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 10; ++k)
    g.push_back(0.5 * k);
  return g;
}

inline std::vector<double> default_eta_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 15; ++k)
    g.push_back(0.1 * k);
  return g;
}

inline std::vector<double> default_e2_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k)
    g.push_back(0.5 * k);
  return g;
}

inline Schedule uniform_schedule(Formulation f) {
  return [f](std::size_t) { return f; };
}

/// Plain model in the first and last periods, `nm` elsewhere.
inline Schedule net_metering_schedule(const Scenario &sc, Formulation nm = Formulation::F4R1,
                                      Formulation plain = Formulation::F1) {
  const std::size_t last = sc.n_periods == 0 ? 0 : sc.n_periods - 1;
  return [=](std::size_t k) { return k == 0 || k == last ? plain : nm; };
}

inline void check_grid(const std::vector<double> &grid, const char *name) {
  if (grid.empty())
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw Error(ErrorCode::InvalidArgument, std::string(name) + " grid must be ascending");
}

inline PeriodMetrics period_metrics(const PricingOutcome &o, const PeriodData &d) {
  PeriodMetrics pm;
  const bool nm = is_net_metering(o.formulation);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (nm) {
      const double Z = o.demands[i];
      const double P = o.prices[i];
      pm.price.push_back(P);
      pm.net.push_back(Z);
      pm.elastic.push_back(std::max(0.0, Z + d.s[i] - d.m[i]));
      pm.utility.push_back(consumer::prosumer_utility(Z, d.s[i], d.m[i], d.omega[i], P, d.alpha[i]));
      pm.sellback += std::max(0.0, -Z);
      pm.revenue += P * Z;
    } else {
      const double q = o.prices[i] + o.env.p_b;
      const double x = o.demands[i];
      pm.price.push_back(q);
      pm.net.push_back(x);
      pm.elastic.push_back(x);
      pm.utility.push_back(consumer::utility(x, d.omega[i], q, d.alpha[i]));
      pm.revenue += q * x;
    }
  }
  return pm;
}

/// Aggregates a day (or any subset of periods) of outcomes.
inline MetricRecord day_metrics(const std::vector<PricingOutcome> &outcomes,
                                const std::vector<PeriodData> &data) {
  MetricRecord r;
  if (outcomes.empty())
    return r;
  const std::size_t n = data.front().size();
  std::vector<double> utility(n, 0.0), elastic(n, 0.0);
  double price_sum = 0.0;
  std::size_t price_count = 0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const PricingOutcome &o = outcomes[k];
    const PeriodMetrics pm = period_metrics(o, data[k]);
    for (std::size_t i = 0; i < n; ++i) {
      price_sum += pm.price[i];
      ++price_count;
      utility[i] += pm.utility[i];
      elastic[i] += pm.elastic[i];
      r.total_elastic_load += pm.net[i];
    }
    r.revenue += pm.revenue;
    r.sellback_total += pm.sellback;
    r.objective += o.objective;
    r.solver_objective += o.solver_objective;
    r.cost_term += o.cost_term;
    r.welfare_penalty += o.welfare_penalty;
    r.penalty_term += o.penalty_term;
    r.price_spread = std::max(r.price_spread, o.price_spread);
  }
  r.avg_price = price_sum / static_cast<double>(price_count);
  double mean_u = 0.0, mean_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_u += utility[i];
    mean_x += elastic[i];
  }
  mean_u /= static_cast<double>(n);
  mean_x /= static_cast<double>(n);
  double var = 0.0;
  for (double x : elastic)
    var += (x - mean_x) * (x - mean_x);
  r.avg_consumer_utility = mean_u;
  r.demand_stddev = std::sqrt(var / static_cast<double>(n));
  return r;
}

/// Metric record of a single period's outcome.
inline MetricRecord metrics(const PricingOutcome &o, const PeriodData &d) {
  return day_metrics({o}, {d});
}

/// The reference population with the net-metering base price and the default
/// solar profile attached.
inline Scenario net_metering_reference(std::uint64_t seed = kReferenceSeed,
                                       std::size_t n_users = kReferenceUsers) {
  return scenario::attach_solar(scenario::generate_reference(seed, n_users, kNetMeteringBasePrice),
                                default_solar_profile(), 1.0);
}

inline std::vector<std::size_t> all_periods(const Scenario &sc) {
  std::vector<std::size_t> k(sc.n_periods);
  for (std::size_t i = 0; i < k.size(); ++i)
    k[i] = i;
  return k;
}

struct DayResult {
  std::vector<PricingOutcome> outcomes;
  std::vector<PeriodData> data;
  MetricRecord metrics;
};

inline DayResult solve_day(const Scenario &sc, const Schedule &schedule, const Weights &w,
                           const Eta &eta, const std::vector<std::size_t> &periods) {
  DayResult day;
  const RetailEnv env = RetailEnv::from(sc, eta);
  for (std::size_t k : periods) {
    day.outcomes.push_back(solve_period(sc, k, schedule(k), w, env));
    day.data.push_back(scenario::period_data(sc, k));
  }
  day.metrics = day_metrics(day.outcomes, day.data);
  return day;
}

inline std::vector<RedistributionRow> redistribution(const Scenario &sc, const DayResult &lo,
                                                     const DayResult &hi) {
  std::vector<RedistributionRow> rows;
  for (std::size_t i = 0; i < sc.n_users; ++i) {
    RedistributionRow r;
    r.user_id = i;
    for (std::size_t k = 0; k < lo.outcomes.size(); ++k) {
      const PeriodMetrics a = period_metrics(lo.outcomes[k], lo.data[k]);
      const PeriodMetrics b = period_metrics(hi.outcomes[k], hi.data[k]);
      r.omega += lo.data[k].omega[i];
      r.price_at_eta_min += a.price[i];
      r.price_at_eta_max += b.price[i];
      r.demand_at_eta_min += a.elastic[i];
      r.demand_at_eta_max += b.elastic[i];
    }
    const double periods = static_cast<double>(lo.outcomes.size());
    r.omega /= periods;
    r.price_at_eta_min /= periods;
    r.price_at_eta_max /= periods;
    rows.push_back(r);
  }
  return rows;
}

inline EtaSweep sweep_eta_schedule(const Scenario &sc, const Schedule &schedule,
                                   const std::string &model, const Weights &w,
                                   const std::vector<double> &eta_grid,
                                   const std::vector<std::size_t> &periods) {
  check_grid(eta_grid, "eta");
  EtaSweep out;
  out.sweep.axis = "eta";
  out.sweep.scenario_label = sc.label;
  out.sweep.model = model;
  DayResult first, last;
  for (std::size_t g = 0; g < eta_grid.size(); ++g) {
    DayResult day = solve_day(sc, schedule, w, Eta::bounded(eta_grid[g]), periods);
    out.sweep.rows.push_back({eta_grid[g], day.metrics});
    if (g == 0)
      first = day;
    if (g + 1 == eta_grid.size())
      last = std::move(day);
  }
  out.redistribution = redistribution(sc, first, last);
  return out;
}

} // namespace experiments

/// Sweeps the discrimination bound with one formulation in every period.
inline EtaSweep sweep_eta(const Scenario &sc, Formulation f, const Weights &w,
                          const std::vector<double> &eta_grid = experiments::default_eta_grid()) {
  return experiments::sweep_eta_schedule(sc, experiments::uniform_schedule(f),
                                         std::string(tag(f)), w, eta_grid,
                                         experiments::all_periods(sc));
}

/// Sweeps the discrimination bound under the net-metering schedule.
inline EtaSweep sweep_eta_net_metering(
    const Scenario &sc, const Weights &w,
    const std::vector<double> &eta_grid = experiments::default_eta_grid()) {
  return experiments::sweep_eta_schedule(sc, experiments::net_metering_schedule(sc), "netmeter",
                                         w, eta_grid, experiments::all_periods(sc));
}

/// Sweeps e1 (other weights fixed) for each formulation; uniform pricing by default.
inline std::vector<SweepResult>
sweep_e1(const Scenario &sc, const std::vector<Formulation> &formulations, const Weights &base,
         const std::vector<double> &e1_grid = experiments::default_e1_grid(),
         const Eta &eta = Eta::bounded(0.0)) {
  experiments::check_grid(e1_grid, "e1");
  std::vector<SweepResult> out;
  for (Formulation f : formulations) {
    SweepResult r;
    r.axis = "e1";
    r.scenario_label = sc.label;
    r.model = std::string(tag(f));
    for (double e1 : e1_grid) {
      Weights w = base;
      w.e1 = e1;
      const auto day = experiments::solve_day(sc, experiments::uniform_schedule(f), w, eta,
                                              experiments::all_periods(sc));
      r.rows.push_back({e1, day.metrics});
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Sweeps e2 under the net-metering schedule and totals sell-back over the
/// net-metered periods (all but the first and last).
inline SweepResult sweep_e2_sellback(
    const Scenario &sc, const Weights &base,
    const std::vector<double> &e2_grid = experiments::default_e2_grid(),
    const Eta &eta = Eta::bounded(0.0)) {
  experiments::check_grid(e2_grid, "e2");
  std::vector<std::size_t> periods;
  for (std::size_t k = 1; k + 1 < sc.n_periods; ++k)
    periods.push_back(k);
  SweepResult r;
  r.axis = "e2";
  r.scenario_label = sc.label;
  r.model = "netmeter";
  for (double e2 : e2_grid) {
    Weights w = base;
    w.e2 = e2;
    const auto day = experiments::solve_day(sc, experiments::net_metering_schedule(sc), w, eta,
                                            periods);
    r.rows.push_back({e2, day.metrics});
  }
  return r;
}

/// Period-by-period comparison of plain pricing (F1, no generation credited:
/// consumers buy m + x) against the net-metering schedule.
inline std::vector<ComparisonRow> compare_net_metering(const Scenario &sc, const Weights &w,
                                                       const Eta &eta = Eta::bounded(0.0)) {
  const auto schedule = experiments::net_metering_schedule(sc);
  const RetailEnv env = RetailEnv::from(sc, eta);
  std::vector<ComparisonRow> rows;
  for (std::size_t k = 0; k < sc.n_periods; ++k) {
    const PeriodData d = scenario::period_data(sc, k);
    const PricingOutcome normal = solve_period(sc, k, Formulation::F1, w, env);
    const Formulation f = schedule(k);
    const PricingOutcome nm = f == Formulation::F1 ? normal : solve_period(sc, k, f, w, env);
    ComparisonRow r;
    r.period = k + 1;
    const double n = static_cast<double>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double q = normal.prices[i] + sc.p_b;
      r.normal_price += q / n;
      r.normal_load += d.m[i] + normal.demands[i];
      r.normal_revenue += sc.p_b * d.m[i] + q * normal.demands[i];
    }
    if (is_net_metering(nm.formulation)) {
      for (std::size_t i = 0; i < d.size(); ++i) {
        r.nm_price += nm.prices[i] / n;
        r.nm_load += nm.demands[i];
        r.nm_revenue += nm.prices[i] * nm.demands[i];
        r.nm_sellback += std::max(0.0, -nm.demands[i]);
      }
    } else {
      r.nm_price = r.normal_price;
      r.nm_load = r.normal_load;
      r.nm_revenue = r.normal_revenue;
    }
    rows.push_back(r);
  }
  return rows;
}

namespace csv {

inline std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline std::string join(const std::vector<std::string> &cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i)
      line += ',';
    line += cells[i];
  }
  return line + '\n';
}

inline std::string sweep(const SweepResult &r) {
  std::string out = join({r.axis, "avg_price", "revenue", "total_elastic_load",
                          "avg_consumer_utility", "demand_stddev", "sellback_total", "objective",
                          "solver_objective", "cost_term", "welfare_penalty", "penalty_term",
                          "price_spread"});
  for (const auto &row : r.rows) {
    const MetricRecord &m = row.metrics;
    out += join({number(row.axis_value), number(m.avg_price), number(m.revenue),
                 number(m.total_elastic_load), number(m.avg_consumer_utility),
                 number(m.demand_stddev), number(m.sellback_total), number(m.objective),
                 number(m.solver_objective), number(m.cost_term), number(m.welfare_penalty),
                 number(m.penalty_term), number(m.price_spread)});
  }
  return out;
}

inline std::string redistribution(const std::vector<RedistributionRow> &rows) {
  std::string out = join({"user_id", "omega", "price_at_eta_min", "price_at_eta_max",
                          "demand_at_eta_min", "demand_at_eta_max"});
  for (const auto &r : rows)
    out += join({std::to_string(r.user_id), number(r.omega), number(r.price_at_eta_min),
                 number(r.price_at_eta_max), number(r.demand_at_eta_min),
                 number(r.demand_at_eta_max)});
  return out;
}

inline std::string comparison(const std::vector<ComparisonRow> &rows) {
  std::string out = join({"period", "normal_price", "nm_price", "normal_load", "nm_load",
                          "normal_revenue", "nm_revenue", "nm_sellback"});
  for (const auto &r : rows)
    out += join({std::to_string(r.period), number(r.normal_price), number(r.nm_price),
                 number(r.normal_load), number(r.nm_load), number(r.normal_revenue),
                 number(r.nm_revenue), number(r.nm_sellback)});
  return out;
}

} // namespace csv
} // namespace gridprice

#endif
