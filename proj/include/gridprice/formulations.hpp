#ifndef GRIDPRICE_FORMULATIONS_HPP
#define GRIDPRICE_FORMULATIONS_HPP

// Retailer pricing problems for one period.
//
// The exact retailer problem (best-response demand x = max(0, (w - q)/a)) is
// non-convex. Its convex relaxations are lowered onto qp::QpProblem:
//
//   F1    demand replaced by the linear response, prices kept where it is >= 0
//   F2    linear response everywhere, plus a min(0, response) penalty
//   F3    demand as a free variable tied to the response by a gamma penalty
//   F4R1  net-metering analogue of F1 (prosumers with on-site generation)
//   F4R2  net-metering analogue of F2
//
// Oracle0 / Oracle4 solve the exact problems by exhaustive grid search for
// very small populations. All problems share the discrimination band
// max(p) - min(p) <= eta, lowered through two auxiliary variables
// (ceiling >= p_i, floor <= p_i, ceiling - floor <= eta).

#include "gridprice/consumer.hpp"
#include "gridprice/error.hpp"
#include "gridprice/qp.hpp"
#include "gridprice/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gridprice {

struct Weights {
  double e1 = 1.0; // revenue
  double e2 = 1.0; // quadratic cost of serving the aggregate load
  double e3 = 1.0; // welfare penalty
  std::optional<double> gamma; // F3 consistency penalty, defaults to 10 max(e)

  double effective_gamma() const {
    return gamma ? *gamma : 10.0 * std::max({e1, e2, e3});
  }

  void validate() const {
    if (!(e1 >= 0) || !(e2 >= 0) || !(e3 >= 0))
      throw Error(ErrorCode::InvalidArgument, "weights must be nonnegative");
    if (e1 == 0 && e2 == 0 && e3 == 0)
      throw Error(ErrorCode::InvalidArgument, "at least one of e1, e2, e3 must be positive");
    if (gamma && !(*gamma >= 0))
      throw Error(ErrorCode::InvalidArgument, "gamma must be nonnegative");
  }
};

/// Discrimination level: a fixed bound, no bound, or a decision variable
/// with a linear cost (which may be zero).
struct Eta {
  enum class Kind { Bounded, Unbounded, Free };
  Kind kind = Kind::Unbounded;
  double value = 0.0; // bound for Bounded, cost weight for Free

  static Eta bounded(double v) { return {Kind::Bounded, v}; }
  static Eta unbounded() { return {Kind::Unbounded, 0.0}; }
  static Eta free(double cost = 0.0) { return {Kind::Free, cost}; }

  bool is_bounded() const { return kind == Kind::Bounded; }
};

struct RetailEnv {
  double p_b = kReferenceBasePrice;
  double price_cap = kReferencePriceCap;
  Eta eta = Eta::unbounded();

  static RetailEnv from(const Scenario &sc, Eta eta) { return {sc.p_b, sc.price_cap, eta}; }

  void validate() const {
    if (!(p_b >= 0))
      throw Error(ErrorCode::InvalidArgument, "base price must be nonnegative");
    if (!(price_cap > 0))
      throw Error(ErrorCode::InvalidArgument, "price cap must be positive");
    if (eta.kind == Eta::Kind::Bounded && !(eta.value >= 0))
      throw Error(ErrorCode::InvalidArgument, "eta must be nonnegative");
    if (eta.kind == Eta::Kind::Free && !(eta.value >= 0))
      throw Error(ErrorCode::InvalidArgument, "eta cost must be nonnegative");
  }
};

enum class Formulation { F1, F2, F3, F4R1, F4R2, Oracle0, Oracle4 };

inline constexpr std::string_view tag(Formulation f) {
  switch (f) {
  case Formulation::F1: return "f1";
  case Formulation::F2: return "f2";
  case Formulation::F3: return "f3";
  case Formulation::F4R1: return "f4r1";
  case Formulation::F4R2: return "f4r2";
  case Formulation::Oracle0: return "oracle0";
  case Formulation::Oracle4: return "oracle4";
  }
  return "?";
}

inline Formulation parse_formulation(std::string_view s) {
  for (Formulation f : {Formulation::F1, Formulation::F2, Formulation::F3, Formulation::F4R1,
                        Formulation::F4R2, Formulation::Oracle0, Formulation::Oracle4})
    if (tag(f) == s)
      return f;
  throw Error(ErrorCode::UnknownFormulation, "unknown formulation '" + std::string(s) + "'");
}

inline bool is_net_metering(Formulation f) {
  return f == Formulation::F4R1 || f == Formulation::F4R2 || f == Formulation::Oracle4;
}

/// Economic terms of an outcome. For the plain model revenue is
/// sum (p_i + p_b) x_i; under net metering it is sum P_i Z_i.
struct EconomicTerms {
  double revenue = 0.0;
  double cost_term = 0.0;       // e2-weighted
  double welfare_penalty = 0.0; // e3-weighted
  double objective = 0.0;       // e1 revenue - cost_term - welfare_penalty
};

struct PricingOutcome {
  Formulation formulation = Formulation::F1;
  std::size_t period = 0; // zero-based
  Weights weights;
  RetailEnv env;
  std::vector<double> prices;  // p_i (plain) or P_i (net metering)
  std::vector<double> demands; // x_i (plain) or Z_i (net metering)
  double revenue = 0.0;
  double cost_term = 0.0;
  double welfare_penalty = 0.0;
  double objective = 0.0;        // exact retailer objective at (prices, demands)
  double solver_objective = 0.0; // the relaxation's own objective at its optimum
  double penalty_term = 0.0;     // relaxation-only term inside solver_objective
  double price_spread = 0.0;
  qp::Status status = qp::Status::Optimal;
  int iterations = 0;
  qp::KktResiduals kkt;
  std::vector<double> variables; // full QP primal, empty for oracles
};

/// Where each block of variables lives in the lowered QP. Offsets are -1
/// when the block is absent.
struct VariableLayout {
  qp::Index users = 0;
  qp::Index price = 0;
  qp::Index aux = -1;     // x (F3), t (F2) or u (F4R2), one per user
  qp::Index ceiling = -1; // band auxiliaries
  qp::Index floor = -1;
  qp::Index eta = -1;     // eta as a decision variable
  qp::Index dim = 0;
};

struct LoweredProblem {
  qp::QpProblem qp;
  VariableLayout layout;
  double constant = 0.0; // minimized value = qp objective + constant
  Formulation formulation = Formulation::F1;
};

namespace formulations {

using qp::Index;
using qp::MatrixXd;
using qp::VectorXd;

/// sum_k coef_k v_k + offset
struct Affine {
  std::vector<std::pair<Index, double>> terms;
  double offset = 0.0;

  Affine &add(Index var, double coef) {
    terms.emplace_back(var, coef);
    return *this;
  }
  Affine &operator+=(const Affine &o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    offset += o.offset;
    return *this;
  }
  VectorXd dense(Index n) const {
    VectorXd v = VectorXd::Zero(n);
    for (auto [i, c] : terms)
      v(i) += c;
    return v;
  }
};

/// Accumulates a quadratic objective in the QP's minimization convention.
class QuadraticObjective {
public:
  explicit QuadraticObjective(Index n) : Q_(MatrixXd::Zero(n, n)), c_(VectorXd::Zero(n)) {}

  /// += w f g
  void add_product(double w, const Affine &f, const Affine &g) {
    if (w == 0.0)
      return;
    const VectorXd a = f.dense(c_.size()), b = g.dense(c_.size());
    Q_ += w * (a * b.transpose() + b * a.transpose());
    c_ += w * (f.offset * b + g.offset * a);
    constant_ += w * f.offset * g.offset;
  }
  void add_square(double w, const Affine &f) { add_product(w, f, f); }
  void add_linear(double w, const Affine &f) {
    if (w == 0.0)
      return;
    c_ += w * f.dense(c_.size());
    constant_ += w * f.offset;
  }

  void install(LoweredProblem &lp) const {
    lp.qp.Q = 0.5 * (Q_ + Q_.transpose());
    lp.qp.c = c_;
    lp.constant = constant_;
  }

private:
  MatrixXd Q_;
  VectorXd c_;
  double constant_ = 0.0;
};

class RowBuilder {
public:
  explicit RowBuilder(Index n) : n_(n) {}

  /// f <= 0
  void leq_zero(const Affine &f) {
    rows_.push_back(f.dense(n_));
    rhs_.push_back(-f.offset);
  }

  /// f == 0
  void eq_zero(const Affine &f) {
    eq_rows_.push_back(f.dense(n_));
    eq_rhs_.push_back(-f.offset);
  }

  void install(qp::QpProblem &p) const {
    stack(rows_, rhs_, p.G, p.h);
    stack(eq_rows_, eq_rhs_, p.A, p.b);
  }

private:
  void stack(const std::vector<VectorXd> &rows, const std::vector<double> &rhs, MatrixXd &M,
             VectorXd &v) const {
    M = MatrixXd::Zero(static_cast<Index>(rows.size()), n_);
    v = VectorXd::Zero(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      M.row(static_cast<Index>(r)) = rows[r].transpose();
      v(static_cast<Index>(r)) = rhs[r];
    }
  }

  Index n_;
  std::vector<VectorXd> rows_, eq_rows_;
  std::vector<double> rhs_, eq_rhs_;
};

inline void check_period(const PeriodData &d) {
  const std::size_t n = d.omega.size();
  if (n == 0)
    throw Error(ErrorCode::InvalidArgument, "period has no users");
  if (d.alpha.size() != n || d.m.size() != n || d.s.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "period data vectors differ in length");
  for (double a : d.alpha)
    if (!(a > 0))
      throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
}

/// A zero-width band is lowered as equalities p_i = p_0: the inequality form
/// has no strictly feasible point, which interior-point methods handle badly.
inline bool uniform_pricing(const Eta &eta) { return eta.is_bounded() && eta.value == 0.0; }

inline VariableLayout make_layout(Index users, bool aux, const Eta &eta) {
  VariableLayout l;
  l.users = users;
  l.price = 0;
  Index next = users;
  if (aux) {
    l.aux = next;
    next += users;
  }
  if (eta.kind != Eta::Kind::Unbounded && !uniform_pricing(eta)) {
    l.ceiling = next++;
    l.floor = next++;
  }
  if (eta.kind == Eta::Kind::Free)
    l.eta = next++;
  l.dim = next;
  return l;
}

inline void add_band(const VariableLayout &l, const Eta &eta, RowBuilder &rows,
                     QuadraticObjective &obj) {
  if (eta.kind == Eta::Kind::Unbounded)
    return;
  if (uniform_pricing(eta)) {
    for (Index i = 1; i < l.users; ++i)
      rows.eq_zero(Affine{}.add(l.price + i, 1.0).add(l.price, -1.0));
    return;
  }
  for (Index i = 0; i < l.users; ++i) {
    rows.leq_zero(Affine{}.add(l.price + i, 1.0).add(l.ceiling, -1.0));
    rows.leq_zero(Affine{}.add(l.floor, 1.0).add(l.price + i, -1.0));
  }
  if (eta.kind == Eta::Kind::Bounded) {
    Affine width;
    width.add(l.ceiling, 1.0).add(l.floor, -1.0).offset = -eta.value;
    rows.leq_zero(width);
  } else {
    rows.leq_zero(Affine{}.add(l.ceiling, 1.0).add(l.floor, -1.0).add(l.eta, -1.0));
    rows.leq_zero(Affine{}.add(l.eta, -1.0));
    obj.add_linear(eta.value, Affine{}.add(l.eta, 1.0));
  }
}

inline void set_price_bounds(LoweredProblem &lp, double cap) {
  const auto &l = lp.layout;
  lp.qp.lower = VectorXd::Constant(l.dim, -qp::kInf);
  lp.qp.upper = VectorXd::Constant(l.dim, qp::kInf);
  for (Index i = 0; i < l.users; ++i) {
    lp.qp.lower(l.price + i) = 0.0;
    lp.qp.upper(l.price + i) = cap;
  }
}

/// Linear best response (omega_i - p_b - p_i) / alpha_i in the price variable.
inline Affine linear_demand(const PeriodData &d, double p_b, const VariableLayout &l,
                            Index i) {
  const std::size_t u = static_cast<std::size_t>(i);
  Affine x;
  x.add(l.price + i, -1.0 / d.alpha[u]).offset = (d.omega[u] - p_b) / d.alpha[u];
  return x;
}

/// Objective shared by F1 and F2 after substituting the linear response,
/// in minimization form.
inline void add_substituted_objective(const PeriodData &d, const Weights &w, double p_b,
                                      const VariableLayout &l, QuadraticObjective &obj) {
  Affine total;
  for (Index i = 0; i < l.users; ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    const Affine x = linear_demand(d, p_b, l, i);
    Affine q;
    q.add(l.price + i, 1.0).offset = p_b;
    obj.add_product(-w.e1, q, x);
    Affine scaled; // (p_i + p_b) / alpha_i  ==  omega_i/alpha_i - x_i
    scaled.add(l.price + i, 1.0 / d.alpha[u]).offset = p_b / d.alpha[u];
    obj.add_square(w.e3, scaled);
    total += x;
  }
  obj.add_square(w.e2, total);
}

} // namespace formulations

inline LoweredProblem build_f1(const PeriodData &d, const Weights &w, const RetailEnv &env) {
  using namespace formulations;
  check_period(d);
  w.validate();
  env.validate();
  const double min_omega = *std::min_element(d.omega.begin(), d.omega.end());
  if (env.p_b > min_omega)
    throw Error(ErrorCode::InfeasibleEnv,
                "base price exceeds the smallest willingness; no price keeps every "
                "linear demand nonnegative");
  LoweredProblem lp;
  lp.formulation = Formulation::F1;
  lp.layout = make_layout(static_cast<Index>(d.size()), false, env.eta);
  QuadraticObjective obj(lp.layout.dim);
  RowBuilder rows(lp.layout.dim);
  add_substituted_objective(d, w, env.p_b, lp.layout, obj);
  for (Index i = 0; i < lp.layout.users; ++i) {
    Affine willing; // p_i + p_b - omega_i <= 0
    willing.add(lp.layout.price + i, 1.0).offset = env.p_b - d.omega[static_cast<std::size_t>(i)];
    rows.leq_zero(willing);
  }
  add_band(lp.layout, env.eta, rows, obj);
  obj.install(lp);
  rows.install(lp.qp);
  set_price_bounds(lp, env.price_cap);
  return lp;
}

inline LoweredProblem build_f2(const PeriodData &d, const Weights &w, const RetailEnv &env) {
  using namespace formulations;
  check_period(d);
  w.validate();
  env.validate();
  LoweredProblem lp;
  lp.formulation = Formulation::F2;
  lp.layout = make_layout(static_cast<Index>(d.size()), true, env.eta);
  QuadraticObjective obj(lp.layout.dim);
  RowBuilder rows(lp.layout.dim);
  add_substituted_objective(d, w, env.p_b, lp.layout, obj);
  for (Index i = 0; i < lp.layout.users; ++i) {
    const Index t = lp.layout.aux + i;
    obj.add_linear(-1.0, Affine{}.add(t, 1.0));
    Affine gap = linear_demand(d, env.p_b, lp.layout, i); // t_i - x_i <= 0
    for (auto &term : gap.terms)
      term.second = -term.second;
    gap.offset = -gap.offset;
    gap.add(t, 1.0);
    rows.leq_zero(gap);
  }
  add_band(lp.layout, env.eta, rows, obj);
  obj.install(lp);
  rows.install(lp.qp);
  set_price_bounds(lp, env.price_cap);
  for (Index i = 0; i < lp.layout.users; ++i)
    lp.qp.upper(lp.layout.aux + i) = 0.0;
  return lp;
}

inline LoweredProblem build_f3(const PeriodData &d, const Weights &w, const RetailEnv &env) {
  using namespace formulations;
  check_period(d);
  w.validate();
  env.validate();
  const double gamma = w.effective_gamma();
  if (!(gamma > 0))
    throw Error(ErrorCode::InvalidArgument, "F3 needs a positive gamma");
  LoweredProblem lp;
  lp.formulation = Formulation::F3;
  lp.layout = make_layout(static_cast<Index>(d.size()), true, env.eta);
  QuadraticObjective obj(lp.layout.dim);
  RowBuilder rows(lp.layout.dim);
  Affine total;
  for (Index i = 0; i < lp.layout.users; ++i) {
    const Index x = lp.layout.aux + i;
    Affine q;
    q.add(lp.layout.price + i, 1.0).offset = env.p_b;
    const Affine xv = Affine{}.add(x, 1.0);
    obj.add_product(-w.e1, q, xv);
    obj.add_square(w.e3, q);
    Affine gap = linear_demand(d, env.p_b, lp.layout, i); // x_i - response_i
    for (auto &term : gap.terms)
      term.second = -term.second;
    gap.offset = -gap.offset;
    gap.add(x, 1.0);
    obj.add_square(gamma, gap);
    total += xv;
  }
  obj.add_square(w.e2, total);
  add_band(lp.layout, env.eta, rows, obj);
  obj.install(lp);
  rows.install(lp.qp);
  set_price_bounds(lp, env.price_cap);
  for (Index i = 0; i < lp.layout.users; ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    lp.qp.lower(lp.layout.aux + i) = 0.0;
    lp.qp.upper(lp.layout.aux + i) = d.omega[u] / d.alpha[u];
  }
  return lp;
}

enum class NetMeteringVariant { Relaxed1, Relaxed2 };

/// Net-metering retailer problem with per-user prices P_i and the linear
/// response Z_i = m_i - s_i + (omega_i - P_i)/alpha_i. The base price plays
/// no role: P_i is the full per-unit rate.
inline LoweredProblem build_f4(const PeriodData &d, const Weights &w, const RetailEnv &env,
                               NetMeteringVariant variant) {
  using namespace formulations;
  check_period(d);
  w.validate();
  env.validate();
  const bool relaxed2 = variant == NetMeteringVariant::Relaxed2;
  LoweredProblem lp;
  lp.formulation = relaxed2 ? Formulation::F4R2 : Formulation::F4R1;
  lp.layout = make_layout(static_cast<Index>(d.size()), relaxed2, env.eta);
  QuadraticObjective obj(lp.layout.dim);
  RowBuilder rows(lp.layout.dim);
  Affine total;
  for (Index i = 0; i < lp.layout.users; ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    const Index P = lp.layout.price + i;
    Affine z;
    z.add(P, -1.0 / d.alpha[u]).offset = d.m[u] - d.s[u] + d.omega[u] / d.alpha[u];
    obj.add_product(-w.e1, Affine{}.add(P, 1.0), z);
    obj.add_square(w.e3, Affine{}.add(P, 1.0 / d.alpha[u])); // Z + s - m - omega/alpha
    total += z;
    if (relaxed2) {
      const Index slack = lp.layout.aux + i;
      obj.add_linear(-1.0, Affine{}.add(slack, 1.0));
      Affine gap; // u_i - (omega_i - P_i)/alpha_i <= 0
      gap.add(slack, 1.0).add(P, 1.0 / d.alpha[u]).offset = -d.omega[u] / d.alpha[u];
      rows.leq_zero(gap);
    } else {
      Affine willing; // P_i - omega_i <= 0
      willing.add(P, 1.0).offset = -d.omega[u];
      rows.leq_zero(willing);
    }
  }
  obj.add_square(w.e2, total);
  Affine negative_total = total; // -sum Z <= 0
  for (auto &term : negative_total.terms)
    term.second = -term.second;
  negative_total.offset = -negative_total.offset;
  rows.leq_zero(negative_total);
  add_band(lp.layout, env.eta, rows, obj);
  obj.install(lp);
  rows.install(lp.qp);
  set_price_bounds(lp, env.price_cap);
  if (relaxed2)
    for (Index i = 0; i < lp.layout.users; ++i)
      lp.qp.upper(lp.layout.aux + i) = 0.0;
  return lp;
}

/// Exact retailer objective of the plain model at given prices and demands.
inline EconomicTerms evaluate_plain(const PeriodData &d, const Weights &w, double p_b,
                                    const std::vector<double> &prices,
                                    const std::vector<double> &demands) {
  EconomicTerms t;
  double load = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    t.revenue += (prices[i] + p_b) * demands[i];
    load += demands[i];
    const double gap = demands[i] - d.omega[i] / d.alpha[i];
    dev += gap * gap;
  }
  t.cost_term = w.e2 * load * load;
  t.welfare_penalty = w.e3 * dev;
  t.objective = w.e1 * t.revenue - t.cost_term - t.welfare_penalty;
  return t;
}

/// Exact retailer objective under net metering at given prices and net
/// transactions.
inline EconomicTerms evaluate_net_metering(const PeriodData &d, const Weights &w,
                                           const std::vector<double> &prices,
                                           const std::vector<double> &net) {
  EconomicTerms t;
  double load = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    t.revenue += prices[i] * net[i];
    load += net[i];
    const double gap = net[i] + d.s[i] - d.m[i] - d.omega[i] / d.alpha[i];
    dev += gap * gap;
  }
  t.cost_term = w.e2 * load * load;
  t.welfare_penalty = w.e3 * dev;
  t.objective = w.e1 * t.revenue - t.cost_term - t.welfare_penalty;
  return t;
}

/// Objective of F1 in its price-only form (linear response substituted).
inline double f1_objective(const PeriodData &d, const Weights &w, double p_b,
                           const std::vector<double> &prices) {
  double revenue = 0.0, load = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double q = prices[i] + p_b;
    const double x = (d.omega[i] - q) / d.alpha[i];
    revenue += q * x;
    load += x;
    dev += (q / d.alpha[i]) * (q / d.alpha[i]);
  }
  return w.e1 * revenue - w.e2 * load * load - w.e3 * dev;
}

/// F1 objective plus the sum of min(0, linear response).
inline double f2_objective(const PeriodData &d, const Weights &w, double p_b,
                           const std::vector<double> &prices) {
  double penalty = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    penalty += std::min(0.0, (d.omega[i] - prices[i] - p_b) / d.alpha[i]);
  return f1_objective(d, w, p_b, prices) + penalty;
}

namespace formulations {

inline double spread(const std::vector<double> &v) {
  if (v.empty())
    return 0.0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

inline void fill_terms(PricingOutcome &o, const EconomicTerms &t) {
  o.revenue = t.revenue;
  o.cost_term = t.cost_term;
  o.welfare_penalty = t.welfare_penalty;
  o.objective = t.objective;
}

/// Best point of an exhaustive search over per-user candidate values.
/// `value(i, k)` and `load(i, k)` give user i's separable objective share and
/// demand at grid index k; the total is sum value - e2 (sum load)^2.
struct GridSearch {
  const std::vector<double> &grid;
  double band;
  double e2;
  bool require_nonnegative_load;
  std::function<double(std::size_t, std::size_t)> value;
  std::function<double(std::size_t, std::size_t)> load;
  std::size_t users;

  std::vector<std::size_t> best;
  double best_value = -qp::kInf;

  void run() {
    std::vector<std::vector<double>> v(users), x(users);
    for (std::size_t i = 0; i < users; ++i)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        v[i].push_back(value(i, k));
        x[i].push_back(load(i, k));
      }
    std::vector<std::size_t> cur(users);
    recurse(0, 0.0, 0.0, qp::kInf, -qp::kInf, cur, v, x);
  }

private:
  void recurse(std::size_t i, double vsum, double xsum, double lo, double hi,
               std::vector<std::size_t> &cur, const std::vector<std::vector<double>> &v,
               const std::vector<std::vector<double>> &x) {
    if (i == users) {
      if (require_nonnegative_load && xsum < 0)
        return;
      const double total = vsum - e2 * xsum * xsum;
      if (total > best_value) {
        best_value = total;
        best = cur;
      }
      return;
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double g = grid[k];
      const double nlo = std::min(lo, g), nhi = std::max(hi, g);
      if (nhi - nlo > band + 1e-12)
        continue;
      cur[i] = k;
      recurse(i + 1, vsum + v[i][k], xsum + x[i][k], nlo, nhi, cur, v, x);
    }
  }
};

inline std::vector<double> price_grid(double cap, double step) {
  if (!(step > 0))
    throw Error(ErrorCode::InvalidArgument, "grid step must be positive");
  std::vector<double> g;
  const auto count = static_cast<std::size_t>(std::floor(cap / step + 1e-9));
  for (std::size_t k = 0; k <= count; ++k)
    g.push_back(static_cast<double>(k) * step);
  if (cap - g.back() > 1e-12)
    g.push_back(cap);
  return g;
}

} // namespace formulations

inline constexpr std::size_t kOracleMaxUsers = 4;
inline constexpr double kDefaultGridStep = 0.01;

/// Exhaustive search of the exact retailer problem over the price grid
/// {0, step, 2 step, ...} on [0, cap], with demand given by the true best
/// response. Net-metering variant when `net_metering` is set.
inline PricingOutcome oracle_search(const PeriodData &d, const Weights &w,
                                    const RetailEnv &env, double grid_step,
                                    bool net_metering) {
  using namespace formulations;
  check_period(d);
  w.validate();
  env.validate();
  if (d.size() > kOracleMaxUsers)
    throw Error(ErrorCode::TooManyUsers, "grid oracle supports at most " +
                                             std::to_string(kOracleMaxUsers) + " users");
  const std::vector<double> grid = price_grid(env.price_cap, grid_step);
  const double band = env.eta.is_bounded() ? env.eta.value : qp::kInf;

  auto demand = [&](std::size_t i, double price) {
    if (net_metering)
      return consumer::prosumer_best_response(d.omega[i], price, d.alpha[i], d.m[i], d.s[i]).Z;
    return consumer::best_response(d.omega[i], price + env.p_b, d.alpha[i]);
  };
  auto share = [&](std::size_t i, std::size_t k) {
    const double price = grid[k];
    const double q = demand(i, price);
    if (net_metering) {
      const double gap = q + d.s[i] - d.m[i] - d.omega[i] / d.alpha[i];
      return w.e1 * price * q - w.e3 * gap * gap;
    }
    const double gap = q - d.omega[i] / d.alpha[i];
    return w.e1 * (price + env.p_b) * q - w.e3 * gap * gap;
  };
  GridSearch search{grid,
                    band,
                    w.e2,
                    net_metering,
                    share,
                    [&](std::size_t i, std::size_t k) { return demand(i, grid[k]); },
                    d.size(),
                    {},
                    -qp::kInf};
  search.run();
  if (search.best.empty())
    throw Error(ErrorCode::InfeasibleEnv, "no grid point satisfies the constraints");

  PricingOutcome o;
  o.formulation = net_metering ? Formulation::Oracle4 : Formulation::Oracle0;
  o.weights = w;
  o.env = env;
  for (std::size_t i = 0; i < d.size(); ++i) {
    o.prices.push_back(grid[search.best[i]]);
    o.demands.push_back(demand(i, o.prices.back()));
  }
  fill_terms(o, net_metering ? evaluate_net_metering(d, w, o.prices, o.demands)
                             : evaluate_plain(d, w, env.p_b, o.prices, o.demands));
  o.solver_objective = o.objective;
  o.price_spread = spread(o.prices);
  return o;
}

inline PricingOutcome oracle_f0(const PeriodData &d, const Weights &w, const RetailEnv &env,
                                double grid_step = kDefaultGridStep) {
  return oracle_search(d, w, env, grid_step, false);
}

inline PricingOutcome oracle_f4(const PeriodData &d, const Weights &w, const RetailEnv &env,
                                double grid_step = kDefaultGridStep) {
  return oracle_search(d, w, env, grid_step, true);
}

inline LoweredProblem build(Formulation f, const PeriodData &d, const Weights &w,
                            const RetailEnv &env) {
  switch (f) {
  case Formulation::F1: return build_f1(d, w, env);
  case Formulation::F2: return build_f2(d, w, env);
  case Formulation::F3: return build_f3(d, w, env);
  case Formulation::F4R1: return build_f4(d, w, env, NetMeteringVariant::Relaxed1);
  case Formulation::F4R2: return build_f4(d, w, env, NetMeteringVariant::Relaxed2);
  default: break;
  }
  throw Error(ErrorCode::UnknownFormulation,
              "formulation '" + std::string(tag(f)) + "' is not a QP");
}

/// Builds, solves and assembles the outcome of one relaxation for one period.
inline PricingOutcome solve_lowered(const LoweredProblem &lp, const PeriodData &d,
                                    const Weights &w, const RetailEnv &env,
                                    double tol = qp::kDefaultTol,
                                    int max_iter = qp::kDefaultMaxIter) {
  using namespace formulations;
  const qp::QpSolution sol = qp::solve_qp(lp.qp, tol, max_iter);
  if (sol.status == qp::Status::Infeasible)
    throw Error(ErrorCode::InfeasibleEnv,
                std::string(tag(lp.formulation)) + " has no feasible price vector");
  if (sol.status != qp::Status::Optimal)
    throw Error(ErrorCode::SolverFailure,
                std::string(tag(lp.formulation)) + ": solver did not converge");

  const auto &l = lp.layout;
  PricingOutcome o;
  o.formulation = lp.formulation;
  o.weights = w;
  o.env = env;
  o.status = sol.status;
  o.iterations = sol.iterations;
  o.kkt = {sol.dual_residual, sol.primal_residual, sol.complementarity_residual};
  o.variables.assign(sol.x.data(), sol.x.data() + sol.x.size());
  o.solver_objective = -(sol.objective + lp.constant);

  for (Index i = 0; i < l.users; ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    const double price = sol.x(l.price + i);
    o.prices.push_back(price);
    double demand = 0.0;
    switch (lp.formulation) {
    case Formulation::F1:
      demand = std::max(0.0, (d.omega[u] - price - env.p_b) / d.alpha[u]);
      break;
    case Formulation::F2:
      demand = consumer::best_response(d.omega[u], price + env.p_b, d.alpha[u]);
      break;
    case Formulation::F3:
      demand = std::clamp(sol.x(l.aux + i), 0.0, d.omega[u] / d.alpha[u]);
      break;
    case Formulation::F4R1:
      demand = d.m[u] - d.s[u] + std::max(0.0, (d.omega[u] - price) / d.alpha[u]);
      break;
    case Formulation::F4R2:
      demand = consumer::prosumer_best_response(d.omega[u], price, d.alpha[u], d.m[u], d.s[u]).Z;
      break;
    default: break;
    }
    o.demands.push_back(demand);
  }

  const bool nm = is_net_metering(lp.formulation);
  fill_terms(o, nm ? evaluate_net_metering(d, w, o.prices, o.demands)
                   : evaluate_plain(d, w, env.p_b, o.prices, o.demands));
  switch (lp.formulation) {
  case Formulation::F2:
  case Formulation::F4R2:
    for (Index i = 0; i < l.users; ++i)
      o.penalty_term += sol.x(l.aux + i);
    break;
  case Formulation::F3: {
    const double gamma = w.effective_gamma();
    for (Index i = 0; i < l.users; ++i) {
      const std::size_t u = static_cast<std::size_t>(i);
      const double gap =
          sol.x(l.aux + i) - (d.omega[u] - env.p_b - sol.x(l.price + i)) / d.alpha[u];
      o.penalty_term -= gamma * gap * gap;
    }
    break;
  }
  default: break;
  }
  o.price_spread = spread(o.prices);
  return o;
}

inline PricingOutcome solve_period(const Scenario &sc, std::size_t period, Formulation f,
                                   const Weights &w, const RetailEnv &env,
                                   double tol = qp::kDefaultTol,
                                   int max_iter = qp::kDefaultMaxIter) {
  const PeriodData d = scenario::period_data(sc, period);
  PricingOutcome o;
  if (f == Formulation::Oracle0)
    o = oracle_f0(d, w, env);
  else if (f == Formulation::Oracle4)
    o = oracle_f4(d, w, env);
  else
    o = solve_lowered(build(f, d, w, env), d, w, env, tol, max_iter);
  o.period = period;
  return o;
}

// Closed forms from the stationarity system of F1 with p_b = 0, no active
// bounds and no discrimination limit. `beta` multiplies the e2 term.

inline void check_closed_form_weights(const Weights &w, double alpha) {
  if (!(alpha > 0))
    throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  if (!(w.e1 * alpha + w.e3 > 0))
    throw Error(ErrorCode::DegenerateWeights, "e1 alpha + e3 must be positive");
}

inline std::vector<double> closed_form_prices(const std::vector<double> &omega,
                                              const Weights &w, double alpha,
                                              double beta = 1.0) {
  check_closed_form_weights(w, alpha);
  const double n = static_cast<double>(omega.size());
  const double sum_omega = std::accumulate(omega.begin(), omega.end(), 0.0);
  const double sum_p = (w.e1 + 2.0 * n * beta * w.e2 / alpha) * sum_omega /
                       (2.0 * (w.e1 + w.e3 / alpha + n * beta * w.e2 / alpha));
  const double coupling = 2.0 * beta * w.e2 / (alpha * alpha);
  const double denom = 2.0 * (w.e1 / alpha + w.e3 / (alpha * alpha));
  std::vector<double> p;
  for (double om : omega)
    p.push_back((w.e1 * om / alpha + coupling * sum_omega - coupling * sum_p) / denom);
  return p;
}

inline double eta_star(const std::vector<double> &omega, const Weights &w, double alpha) {
  check_closed_form_weights(w, alpha);
  if (omega.empty())
    return 0.0;
  auto [lo, hi] = std::minmax_element(omega.begin(), omega.end());
  return w.e1 * alpha * (*hi - *lo) / (2.0 * (alpha * w.e1 + w.e3));
}

inline double eta_star_net_metering(const std::vector<double> &omega,
                                    const std::vector<double> &s, const Weights &w,
                                    double alpha) {
  check_closed_form_weights(w, alpha);
  if (omega.size() != s.size())
    throw Error(ErrorCode::DimensionMismatch, "omega and s differ in length");
  if (omega.empty())
    return 0.0;
  auto [wlo, whi] = std::minmax_element(omega.begin(), omega.end());
  auto [slo, shi] = std::minmax_element(s.begin(), s.end());
  return w.e1 * alpha * (*whi - *wlo - alpha * (*slo - *shi)) / (2.0 * (w.e3 + alpha * w.e1));
}

/// Common alpha of a period; the closed forms assume one.
inline double common_alpha(const PeriodData &d) {
  formulations::check_period(d);
  for (double a : d.alpha)
    if (a != d.alpha.front())
      throw Error(ErrorCode::InvalidArgument, "closed forms need a common alpha");
  return d.alpha.front();
}

} // namespace gridprice

#endif
