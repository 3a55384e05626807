#ifndef GRIDPRICE_QP_HPP
#define GRIDPRICE_QP_HPP

// Dense convex QP solver.
//
//   minimize    1/2 x'Qx + c'x
//   subject to  Gx <= h,  Ax = b,  lower <= x <= upper
//
// Mehrotra predictor-corrector interior point on a Ruiz-equilibrated copy of
// the problem, followed by an active-set polish that re-solves the KKT system
// restricted to the identified active constraints. Infeasibility is certified
// by an elastic phase-1 LP when the main iteration does not converge.

#include "gridprice/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace gridprice::qp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
  MatrixXd Q;
  VectorXd c;
  MatrixXd G; // m x n, may have zero rows
  VectorXd h;
  MatrixXd A; // p x n, may have zero rows
  VectorXd b;
  VectorXd lower; // empty, or n entries with -inf for "no bound"
  VectorXd upper; // empty, or n entries with +inf for "no bound"

  Index dim() const { return c.size(); }

  /// Zero-constraint problem of dimension n.
  static QpProblem unconstrained(Index n) {
    QpProblem p;
    p.Q = MatrixXd::Zero(n, n);
    p.c = VectorXd::Zero(n);
    p.G.resize(0, n);
    p.h.resize(0);
    p.A.resize(0, n);
    p.b.resize(0);
    return p;
  }
};

enum class Status { Optimal, Infeasible, MaxIterations };

inline const char *to_string(Status s) {
  switch (s) {
  case Status::Optimal: return "optimal";
  case Status::Infeasible: return "infeasible";
  case Status::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

struct QpSolution {
  VectorXd x;
  VectorXd ineq_duals;  // >= 0, one per row of G
  VectorXd eq_duals;    // free, one per row of A
  VectorXd lower_duals; // >= 0, empty when the problem has no lower bounds
  VectorXd upper_duals; // >= 0, empty when the problem has no upper bounds
  double objective = 0.0;
  Status status = Status::MaxIterations;
  int iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
  double complementarity_residual = kInf;
  bool polished = false;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
};

inline constexpr double kDefaultTol = 1e-8;
inline constexpr int kDefaultMaxIter = 200;

namespace detail {

inline void require(bool ok, const std::string &what) {
  if (!ok)
    throw Error(ErrorCode::DimensionMismatch, what);
}

inline void check_dimensions(const QpProblem &p) {
  const Index n = p.c.size();
  require(p.Q.rows() == n && p.Q.cols() == n, "Q must be n x n");
  require(p.G.cols() == n || p.G.rows() == 0, "G must have n columns");
  require(p.G.rows() == p.h.size(), "G and h row counts differ");
  require(p.A.cols() == n || p.A.rows() == 0, "A must have n columns");
  require(p.A.rows() == p.b.size(), "A and b row counts differ");
  require(p.lower.size() == 0 || p.lower.size() == n,
          "lower bounds must be empty or have n entries");
  require(p.upper.size() == 0 || p.upper.size() == n,
          "upper bounds must be empty or have n entries");
}

inline double inf_norm(const MatrixXd &m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double inf_norm(const VectorXd &v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Problem with all inequalities (including finite bounds) stacked into G.
struct StandardForm {
  MatrixXd Q;
  VectorXd c;
  MatrixXd A;
  VectorXd b;
  MatrixXd G;
  VectorXd h;

  // Origin of each row of G so duals can be routed back.
  enum class Origin { Row, Lower, Upper };
  std::vector<Origin> origin;
  std::vector<Index> source;
};

inline StandardForm to_standard_form(const QpProblem &p) {
  const Index n = p.c.size();
  std::vector<Index> rows;
  for (Index i = 0; i < p.G.rows(); ++i) {
    if (std::isnan(p.h(i)) || p.h(i) == -kInf)
      throw Error(ErrorCode::InvalidArgument, "inequality right-hand side must be finite or +inf");
    if (std::isfinite(p.h(i)))
      rows.push_back(i);
  }
  Index m = static_cast<Index>(rows.size());
  for (Index j = 0; j < p.lower.size(); ++j)
    if (std::isfinite(p.lower(j)))
      ++m;
  for (Index j = 0; j < p.upper.size(); ++j)
    if (std::isfinite(p.upper(j)))
      ++m;

  StandardForm sf;
  sf.Q = p.Q;
  sf.c = p.c;
  sf.A = p.A.rows() == 0 ? MatrixXd(0, n) : p.A;
  sf.b = p.b;
  sf.G = MatrixXd::Zero(m, n);
  sf.h = VectorXd::Zero(m);
  Index r = 0;
  for (Index i : rows) {
    sf.G.row(r) = p.G.row(i);
    sf.h(r) = p.h(i);
    sf.origin.push_back(StandardForm::Origin::Row);
    sf.source.push_back(i);
    ++r;
  }
  for (Index j = 0; j < p.lower.size(); ++j) {
    if (!std::isfinite(p.lower(j)))
      continue;
    sf.G(r, j) = -1.0;
    sf.h(r) = -p.lower(j);
    sf.origin.push_back(StandardForm::Origin::Lower);
    sf.source.push_back(j);
    ++r;
  }
  for (Index j = 0; j < p.upper.size(); ++j) {
    if (!std::isfinite(p.upper(j)))
      continue;
    sf.G(r, j) = 1.0;
    sf.h(r) = p.upper(j);
    sf.origin.push_back(StandardForm::Origin::Upper);
    sf.source.push_back(j);
    ++r;
  }
  return sf;
}

/// Ruiz equilibration of the KKT matrix plus a scalar cost scaling.
/// Scaled variables satisfy x = D xs; scaled duals satisfy y = E ys / cost.
struct Scaling {
  VectorXd D;
  VectorXd Eeq;
  VectorXd Ein;
  double cost = 1.0;
};

inline Scaling equilibrate(StandardForm &sf, int passes = 25) {
  const Index n = sf.c.size();
  Scaling s;
  s.D = VectorXd::Ones(n);
  s.Eeq = VectorXd::Ones(sf.A.rows());
  s.Ein = VectorXd::Ones(sf.G.rows());
  auto inv_sqrt = [](double v) {
    if (v < 1e-8)
      return 1.0;
    return 1.0 / std::sqrt(std::min(v, 1e8));
  };
  for (int pass = 0; pass < passes; ++pass) {
    VectorXd dcol(n);
    for (Index j = 0; j < n; ++j) {
      double v = sf.Q.col(j).cwiseAbs().maxCoeff();
      if (sf.A.rows() > 0)
        v = std::max(v, sf.A.col(j).cwiseAbs().maxCoeff());
      if (sf.G.rows() > 0)
        v = std::max(v, sf.G.col(j).cwiseAbs().maxCoeff());
      dcol(j) = inv_sqrt(v);
    }
    VectorXd deq(sf.A.rows()), din(sf.G.rows());
    for (Index i = 0; i < sf.A.rows(); ++i)
      deq(i) = inv_sqrt(sf.A.row(i).cwiseAbs().maxCoeff());
    for (Index i = 0; i < sf.G.rows(); ++i)
      din(i) = inv_sqrt(sf.G.row(i).cwiseAbs().maxCoeff());

    sf.Q = dcol.asDiagonal() * sf.Q * dcol.asDiagonal();
    sf.c = dcol.cwiseProduct(sf.c);
    if (sf.A.rows() > 0) {
      sf.A = deq.asDiagonal() * sf.A * dcol.asDiagonal();
      sf.b = deq.cwiseProduct(sf.b);
    }
    if (sf.G.rows() > 0) {
      sf.G = din.asDiagonal() * sf.G * dcol.asDiagonal();
      sf.h = din.cwiseProduct(sf.h);
    }
    s.D = s.D.cwiseProduct(dcol);
    s.Eeq = s.Eeq.cwiseProduct(deq);
    s.Ein = s.Ein.cwiseProduct(din);
  }

  double qnorm = 0.0;
  for (Index j = 0; j < n; ++j)
    qnorm += sf.Q.col(j).cwiseAbs().maxCoeff();
  qnorm = n > 0 ? qnorm / static_cast<double>(n) : 0.0;
  double scale = std::max({1.0, qnorm, inf_norm(sf.c)});
  s.cost = std::clamp(1.0 / scale, 1e-4, 1e4);
  sf.Q *= s.cost;
  sf.c *= s.cost;
  return s;
}

struct IpmState {
  VectorXd x, y, z, s;
  int iterations = 0;
  bool converged = false;
};

struct Residuals {
  double dual = 0.0;
  double primal = 0.0;
  double gap = 0.0;
};

inline Residuals ipm_residuals(const StandardForm &sf, const IpmState &st) {
  Residuals r;
  VectorXd rd = sf.Q * st.x + sf.c;
  if (sf.A.rows() > 0)
    rd += sf.A.transpose() * st.y;
  if (sf.G.rows() > 0)
    rd += sf.G.transpose() * st.z;
  r.dual = inf_norm(rd);
  if (sf.A.rows() > 0)
    r.primal = inf_norm(VectorXd(sf.A * st.x - sf.b));
  if (sf.G.rows() > 0) {
    r.primal = std::max(r.primal, inf_norm(VectorXd(sf.G * st.x + st.s - sf.h)));
    r.gap = st.s.cwiseProduct(st.z).cwiseAbs().maxCoeff();
  }
  return r;
}

/// Symmetric quasi-definite Newton system, factored once per iteration and
/// solved with iterative refinement against the unregularized matrix.
class NewtonSystem {
public:
  NewtonSystem(const StandardForm &sf, const VectorXd &w, double delta)
      : n_(sf.c.size()), p_(sf.A.rows()) {
    MatrixXd H = sf.Q;
    if (sf.G.rows() > 0)
      H.noalias() += sf.G.transpose() * w.asDiagonal() * sf.G;
    exact_ = MatrixXd::Zero(n_ + p_, n_ + p_);
    exact_.topLeftCorner(n_, n_) = H;
    if (p_ > 0) {
      exact_.topRightCorner(n_, p_) = sf.A.transpose();
      exact_.bottomLeftCorner(p_, n_) = sf.A;
    }
    MatrixXd reg = exact_;
    reg.diagonal().head(n_).array() += delta;
    reg.diagonal().tail(p_).array() -= delta;
    lu_.compute(reg);
  }

  VectorXd solve(const VectorXd &rhs) const {
    VectorXd sol = lu_.solve(rhs);
    for (int k = 0; k < 3; ++k) {
      VectorXd res = rhs - exact_ * sol;
      sol += lu_.solve(res);
    }
    return sol;
  }

  Index n() const { return n_; }

private:
  Index n_, p_;
  MatrixXd exact_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

struct Direction {
  VectorXd dx, dy, dz, ds;
};

inline Direction newton_direction(const StandardForm &sf, const NewtonSystem &sys,
                                  const IpmState &st, const VectorXd &rd,
                                  const VectorXd &re, const VectorXd &ri,
                                  const VectorXd &rc) {
  const Index n = sf.c.size();
  const Index p = sf.A.rows();
  VectorXd rhs(n + p);
  VectorXd w = st.z.cwiseQuotient(st.s);
  VectorXd top = -rd;
  if (sf.G.rows() > 0)
    top -= sf.G.transpose() * (w.cwiseProduct(ri) - rc.cwiseQuotient(st.s));
  rhs.head(n) = top;
  rhs.tail(p) = -re;
  VectorXd sol = sys.solve(rhs);
  Direction d;
  d.dx = sol.head(n);
  d.dy = sol.tail(p);
  if (sf.G.rows() > 0) {
    d.dz = w.cwiseProduct(sf.G * d.dx + ri) - rc.cwiseQuotient(st.s);
    d.ds = -ri - sf.G * d.dx;
  } else {
    d.dz.resize(0);
    d.ds.resize(0);
  }
  return d;
}

inline double max_step(const VectorXd &v, const VectorXd &dv) {
  double a = kInf;
  for (Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0)
      a = std::min(a, -v(i) / dv(i));
  return a;
}

/// Iterates until residuals fall below `eps`; a stalled or exhausted run is
/// still reported converged if it reached `eps_accept`.
inline IpmState interior_point(const StandardForm &sf, double eps, double eps_accept,
                               int max_iter) {
  const Index n = sf.c.size();
  const Index p = sf.A.rows();
  const Index m = sf.G.rows();
  const double delta = 1e-9;

  IpmState st;
  st.y = VectorXd::Zero(p);
  {
    // Least-squares-like start: minimize the objective plus ||Gx - h||^2 / 2
    // subject to the equalities.
    NewtonSystem sys(sf, VectorXd::Ones(m), delta);
    VectorXd rhs(n + p);
    rhs.head(n) = -sf.c;
    if (m > 0)
      rhs.head(n) += sf.G.transpose() * sf.h;
    rhs.tail(p) = sf.b;
    VectorXd sol = sys.solve(rhs);
    st.x = sol.head(n);
    st.y = sol.tail(p);
  }
  st.s = VectorXd::Ones(m);
  st.z = VectorXd::Ones(m);
  if (m > 0) {
    VectorXd slack = sf.h - sf.G * st.x;
    for (Index i = 0; i < m; ++i)
      st.s(i) = std::max(slack(i), 1.0);
  }

  const double pscale =
      1.0 + std::max(inf_norm(sf.b), m > 0 ? inf_norm(sf.h) : 0.0);
  const double dscale = 1.0 + inf_norm(sf.c);

  int stalled = 0;
  for (int it = 0; it < max_iter; ++it) {
    VectorXd rd = sf.Q * st.x + sf.c;
    if (p > 0)
      rd += sf.A.transpose() * st.y;
    if (m > 0)
      rd += sf.G.transpose() * st.z;
    VectorXd re = p > 0 ? VectorXd(sf.A * st.x - sf.b) : VectorXd(0);
    VectorXd ri = m > 0 ? VectorXd(sf.G * st.x + st.s - sf.h) : VectorXd(0);
    const double mu = m > 0 ? st.s.dot(st.z) / static_cast<double>(m) : 0.0;
    // Every pair must be complementary, not just the average.
    const double worst_pair = m > 0 ? st.s.cwiseProduct(st.z).maxCoeff() : 0.0;
    const double pres = std::max(inf_norm(re), inf_norm(ri));
    const double dres = inf_norm(rd);
    st.iterations = it;
    if (pres <= eps * pscale && dres <= eps * dscale &&
        worst_pair <= eps * std::max(1.0, std::abs(sf.c.dot(st.x)))) {
      st.converged = true;
      return st;
    }

    NewtonSystem sys(sf, m > 0 ? VectorXd(st.z.cwiseQuotient(st.s)) : VectorXd(0),
                     delta);

    // Predictor.
    VectorXd rc = st.s.cwiseProduct(st.z);
    Direction aff = newton_direction(sf, sys, st, rd, re, ri, rc);
    double step_aff = 1.0;
    if (m > 0)
      step_aff = std::min({1.0, max_step(st.s, aff.ds), max_step(st.z, aff.dz)});

    Direction d = aff;
    if (m > 0) {
      const double mu_aff = (st.s + step_aff * aff.ds).dot(st.z + step_aff * aff.dz) /
                            static_cast<double>(m);
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
      rc = st.s.cwiseProduct(st.z) + aff.ds.cwiseProduct(aff.dz) -
           VectorXd::Constant(m, sigma * mu);
      d = newton_direction(sf, sys, st, rd, re, ri, rc);
    }

    auto step_length = [&](const Direction &dir) {
      if (m == 0)
        return 1.0;
      return std::min(1.0, 0.99 * std::min(max_step(st.s, dir.ds), max_step(st.z, dir.dz)));
    };
    auto complementarity_after = [&](const Direction &dir, double a) {
      return (st.s + a * dir.ds).dot(st.z + a * dir.dz) / static_cast<double>(m);
    };
    if (!d.dx.allFinite() || !d.dz.allFinite() || !d.dy.allFinite())
      break;
    double step = step_length(d);
    if (m > 0 && complementarity_after(d, step) > (1.0 - 0.01 * step) * mu) {
      // The second-order correction can cycle on degenerate problems; fall
      // back to a damped centring step, which always reduces mu.
      rc = st.s.cwiseProduct(st.z) - VectorXd::Constant(m, 0.1 * mu);
      Direction safe = newton_direction(sf, sys, st, rd, re, ri, rc);
      if (safe.dx.allFinite() && safe.dz.allFinite() && safe.dy.allFinite()) {
        d = safe;
        step = step_length(d);
      }
    }

    st.x += step * d.dx;
    if (p > 0)
      st.y += step * d.dy;
    if (m > 0) {
      st.s += step * d.ds;
      st.z += step * d.dz;
    }
    st.iterations = it + 1;
    stalled = step < 1e-10 ? stalled + 1 : 0;
    if (stalled >= 5)
      break;
  }
  Residuals r = ipm_residuals(sf, st);
  st.converged = r.primal <= eps_accept * pscale && r.dual <= eps_accept * dscale &&
                 r.gap <= eps_accept * std::max(1.0, std::abs(sf.c.dot(st.x)));
  return st;
}

/// Re-solves the KKT system on the constraints the interior point flagged as
/// active, then corrects the guess a few times (adding violated rows,
/// dropping rows with negative multipliers). A small proximal term centred at
/// the interior-point iterate fixes directions the objective leaves flat.
inline bool polish(const StandardForm &sf, IpmState &st, double feas_tol) {
  const Index n = sf.c.size();
  const Index p = sf.A.rows();
  const Index m = sf.G.rows();
  const double prox = 1e-7;
  std::vector<bool> active(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i)
    active[static_cast<std::size_t>(i)] = st.z(i) > st.s(i);

  auto solve_active = [&](IpmState &out) {
    std::vector<Index> rows;
    for (Index i = 0; i < m; ++i)
      if (active[static_cast<std::size_t>(i)])
        rows.push_back(i);
    const Index k = static_cast<Index>(rows.size());
    MatrixXd K = MatrixXd::Zero(n + p + k, n + p + k);
    K.topLeftCorner(n, n) = sf.Q;
    if (p > 0) {
      K.block(0, n, n, p) = sf.A.transpose();
      K.block(n, 0, p, n) = sf.A;
    }
    VectorXd rhs(n + p + k);
    rhs.head(n) = -sf.c;
    rhs.segment(n, p) = sf.b;
    for (Index a = 0; a < k; ++a) {
      K.block(0, n + p + a, n, 1) = sf.G.row(rows[a]).transpose();
      K.block(n + p + a, 0, 1, n) = sf.G.row(rows[a]);
      rhs(n + p + a) = sf.h(rows[a]);
    }
    // Factor the regularized matrix and refine against the exact one.
    MatrixXd R = K;
    R.diagonal().head(n).array() += prox;
    R.diagonal().tail(p + k).array() -= prox;
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(R);
    VectorXd start = rhs;
    start.head(n) += prox * st.x;
    VectorXd sol = cod.solve(start);
    for (int r = 0; r < 10; ++r)
      sol += cod.solve(VectorXd(rhs - K * sol));
    if (!sol.allFinite())
      return false;
    out = st;
    out.x = sol.head(n);
    out.y = sol.segment(n, p);
    out.z = VectorXd::Zero(m);
    for (Index a = 0; a < k; ++a)
      out.z(rows[a]) = sol(n + p + a);
    return true;
  };

  IpmState out;
  bool consistent = false;
  for (int pass = 0; pass < 5 && !consistent; ++pass) {
    if (!solve_active(out))
      return false;
    consistent = true;
    if (m > 0) {
      const VectorXd viol = sf.G * out.x - sf.h;
      for (Index i = 0; i < m; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        if (!active[u] && viol(i) > feas_tol) {
          active[u] = true;
          consistent = false;
        } else if (active[u] && out.z(i) < -feas_tol) {
          active[u] = false;
          consistent = false;
        }
      }
    }
  }
  if (!consistent)
    return false;
  if (p > 0 && inf_norm(VectorXd(sf.A * out.x - sf.b)) > feas_tol)
    return false;
  if (m > 0) {
    out.s = (sf.h - sf.G * out.x).cwiseMax(0.0);
    out.z = out.z.cwiseMax(0.0);
  }

  Residuals before = ipm_residuals(sf, st);
  Residuals after = ipm_residuals(sf, out);
  const double worst_before = std::max({before.dual, before.primal, before.gap});
  const double worst_after = std::max({after.dual, after.primal, after.gap});
  if (worst_after > std::max(worst_before, feas_tol))
    return false;
  st = out;
  return true;
}

/// Elastic phase-1 LP: minimize total constraint violation. Returns the
/// optimal violation, or +inf if the LP itself did not converge.
inline double phase_one_violation(const StandardForm &sf, double eps, double eps_accept,
                                  int max_iter) {
  const Index n = sf.c.size();
  const Index p = sf.A.rows();
  const Index m = sf.G.rows();
  const Index nv = n + m + 2 * p;
  StandardForm lp;
  lp.Q = MatrixXd::Zero(nv, nv);
  lp.c = VectorXd::Zero(nv);
  lp.c.tail(m + 2 * p).setOnes();
  lp.A = MatrixXd::Zero(p, nv);
  lp.b = sf.b;
  if (p > 0) {
    lp.A.leftCols(n) = sf.A;
    lp.A.block(0, n + m, p, p) = -MatrixXd::Identity(p, p);
    lp.A.block(0, n + m + p, p, p) = MatrixXd::Identity(p, p);
  }
  lp.G = MatrixXd::Zero(m + m + 2 * p, nv);
  lp.h = VectorXd::Zero(m + m + 2 * p);
  if (m > 0) {
    lp.G.topLeftCorner(m, n) = sf.G;
    lp.G.block(0, n, m, m) = -MatrixXd::Identity(m, m);
    lp.h.head(m) = sf.h;
  }
  lp.G.block(m, n, m + 2 * p, m + 2 * p) = -MatrixXd::Identity(m + 2 * p, m + 2 * p);
  IpmState st = interior_point(lp, eps, eps_accept, max_iter);
  if (!st.converged)
    return kInf;
  return lp.c.dot(st.x);
}

} // namespace detail

/// Smallest eigenvalue of the symmetric part of Q.
inline double min_eigenvalue(const MatrixXd &Q) {
  if (Q.rows() == 0)
    return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (Q + Q.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Throws DimensionMismatch, InvalidArgument (asymmetric Q) or NonConvex.
inline void validate(const QpProblem &p) {
  detail::check_dimensions(p);
  const double qn = detail::inf_norm(p.Q);
  if (detail::inf_norm(MatrixXd(p.Q - p.Q.transpose())) > 1e-12 * std::max(1.0, qn))
    throw Error(ErrorCode::InvalidArgument, "Q is not symmetric");
  if (p.Q.rows() == 0)
    return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.Q, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double spectral = es.eigenvalues().cwiseAbs().maxCoeff();
  if (lo < -1e-9 * spectral) {
    std::ostringstream os;
    os.precision(17);
    os << "objective Hessian is indefinite (smallest eigenvalue " << lo << ")";
    throw Error(ErrorCode::NonConvex, os.str());
  }
}

/// Max-norm KKT residuals of a candidate primal/dual pair, in the problem's
/// own units. Missing dual vectors are treated as zero.
inline KktResiduals kkt_residuals(const QpProblem &p, const QpSolution &s) {
  detail::check_dimensions(p);
  const Index n = p.dim();
  detail::require(s.x.size() == n, "solution has wrong dimension");
  auto dual_or_zero = [](const VectorXd &v, Index size) {
    detail::require(v.size() == 0 || v.size() == size, "dual vector has wrong size");
    return v.size() == 0 ? VectorXd(VectorXd::Zero(size)) : v;
  };
  const VectorXd z = dual_or_zero(s.ineq_duals, p.G.rows());
  const VectorXd y = dual_or_zero(s.eq_duals, p.A.rows());
  const VectorXd zl = dual_or_zero(s.lower_duals, p.lower.size());
  const VectorXd zu = dual_or_zero(s.upper_duals, p.upper.size());

  KktResiduals r;
  VectorXd grad = p.Q * s.x + p.c;
  if (p.G.rows() > 0)
    grad += p.G.transpose() * z;
  if (p.A.rows() > 0)
    grad += p.A.transpose() * y;
  if (zl.size() > 0)
    grad -= zl;
  if (zu.size() > 0)
    grad += zu;
  r.stationarity = detail::inf_norm(grad);

  if (p.A.rows() > 0) {
    const VectorXd eq = p.A * s.x - p.b;
    r.primal = detail::inf_norm(eq);
  }
  if (p.G.rows() > 0) {
    const VectorXd slack = p.h - p.G * s.x;
    for (Index i = 0; i < slack.size(); ++i) {
      if (!std::isfinite(p.h(i)))
        continue;
      r.primal = std::max(r.primal, -slack(i));
      r.complementarity = std::max(r.complementarity, std::abs(z(i) * slack(i)));
    }
  }
  for (Index j = 0; j < p.lower.size(); ++j) {
    if (!std::isfinite(p.lower(j)))
      continue;
    r.primal = std::max(r.primal, p.lower(j) - s.x(j));
    r.complementarity =
        std::max(r.complementarity, std::abs(zl(j) * (s.x(j) - p.lower(j))));
  }
  for (Index j = 0; j < p.upper.size(); ++j) {
    if (!std::isfinite(p.upper(j)))
      continue;
    r.primal = std::max(r.primal, s.x(j) - p.upper(j));
    r.complementarity =
        std::max(r.complementarity, std::abs(zu(j) * (p.upper(j) - s.x(j))));
  }
  return r;
}

inline double objective_value(const QpProblem &p, const VectorXd &x) {
  return 0.5 * x.dot(p.Q * x) + p.c.dot(x);
}

/// Solves the QP. Deterministic for identical inputs.
///
/// `max_iter` bounds interior-point iterations; these problems converge in a
/// few dozen. Throws NonConvex / DimensionMismatch on malformed input.
inline QpSolution solve_qp(const QpProblem &problem, double tol = kDefaultTol,
                           int max_iter = kDefaultMaxIter) {
  if (!(tol > 0))
    throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  validate(problem);

  const detail::StandardForm original = detail::to_standard_form(problem);
  detail::StandardForm sf = original;
  const detail::Scaling scaling = detail::equilibrate(sf);
  const double eps = std::min(1e-10, 1e-2 * tol);

  detail::IpmState st = detail::interior_point(sf, eps, tol, max_iter);
  bool ok = st.converged;
  bool polished = false;
  if (st.x.allFinite()) {
    // Polish also rescues a stalled iterate whose active set is already right.
    polished = detail::polish(sf, st, 1e-9);
    if (polished) {
      detail::Residuals r = detail::ipm_residuals(sf, st);
      ok = ok || (r.primal <= tol && r.dual <= tol);
    }
  }

  QpSolution out;
  out.iterations = st.iterations;
  out.polished = polished;
  out.x = scaling.D.cwiseProduct(st.x);
  out.eq_duals = scaling.Eeq.cwiseProduct(st.y) / scaling.cost;
  out.ineq_duals = VectorXd::Zero(problem.G.rows());
  out.lower_duals = VectorXd::Zero(problem.lower.size());
  out.upper_duals = VectorXd::Zero(problem.upper.size());
  const VectorXd z = scaling.Ein.cwiseProduct(st.z) / scaling.cost;
  for (std::size_t r = 0; r < original.origin.size(); ++r) {
    const Index src = original.source[r];
    const double val = std::max(0.0, z(static_cast<Index>(r)));
    switch (original.origin[r]) {
    case detail::StandardForm::Origin::Row: out.ineq_duals(src) = val; break;
    case detail::StandardForm::Origin::Lower: out.lower_duals(src) = val; break;
    case detail::StandardForm::Origin::Upper: out.upper_duals(src) = val; break;
    }
  }
  out.objective = objective_value(problem, out.x);
  const KktResiduals kkt = kkt_residuals(problem, out);
  out.primal_residual = kkt.primal;
  out.dual_residual = kkt.stationarity;
  out.complementarity_residual = kkt.complementarity;

  if (ok) {
    out.status = Status::Optimal;
  } else {
    const double violation = detail::phase_one_violation(sf, eps, tol, max_iter);
    const double hscale = 1.0 + std::max(detail::inf_norm(sf.h), detail::inf_norm(sf.b));
    out.status = (std::isfinite(violation) && violation > 1e-7 * hscale)
                     ? Status::Infeasible
                     : Status::MaxIterations;
  }
  return out;
}

} // namespace gridprice::qp

#endif
