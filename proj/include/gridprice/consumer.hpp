#ifndef GRIDPRICE_CONSUMER_HPP
#define GRIDPRICE_CONSUMER_HPP

// Consumer side of the pricing game: quadratic-saturating convenience,
// utility, and the closed-form best responses of plain consumers and of
// net-metered prosumers.

#include "gridprice/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gridprice {

/// One household over all periods of the day.
struct ConsumerProfile {
  double alpha = 2.0;         // comfort curvature, > 0
  std::vector<double> omega;  // willingness per period
  std::vector<double> m;      // inelastic demand per period
  std::vector<double> s;      // on-site generation per period

  bool operator==(const ConsumerProfile &) const = default;
};

/// Signed net grid transaction of a prosumer: Z = X - Y with X*Y = 0.
struct ProsumerResponse {
  double Z = 0.0;
  double X = 0.0;
  double Y = 0.0;
};

namespace consumer {

inline void require_positive_alpha(double alpha) {
  if (!(alpha > 0))
    throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
}

/// omega*x - alpha*x^2/2 up to the knee x = omega/alpha, flat afterwards.
inline double convenience(double x, double omega, double alpha) {
  if (x < 0)
    throw Error(ErrorCode::NegativeDemand, "elastic demand must be nonnegative");
  require_positive_alpha(alpha);
  if (x <= omega / alpha)
    return omega * x - 0.5 * alpha * x * x;
  return omega * omega / (2.0 * alpha);
}

inline double utility(double x, double omega, double price_total, double alpha) {
  return convenience(x, omega, alpha) - price_total * x;
}

inline double best_response(double omega, double price_total, double alpha) {
  require_positive_alpha(alpha);
  return std::max(0.0, (omega - price_total) / alpha);
}

/// Net purchase under net metering: the inelastic residual m - s is always
/// covered, elastic demand follows the plain best response.
inline ProsumerResponse prosumer_best_response(double omega, double price, double alpha,
                                               double m, double s) {
  require_positive_alpha(alpha);
  ProsumerResponse r;
  r.Z = std::max(m - s, m - s + (omega - price) / alpha);
  r.X = std::max(0.0, r.Z);
  r.Y = std::max(0.0, -r.Z);
  return r;
}

inline double prosumer_utility(double Z, double s, double m, double omega, double price,
                               double alpha) {
  const double elastic = Z + s - m;
  // Rounding from Z = m - s must not trip the check.
  if (elastic < -1e-12 * std::max({1.0, std::abs(Z), std::abs(s), std::abs(m)}))
    throw Error(ErrorCode::InfeasibleConsumption,
                "net transaction does not cover the inelastic demand");
  return convenience(std::max(0.0, elastic), omega, alpha) - price * Z;
}

} // namespace consumer
} // namespace gridprice

#endif
