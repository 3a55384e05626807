// Solves one period of the reference population with F1 at a few
// discrimination bounds and prints each user's price next to the
// closed-form bound eta*.

#include "gridprice/experiments.hpp"

#include <cstdio>

int main() {
  using namespace gridprice;
  const Scenario sc = scenario::generate_reference(kReferenceSeed, kReferenceUsers);
  const Weights w = experiments::reference_weights();
  const std::size_t period = 2;
  const PeriodData d = scenario::period_data(sc, period);
  std::printf("eta* = %.6f\n", eta_star(d.omega, w, common_alpha(d)));
  for (double eta : {0.0, 0.5, 1.5}) {
    const PricingOutcome o =
        solve_period(sc, period, Formulation::F1, w, RetailEnv::from(sc, Eta::bounded(eta)));
    std::printf("eta %.1f: revenue %.4f, spread %.4f\n", eta, o.revenue, o.price_spread);
    for (std::size_t i = 0; i < 3; ++i)
      std::printf("  user %zu: omega %.3f price %.4f demand %.4f\n", i + 1, d.omega[i],
                  o.prices[i] + sc.p_b, o.demands[i]);
  }
}
