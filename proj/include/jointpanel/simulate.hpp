#pragma once

#include <cstdint>
#include <vector>

#include "jointpanel/rng.hpp"
#include "jointpanel/types.hpp"

namespace jointpanel {

struct SimScenario {
  ParameterState true_state;  // leave `b` empty to draw random effects
  int n_groups = 12;
  int n_times = 45;
  ModelSpec spec;
  std::uint64_t seed = 1;
  int t0_label = 1970;

  void validate() const;  // throws DataError
};

// b0 pairs ~ N(0, Sigma0) and b1 pairs ~ N(0, Sigma1) through Cholesky factors,
// independently across groups. Throws DomainError on a non-PD covariance.
std::vector<RandomEffects> draw_random_effects(const SimScenario& scenario, Rng& rng);

struct SimulatedPanel {
  PanelDataset data;
  std::vector<RandomEffects> effects;
};

// Random effects come from stream 0 of the scenario seed; group g's noise comes
// from its own stream, time-minor, so extending n_times leaves earlier values
// untouched. Under M2 the first point of each series uses the structural mean,
// exactly as the likelihood's lag policy does.
SimulatedPanel simulate_panel(const SimScenario& scenario);

PanelDataset generate(const SimScenario& scenario);

// Truths used by the recovery experiments: 12 groups over 45 years with the
// reference M1 parameters, and for M2 additionally rho = (0.8, 0.9).
SimScenario reference_scenario(ModelKind kind, std::uint64_t seed);

}  // namespace jointpanel
