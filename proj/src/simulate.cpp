#include "jointpanel/simulate.hpp"

#include <Eigen/Cholesky>

#include <cstdio>
#include <string>

#include "jointpanel/errors.hpp"
#include "jointpanel/model.hpp"

namespace jointpanel {

namespace {

Eigen::Matrix2d cholesky_factor(const Eigen::Matrix2d& cov) {
  const Eigen::LLT<Eigen::Matrix2d> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("random-effect covariance is not positive definite");
  return llt.matrixL();
}

std::string group_label(int g, int n_groups) {
  const int width = static_cast<int>(std::to_string(n_groups).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%0*d", width, g + 1);
  return buf;
}

}  // namespace

void SimScenario::validate() const {
  if (n_groups < 1) throw DataError("n_groups must be positive");
  if (n_times < 1) throw DataError("n_times must be positive");
  if (!true_state.b.empty() && true_state.b.size() != static_cast<std::size_t>(n_groups))
    throw DataError("scenario supplies " + std::to_string(true_state.b.size()) + " random effects for " +
                    std::to_string(n_groups) + " groups");
  if (spec.has_ar() && !true_state.ar) throw DataError("an M2 scenario needs rho_I and rho_A");
}

std::vector<RandomEffects> draw_random_effects(const SimScenario& scenario, Rng& rng) {
  const CovariancePair cov = build_covariances(scenario.true_state);
  const Eigen::Matrix2d l0 = cholesky_factor(cov.sigma0);
  const Eigen::Matrix2d l1 = cholesky_factor(cov.sigma1);
  std::vector<RandomEffects> out(static_cast<std::size_t>(scenario.n_groups));
  for (auto& bi : out) {
    const Eigen::Vector2d z0(rng.normal(), rng.normal());
    const Eigen::Vector2d z1(rng.normal(), rng.normal());
    bi.segment<2>(kInterceptRow) = l0 * z0;
    bi.segment<2>(kSlopeRow) = l1 * z1;
  }
  return out;
}

SimulatedPanel simulate_panel(const SimScenario& scenario) {
  scenario.validate();
  ParameterState state = scenario.true_state;
  if (state.b.empty()) {
    Rng effects_rng(scenario.seed, 0);
    state.b = draw_random_effects(scenario, effects_rng);
  }

  SimulatedPanel out;
  out.data.t0_label = scenario.t0_label;
  for (int g = 0; g < scenario.n_groups; ++g) {
    Rng rng(scenario.seed, static_cast<std::uint64_t>(g) + 1);
    GroupSeries series{group_label(g, scenario.n_groups), {}};
    std::array<double, 2> previous{};
    for (int t = 0; t < scenario.n_times; ++t) {
      Observation o{t, {}};
      for (Channel c : kChannels) {
        const auto gi = static_cast<std::size_t>(g);
        double mean = structural_mean(state, gi, c, t);
        if (scenario.spec.has_ar() && t > 0)
          mean += state.ar_coefficient(c) * (previous[index(c)] - structural_mean(state, gi, c, t - 1));
        const double y = mean + state.sigma * rng.normal();
        o[c] = y;
        previous[index(c)] = y;
      }
      series.obs.push_back(o);
    }
    out.data.groups.push_back(std::move(series));
  }
  out.effects = std::move(state.b);
  return out;
}

PanelDataset generate(const SimScenario& scenario) { return simulate_panel(scenario).data; }

SimScenario reference_scenario(ModelKind kind, std::uint64_t seed) {
  SimScenario s;
  s.spec.kind = kind;
  s.seed = seed;
  s.n_groups = 12;
  s.n_times = 45;
  s.t0_label = 1970;
  ParameterState& p = s.true_state;
  p.beta0 = Eigen::Vector2d(8.7, 5.7);
  p.sigma = 0.55;
  p.sigma0 = Eigen::Vector2d(2.6, 3.8);
  p.sigma1 = Eigen::Vector2d(0.05, 0.05);
  p.rho0 = 0.7;
  p.rho1 = 0.9;
  if (kind == ModelKind::M2) p.ar = Eigen::Vector2d(0.8, 0.9);
  return s;
}

}  // namespace jointpanel
