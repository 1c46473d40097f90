#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jointpanel/rng.hpp"
#include "jointpanel/types.hpp"

namespace jointpanel {

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 5000;
  int n_keep = 10000;
  int thin = 1;
  std::uint64_t seed = 20200101;
  bool adapt = true;
  double init_jitter = 0.1;

  void validate() const;  // throws DataError
};

// Univariate Metropolis blocks, in sweep order.
enum class MhBlock : int { Sigma, Sigma0I, Sigma0A, Sigma1I, Sigma1A, Rho0, Rho1, RhoI, RhoA };
inline constexpr int kMhBlocks = 9;

std::string_view block_name(MhBlock block);

using StepSizes = std::array<double, kMhBlocks>;
using AcceptProbabilities = std::array<double, kMhBlocks>;

inline constexpr double kTargetAcceptance = 0.44;

StepSizes default_step_sizes();

// Redraws beta0 = (beta0_I, beta0_A) from its normal full conditional given
// all random effects and AR coefficients.
void gibbs_update_fixed_effects(ParameterState& state, const PanelDataset& data, const ModelSpec& spec, Rng& rng);

// Redraws each group's b_i from its 4-variate normal full conditional.
void gibbs_update_random_effects(ParameterState& state, const PanelDataset& data, const ModelSpec& spec, Rng& rng);

// Joint exact draw of (beta0, b): beta0 from its conditional with every b_i
// integrated out, then b | beta0 via gibbs_update_random_effects.
void gibbs_update_location(ParameterState& state, const PanelDataset& data, const ModelSpec& spec, Rng& rng);

// Current value of the parameter a block moves, on the unconstrained scale
// (log for standard deviations, atanh for correlations and AR coefficients).
double transformed_value(const ParameterState& state, MhBlock block);
void set_transformed_value(ParameterState& state, MhBlock block, double value);

// log of the MH acceptance ratio for moving `block` from `from` to `to`,
// including the Jacobian of the transform. kLogZero when `to` is outside the
// prior support.
double mh_log_ratio(const ModelSpec& spec, const PanelDataset& data, const ParameterState& from,
                    const ParameterState& to, MhBlock block);

// One random-walk update per block present in `spec`. Returns min(1, ratio)
// for every block (1 for blocks the model does not have).
AcceptProbabilities mh_update_scales_and_correlations(ParameterState& state, const PanelDataset& data,
                                                      const ModelSpec& spec, Rng& rng, const StepSizes& steps);

// Starting point: beta0 at the channel means of the data (prior mean when a
// channel is empty), SDs 1, correlations and AR 0, random effects 0, each
// perturbed by Normal(0, init_jitter).
ParameterState initial_state(const ModelSpec& spec, const PanelDataset& data, double init_jitter, Rng& rng);

// One full scan: location block, then every MH block in MhBlock order.
class ChainKernel {
 public:
  ChainKernel(const ModelSpec& spec, const PanelDataset& data, StepSizes steps, Rng rng);

  AcceptProbabilities sweep(ParameterState& state);

  const StepSizes& steps() const { return steps_; }
  StepSizes& steps() { return steps_; }
  const Rng& rng() const { return rng_; }

 private:
  const ModelSpec& spec_;
  const PanelDataset& data_;
  StepSizes steps_;
  Rng rng_;
};

struct ChainOutput {
  std::vector<ParameterState> draws;
  std::vector<double> loglik_per_draw;
  AcceptProbabilities accept_rates{};  // mean acceptance probability after warmup
  StepSizes step_sizes{};              // frozen at the end of warmup
  std::uint64_t seed = 0;
  int chain_id = 0;
};

ChainOutput run_chain(const ModelSpec& spec, const PanelDataset& data, const SamplerConfig& config, int chain_id);

// Chains 0..n_chains-1, run concurrently.
std::vector<ChainOutput> run_chains(const ModelSpec& spec, const PanelDataset& data, const SamplerConfig& config);

struct FitResult {
  ModelSpec spec;
  std::string fingerprint;
  std::vector<std::string> group_ids;
  SamplerConfig config;
  std::vector<ChainOutput> chains;
};

// Refuses M2 when a channel has no lagged observation, since rho is then
// unidentified (every point is a run start). Throws DataError.
void check_identifiable(const ModelSpec& spec, const PanelDataset& data);

FitResult fit(const ModelSpec& spec, const PanelDataset& data, const SamplerConfig& config);

}  // namespace jointpanel
