#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "jointpanel/types.hpp"

namespace jointpanel {

struct CovariancePair {
  Eigen::Matrix2d sigma0;  // intercept random effects (I, A)
  Eigen::Matrix2d sigma1;  // slope random effects (I, A)
};

// Throws DomainError unless all four SDs are > 0 and |rho0|, |rho1| < 1.
CovariancePair build_covariances(const ParameterState& state);

// Prior covariance of b_i in its (b0_I, b0_A, b1_I, b1_A) layout.
Eigen::Matrix4d random_effects_covariance(const ParameterState& state);

// beta0 + b0 + b1 t: the M1 mean, also the M2 mean at the start of a run.
double structural_mean(const ParameterState& state, std::size_t group, Channel c, double t);

// Conditional mean of y_{group,t} in channel c. For M2 at a grid point other
// than the group's first, y_{t-1} must be observed in that channel; otherwise
// MissingLag is thrown. Callers that want the lag policy use log_likelihood or
// design_rows.
double conditional_mean(const ModelSpec& spec, const ParameterState& state, const GroupSeries& series,
                        std::size_t group, Channel c, int t);

// Lag policy: observation k of a series starts a run in channel c when it is
// the first grid point, when t_{k-1} != t_k - 1, or when y_{k-1} is missing
// in that channel. Run starts use the structural (M1) mean under M2.
bool is_run_start(const GroupSeries& series, std::size_t k, Channel c);

// Number of observations in channel c that carry an AR term under M2.
std::size_t count_lagged(const PanelDataset& data, Channel c);

// Under either model every observed y in a channel can be written as
//   response = level * (beta0 + b0) + slope * b1 + N(0, sigma^2)
// with response = y_t - rho y_{t-1}, level = 1 - rho, slope = t - rho (t-1)
// for lagged points and (y_t, 1, t) at run starts. The rows depend only on the
// data and the AR coefficient, which makes beta0 and b_i conditionally conjugate.
struct DesignRow {
  double response;
  double level;
  double slope;
};

std::vector<DesignRow> design_rows(const ModelSpec& spec, const ParameterState& state,
                                   const GroupSeries& series, Channel c);

double log_likelihood(const ModelSpec& spec, const ParameterState& state, const PanelDataset& data);
double log_likelihood(const ModelSpec& spec, const ParameterState& state, const PanelDataset& data,
                      Channel c);

// Sum over groups of the two bivariate normal terms of f(b_i | Sigma0, Sigma1).
// kLogZero when the covariances are not valid.
double log_random_effects_density(const ParameterState& state);

bool in_support(const ModelSpec& spec, const ParameterState& state);

// pi(theta) plus f(b | theta); kLogZero outside the prior support.
double log_prior(const ModelSpec& spec, const ParameterState& state);

double log_joint(const ModelSpec& spec, const ParameterState& state, const PanelDataset& data);

}  // namespace jointpanel
