#include "jointpanel/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "jointpanel/errors.hpp"
#include "jointpanel/log_density.hpp"

namespace jointpanel {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

bool valid_scale(double s) { return s > 0.0 && std::isfinite(s); }
bool valid_correlation(double r) { return r > -1.0 && r < 1.0; }

}  // namespace

CovariancePair build_covariances(const ParameterState& state) {
  if (!(state.sigma0.array() > 0.0).all() || !(state.sigma1.array() > 0.0).all())
    throw DomainError("random-effect standard deviations must be positive");
  if (!valid_correlation(state.rho0) || !valid_correlation(state.rho1))
    throw DomainError("random-effect correlations must lie in (-1, 1)");
  CovariancePair out{correlated_covariance(state.sigma0[0], state.sigma0[1], state.rho0),
                     correlated_covariance(state.sigma1[0], state.sigma1[1], state.rho1)};
  if (out.sigma0.llt().info() != Eigen::Success || out.sigma1.llt().info() != Eigen::Success)
    throw DomainError("random-effect covariance is not positive definite");
  return out;
}

Eigen::Matrix4d random_effects_covariance(const ParameterState& state) {
  const CovariancePair cov = build_covariances(state);
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<2, 2>() = cov.sigma0;
  m.bottomRightCorner<2, 2>() = cov.sigma1;
  return m;
}

double structural_mean(const ParameterState& state, std::size_t group, Channel c, double t) {
  const RandomEffects& bi = state.b[group];
  return state.beta0[index(c)] + bi[intercept_index(c)] + bi[slope_index(c)] * t;
}

bool is_run_start(const GroupSeries& series, std::size_t k, Channel c) {
  if (k == 0) return true;
  const Observation& prev = series.obs[k - 1];
  return prev.t != series.obs[k].t - 1 || !prev[c].has_value();
}

double conditional_mean(const ModelSpec& spec, const ParameterState& state, const GroupSeries& series,
                        std::size_t group, Channel c, int t) {
  const double base = structural_mean(state, group, c, t);
  if (!spec.has_ar() || series.obs.empty() || t == series.obs.front().t) return base;
  const Observation* lag = nullptr;
  for (const auto& o : series.obs)
    if (o.t == t - 1) lag = &o;
  if (lag == nullptr || !(*lag)[c])
    throw MissingLag("group '" + series.id + "' has no observation at t=" + std::to_string(t - 1) +
                     " in channel " + std::string(suffix(c)));
  const double w = *(*lag)[c] - structural_mean(state, group, c, t - 1);
  return base + state.ar_coefficient(c) * w;
}

std::size_t count_lagged(const PanelDataset& data, Channel c) {
  std::size_t n = 0;
  for (const auto& g : data.groups)
    for (std::size_t k = 0; k < g.obs.size(); ++k) n += g.obs[k][c].has_value() && !is_run_start(g, k, c);
  return n;
}

std::vector<DesignRow> design_rows(const ModelSpec& spec, const ParameterState& state,
                                   const GroupSeries& series, Channel c) {
  const double rho = spec.has_ar() ? state.ar_coefficient(c) : 0.0;
  std::vector<DesignRow> rows;
  rows.reserve(series.obs.size());
  for (std::size_t k = 0; k < series.obs.size(); ++k) {
    const Observation& o = series.obs[k];
    if (!o[c]) continue;
    const double t = o.t;
    if (!spec.has_ar() || is_run_start(series, k, c)) {
      rows.push_back({*o[c], 1.0, t});
    } else {
      rows.push_back({*o[c] - rho * *series.obs[k - 1][c], 1.0 - rho, t - rho * (t - 1.0)});
    }
  }
  return rows;
}

double log_likelihood(const ModelSpec& spec, const ParameterState& state, const PanelDataset& data,
                      Channel c) {
  if (!valid_scale(state.sigma)) return kLogZero;
  const int ci = index(c);
  const double rho = spec.has_ar() ? state.ar_coefficient(c) : 0.0;
  const double beta = state.beta0[ci];
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    const GroupSeries& series = data.groups[g];
    const double level = beta + state.b[g][intercept_index(c)];
    const double slope = state.b[g][slope_index(c)];
    for (std::size_t k = 0; k < series.obs.size(); ++k) {
      const Observation& o = series.obs[k];
      if (!o[c]) continue;
      const double t = o.t;
      double mean = level + slope * t;
      if (spec.has_ar() && !is_run_start(series, k, c))
        mean += rho * (*series.obs[k - 1][c] - (level + slope * (t - 1.0)));
      const double r = *o[c] - mean;
      sq += r * r;
      ++n;
    }
  }
  return -0.5 * sq / (state.sigma * state.sigma) - static_cast<double>(n) * (std::log(state.sigma) + kHalfLog2Pi);
}

double log_likelihood(const ModelSpec& spec, const ParameterState& state, const PanelDataset& data) {
  return log_likelihood(spec, state, data, Channel::Industrial) +
         log_likelihood(spec, state, data, Channel::Artisanal);
}

double log_random_effects_density(const ParameterState& state) {
  if (!(state.sigma0.array() > 0.0).all() || !(state.sigma1.array() > 0.0).all() ||
      !valid_correlation(state.rho0) || !valid_correlation(state.rho1))
    return kLogZero;
  double acc = 0.0;
  for (const auto& bi : state.b) {
    acc += bivariate_normal_logpdf<double>(bi.segment<2>(kInterceptRow), state.sigma0[0], state.sigma0[1], state.rho0);
    acc += bivariate_normal_logpdf<double>(bi.segment<2>(kSlopeRow), state.sigma1[0], state.sigma1[1], state.rho1);
  }
  return acc;
}

bool in_support(const ModelSpec& spec, const ParameterState& state) {
  const double upper = spec.priors.sd_upper;
  auto sd_ok = [upper](double s) { return s > 0.0 && s <= upper; };
  if (!sd_ok(state.sigma) || !sd_ok(state.sigma0[0]) || !sd_ok(state.sigma0[1]) || !sd_ok(state.sigma1[0]) ||
      !sd_ok(state.sigma1[1]))
    return false;
  if (!valid_correlation(state.rho0) || !valid_correlation(state.rho1)) return false;
  if (spec.has_ar() != state.ar.has_value()) return false;
  if (state.ar && (!valid_correlation((*state.ar)[0]) || !valid_correlation((*state.ar)[1]))) return false;
  return state.beta0.allFinite();
}

double log_prior(const ModelSpec& spec, const ParameterState& state) {
  if (!in_support(spec, state)) return kLogZero;
  const HyperPriors& p = spec.priors;
  double acc = normal_logpdf(state.beta0[0], p.beta_mean, p.beta_sd) +
               normal_logpdf(state.beta0[1], p.beta_mean, p.beta_sd);
  acc -= 5.0 * std::log(p.sd_upper);
  const int n_unit_interval = spec.has_ar() ? 4 : 2;
  acc -= n_unit_interval * std::numbers::ln2;
  return acc + log_random_effects_density(state);
}

double log_joint(const ModelSpec& spec, const ParameterState& state, const PanelDataset& data) {
  const double prior = log_prior(spec, state);
  if (is_log_zero(prior)) return kLogZero;
  return log_likelihood(spec, state, data) + prior;
}

}  // namespace jointpanel
