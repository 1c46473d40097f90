#pragma once

// Test-only reference computations. Nothing here calls into the library's
// likelihood, prior, or sampling code paths; they are written out longhand so
// that the library can be checked against them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "jointpanel/types.hpp"

namespace oracle {

using jointpanel::Channel;
using jointpanel::GroupSeries;
using jointpanel::ModelSpec;
using jointpanel::PanelDataset;
using jointpanel::ParameterState;

inline double scalar_normal_logpdf(double x, double mean, double sd) {
  const double two_pi = 2.0 * std::numbers::pi;
  return -0.5 * std::log(two_pi * sd * sd) - (x - mean) * (x - mean) / (2.0 * sd * sd);
}

// Bivariate normal with explicit 2x2 inverse and determinant.
inline double bivariate_logpdf(double x1, double x2, double s1, double s2, double rho) {
  const double a = s1 * s1, d = s2 * s2, b = rho * s1 * s2;
  const double det = a * d - b * b;
  const double quad = (d * x1 * x1 - 2.0 * b * x1 * x2 + a * x2 * x2) / det;
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * quad;
}

inline double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

// One-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic critical value of the one-sample KS test: sqrt(-ln(alpha/2)/2)/sqrt(n).
inline double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

inline double ks_critical_01(std::size_t n) { return ks_critical(n, 0.01); }

// Mean of y_{g,t} spelled out from the model table: beta + b0 + b1 t, plus
// rho (y_{t-1} - (beta + b0 + b1 (t-1))) for M2 when the previous year is
// observed in the same channel.
inline double table_mean(const ModelSpec& spec, const ParameterState& s, const GroupSeries& series, std::size_t g,
                         std::size_t k, Channel c) {
  const int ci = static_cast<int>(c);
  const double beta = s.beta0[ci];
  const double b0 = s.b[g][ci];
  const double b1 = s.b[g][2 + ci];
  const double t = series.obs[k].t;
  double mu = beta + b0 + b1 * t;
  if (spec.kind == jointpanel::ModelKind::M2 && k > 0 && series.obs[k - 1].t == series.obs[k].t - 1 &&
      series.obs[k - 1].y[ci].has_value()) {
    const double w = *series.obs[k - 1].y[ci] - (beta + b0 + b1 * (t - 1.0));
    mu += (*s.ar)[ci] * w;
  }
  return mu;
}

inline double brute_force_log_likelihood(const ModelSpec& spec, const ParameterState& s, const PanelDataset& data) {
  double acc = 0.0;
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    const auto& series = data.groups[g];
    for (std::size_t k = 0; k < series.obs.size(); ++k) {
      for (Channel c : {Channel::Industrial, Channel::Artisanal}) {
        const auto& y = series.obs[k].y[static_cast<int>(c)];
        if (!y) continue;
        acc += scalar_normal_logpdf(*y, table_mean(spec, s, series, g, k, c), s.sigma);
      }
    }
  }
  return acc;
}

inline double brute_force_log_prior(const ModelSpec& spec, const ParameterState& s) {
  const auto& p = spec.priors;
  double acc = scalar_normal_logpdf(s.beta0[0], p.beta_mean, p.beta_sd) +
               scalar_normal_logpdf(s.beta0[1], p.beta_mean, p.beta_sd);
  for (double sd : {s.sigma, s.sigma0[0], s.sigma0[1], s.sigma1[0], s.sigma1[1]}) {
    if (!(sd > 0.0 && sd <= p.sd_upper)) return -INFINITY;
    acc += std::log(1.0 / p.sd_upper);
  }
  std::vector<double> unit{s.rho0, s.rho1};
  if (spec.kind == jointpanel::ModelKind::M2) {
    unit.push_back((*s.ar)[0]);
    unit.push_back((*s.ar)[1]);
  }
  for (double r : unit) {
    if (!(r > -1.0 && r < 1.0)) return -INFINITY;
    acc += std::log(0.5);
  }
  for (const auto& bi : s.b) {
    acc += bivariate_logpdf(bi[0], bi[1], s.sigma0[0], s.sigma0[1], s.rho0);
    acc += bivariate_logpdf(bi[2], bi[3], s.sigma1[0], s.sigma1[1], s.rho1);
  }
  return acc;
}

inline ParameterState random_state(const ModelSpec& spec, std::size_t n_groups, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(-0.95, 0.95);
  std::uniform_real_distribution<double> scale(0.05, 5.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParameterState s;
  s.beta0 = Eigen::Vector2d(5.0 + 3.0 * normal(gen), 5.0 + 3.0 * normal(gen));
  if (spec.kind == jointpanel::ModelKind::M2) s.ar = Eigen::Vector2d(unit(gen), unit(gen));
  s.sigma = scale(gen);
  s.sigma0 = Eigen::Vector2d(scale(gen), scale(gen));
  s.sigma1 = Eigen::Vector2d(scale(gen) / 10.0, scale(gen) / 10.0);
  s.rho0 = unit(gen);
  s.rho1 = unit(gen);
  s.b.resize(n_groups);
  for (auto& bi : s.b) bi = Eigen::Vector4d(2.0 * normal(gen), 2.0 * normal(gen), 0.1 * normal(gen), 0.1 * normal(gen));
  return s;
}

// Dataset with gaps and per-channel missing values, for lag-policy coverage.
inline PanelDataset ragged_dataset(std::mt19937_64& gen, std::size_t n_groups, int n_times) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution drop(0.15);
  PanelDataset d;
  for (std::size_t g = 0; g < n_groups; ++g) {
    GroupSeries s{"grp" + std::to_string(g), {}};
    for (int t = 0; t < n_times; ++t) {
      if (t > 0 && drop(gen)) continue;  // gap in the grid
      jointpanel::Observation o{t, {}};
      if (!drop(gen)) o.y[0] = 6.0 + 0.02 * t + normal(gen);
      if (!drop(gen)) o.y[1] = 4.0 - 0.01 * t + normal(gen);
      s.obs.push_back(o);
    }
    d.groups.push_back(std::move(s));
  }
  return d;
}

// Quadratic fit of f around x from three evaluations; exact when f is quadratic.
struct Quadratic {
  double mean;
  double variance;
};

inline Quadratic gaussian_from_log_density(const std::function<double(double)>& f, double x, double h) {
  const double fp = f(x + h), f0 = f(x), fm = f(x - h);
  const double precision = -(fp - 2.0 * f0 + fm) / (h * h);
  const double gradient = (fp - fm) / (2.0 * h);
  return {x + gradient / precision, 1.0 / precision};
}


// Mean and covariance of a Gaussian from its log density, by central
// differences of f around x. Exact (up to rounding) when f is quadratic.
struct GaussianBlock {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

inline GaussianBlock gaussian_block_from_log_density(const std::function<double(const Eigen::VectorXd&)>& f,
                                                     const Eigen::VectorXd& x, double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd grad(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(n);
    ei[i] = h;
    grad[i] = (f(x + ei) - f(x - ei)) / (2.0 * h);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Zero(n);
      ej[j] = h;
      hess(i, j) = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h * h);
    }
  }
  const Eigen::MatrixXd precision = -0.5 * (hess + hess.transpose());
  const Eigen::MatrixXd cov = precision.inverse();
  return {x + cov * grad, cov};
}

}  // namespace oracle
