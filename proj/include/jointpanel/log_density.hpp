#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include <Eigen/Core>

namespace jointpanel {

// Log of zero density. Compares below every finite value and absorbs addition
// of any finite value; MH code must test for it before subtracting.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double v) { return v == kLogZero; }

template <typename Scalar>
Scalar normal_logpdf(Scalar x, Scalar mean, Scalar sd) {
  const Scalar z = (x - mean) / sd;
  return Scalar(-0.5) * z * z - std::log(sd) - Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

// log N(x | 0, Sigma) for the 2x2 covariance [sd_a^2, rho sd_a sd_b; ., sd_b^2].
template <typename Scalar>
Scalar bivariate_normal_logpdf(const Eigen::Matrix<Scalar, 2, 1>& x, Scalar sd_a, Scalar sd_b, Scalar rho) {
  const Scalar za = x[0] / sd_a;
  const Scalar zb = x[1] / sd_b;
  const Scalar one_minus = Scalar(1) - rho * rho;
  const Scalar quad = (za * za - Scalar(2) * rho * za * zb + zb * zb) / one_minus;
  return Scalar(-0.5) * quad - std::log(Scalar(2) * std::numbers::pi_v<Scalar>) - std::log(sd_a) -
         std::log(sd_b) - Scalar(0.5) * std::log(one_minus);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> correlated_covariance(Scalar sd_a, Scalar sd_b, Scalar rho) {
  Eigen::Matrix<Scalar, 2, 2> m;
  m << sd_a * sd_a, rho * sd_a * sd_b, rho * sd_a * sd_b, sd_b * sd_b;
  return m;
}

// log(sum exp(v)), exact for an all-equal input.
template <typename Scalar>
Scalar log_sum_exp(std::span<const Scalar> v) {
  if (v.empty()) return -std::numeric_limits<Scalar>::infinity();
  const Scalar top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  Scalar acc = 0;
  for (Scalar x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

}  // namespace jointpanel
