#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "jointpanel/errors.hpp"
#include "jointpanel/log_density.hpp"
#include "jointpanel/model.hpp"
#include "support/oracles.hpp"

using namespace jointpanel;

namespace {

ParameterState zero_state(const ModelSpec& spec, std::size_t n_groups) {
  ParameterState s;
  if (spec.has_ar()) s.ar = Eigen::Vector2d::Zero();
  s.b.assign(n_groups, RandomEffects::Zero());
  return s;
}

GroupSeries series_of(std::vector<std::pair<int, double>> points) {
  GroupSeries g{"g", {}};
  for (auto [t, y] : points) g.obs.push_back({t, {y, y}});
  return g;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("conditional_mean M1 returns the intercept when random effects vanish") {
  const ModelSpec spec{ModelKind::M1, {}};
  ParameterState s = zero_state(spec, 1);
  s.beta0[0] = 8.731;
  const GroupSeries g = series_of({{0, 1.0}, {1, 1.0}, {7, 1.0}});
  for (int t : {0, 1, 7}) CHECK(conditional_mean(spec, s, g, 0, Channel::Industrial, t) == 8.731);

  s.beta0.setZero();
  const GroupSeries g10 = series_of({{10, 3.0}});
  CHECK(conditional_mean(spec, s, g10, 0, Channel::Artisanal, 10) == 0.0);
}

TEST_CASE("conditional_mean M2 adds rho times the previous structural residual") {
  const ModelSpec spec{ModelKind::M2, {}};
  ParameterState s = zero_state(spec, 1);
  s.beta0[0] = 1.0;
  s.b[0][intercept_index(Channel::Industrial)] = 0.5;
  s.b[0][slope_index(Channel::Industrial)] = 0.1;
  s.ar = Eigen::Vector2d(0.8, 0.0);
  const GroupSeries g = series_of({{0, 9.0}, {1, 9.0}, {2, 2.0}, {3, 9.0}});

  const double structural_now = 1.0 + 0.5 + 0.1 * 3.0;
  const double structural_prev = 1.0 + 0.5 + 0.1 * 2.0;
  const double expected = structural_now + 0.8 * (2.0 - structural_prev);
  CHECK(expected == doctest::Approx(2.04).epsilon(1e-12));
  CHECK(conditional_mean(spec, s, g, 0, Channel::Industrial, 3) == doctest::Approx(expected).epsilon(1e-14));

  // First grid point is a run start.
  CHECK(conditional_mean(spec, s, g, 0, Channel::Industrial, 0) == doctest::Approx(1.5));
}

TEST_CASE("conditional_mean M2 throws MissingLag when the previous year is absent") {
  const ModelSpec spec{ModelKind::M2, {}};
  ParameterState s = zero_state(spec, 1);
  GroupSeries g = series_of({{0, 1.0}, {2, 1.0}, {3, 1.0}});
  CHECK_THROWS_AS(conditional_mean(spec, s, g, 0, Channel::Industrial, 2), MissingLag);
  g.obs[1].y[index(Channel::Artisanal)].reset();
  CHECK_THROWS_AS(conditional_mean(spec, s, g, 0, Channel::Artisanal, 3), MissingLag);
  CHECK_NOTHROW(conditional_mean(spec, s, g, 0, Channel::Industrial, 3));
}

TEST_CASE("lag policy: gaps and missing values start new runs") {
  GroupSeries g = series_of({{0, 1.0}, {1, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}});
  g.obs[3].y[index(Channel::Artisanal)].reset();
  CHECK(is_run_start(g, 0, Channel::Industrial));
  CHECK_FALSE(is_run_start(g, 1, Channel::Industrial));
  CHECK(is_run_start(g, 2, Channel::Industrial));
  CHECK_FALSE(is_run_start(g, 3, Channel::Industrial));
  CHECK_FALSE(is_run_start(g, 4, Channel::Industrial));
  CHECK(is_run_start(g, 4, Channel::Artisanal));

  PanelDataset d{{g}, 1970};
  CHECK(count_lagged(d, Channel::Industrial) == 3);
  CHECK(count_lagged(d, Channel::Artisanal) == 1);
}

TEST_CASE("log_likelihood of a single observation at its mean") {
  const ModelSpec spec{ModelKind::M1, {}};
  ParameterState s = zero_state(spec, 1);
  s.beta0 = Eigen::Vector2d(2.5, 0.0);
  s.sigma = 1.0;
  PanelDataset d{{GroupSeries{"g", {Observation{0, {2.5, std::nullopt}}}}}, 0};
  const double one = log_likelihood(spec, s, d);
  CHECK(one == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(one == doctest::Approx(-0.9189385332).epsilon(1e-9));

  d.groups[0].obs.push_back(Observation{1, {2.5, std::nullopt}});
  CHECK(log_likelihood(spec, s, d) == doctest::Approx(2.0 * one).epsilon(1e-14));
}

TEST_CASE("log_likelihood matches the brute-force oracle on a 2-group, 3-time M1 panel") {
  const ModelSpec spec{ModelKind::M1, {}};
  PanelDataset d;
  d.groups.push_back(GroupSeries{"a", {{0, {6.1, 3.2}}, {1, {6.4, 3.0}}, {2, {5.9, 3.5}}}});
  d.groups.push_back(GroupSeries{"b", {{0, {7.7, 2.1}}, {1, {7.2, std::nullopt}}, {2, {7.9, 2.6}}}});
  ParameterState s = zero_state(spec, 2);
  s.beta0 = Eigen::Vector2d(6.5, 3.0);
  s.sigma = 0.7;
  s.b[0] = RandomEffects(-0.4, 0.2, 0.05, -0.02);
  s.b[1] = RandomEffects(0.9, -0.6, 0.01, 0.07);
  const double expected = oracle::brute_force_log_likelihood(spec, s, d);
  CHECK(relative_gap(log_likelihood(spec, s, d), expected) < 1e-13);
}

TEST_CASE("design rows reproduce y minus the conditional mean under the lag policy") {
  std::mt19937_64 gen(11);
  const PanelDataset d = oracle::ragged_dataset(gen, 4, 20);
  for (ModelKind kind : {ModelKind::M1, ModelKind::M2}) {
    const ModelSpec spec{kind, {}};
    const ParameterState s = oracle::random_state(spec, d.n_groups(), gen);
    for (std::size_t g = 0; g < d.n_groups(); ++g) {
      for (Channel c : kChannels) {
        const auto rows = design_rows(spec, s, d.groups[g], c);
        std::size_t r = 0;
        for (std::size_t k = 0; k < d.groups[g].obs.size(); ++k) {
          const auto& y = d.groups[g].obs[k][c];
          if (!y) continue;
          const double residual = rows[r].response - rows[r].level * (s.beta0[index(c)] + s.b[g][intercept_index(c)]) -
                                  rows[r].slope * s.b[g][slope_index(c)];
          CHECK(residual == doctest::Approx(*y - oracle::table_mean(spec, s, d.groups[g], g, k, c)).epsilon(1e-10));
          ++r;
        }
        CHECK(r == rows.size());
      }
    }
  }
}

TEST_CASE("log_prior support and bivariate terms") {
  const ModelSpec spec{ModelKind::M1, {}};
  ParameterState s = zero_state(spec, 1);
  CHECK(std::isfinite(log_prior(spec, s)));

  ParameterState out = s;
  out.sigma0[1] = spec.priors.sd_upper + 1.0;
  CHECK(is_log_zero(log_prior(spec, out)));
  CHECK(log_prior(spec, out) < -1e300);
  out = s;
  out.rho1 = 1.0;
  CHECK(is_log_zero(log_prior(spec, out)));
  out = s;
  out.sigma = 0.0;
  CHECK(is_log_zero(log_prior(spec, out)));

  // Standard bivariate normal at the origin.
  CHECK(bivariate_normal_logpdf<double>(Eigen::Vector2d::Zero(), 1.0, 1.0, 0.0) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(log_random_effects_density(s) == doctest::Approx(-2.0 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));

  const ModelSpec m2{ModelKind::M2, {}};
  ParameterState s2 = zero_state(m2, 1);
  (*s2.ar)[0] = -1.0;
  CHECK(is_log_zero(log_prior(m2, s2)));
}

TEST_CASE("log_prior matches the term-by-term oracle") {
  std::mt19937_64 gen(5);
  for (ModelKind kind : {ModelKind::M1, ModelKind::M2}) {
    ModelSpec spec{kind, {}};
    spec.priors.beta_mean = 1.5;
    spec.priors.beta_sd = 7.0;
    spec.priors.sd_upper = 20.0;
    for (int rep = 0; rep < 20; ++rep) {
      const ParameterState s = oracle::random_state(spec, 6, gen);
      CHECK(relative_gap(log_prior(spec, s), oracle::brute_force_log_prior(spec, s)) < 1e-12);
    }
  }
}

TEST_CASE("log_joint is log_likelihood plus log_prior and matches the oracle on 100 random states") {
  std::mt19937_64 gen(2024);
  const PanelDataset d = oracle::ragged_dataset(gen, 5, 15);
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const ModelSpec spec{rep % 2 == 0 ? ModelKind::M1 : ModelKind::M2, {}};
    const ParameterState s = oracle::random_state(spec, d.n_groups(), gen);
    const double lj = log_joint(spec, s, d);
    CHECK(relative_gap(lj, log_likelihood(spec, s, d) + log_prior(spec, s)) < 1e-12);
    const double expected = oracle::brute_force_log_likelihood(spec, s, d) + oracle::brute_force_log_prior(spec, s);
    CHECK(relative_gap(lj, expected) < 1e-12);
    ++checked;
  }
  CHECK(checked == 100);

  const ModelSpec spec{ModelKind::M1, {}};
  ParameterState s = oracle::random_state(spec, d.n_groups(), gen);
  s.rho0 = 1.5;
  CHECK(is_log_zero(log_joint(spec, s, d)));
}

TEST_CASE("build_covariances") {
  ParameterState s;
  s.sigma0 = Eigen::Vector2d(2.648, 3.823);
  s.rho0 = 0.673;
  s.sigma1 = Eigen::Vector2d(0.051, 0.052);
  s.rho1 = 0.0;
  const CovariancePair cov = build_covariances(s);
  CHECK(cov.sigma0(0, 1) == doctest::Approx(0.673 * 2.648 * 3.823).epsilon(1e-14));
  CHECK(cov.sigma0(0, 1) == doctest::Approx(6.812984).epsilon(1e-6));
  CHECK(cov.sigma0(1, 0) == cov.sigma0(0, 1));
  CHECK(cov.sigma0(0, 0) == doctest::Approx(2.648 * 2.648));
  CHECK(cov.sigma1(0, 1) == 0.0);
  CHECK(cov.sigma1(1, 0) == 0.0);

  s.sigma0 = Eigen::Vector2d(1.0, 1.0);
  s.rho0 = 0.5;
  const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(build_covariances(s).sigma0).eigenvalues();
  CHECK(eig[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(eig[1] == doctest::Approx(1.5).epsilon(1e-14));

  s.rho0 = -1.0;
  CHECK_THROWS_AS(build_covariances(s), DomainError);
  s.rho0 = 0.2;
  s.sigma1[0] = 0.0;
  CHECK_THROWS_AS(build_covariances(s), DomainError);
}

TEST_CASE("property: covariances are symmetric positive definite for in-support states") {
  std::mt19937_64 gen(99);
  const ModelSpec spec{ModelKind::M1, {}};
  for (int rep = 0; rep < 500; ++rep) {
    ParameterState s = oracle::random_state(spec, 0, gen);
    s.rho0 = std::uniform_real_distribution<double>(-0.9999, 0.9999)(gen);
    const CovariancePair cov = build_covariances(s);
    CHECK(cov.sigma0 == cov.sigma0.transpose());
    CHECK(cov.sigma0.llt().info() == Eigen::Success);
    CHECK(cov.sigma1.llt().info() == Eigen::Success);
  }
}

TEST_CASE("property: M1 mean is affine in t and M2 with zero AR equals M1") {
  std::mt19937_64 gen(3);
  const PanelDataset d = oracle::ragged_dataset(gen, 3, 30);
  const ModelSpec m1{ModelKind::M1, {}};
  ModelSpec m2{ModelKind::M2, {}};
  for (int rep = 0; rep < 20; ++rep) {
    ParameterState s = oracle::random_state(m1, d.n_groups(), gen);
    for (std::size_t g = 0; g < d.n_groups(); ++g) {
      for (Channel c : kChannels) {
        const GroupSeries& series = d.groups[g];
        for (int t = 0; t < 29; ++t) {
          const double step = structural_mean(s, g, c, t + 1) - structural_mean(s, g, c, t);
          CHECK(step == doctest::Approx(s.b[g][slope_index(c)]).epsilon(1e-12).scale(1.0));
        }
        ParameterState s2 = s;
        s2.ar = Eigen::Vector2d::Zero();
        for (std::size_t k = 0; k < series.obs.size(); ++k) {
          const int t = series.obs[k].t;
          if (!is_run_start(series, k, c))
            CHECK(conditional_mean(m2, s2, series, g, c, t) == conditional_mean(m1, s, series, g, c, t));
        }
      }
    }
  }
}

TEST_CASE("property: moving one observation away from its mean lowers the likelihood") {
  std::mt19937_64 gen(17);
  PanelDataset d = oracle::ragged_dataset(gen, 3, 12);
  for (ModelKind kind : {ModelKind::M1, ModelKind::M2}) {
    const ModelSpec spec{kind, {}};
    const ParameterState s = oracle::random_state(spec, d.n_groups(), gen);
    // Use the last observed point of group 0 so no other mean depends on it.
    auto& obs = d.groups[0].obs;
    auto it = std::find_if(obs.rbegin(), obs.rend(), [](const Observation& o) { return o.y[0].has_value(); });
    REQUIRE(it != obs.rend());
    const std::size_t k = static_cast<std::size_t>(obs.rend() - it - 1);
    if (k + 1 < obs.size()) obs[k + 1].y[0].reset();
    const double mu = oracle::table_mean(spec, s, d.groups[0], 0, k, Channel::Industrial);
    double previous = 1e300;
    for (double offset : {0.0, 0.1, 0.5, 2.0, 10.0}) {
      obs[k].y[0] = mu + offset;
      const double ll = log_likelihood(spec, s, d);
      CHECK(ll < previous);
      previous = ll;
    }
  }
}

TEST_CASE("property: log_prior is invariant to permuting groups") {
  std::mt19937_64 gen(8);
  for (ModelKind kind : {ModelKind::M1, ModelKind::M2}) {
    const ModelSpec spec{kind, {}};
    ParameterState s = oracle::random_state(spec, 9, gen);
    const double before = log_prior(spec, s);
    std::shuffle(s.b.begin(), s.b.end(), gen);
    CHECK(relative_gap(log_prior(spec, s), before) < 1e-13);
  }
}

TEST_CASE("flatten and unflatten are inverse and names line up") {
  std::mt19937_64 gen(1);
  for (ModelKind kind : {ModelKind::M1, ModelKind::M2}) {
    const ModelSpec spec{kind, {}};
    const ParameterState s = oracle::random_state(spec, 3, gen);
    const Eigen::VectorXd v = flatten(spec, s);
    CHECK(unflatten(spec, v, 3) == s);
    const auto names = parameter_names(spec, {"x", "y", "z"});
    CHECK(names.size() == static_cast<std::size_t>(v.size()));
    CHECK(names.back() == "b1_A[z]");
    CHECK(v[v.size() - 1] == s.b[2][3]);
  }
  CHECK(parameter_names({ModelKind::M2, {}}, {})[2] == "rho_I");
  CHECK_THROWS_AS(unflatten({ModelKind::M1, {}}, Eigen::VectorXd::Zero(5), 0), DataError);
}

TEST_CASE("validate rejects malformed panels") {
  CHECK_THROWS_AS(validate(PanelDataset{}), DataError);
  PanelDataset d{{GroupSeries{"a", {}}}, 0};
  CHECK_THROWS_AS(validate(d), DataError);
  d.groups[0].obs = {{1, {1.0, 1.0}}, {1, {1.0, 1.0}}};
  CHECK_THROWS_AS(validate(d), DataError);
  d.groups[0].obs = {{0, {1.0, 1.0}}, {3, {1.0, 1.0}}};
  CHECK_NOTHROW(validate(d));
}
