#include "jointpanel/sampler.hpp"

#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "jointpanel/errors.hpp"
#include "jointpanel/log_density.hpp"
#include "jointpanel/model.hpp"

namespace jointpanel {

void SamplerConfig::validate() const {
  if (n_chains < 1) throw DataError("n_chains must be positive");
  if (n_warmup < 1) throw DataError("n_warmup must be positive");
  if (n_keep < 1) throw DataError("n_keep must be positive");
  if (thin < 1) throw DataError("thin must be positive");
  if (!(init_jitter >= 0.0)) throw DataError("init_jitter must be non-negative");
}

std::string_view block_name(MhBlock block) {
  switch (block) {
    case MhBlock::Sigma: return "sigma";
    case MhBlock::Sigma0I: return "sigma0_I";
    case MhBlock::Sigma0A: return "sigma0_A";
    case MhBlock::Sigma1I: return "sigma1_I";
    case MhBlock::Sigma1A: return "sigma1_A";
    case MhBlock::Rho0: return "rho0";
    case MhBlock::Rho1: return "rho1";
    case MhBlock::RhoI: return "rho_I";
    case MhBlock::RhoA: return "rho_A";
  }
  return "?";
}

StepSizes default_step_sizes() {
  StepSizes s;
  s.fill(0.1);
  return s;
}

namespace {

// Sufficient statistics of the design rows of one (group, channel).
struct RowSums {
  double ll = 0, ls = 0, ss = 0, lz = 0, sz = 0;
};

RowSums row_sums(const ModelSpec& spec, const ParameterState& state, const GroupSeries& series, Channel c) {
  RowSums s;
  for (const DesignRow& r : design_rows(spec, state, series, c)) {
    s.ll += r.level * r.level;
    s.ls += r.level * r.slope;
    s.ss += r.slope * r.slope;
    s.lz += r.level * r.response;
    s.sz += r.slope * r.response;
  }
  return s;
}

struct GroupSystem {
  Eigen::Matrix4d precision;
  Eigen::Vector4d linear;            // excludes beta0
  Eigen::Matrix<double, 4, 2> cross; // d^2/(db dbeta0) block of the precision
};

GroupSystem group_system(const ModelSpec& spec, const ParameterState& state, const GroupSeries& series,
                         const Eigen::Matrix4d& prior_precision) {
  const double inv_var = 1.0 / (state.sigma * state.sigma);
  GroupSystem sys{prior_precision, Eigen::Vector4d::Zero(), Eigen::Matrix<double, 4, 2>::Zero()};
  for (Channel c : kChannels) {
    const RowSums s = row_sums(spec, state, series, c);
    const int i0 = intercept_index(c);
    const int i1 = slope_index(c);
    sys.precision(i0, i0) += s.ll * inv_var;
    sys.precision(i0, i1) += s.ls * inv_var;
    sys.precision(i1, i0) += s.ls * inv_var;
    sys.precision(i1, i1) += s.ss * inv_var;
    sys.linear[i0] += s.lz * inv_var;
    sys.linear[i1] += s.sz * inv_var;
    sys.cross(i0, index(c)) = s.ll * inv_var;
    sys.cross(i1, index(c)) = s.ls * inv_var;
  }
  return sys;
}

// x ~ N(P^{-1} h, P^{-1}) given the Cholesky factor of P.
template <int N>
Eigen::Matrix<double, N, 1> draw_canonical(const Eigen::LLT<Eigen::Matrix<double, N, N>>& llt,
                                           const Eigen::Matrix<double, N, 1>& linear, Rng& rng) {
  if (llt.info() != Eigen::Success) throw DomainError("full-conditional precision is not positive definite");
  Eigen::Matrix<double, N, 1> z;
  for (int i = 0; i < N; ++i) z[i] = rng.normal();
  const Eigen::Matrix<double, N, 1> mean = llt.solve(linear);
  return mean + llt.matrixU().solve(z);
}

double jacobian(const ParameterState& state, MhBlock block) {
  switch (block) {
    case MhBlock::Rho0:
    case MhBlock::Rho1:
    case MhBlock::RhoI:
    case MhBlock::RhoA: {
      const double r = std::tanh(transformed_value(state, block));
      return std::log1p(-r * r);
    }
    default: return transformed_value(state, block);
  }
}

// Terms of log_joint that depend on the block's parameter.
double block_log_target(const ModelSpec& spec, const PanelDataset& data, const ParameterState& state,
                        MhBlock block) {
  if (!in_support(spec, state)) return kLogZero;
  switch (block) {
    case MhBlock::Sigma: return log_likelihood(spec, state, data);
    case MhBlock::RhoI: return log_likelihood(spec, state, data, Channel::Industrial);
    case MhBlock::RhoA: return log_likelihood(spec, state, data, Channel::Artisanal);
    default: return log_random_effects_density(state);
  }
}

bool block_active(const ModelSpec& spec, MhBlock block) {
  return spec.has_ar() || (block != MhBlock::RhoI && block != MhBlock::RhoA);
}

}  // namespace

void gibbs_update_fixed_effects(ParameterState& state, const PanelDataset& data, const ModelSpec& spec, Rng& rng) {
  const double inv_var = 1.0 / (state.sigma * state.sigma);
  const double prior_prec = 1.0 / (spec.priors.beta_sd * spec.priors.beta_sd);
  for (Channel c : kChannels) {
    double prec = prior_prec;
    double lin = spec.priors.beta_mean * prior_prec;
    for (std::size_t g = 0; g < data.groups.size(); ++g) {
      const double b0 = state.b[g][intercept_index(c)];
      const double b1 = state.b[g][slope_index(c)];
      for (const DesignRow& r : design_rows(spec, state, data.groups[g], c)) {
        prec += r.level * r.level * inv_var;
        lin += r.level * (r.response - r.level * b0 - r.slope * b1) * inv_var;
      }
    }
    state.beta0[index(c)] = lin / prec + rng.normal() / std::sqrt(prec);
  }
}

void gibbs_update_random_effects(ParameterState& state, const PanelDataset& data, const ModelSpec& spec, Rng& rng) {
  const Eigen::Matrix4d prior_precision = random_effects_covariance(state).inverse();
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    const GroupSystem sys = group_system(spec, state, data.groups[g], prior_precision);
    const Eigen::Vector4d linear = sys.linear - sys.cross * state.beta0;
    state.b[g] = draw_canonical<4>(Eigen::LLT<Eigen::Matrix4d>(sys.precision), linear, rng);
  }
}

void gibbs_update_location(ParameterState& state, const PanelDataset& data, const ModelSpec& spec, Rng& rng) {
  const Eigen::Matrix4d prior_precision = random_effects_covariance(state).inverse();
  const double prior_prec = 1.0 / (spec.priors.beta_sd * spec.priors.beta_sd);

  Eigen::Matrix2d precision = Eigen::Matrix2d::Identity() * prior_prec;
  Eigen::Vector2d linear = Eigen::Vector2d::Constant(spec.priors.beta_mean * prior_prec);
  for (const auto& series : data.groups) {
    const GroupSystem sys = group_system(spec, state, series, prior_precision);
    for (Channel c : kChannels) {
      precision(index(c), index(c)) += sys.cross(intercept_index(c), index(c));
      linear[index(c)] += sys.linear[intercept_index(c)];
    }
    const Eigen::LLT<Eigen::Matrix4d> llt(sys.precision);
    const Eigen::Matrix<double, 4, 2> solved = llt.solve(sys.cross);
    precision -= sys.cross.transpose() * solved;
    linear -= solved.transpose() * sys.linear;
  }
  state.beta0 = draw_canonical<2>(Eigen::LLT<Eigen::Matrix2d>(precision), linear, rng);
  gibbs_update_random_effects(state, data, spec, rng);
}

double transformed_value(const ParameterState& state, MhBlock block) {
  switch (block) {
    case MhBlock::Sigma: return std::log(state.sigma);
    case MhBlock::Sigma0I: return std::log(state.sigma0[0]);
    case MhBlock::Sigma0A: return std::log(state.sigma0[1]);
    case MhBlock::Sigma1I: return std::log(state.sigma1[0]);
    case MhBlock::Sigma1A: return std::log(state.sigma1[1]);
    case MhBlock::Rho0: return std::atanh(state.rho0);
    case MhBlock::Rho1: return std::atanh(state.rho1);
    case MhBlock::RhoI: return std::atanh(state.ar_coefficient(Channel::Industrial));
    case MhBlock::RhoA: return std::atanh(state.ar_coefficient(Channel::Artisanal));
  }
  return 0.0;
}

void set_transformed_value(ParameterState& state, MhBlock block, double value) {
  switch (block) {
    case MhBlock::Sigma: state.sigma = std::exp(value); break;
    case MhBlock::Sigma0I: state.sigma0[0] = std::exp(value); break;
    case MhBlock::Sigma0A: state.sigma0[1] = std::exp(value); break;
    case MhBlock::Sigma1I: state.sigma1[0] = std::exp(value); break;
    case MhBlock::Sigma1A: state.sigma1[1] = std::exp(value); break;
    case MhBlock::Rho0: state.rho0 = std::tanh(value); break;
    case MhBlock::Rho1: state.rho1 = std::tanh(value); break;
    case MhBlock::RhoI:
      if (!state.ar) state.ar = Eigen::Vector2d::Zero();
      (*state.ar)[0] = std::tanh(value);
      break;
    case MhBlock::RhoA:
      if (!state.ar) state.ar = Eigen::Vector2d::Zero();
      (*state.ar)[1] = std::tanh(value);
      break;
  }
}

double mh_log_ratio(const ModelSpec& spec, const PanelDataset& data, const ParameterState& from,
                    const ParameterState& to, MhBlock block) {
  const double target_to = block_log_target(spec, data, to, block);
  if (is_log_zero(target_to) || std::isnan(target_to)) return kLogZero;
  const double target_from = block_log_target(spec, data, from, block);
  return target_to - target_from + jacobian(to, block) - jacobian(from, block);
}

AcceptProbabilities mh_update_scales_and_correlations(ParameterState& state, const PanelDataset& data,
                                                      const ModelSpec& spec, Rng& rng, const StepSizes& steps) {
  AcceptProbabilities accept;
  accept.fill(1.0);
  ParameterState proposal = state;
  for (int k = 0; k < kMhBlocks; ++k) {
    const auto block = static_cast<MhBlock>(k);
    if (!block_active(spec, block)) continue;
    const double step = steps[k];
    const double eps = rng.normal();
    const double u = rng.uniform();
    if (step == 0.0) continue;
    set_transformed_value(proposal, block, transformed_value(state, block) + step * eps);
    const double log_r = mh_log_ratio(spec, data, state, proposal, block);
    accept[k] = is_log_zero(log_r) ? 0.0 : std::min(1.0, std::exp(log_r));
    if (!is_log_zero(log_r) && std::log(u) < log_r) {
      state = proposal;
    } else {
      proposal = state;
    }
  }
  return accept;
}

ParameterState initial_state(const ModelSpec& spec, const PanelDataset& data, double init_jitter, Rng& rng) {
  Eigen::Vector2d centre = Eigen::Vector2d::Constant(spec.priors.beta_mean);
  for (Channel c : kChannels) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& g : data.groups)
      for (const auto& o : g.obs)
        if (o[c]) {
          sum += *o[c];
          ++n;
        }
    if (n > 0) centre[index(c)] = sum / static_cast<double>(n);
  }
  auto jitter = [&] { return init_jitter * rng.normal(); };
  for (int attempt = 0; attempt < 100; ++attempt) {
    ParameterState s;
    s.beta0 = centre + Eigen::Vector2d(jitter(), jitter());
    if (spec.has_ar()) s.ar = Eigen::Vector2d(jitter(), jitter());
    s.sigma = 1.0 + jitter();
    s.sigma0 = Eigen::Vector2d(1.0 + jitter(), 1.0 + jitter());
    s.sigma1 = Eigen::Vector2d(1.0 + jitter(), 1.0 + jitter());
    s.rho0 = jitter();
    s.rho1 = jitter();
    s.b.resize(data.groups.size());
    for (auto& bi : s.b) bi = RandomEffects(jitter(), jitter(), jitter(), jitter());
    if (std::isfinite(log_joint(spec, s, data))) return s;
  }
  throw InitFailure("no in-support initial state found in 100 attempts");
}

ChainKernel::ChainKernel(const ModelSpec& spec, const PanelDataset& data, StepSizes steps, Rng rng)
    : spec_(spec), data_(data), steps_(steps), rng_(std::move(rng)) {}

AcceptProbabilities ChainKernel::sweep(ParameterState& state) {
  gibbs_update_location(state, data_, spec_, rng_);
  return mh_update_scales_and_correlations(state, data_, spec_, rng_, steps_);
}

ChainOutput run_chain(const ModelSpec& spec, const PanelDataset& data, const SamplerConfig& config, int chain_id) {
  config.validate();
  Rng rng(config.seed, static_cast<std::uint64_t>(chain_id));
  ParameterState state = initial_state(spec, data, config.init_jitter, rng);
  ChainKernel kernel(spec, data, default_step_sizes(), rng);

  for (int it = 0; it < config.n_warmup; ++it) {
    const AcceptProbabilities a = kernel.sweep(state);
    if (!config.adapt) continue;
    const double gain = std::pow(static_cast<double>(it) + 1.0, -0.6);
    for (int k = 0; k < kMhBlocks; ++k) {
      double& step = kernel.steps()[k];
      if (step > 0.0) step = std::exp(std::log(step) + gain * (a[k] - kTargetAcceptance));
    }
  }

  ChainOutput out;
  out.seed = config.seed;
  out.chain_id = chain_id;
  out.step_sizes = kernel.steps();
  out.draws.reserve(static_cast<std::size_t>(config.n_keep / config.thin));
  AcceptProbabilities totals{};
  for (int it = 0; it < config.n_keep; ++it) {
    const AcceptProbabilities a = kernel.sweep(state);
    for (int k = 0; k < kMhBlocks; ++k) totals[k] += a[k];
    if ((it + 1) % config.thin == 0) {
      out.loglik_per_draw.push_back(log_likelihood(spec, state, data));
      out.draws.push_back(state);
    }
  }
  for (int k = 0; k < kMhBlocks; ++k) out.accept_rates[k] = totals[k] / config.n_keep;
  return out;
}

std::vector<ChainOutput> run_chains(const ModelSpec& spec, const PanelDataset& data, const SamplerConfig& config) {
  config.validate();
  std::vector<ChainOutput> chains(static_cast<std::size_t>(config.n_chains));
  std::vector<std::exception_ptr> errors(chains.size());
  {
    std::vector<std::jthread> workers;
    const unsigned width = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t first = 0; first < chains.size(); first += width) {
      workers.clear();
      for (std::size_t k = first; k < std::min(chains.size(), first + width); ++k) {
        workers.emplace_back([&, k] {
          try {
            chains[k] = run_chain(spec, data, config, static_cast<int>(k));
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return chains;
}

void check_identifiable(const ModelSpec& spec, const PanelDataset& data) {
  if (!spec.has_ar()) return;
  for (Channel c : kChannels) {
    if (count_lagged(data, c) == 0)
      throw DataError("model M2 needs at least one pair of consecutive observed years in channel " +
                      std::string(suffix(c)) +
                      ": every observation starts a new series, so the AR coefficient has no lag to act on");
  }
}

FitResult fit(const ModelSpec& spec, const PanelDataset& data, const SamplerConfig& config) {
  validate(data);
  check_identifiable(spec, data);
  FitResult out{spec, fingerprint(data), data.group_ids(), config, {}};
  out.chains = run_chains(spec, data, config);
  return out;
}

}  // namespace jointpanel
