#include "jointpanel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "jointpanel/errors.hpp"

namespace jointpanel {

namespace {

Eigen::Index common_length(std::span<const Eigen::VectorXd> chains) {
  if (chains.empty()) throw EmptyChains("no chains supplied");
  Eigen::Index n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  return n;
}

double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double mean = x.mean();
  return (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
}

// Biased autocovariance at lags 0..n-1 via zero-padded FFT.
Eigen::VectorXd autocovariance(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  Eigen::Index padded = 1;
  while (padded < 2 * n) padded <<= 1;
  std::vector<double> centred(static_cast<std::size_t>(padded), 0.0);
  const double mean = x.mean();
  for (Eigen::Index i = 0; i < n; ++i) centred[static_cast<std::size_t>(i)] = x[i] - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, centred);
  for (auto& f : freq) f = std::norm(f);
  std::vector<double> back;
  fft.inv(back, freq);

  Eigen::VectorXd acov(n);
  for (Eigen::Index t = 0; t < n; ++t) acov[t] = back[static_cast<std::size_t>(t)] / static_cast<double>(n);
  return acov;
}

}  // namespace

ScalarDiagnostic split_rhat(std::span<const Eigen::VectorXd> chains) {
  const Eigen::Index half = common_length(chains) / 2;
  if (half < 4) throw TooFewDraws("split R-hat needs at least 4 draws per half-chain");

  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    // An odd middle draw is dropped.
    for (const Eigen::VectorXd& part : {Eigen::VectorXd(c.head(half)), Eigen::VectorXd(c.tail(half))}) {
      means.push_back(part.mean());
      vars.push_back(sample_variance(part));
    }
  }
  const double m = static_cast<double>(means.size());
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double between = 0.0;  // B / n
  for (double v : means) between += (v - grand) * (v - grand);
  between /= (m - 1.0);
  double within = 0.0;
  for (double v : vars) within += v;
  within /= m;

  if (within <= 0.0) return {between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0, true};
  return {std::sqrt((within + between) / within), false};
}

ScalarDiagnostic effective_sample_size(std::span<const Eigen::VectorXd> chains) {
  const Eigen::Index n = common_length(chains);
  if (n < 4) throw TooFewDraws("ESS needs at least 4 draws per chain");
  const double m = static_cast<double>(chains.size());
  const double total = m * static_cast<double>(n);

  std::vector<Eigen::VectorXd> acov;
  Eigen::VectorXd means(chains.size());
  for (std::size_t j = 0; j < chains.size(); ++j) {
    const auto x = chains[j].head(n);
    acov.push_back(autocovariance(x));
    means[static_cast<Eigen::Index>(j)] = x.mean();
  }
  const double nd = static_cast<double>(n);
  double within = 0.0;
  for (const auto& a : acov) within += a[0] * nd / (nd - 1.0);
  within /= m;
  const double between = chains.size() > 1 ? sample_variance(means) : 0.0;  // B / n
  const double var_plus = (nd - 1.0) / nd * within + between;
  if (!(var_plus > 0.0)) return {total, true};

  auto rho = [&](Eigen::Index t) {
    double mean_acov = 0.0;
    for (const auto& a : acov) mean_acov += a[t];
    mean_acov /= m;
    return 1.0 - (within - mean_acov) / var_plus;
  };

  double sum_pairs = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);
    previous = pair;
    sum_pairs += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / 1.05);
  return {total / tau, false};
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw EmptyChains("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

const SummaryRow& SummaryTable::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::out_of_range("no summary row named " + name);
}

SummaryTable summarize(std::span<const Eigen::MatrixXd> chains, const std::vector<std::string>& names) {
  if (chains.empty()) throw EmptyChains("no chains to summarize");
  for (const auto& c : chains)
    if (static_cast<std::size_t>(c.cols()) != names.size())
      throw std::invalid_argument("draw matrix width does not match the parameter names");

  SummaryTable table;
  for (std::size_t p = 0; p < names.size(); ++p) {
    const auto col = static_cast<Eigen::Index>(p);
    std::vector<Eigen::VectorXd> per_chain;
    std::vector<double> pooled;
    for (const auto& c : chains) {
      per_chain.emplace_back(c.col(col));
      pooled.insert(pooled.end(), c.col(col).data(), c.col(col).data() + c.rows());
    }
    if (pooled.empty()) throw EmptyChains("chains contain no draws");
    std::sort(pooled.begin(), pooled.end());

    SummaryRow row;
    row.name = names[p];
    double sum = 0.0;
    for (double v : pooled) sum += v;
    row.mean = sum / static_cast<double>(pooled.size());
    double ss = 0.0;
    for (double v : pooled) ss += (v - row.mean) * (v - row.mean);
    row.sd = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
    row.q025 = quantile_sorted(pooled, 0.025);
    row.q50 = quantile_sorted(pooled, 0.5);
    row.q975 = quantile_sorted(pooled, 0.975);
    // Chains too short for either diagnostic get the flagged sentinels.
    try {
      row.rhat = split_rhat(per_chain);
    } catch (const TooFewDraws&) {
      row.rhat = {1.0, true};
    }
    try {
      row.ess = effective_sample_size(per_chain);
    } catch (const TooFewDraws&) {
      row.ess = {static_cast<double>(pooled.size()), true};
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Eigen::MatrixXd draw_matrix(const ModelSpec& spec, const ChainOutput& chain) {
  if (chain.draws.empty()) return {};
  const Eigen::Index width = flatten(spec, chain.draws.front()).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(chain.draws.size()), width);
  for (std::size_t k = 0; k < chain.draws.size(); ++k)
    m.row(static_cast<Eigen::Index>(k)) = flatten(spec, chain.draws[k]).transpose();
  return m;
}

SummaryTable summarize(const FitResult& fit) {
  std::vector<Eigen::MatrixXd> mats;
  for (const auto& c : fit.chains) mats.push_back(draw_matrix(fit.spec, c));
  return summarize(mats, parameter_names(fit.spec, fit.group_ids));
}

Eigen::VectorXd split_rhat(std::span<const Eigen::MatrixXd> chains) {
  if (chains.empty()) throw EmptyChains("no chains supplied");
  Eigen::VectorXd out(chains.front().cols());
  for (Eigen::Index p = 0; p < out.size(); ++p) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto& c : chains) cols.emplace_back(c.col(p));
    out[p] = split_rhat(cols).value;
  }
  return out;
}

Eigen::VectorXd effective_sample_size(std::span<const Eigen::MatrixXd> chains) {
  if (chains.empty()) throw EmptyChains("no chains supplied");
  Eigen::VectorXd out(chains.front().cols());
  for (Eigen::Index p = 0; p < out.size(); ++p) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto& c : chains) cols.emplace_back(c.col(p));
    out[p] = effective_sample_size(cols).value;
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_rhat(const ScalarDiagnostic& d) { return d.degenerate ? "NA" : fmt(d.value); }

std::string fmt_ess(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", v);
  return buf;
}

}  // namespace

void write_summary_csv(std::ostream& os, const SummaryTable& table) {
  os << "name,mean,sd,q2.5,q50,q97.5,rhat,ess\n";
  for (const auto& r : table.rows) {
    os << r.name << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ',' << fmt(r.q025) << ',' << fmt(r.q50) << ','
       << fmt(r.q975) << ',' << fmt_rhat(r.rhat) << ',' << fmt_ess(r.ess.value) << '\n';
  }
}

void write_summary_text(std::ostream& os, const SummaryTable& table) {
  std::size_t width = 4;
  for (const auto& r : table.rows) width = std::max(width, r.name.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %11s %11s %11s %11s %11s %7s %8s\n", static_cast<int>(width), "name", "mean",
                "sd", "2.5%", "50%", "97.5%", "rhat", "ess");
  os << buf;
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%-*s %11.4f %11.4f %11.4f %11.4f %11.4f %7s %8s\n", static_cast<int>(width),
                  r.name.c_str(), r.mean, r.sd, r.q025, r.q50, r.q975, fmt_rhat(r.rhat).c_str(),
                  fmt_ess(r.ess.value).c_str());
    os << buf;
  }
}

}  // namespace jointpanel
