#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jointpanel/sampler.hpp"

namespace jointpanel {

// A convergence statistic that may be undefined because the draws have zero
// variance. `value` is never NaN: a degenerate R-hat is 1 when every chain is
// the same constant and +inf otherwise; a degenerate ESS is the draw count.
struct ScalarDiagnostic {
  double value = 0.0;
  bool degenerate = false;
};

// Split-R-hat over the halves of every chain: sqrt((W + B/n) / W), where W is
// the mean within-half variance and B/n the variance of the half means. It is
// exactly 1 when all halves share mean and variance. Needs >= 4 draws per half.
ScalarDiagnostic split_rhat(std::span<const Eigen::VectorXd> chains);

// Multi-chain autocorrelation ESS with Geyer's initial positive (monotone)
// sequence truncation, capped at 1.05 x the total number of draws.
ScalarDiagnostic effective_sample_size(std::span<const Eigen::VectorXd> chains);

// Type-7 quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double p);

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  ScalarDiagnostic rhat;
  ScalarDiagnostic ess;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;

  const SummaryRow& row(const std::string& name) const;  // throws std::out_of_range
};

// Each matrix is one chain: rows are draws, columns parameters. R-hat and ESS
// of chains too short for them are reported as degenerate.
SummaryTable summarize(std::span<const Eigen::MatrixXd> chains, const std::vector<std::string>& names);

Eigen::MatrixXd draw_matrix(const ModelSpec& spec, const ChainOutput& chain);

SummaryTable summarize(const FitResult& fit);

// Per-parameter convenience wrappers over a chain set.
Eigen::VectorXd split_rhat(std::span<const Eigen::MatrixXd> chains);
Eigen::VectorXd effective_sample_size(std::span<const Eigen::MatrixXd> chains);

// Columns: name,mean,sd,q2.5,q50,q97.5,rhat,ess
void write_summary_csv(std::ostream& os, const SummaryTable& table);
void write_summary_text(std::ostream& os, const SummaryTable& table);

}  // namespace jointpanel
