#include "jointpanel/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "jointpanel/errors.hpp"
#include "jointpanel/log_density.hpp"

namespace jointpanel {

namespace {

double log_harmonic_mean(std::span<const double> loglik) {
  std::vector<double> neg(loglik.size());
  std::transform(loglik.begin(), loglik.end(), neg.begin(), [](double l) { return -l; });
  // Sorting fixes the summation order, so permuted input gives identical bits.
  std::sort(neg.begin(), neg.end());
  const double top = neg.back();
  double acc = 0.0;
  for (double v : neg) acc += std::exp(v - top);
  return -(top + std::log(acc / static_cast<double>(neg.size())));
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double harmonic_mean_log_ml(std::span<const double> loglik) {
  if (loglik.size() < kMinEvidenceDraws)
    throw InsufficientDraws("harmonic mean needs at least " + std::to_string(kMinEvidenceDraws) + " draws, got " +
                            std::to_string(loglik.size()));
  for (double l : loglik)
    if (!std::isfinite(l)) throw NonFiniteLoglik("log-likelihood stream contains a non-finite value");
  return log_harmonic_mean(loglik);
}

Verdict grade_evidence(double two_log_bf) {
  const double x = std::abs(two_log_bf);
  if (x == 0.0) return Verdict::Negative;
  if (x <= 2.0) return Verdict::BarelyWorthMentioning;
  if (x <= 6.0) return Verdict::Positive;
  if (x <= 10.0) return Verdict::Strong;
  return Verdict::Decisive;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Negative: return "negative";
    case Verdict::BarelyWorthMentioning: return "barely_worth_mentioning";
    case Verdict::Positive: return "positive";
    case Verdict::Strong: return "strong";
    case Verdict::Decisive: return "decisive";
  }
  return "?";
}

ModelEvidenceInput evidence_input(const FitResult& fit) {
  ModelEvidenceInput in{std::string(to_string(fit.spec.kind)), fit.fingerprint, {}};
  for (const auto& chain : fit.chains) in.loglik_per_chain.push_back(chain.loglik_per_draw);
  return in;
}

EvidenceReport compare(const ModelEvidenceInput& reference, const ModelEvidenceInput& alternative) {
  if (reference.fingerprint != alternative.fingerprint)
    throw DatasetMismatch("models were fitted on different datasets (" + reference.fingerprint + " vs " +
                          alternative.fingerprint + ")");
  EvidenceReport report;
  report.reference = reference.name;
  report.alternative = alternative.name;
  for (const ModelEvidenceInput* in : {&reference, &alternative}) {
    std::vector<double> pooled;
    std::vector<double> per_chain;
    for (const auto& chain : in->loglik_per_chain) {
      pooled.insert(pooled.end(), chain.begin(), chain.end());
      if (!chain.empty()) per_chain.push_back(log_harmonic_mean(chain));
    }
    report.log_ml[in->name] = harmonic_mean_log_ml(pooled);
    report.mc_spread[in->name] = sample_sd(per_chain);
    report.unstable = report.unstable || report.mc_spread[in->name] > kUnstableSpread;
  }
  report.log_bayes_factor = report.log_ml[alternative.name] - report.log_ml[reference.name];
  report.verdict = grade_evidence(2.0 * report.log_bayes_factor);
  if (report.log_bayes_factor > 0.0) report.favoured = alternative.name;
  if (report.log_bayes_factor < 0.0) report.favoured = reference.name;
  return report;
}

EvidenceReport compare(const FitResult& reference, const FitResult& alternative) {
  return compare(evidence_input(reference), evidence_input(alternative));
}

nlohmann::json to_json(const EvidenceReport& report) {
  nlohmann::json j;
  j["estimator"] = "harmonic_mean";
  j["reference"] = report.reference;
  j["alternative"] = report.alternative;
  j["log_ml"] = report.log_ml;
  j["mc_spread"] = report.mc_spread;
  j["log_bayes_factor"] = report.log_bayes_factor;
  j["two_log_bayes_factor"] = 2.0 * report.log_bayes_factor;
  j["verdict"] = std::string(to_string(report.verdict));
  j["favoured"] = report.favoured;
  j["unstable"] = report.unstable;
  return j;
}

std::string verdict_line(const EvidenceReport& report) {
  char buf[256];
  const std::string favoured = report.favoured.empty() ? "neither model" : report.favoured;
  std::snprintf(buf, sizeof buf, "log BF(%s vs %s) = %.2f, 2 log BF = %.2f: %s evidence for %s%s",
                report.alternative.c_str(), report.reference.c_str(), report.log_bayes_factor,
                2.0 * report.log_bayes_factor, std::string(to_string(report.verdict)).c_str(), favoured.c_str(),
                report.unstable ? " (unstable: chain spread > 2 nats)" : "");
  return buf;
}

}  // namespace jointpanel
