#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jointpanel/sampler.hpp"

namespace jointpanel {

inline constexpr std::size_t kMinEvidenceDraws = 100;

// Spread across chains above which the estimate is flagged as unstable.
inline constexpr double kUnstableSpread = 2.0;

// log of the harmonic mean of exp(loglik): -(logsumexp(-l) - ln S).
// Exact for constant input and independent of draw order.
// Throws InsufficientDraws (< 100 draws) or NonFiniteLoglik.
double harmonic_mean_log_ml(std::span<const double> loglik);

// Strength of evidence graded on |2 log BF|: 0 is `negative` (no evidence),
// then (0,2], (2,6], (6,10], > 10.
enum class Verdict { Negative, BarelyWorthMentioning, Positive, Strong, Decisive };

Verdict grade_evidence(double two_log_bf);
std::string_view to_string(Verdict v);

// Log-likelihood streams of one fitted model, chain by chain.
struct ModelEvidenceInput {
  std::string name;
  std::string fingerprint;
  std::vector<std::vector<double>> loglik_per_chain;
};

ModelEvidenceInput evidence_input(const FitResult& fit);

struct EvidenceReport {
  std::string reference;    // denominator of the Bayes factor
  std::string alternative;  // numerator
  std::map<std::string, double> log_ml;
  std::map<std::string, double> mc_spread;  // sd of per-chain estimates, 0 for a single chain
  double log_bayes_factor = 0.0;            // log_ml[alternative] - log_ml[reference]
  Verdict verdict = Verdict::Negative;
  std::string favoured;  // model with the larger log_ml, empty on a tie
  bool unstable = false; // some model has mc_spread > kUnstableSpread
};

// Throws DatasetMismatch when the fingerprints differ.
EvidenceReport compare(const ModelEvidenceInput& reference, const ModelEvidenceInput& alternative);
EvidenceReport compare(const FitResult& reference, const FitResult& alternative);

nlohmann::json to_json(const EvidenceReport& report);
std::string verdict_line(const EvidenceReport& report);

}  // namespace jointpanel
