#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "jointpanel/sampler.hpp"

namespace jointpanel {

// Chain dump: header of flat parameter names followed by `loglik`, one row
// per kept draw, every value at round-trip precision.
void write_chain_csv(std::ostream& os, const ModelSpec& spec, const std::vector<std::string>& group_ids,
                     const ChainOutput& chain);

nlohmann::json chain_sidecar(const ModelSpec& spec, const SamplerConfig& config, const ChainOutput& chain);

struct StoredChain {
  std::vector<std::string> names;  // parameter columns, without loglik
  Eigen::MatrixXd draws;
  std::vector<double> loglik;
};

// Throws DataError on a malformed file.
StoredChain read_chain_csv(const std::filesystem::path& path);

// chains/chain-<k>.csv files of a fit directory, in k order.
std::vector<std::filesystem::path> chain_files(const std::filesystem::path& fit_dir);

nlohmann::json to_json(const SamplerConfig& config);
nlohmann::json to_json(const HyperPriors& priors);

}  // namespace jointpanel
