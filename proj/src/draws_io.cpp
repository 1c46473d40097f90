#include "jointpanel/draws_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "jointpanel/errors.hpp"
#include "jointpanel/ingest.hpp"

namespace jointpanel {

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void write_chain_csv(std::ostream& os, const ModelSpec& spec, const std::vector<std::string>& group_ids,
                     const ChainOutput& chain) {
  for (const auto& name : parameter_names(spec, group_ids)) os << name << ',';
  os << "loglik\n";
  for (std::size_t k = 0; k < chain.draws.size(); ++k) {
    const Eigen::VectorXd v = flatten(spec, chain.draws[k]);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      put(os, v[i]);
      os << ',';
    }
    put(os, chain.loglik_per_draw[k]);
    os << '\n';
  }
}

nlohmann::json to_json(const SamplerConfig& c) {
  return {{"chains", c.n_chains}, {"warmup", c.n_warmup}, {"keep", c.n_keep},       {"thin", c.thin},
          {"seed", c.seed},       {"adapt", c.adapt},     {"init_jitter", c.init_jitter}};
}

nlohmann::json to_json(const HyperPriors& p) {
  return {{"beta_mean", p.beta_mean}, {"beta_sd", p.beta_sd}, {"sd_upper", p.sd_upper}};
}

nlohmann::json chain_sidecar(const ModelSpec& spec, const SamplerConfig& config, const ChainOutput& chain) {
  nlohmann::json accept = nlohmann::json::object();
  nlohmann::json steps = nlohmann::json::object();
  for (int k = 0; k < kMhBlocks; ++k) {
    const auto block = static_cast<MhBlock>(k);
    if (!spec.has_ar() && (block == MhBlock::RhoI || block == MhBlock::RhoA)) continue;
    accept[std::string(block_name(block))] = chain.accept_rates[k];
    steps[std::string(block_name(block))] = chain.step_sizes[k];
  }
  return {{"chain_id", chain.chain_id},
          {"seed", chain.seed},
          {"model", std::string(to_string(spec.kind))},
          {"priors", to_json(spec.priors)},
          {"config", to_json(config)},
          {"kernel", "metropolis_within_gibbs"},
          {"draws", chain.draws.size()},
          {"accept_rates", accept},
          {"step_sizes", steps}};
}

StoredChain read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open chain file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("chain file '" + path.string() + "' is empty");
  StoredChain out;
  out.names = split_csv_record(line);
  if (out.names.empty() || out.names.back() != "loglik")
    throw DataError("chain file '" + path.string() + "' has no loglik column");
  out.names.pop_back();
  const std::size_t width = out.names.size() + 1;

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != width)
      throw DataError("chain file '" + path.string() + "' row " + std::to_string(rows + 2) + " has " +
                      std::to_string(fields.size()) + " fields, expected " + std::to_string(width));
    for (const auto& f : fields) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw DataError("chain file '" + path.string() + "' row " + std::to_string(rows + 2) + ": bad number '" +
                        f + "'");
      values.push_back(v);
    }
    ++rows;
  }
  out.draws.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width - 1));
  out.loglik.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c + 1 < width; ++c)
      out.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * width + c];
    out.loglik[r] = values[r * width + width - 1];
  }
  return out;
}

std::vector<std::filesystem::path> chain_files(const std::filesystem::path& fit_dir) {
  std::vector<std::pair<int, std::filesystem::path>> found;
  const auto dir = fit_dir / "chains";
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return {};
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("chain-", 0) != 0 || entry.path().extension() != ".csv") continue;
    const std::string digits = name.substr(6, name.size() - 10);
    int k = 0;
    const auto [ptr, err] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (err == std::errc() && ptr == digits.data() + digits.size()) found.emplace_back(k, entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> out;
  for (auto& [k, p] : found) out.push_back(std::move(p));
  return out;
}

}  // namespace jointpanel
