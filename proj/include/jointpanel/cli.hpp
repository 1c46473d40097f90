#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "jointpanel/ingest.hpp"
#include "jointpanel/sampler.hpp"
#include "jointpanel/simulate.hpp"

namespace jointpanel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

// `key = value` lines; blank lines and lines starting with '#' are skipped.
// Throws DataError on a malformed line or an unreadable file.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

struct RunSettings {
  SamplerConfig sampler;
  HyperPriors priors;
  IngestConfig ingest;
};

// Applies recognised keys onto `settings`; unknown keys are a DataError.
void apply_settings(const std::map<std::string, std::string>& kv, RunSettings& settings);

SimScenario scenario_from_key_values(const std::map<std::string, std::string>& kv);

// Full command line (argv[0] included). Human messages go to `err`, machine
// output to `out` and to files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jointpanel::cli
