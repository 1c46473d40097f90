#include "jointpanel/cli.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointpanel/diagnostics.hpp"
#include "jointpanel/draws_io.hpp"
#include "jointpanel/errors.hpp"
#include "jointpanel/evidence.hpp"

#ifndef JOINTPANEL_VERSION
#define JOINTPANEL_VERSION "dev"
#endif

namespace jointpanel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DataError("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw DataError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw RuntimeFailure("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Files are written under a hidden sibling directory and moved into place by
// commit(); anything not committed is removed, so a failed command leaves no
// partial output behind.
class StagedDir {
 public:
  explicit StagedDir(fs::path target) : target_(std::move(target)) {
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    stage_ = parent / ("." + target_.filename().string() + ".staging");
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    std::error_code ec;
    fs::remove_all(stage_, ec);
  }

  const fs::path& path() const { return stage_; }

  void commit() {
    fs::create_directories(target_);
    for (const auto& entry : fs::directory_iterator(stage_)) {
      const fs::path dest = target_ / entry.path().filename();
      fs::remove_all(dest);
      fs::rename(entry.path(), dest);
    }
  }

 private:
  fs::path target_;
  fs::path stage_;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string started_at = utc_timestamp();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

json manifest(const std::string& command, const json& config, const std::string& fingerprint,
              std::uint64_t seed, const Timer& timer) {
  return {{"command", command},
          {"tool_version", JOINTPANEL_VERSION},
          {"config", config},
          {"dataset_fingerprint", fingerprint},
          {"seed", seed},
          {"started_at", timer.started_at},
          {"wall_clock_seconds", timer.seconds()}};
}

json settings_json(const RunSettings& s) {
  json ingest{{"zero_policy", s.ingest.zero_policy == ZeroPolicy::Missing ? "missing" : "offset"},
              {"zero_offset", s.ingest.zero_offset},
              {"log_scale", s.ingest.log_scale == LogScale::Natural ? "natural" : "log10"}};
  if (s.ingest.year_range) {
    ingest["min_year"] = s.ingest.year_range->first;
    ingest["max_year"] = s.ingest.year_range->second;
  }
  return {{"sampler", to_json(s.sampler)}, {"priors", to_json(s.priors)}, {"ingest", ingest}};
}

struct SamplerOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> chains, warmup, keep, thin;

  void apply(SamplerConfig& c) const {
    if (seed) c.seed = *seed;
    if (chains) c.n_chains = *chains;
    if (warmup) c.n_warmup = *warmup;
    if (keep) c.n_keep = *keep;
    if (thin) c.thin = *thin;
  }
};

void add_sampler_flags(CLI::App* cmd, SamplerOverrides& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--chains", o.chains, "number of chains");
  cmd->add_option("--warmup", o.warmup, "warmup sweeps per chain");
  cmd->add_option("--keep", o.keep, "kept sweeps per chain (before thinning)");
  cmd->add_option("--thin", o.thin, "keep every k-th sweep");
}

RunSettings load_settings(const std::string& config_path, const SamplerOverrides& overrides) {
  RunSettings s;
  if (!config_path.empty()) apply_settings(read_key_value_file(config_path), s);
  overrides.apply(s.sampler);
  s.sampler.validate();
  s.ingest.validate();
  if (!(s.priors.beta_sd > 0.0) || !(s.priors.sd_upper > 0.0))
    throw DataError("beta_sd and sd_upper must be positive");
  return s;
}

IngestResult load_data(const std::string& path, const RunSettings& settings) {
  try {
    IngestResult r = load(path, settings.ingest);
    validate(r.data);
    return r;
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.find(path) != std::string::npos) throw;
    throw DataError(path + ": " + what);
  }
}

std::string summary_csv(const SummaryTable& table) {
  std::ostringstream ss;
  write_summary_csv(ss, table);
  return ss.str();
}

// Writes one fit into `dir` (already staged).
void write_fit(const fs::path& dir, const FitResult& fit, const RunSettings& settings, const IngestReport& report,
               const Timer& timer, std::ostream& out) {
  fs::create_directories(dir / "chains");
  std::vector<Eigen::MatrixXd> mats;
  for (const auto& chain : fit.chains) {
    const std::string stem = "chain-" + std::to_string(chain.chain_id);
    std::ostringstream csv;
    write_chain_csv(csv, fit.spec, fit.group_ids, chain);
    write_text(dir / "chains" / (stem + ".csv"), csv.str());
    write_text(dir / "chains" / (stem + ".json"), chain_sidecar(fit.spec, fit.config, chain).dump(2) + "\n");
    mats.push_back(draw_matrix(fit.spec, chain));
  }
  const SummaryTable table = summarize(mats, parameter_names(fit.spec, fit.group_ids));
  write_text(dir / "summary.csv", summary_csv(table));

  json config = settings_json(settings);
  config["model"] = std::string(to_string(fit.spec.kind));
  json m = manifest("fit", config, fit.fingerprint, settings.sampler.seed, timer);
  m["model"] = std::string(to_string(fit.spec.kind));
  m["ingest_report"] = to_json(report);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  write_summary_text(out, table);
}

struct FitDirectory {
  std::string model;
  std::string fingerprint;
  std::vector<StoredChain> chains;
};

FitDirectory read_fit_dir(const fs::path& dir) {
  const auto files = chain_files(dir);
  if (files.empty()) throw DataError("no chain files under '" + (dir / "chains").string() + "'");
  FitDirectory fd;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    const json m = json::parse(read_text(manifest_path), nullptr, false);
    if (m.is_discarded()) throw DataError("'" + manifest_path.string() + "' is not valid JSON");
    fd.model = m.value("model", "");
    fd.fingerprint = m.value("dataset_fingerprint", "");
  }
  for (const auto& f : files) {
    fd.chains.push_back(read_chain_csv(f));
    if (fd.chains.back().names != fd.chains.front().names)
      throw DataError("chain files in '" + dir.string() + "' have different columns");
  }
  return fd;
}

int fail(std::ostream& err, int code, const std::string& what) {
  err << "error: " << what << '\n';
  return code;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const DataError& e) {
    return fail(err, kExitInput, e.what());
  } catch (const RuntimeFailure& e) {
    return fail(err, kExitRuntime, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, kExitRuntime, e.what());
  } catch (const std::exception& e) {
    return fail(err, kExitRuntime, e.what());
  }
}

struct FitArgs {
  std::string data, model, config, out;
  SamplerOverrides overrides;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Timer timer;
    const RunSettings settings = load_settings(a.config, a.overrides);
    const ModelSpec spec{parse_model_kind(a.model), settings.priors};
    const IngestResult input = load_data(a.data, settings);
    check_identifiable(spec, input.data);
    err << "fitting " << to_string(spec.kind) << " to " << input.data.n_groups() << " groups, "
        << settings.sampler.n_chains << " chains\n";
    const FitResult result = fit(spec, input.data, settings.sampler);
    StagedDir stage(a.out);
    write_fit(stage.path(), result, settings, input.report, timer, out);
    stage.commit();
    return kExitOk;
  });
}

struct CompareArgs {
  std::string data, config, out;
  std::vector<std::string> fits;
  bool fit_both = false;
  SamplerOverrides overrides;
};

int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Timer timer;
    const RunSettings settings = load_settings(a.config, a.overrides);
    const IngestResult input = load_data(a.data, settings);
    const std::string fp = fingerprint(input.data);
    StagedDir stage(a.out);

    std::vector<ModelEvidenceInput> models;
    if (a.fit_both) {
      for (ModelKind kind : {ModelKind::M1, ModelKind::M2}) {
        const ModelSpec spec{kind, settings.priors};
        check_identifiable(spec, input.data);
        err << "fitting " << to_string(kind) << '\n';
        const FitResult result = fit(spec, input.data, settings.sampler);
        std::ostringstream discard;
        write_fit(stage.path() / (kind == ModelKind::M1 ? "m1" : "m2"), result, settings, input.report, timer,
                  discard);
        models.push_back(evidence_input(result));
      }
    } else {
      if (a.fits.size() != 2) throw DataError("compare needs exactly two fit directories (or --fit-both)");
      for (const auto& dir : a.fits) {
        const FitDirectory fd = read_fit_dir(dir);
        if (fd.fingerprint != fp)
          throw DatasetMismatch("fit in '" + dir + "' was made on a different dataset than '" + a.data + "'");
        ModelEvidenceInput in{fd.model.empty() ? dir : fd.model, fd.fingerprint, {}};
        for (const auto& c : fd.chains) in.loglik_per_chain.push_back(c.loglik);
        models.push_back(std::move(in));
      }
      if (models[0].name == models[1].name) {
        models[0].name += " (" + a.fits[0] + ")";
        models[1].name += " (" + a.fits[1] + ")";
      } else if (models[0].name == "M2" && models[1].name == "M1") {
        std::swap(models[0], models[1]);
      }
    }

    const EvidenceReport report = compare(models[0], models[1]);
    write_text(stage.path() / "evidence.json", to_json(report).dump(2) + "\n");
    json m = manifest("compare", settings_json(settings), fp, settings.sampler.seed, timer);
    m["fit_dirs"] = a.fits;
    m["fit_both"] = a.fit_both;
    write_text(stage.path() / "manifest.json", m.dump(2) + "\n");
    stage.commit();
    out << verdict_line(report) << '\n';
    return kExitOk;
  });
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_path, std::ostream& err) {
  return guarded(err, [&] {
    const Timer timer;
    const auto kv = read_key_value_file(scenario_path);
    const SimScenario scenario = scenario_from_key_values(kv);
    const PanelDataset data = generate(scenario);

    const fs::path target(out_path);
    const fs::path manifest_path = target.string() + ".manifest.json";
    const fs::path tmp_csv = target.string() + ".partial";
    const fs::path tmp_manifest = manifest_path.string() + ".partial";
    std::ostringstream csv;
    write_panel_csv(csv, data);
    json config = json::object();
    for (const auto& [k, v] : kv) config[k] = v;
    const json m = manifest("simulate", config, fingerprint(data), scenario.seed, timer);
    try {
      write_text(tmp_csv, csv.str());
      write_text(tmp_manifest, m.dump(2) + "\n");
    } catch (...) {
      std::error_code ec;
      fs::remove(tmp_csv, ec);
      fs::remove(tmp_manifest, ec);
      throw;
    }
    fs::rename(tmp_manifest, manifest_path);
    fs::rename(tmp_csv, target);
    err << "wrote " << data.n_groups() << " groups x " << scenario.n_times << " times to " << out_path << '\n';
    return kExitOk;
  });
}

int cmd_summarize(const std::string& fit_dir, bool text, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Timer timer;
    const FitDirectory fd = read_fit_dir(fit_dir);
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& c : fd.chains) mats.push_back(c.draws);
    const SummaryTable table = summarize(mats, fd.chains.front().names);
    if (text) {
      write_summary_text(out, table);
    } else {
      write_summary_csv(out, table);
    }
    const json m = manifest("summarize", json{{"fit_dir", fit_dir}, {"text", text}}, fd.fingerprint, 0, timer);
    write_text(fs::path(fit_dir) / "manifest-summarize.json", m.dump(2) + "\n");
    return kExitOk;
  });
}

}  // namespace

std::map<std::string, std::string> read_key_value_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

void apply_settings(const std::map<std::string, std::string>& kv, RunSettings& s) {
  std::optional<int> min_year, max_year;
  for (const auto& [key, value] : kv) {
    if (key == "chains") s.sampler.n_chains = parse_value<int>(key, value);
    else if (key == "warmup") s.sampler.n_warmup = parse_value<int>(key, value);
    else if (key == "keep") s.sampler.n_keep = parse_value<int>(key, value);
    else if (key == "thin") s.sampler.thin = parse_value<int>(key, value);
    else if (key == "seed") s.sampler.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "adapt") s.sampler.adapt = parse_bool(key, value);
    else if (key == "init_jitter") s.sampler.init_jitter = parse_value<double>(key, value);
    else if (key == "beta_mean") s.priors.beta_mean = parse_value<double>(key, value);
    else if (key == "beta_sd") s.priors.beta_sd = parse_value<double>(key, value);
    else if (key == "sd_upper") s.priors.sd_upper = parse_value<double>(key, value);
    else if (key == "zero_policy") {
      if (value == "missing") s.ingest.zero_policy = ZeroPolicy::Missing;
      else if (value == "offset") s.ingest.zero_policy = ZeroPolicy::Offset;
      else throw DataError("config key 'zero_policy': expected missing or offset");
    } else if (key == "zero_offset") s.ingest.zero_offset = parse_value<double>(key, value);
    else if (key == "log_scale") {
      if (value == "natural") s.ingest.log_scale = LogScale::Natural;
      else if (value == "log10") s.ingest.log_scale = LogScale::Base10;
      else throw DataError("config key 'log_scale': expected natural or log10");
    } else if (key == "min_year") min_year = parse_value<int>(key, value);
    else if (key == "max_year") max_year = parse_value<int>(key, value);
    else if (key == "col_group") s.ingest.columns.group = value;
    else if (key == "col_year") s.ingest.columns.year = value;
    else if (key == "col_sector") s.ingest.columns.sector = value;
    else if (key == "col_tonnes") s.ingest.columns.tonnes = value;
    else if (key == "col_log_tonnes") s.ingest.columns.log_tonnes = value;
    else throw DataError("unknown config key '" + key + "'");
  }
  if (min_year.has_value() != max_year.has_value())
    throw DataError("min_year and max_year must be given together");
  if (min_year) s.ingest.year_range = std::make_pair(*min_year, *max_year);
}

SimScenario scenario_from_key_values(const std::map<std::string, std::string>& kv) {
  const auto model = kv.find("model");
  const ModelKind kind = model == kv.end() ? ModelKind::M1 : parse_model_kind(model->second);
  SimScenario s = reference_scenario(kind, 1);
  ParameterState& p = s.true_state;
  for (const auto& [key, value] : kv) {
    auto real = [&] { return parse_value<double>(key, value); };
    if (key == "model") continue;
    else if (key == "n_groups") s.n_groups = parse_value<int>(key, value);
    else if (key == "n_times") s.n_times = parse_value<int>(key, value);
    else if (key == "seed") s.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "t0_label") s.t0_label = parse_value<int>(key, value);
    else if (key == "beta0_I") p.beta0[0] = real();
    else if (key == "beta0_A") p.beta0[1] = real();
    else if (key == "sigma") p.sigma = real();
    else if (key == "sigma0_I") p.sigma0[0] = real();
    else if (key == "sigma0_A") p.sigma0[1] = real();
    else if (key == "sigma1_I") p.sigma1[0] = real();
    else if (key == "sigma1_A") p.sigma1[1] = real();
    else if (key == "rho0") p.rho0 = real();
    else if (key == "rho1") p.rho1 = real();
    else if (key == "rho_I" || key == "rho_A") {
      if (kind != ModelKind::M2) throw DataError("'" + key + "' only applies to model m2");
      (*p.ar)[key == "rho_I" ? 0 : 1] = real();
    } else {
      throw DataError("unknown scenario key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian shared-parameter joint models for paired longitudinal panels"};
  app.set_version_flag("--version", JOINTPANEL_VERSION);
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit model m1 or m2 by MCMC");
  fit_cmd->add_option("--data", fit_args.data, "landings CSV")->required();
  fit_cmd->add_option("--model", fit_args.model, "m1 or m2")->required();
  fit_cmd->add_option("--config", fit_args.config, "key = value config file");
  fit_cmd->add_option("--out", fit_args.out, "output directory")->required();
  add_sampler_flags(fit_cmd, fit_args.overrides);

  CompareArgs cmp_args;
  auto* cmp_cmd = app.add_subcommand("compare", "harmonic-mean evidence and Bayes factor for two fits");
  cmp_cmd->add_option("--data", cmp_args.data, "landings CSV both models were fitted to")->required();
  cmp_cmd->add_option("--fits", cmp_args.fits, "two fit directories")->expected(2);
  cmp_cmd->add_flag("--fit-both", cmp_args.fit_both, "fit m1 and m2 first");
  cmp_cmd->add_option("--config", cmp_args.config, "key = value config file");
  cmp_cmd->add_option("--out", cmp_args.out, "output directory")->required();
  add_sampler_flags(cmp_cmd, cmp_args.overrides);

  std::string scenario_path, sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a panel from a scenario file");
  sim_cmd->add_option("--scenario", scenario_path, "key = value scenario file")->required();
  sim_cmd->add_option("--out", sim_out, "output CSV")->required();

  std::string fit_dir;
  bool text = false;
  auto* sum_cmd = app.add_subcommand("summarize", "summary table from stored draws");
  sum_cmd->add_option("fit_dir", fit_dir, "directory written by fit")->required();
  sum_cmd->add_flag("--text", text, "aligned table instead of CSV");

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << JOINTPANEL_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  if (fit_cmd->parsed()) return cmd_fit(fit_args, out, err);
  if (cmp_cmd->parsed()) {
    if (cmp_args.fit_both == !cmp_args.fits.empty()) {
      err << "error: compare takes either --fits DIR1 DIR2 or --fit-both\n";
      return kExitInput;
    }
    return cmd_compare(cmp_args, out, err);
  }
  if (sim_cmd->parsed()) return cmd_simulate(scenario_path, sim_out, err);
  return cmd_summarize(fit_dir, text, out, err);
}

}  // namespace jointpanel::cli
