// Command-line front end: validate a run configuration, collect survey
// responses, map them to semantic decisions, and emit the analysis tables.
//
// Exit codes: 0 success, 1 validation failure, 2 partial collection,
// 3 analysis precondition failure.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moralsurvey/moralsurvey.hpp"

namespace {

using namespace moralsurvey;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> datasets;
  std::vector<std::string> models;
  std::string out_dir;
  std::string thresholds;
  int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool wants_models = false) {
  cmd->add_option("--config", flags.config_path, "Run configuration file")->required();
  cmd->add_option("--dataset", flags.datasets, "Restrict to named dataset(s)")->delimiter(',');
  if (wants_models)
    cmd->add_option("--models", flags.models, "Restrict to named respondent(s)")->delimiter(',');
  cmd->add_option("--out", flags.out_dir, "Override the configured output directory");
  cmd->add_option("--seed", flags.seed, "Override the configured seed");
  cmd->add_option("--thresholds", flags.thresholds,
                  "Override thresholds as strong_preference,qf_consistency,qf_entropy");
}

RunConfig load_config(const CommonFlags& flags) {
  RunConfig config = load_run_config(flags.config_path);
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  if (flags.seed >= 0) {
    config.seed = static_cast<uint64_t>(flags.seed);
    for (auto& r : config.respondents)
      if (r.kind == RespondentKind::Mock) r.seed = config.seed;
  }
  if (!flags.thresholds.empty()) {
    std::istringstream in(flags.thresholds);
    std::string part;
    std::vector<double> values;
    while (std::getline(in, part, ',')) values.push_back(std::stod(part));
    if (values.size() != 3)
      throw std::invalid_argument("--thresholds expects three comma-separated values");
    config.thresholds = {values[0], values[1], values[2]};
  }
  return config;
}

int cmd_validate(const CommonFlags& flags, bool probe) {
  RunConfig config = load_config(flags);
  ValidationReport report = run_validate(config, probe);
  for (const auto& line : report.info) std::cout << "ok: " << line << "\n";
  for (const auto& line : report.errors) std::cerr << "error: " << line << "\n";
  if (!report.ok()) {
    std::cerr << report.errors.size() << " validation error(s)\n";
    return 1;
  }
  std::cout << "configuration valid (config " << config_hash(config) << ")\n";
  return 0;
}

int cmd_collect(const CommonFlags& flags, bool resume) {
  RunConfig config = load_config(flags);
  ValidationReport report = run_validate(config);
  if (!report.ok()) {
    for (const auto& line : report.errors) std::cerr << "error: " << line << "\n";
    return 1;
  }
  CollectOptions opts;
  opts.resume = resume;
  opts.models = flags.models;
  opts.datasets = flags.datasets;
  auto summaries = run_collect(config, opts, &std::cout);

  bool partial = false;
  for (const auto& [name, summary] : summaries) {
    std::cout << name << ": " << summary.written << " new records, " << summary.skipped
              << " already present, " << summary.transport_failures << " transport failures\n";
    for (const auto& err : summary.errors) std::cerr << name << ": fatal: " << err << "\n";
    if (!summary.missing.empty()) {
      std::cerr << name << ": " << summary.missing.size() << " tuple(s) missing:\n";
      for (const auto& tuple : summary.missing) std::cerr << "  " << tuple << "\n";
    }
    partial = partial || !summary.missing.empty() || summary.transport_failures > 0 ||
              !summary.errors.empty();
  }
  return partial ? 2 : 0;
}

int cmd_map(const CommonFlags& flags) {
  RunConfig config = load_config(flags);
  for (const DatasetRef* ref : select_datasets(config, flags.datasets)) {
    size_t mapped = run_map(config, *ref);
    std::cout << ref->name << ": " << mapped << " record(s) newly mapped\n";
  }
  return 0;
}

int cmd_analyze(const CommonFlags& flags, bool report_text) {
  RunConfig config = load_config(flags);
  int exit_code = 0;
  for (const DatasetRef* ref : select_datasets(config, flags.datasets)) {
    AnalysisResult result;
    try {
      result = run_analyze(config, *ref);
    } catch (const std::exception& e) {
      std::cerr << ref->name << ": analysis precondition failed: " << e.what() << "\n";
      exit_code = 3;
      continue;
    }
    if (report_text) {
      std::cout << render_report(result, config) << "\n";
    } else {
      auto files = write_analysis_tables(result, config);
      for (const auto& path : files) std::cout << "wrote " << path << "\n";
      for (const auto& notice : result.notices) std::cout << "notice: " << notice << "\n";
    }
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario surveys for language-model respondents"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool probe = false;
  bool resume = false;

  CLI::App* validate = app.add_subcommand("validate", "Check the configuration and datasets");
  add_common(validate, flags);
  validate->add_flag("--probe", probe, "Probe endpoint respondents for reachability");

  CLI::App* collect = app.add_subcommand("collect", "Sample responses into the response logs");
  add_common(collect, flags, true);
  collect->add_flag("--resume", resume, "Skip (model, scenario, form, sample) tuples already logged");

  CLI::App* map_cmd = app.add_subcommand("map", "Map raw responses to semantic decisions");
  add_common(map_cmd, flags);

  CLI::App* analyze = app.add_subcommand("analyze", "Compute metrics and emit plot-ready tables");
  add_common(analyze, flags);

  CLI::App* report = app.add_subcommand("report", "Print a human-readable analysis summary");
  add_common(report, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(flags, probe);
    if (collect->parsed()) return cmd_collect(flags, resume);
    if (map_cmd->parsed()) return cmd_map(flags);
    if (analyze->parsed()) return cmd_analyze(flags, false);
    if (report->parsed()) return cmd_analyze(flags, true);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
