#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "moralsurvey/config.hpp"
#include "moralsurvey/curation.hpp"

namespace moralsurvey {

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> info;
  bool ok() const { return errors.empty(); }
};

inline ValidationReport run_validate(const RunConfig& config, bool probe_endpoints = false) {
  ValidationReport report;
  try {
    config.validate();
  } catch (const std::exception& e) {
    report.errors.push_back(std::string("config: ") + e.what());
  }

  SurveyAssets assets;
  try {
    assets = config.load_assets();
    report.info.push_back(config.assets_dir.empty() ? "assets: built-in"
                                                    : "assets: " + config.assets_dir);
  } catch (const std::exception& e) {
    report.errors.push_back(std::string("assets: ") + e.what());
    return report;
  }

  for (const auto& ref : config.datasets) {
    try {
      Dataset ds = load_dataset(ref.path);
      for (const auto& scenario : ds.scenarios)
        for (const auto& f : config.question_forms()) render(scenario, f, assets);
      report.info.push_back("dataset '" + ref.name + "': " + std::to_string(ds.scenarios.size()) +
                            " scenarios, ambiguity " + to_string(ds.ambiguity()) +
                            ", M=" + std::to_string(config.samples_for(ds.ambiguity())));
    } catch (const std::exception& e) {
      report.errors.push_back("dataset '" + ref.name + "': " + e.what());
    }
  }

  for (const auto& spec : config.respondents) {
    if (spec.kind == RespondentKind::Mock) {
      report.info.push_back("respondent '" + spec.model + "': mock, seed " + std::to_string(spec.seed));
      continue;
    }
    if (!spec.auth_env.empty() && !std::getenv(spec.auth_env.c_str()))
      report.errors.push_back("respondent '" + spec.model + "': environment variable '" +
                              spec.auth_env + "' is not set");
    if (probe_endpoints) {
      httplib::Client client(spec.endpoint);
      client.set_connection_timeout(5, 0);
      if (auto res = client.Get("/"); !res)
        report.errors.push_back("respondent '" + spec.model + "': endpoint '" + spec.endpoint +
                                "' is unreachable");
      else
        report.info.push_back("respondent '" + spec.model + "': endpoint reachable");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// collect / map
// ---------------------------------------------------------------------------

struct CollectOptions {
  bool resume = false;
  std::vector<std::string> models;    // empty -> all configured respondents
  std::vector<std::string> datasets;  // empty -> all configured datasets
};

inline std::vector<const DatasetRef*> select_datasets(const RunConfig& config,
                                                      const std::vector<std::string>& names) {
  std::vector<const DatasetRef*> out;
  if (names.empty()) {
    for (const auto& d : config.datasets) out.push_back(&d);
    return out;
  }
  for (const auto& name : names) {
    const DatasetRef* ref = config.find_dataset(name);
    if (!ref) throw std::invalid_argument("unknown dataset '" + name + "'");
    out.push_back(ref);
  }
  return out;
}

inline std::map<std::string, CollectionSummary> run_collect(const RunConfig& config,
                                                            const CollectOptions& opts = {},
                                                            std::ostream* progress = nullptr) {
  const SurveyAssets assets = config.load_assets();
  std::filesystem::create_directories(config.out_dir);

  std::vector<RespondentSpec> respondents;
  for (const auto& spec : config.respondents) {
    if (opts.models.empty() ||
        std::find(opts.models.begin(), opts.models.end(), spec.model) != opts.models.end())
      respondents.push_back(spec);
  }
  if (respondents.empty()) throw std::invalid_argument("collect: no respondents selected");

  std::map<std::string, CollectionSummary> summaries;
  for (const DatasetRef* ref : select_datasets(config, opts.datasets)) {
    Dataset ds = load_dataset(ref->path);
    CollectionPlan plan;
    plan.dataset = &ds;
    plan.respondents = respondents;
    plan.forms = config.question_forms();
    plan.samples_per_form = config.samples_for(ds.ambiguity());
    plan.resume = opts.resume;
    plan.log_path = config.log_path(ref->name);
    summaries[ref->name] = collect(plan, assets, progress);
  }
  return summaries;
}

/// Maps every pending record of a dataset's log in place (atomic rewrite).
/// Returns the number of newly mapped records.
inline size_t run_map(const RunConfig& config, const DatasetRef& ref) {
  const SurveyAssets assets = config.load_assets();
  Dataset ds = load_dataset(ref.path);
  const std::string path = config.log_path(ref.name);
  auto records = read_response_log(path);
  size_t mapped = map_log(records, ds, assets);
  const std::string tmp = path + ".tmp";
  write_response_log(records, tmp);
  std::filesystem::rename(tmp, path);
  return mapped;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct StyleMetrics {
  double qf_c = 1.0;
  double qf_e = 0.0;
  int scenario_count = 0;
};

struct ModelAnalysis {
  std::string model;
  ModelMetrics metrics;
  std::vector<std::pair<std::string, ScenarioMetrics>> scenarios;  // dataset order
  ResponseRates rates;
  std::map<std::string, StyleMetrics> styles;
  std::vector<std::string> dropped_scenarios;

  const ScenarioMetrics* find_scenario(const std::string& id) const {
    for (const auto& [sid, m] : scenarios)
      if (sid == id) return &m;
    return nullptr;
  }
};

struct StrongPairRow {
  std::string model_a;
  std::string model_b;
  std::string scenario;
  AgreementVerdict verdict = AgreementVerdict::Neither;
};

struct AnalysisResult {
  std::string dataset_name;
  Ambiguity ambiguity = Ambiguity::High;
  std::vector<ModelAnalysis> models;
  std::vector<std::string> filtered;           // consistent-and-certain model ids
  std::vector<std::string> matrix_scenarios;   // columns of the likelihood matrix
  std::optional<CorrelationMatrix> correlation;
  std::optional<Dendrogram> dendrogram;
  std::vector<StrongPairRow> strong_pairs;
  std::vector<std::pair<std::string, std::array<int, 10>>> rule_violations;
  std::vector<std::string> notices;
};

/// Computes every per-model and cross-model statistic for one dataset split.
/// Unmapped records are mapped in memory first.
inline AnalysisResult analyze_records(const RunConfig& config, const Dataset& dataset,
                                      std::vector<ResponseRecord>& records,
                                      const SurveyAssets& assets) {
  AnalysisResult result;
  result.dataset_name = dataset.name;
  result.ambiguity = dataset.ambiguity();
  if (records.empty()) throw std::runtime_error("analyze: empty response log");

  bool pending = std::any_of(records.begin(), records.end(),
                             [](const ResponseRecord& r) { return !r.decision; });
  if (pending) map_log(records, dataset, assets);

  std::vector<std::string> models;
  for (const auto& r : records)
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);

  const auto forms = config.question_forms();
  const auto weights = config.weights();

  for (const auto& model : models) {
    ModelAnalysis analysis;
    analysis.model = model;
    FormConditionedTable table = build_form_table(records, model);

    double sum_qfc = 0.0, sum_qfe = 0.0, sum_h = 0.0;
    int counted = 0;
    for (const auto& scenario : dataset.scenarios) {
      std::vector<ActionDistribution> per_form;
      bool complete = true;
      for (const auto& f : forms) {
        const ActionDistribution* cell = table.find(scenario.id, f.id);
        if (!cell) {
          complete = false;
          break;
        }
        per_form.push_back(*cell);
      }
      if (!complete) {
        analysis.dropped_scenarios.push_back(scenario.id);
        continue;
      }
      ScenarioMetrics m = compute_scenario_metrics(per_form, weights, config.fallback_granularity);
      analysis.metrics.marginal_action1.emplace_back(scenario.id, m.marginal.p[0]);
      if (m.fallback_forms > 0) ++analysis.metrics.fallback_scenarios;
      if (config.include_fallback_in_means || m.fallback_forms == 0) {
        sum_qfc += m.qf_c;
        sum_qfe += m.qf_e;
        sum_h += m.marginal_entropy;
        ++counted;
      }
      analysis.scenarios.emplace_back(scenario.id, std::move(m));
    }
    if (analysis.scenarios.empty()) {
      result.notices.push_back("model '" + model + "': no scenario has complete per-form data");
      continue;
    }
    analysis.metrics.model = model;
    analysis.metrics.scenario_count = static_cast<int>(analysis.scenarios.size());
    if (counted > 0) {
      analysis.metrics.mean_qf_c = sum_qfc / counted;
      analysis.metrics.mean_qf_e = sum_qfe / counted;
      analysis.metrics.mean_marginal_entropy = sum_h / counted;
    }
    analysis.rates = response_rates(records, model);
    analysis.metrics.refusal_rate = analysis.rates.refusal_rate;
    analysis.metrics.invalid_rate = analysis.rates.invalid_rate;
    analysis.metrics.region =
        classify_model(analysis.metrics.mean_qf_c, analysis.metrics.mean_qf_e,
                       config.thresholds.qf_consistency, config.thresholds.qf_entropy);

    // Per-style metrics: consistency over the two action orderings of one
    // question style, entropy averaged within the style.
    for (auto tid : all_templates()) {
      const std::string fwd = form_id(tid, Ordering::Forward);
      const std::string rev = form_id(tid, Ordering::Reversed);
      bool configured =
          std::find(config.forms.begin(), config.forms.end(), fwd) != config.forms.end() &&
          std::find(config.forms.begin(), config.forms.end(), rev) != config.forms.end();
      if (!configured) continue;
      StyleMetrics style;
      double qfc = 0.0, qfe = 0.0;
      for (const auto& [sid, _] : analysis.scenarios) {
        const ActionDistribution* a = table.find(sid, fwd);
        const ActionDistribution* b = table.find(sid, rev);
        if (!a || !b) continue;
        const std::array<ActionDistribution, 2> pair{*a, *b};
        qfc += qf_consistency(pair);
        qfe += qf_entropy(pair);
        ++style.scenario_count;
      }
      if (style.scenario_count > 0) {
        style.qf_c = qfc / style.scenario_count;
        style.qf_e = qfe / style.scenario_count;
        analysis.styles[to_string(tid)] = style;
      }
    }

    result.models.push_back(std::move(analysis));
  }

  std::vector<ModelMetrics> metric_list;
  for (const auto& m : result.models) metric_list.push_back(m.metrics);
  result.filtered =
      filter_models(metric_list, config.thresholds.qf_consistency, config.thresholds.qf_entropy);

  // Scenario columns: present for every filtered model.
  if (result.filtered.size() >= 2) {
    for (const auto& scenario : dataset.scenarios) {
      bool everywhere = true;
      for (const auto& model : result.filtered) {
        const auto it = std::find_if(result.models.begin(), result.models.end(),
                                     [&](const ModelAnalysis& m) { return m.model == model; });
        if (!it->find_scenario(scenario.id)) {
          everywhere = false;
          break;
        }
      }
      if (everywhere)
        result.matrix_scenarios.push_back(scenario.id);
      else
        result.notices.push_back("scenario '" + scenario.id +
                                 "' dropped from the likelihood matrix (incomplete data)");
    }

    if (result.matrix_scenarios.size() >= 2) {
      LikelihoodMatrix matrix;
      matrix.models = result.filtered;
      matrix.scenarios = result.matrix_scenarios;
      for (const auto& model : result.filtered) {
        const auto it = std::find_if(result.models.begin(), result.models.end(),
                                     [&](const ModelAnalysis& m) { return m.model == model; });
        std::vector<double> row;
        for (const auto& sid : result.matrix_scenarios)
          row.push_back(it->find_scenario(sid)->marginal.p[0]);
        matrix.values.push_back(std::move(row));
      }
      try {
        result.correlation = pearson_matrix(matrix);
        result.dendrogram = cluster(*result.correlation, config.linkage);
      } catch (const std::exception& e) {
        result.notices.push_back(std::string("correlation analysis skipped: ") + e.what());
      }
    } else {
      result.notices.push_back("correlation analysis skipped: fewer than 2 shared scenarios");
    }

    for (size_t i = 0; i < result.filtered.size(); ++i) {
      for (size_t j = i + 1; j < result.filtered.size(); ++j) {
        const auto a = std::find_if(result.models.begin(), result.models.end(),
                                    [&](const ModelAnalysis& m) { return m.model == result.filtered[i]; });
        const auto b = std::find_if(result.models.begin(), result.models.end(),
                                    [&](const ModelAnalysis& m) { return m.model == result.filtered[j]; });
        for (const auto& sid : result.matrix_scenarios) {
          auto verdict = strong_agreement(a->find_scenario(sid)->marginal,
                                          b->find_scenario(sid)->marginal,
                                          config.thresholds.strong_preference);
          if (verdict != AgreementVerdict::Neither)
            result.strong_pairs.push_back({a->model, b->model, sid, verdict});
        }
      }
    }
  } else {
    result.notices.push_back(
        "correlation analysis skipped: fewer than 2 consistent-and-certain models");
  }

  const bool labeled = !dataset.scenarios.empty() &&
                       std::all_of(dataset.scenarios.begin(), dataset.scenarios.end(),
                                   [](const Scenario& s) { return s.labels.has_value(); });
  if (labeled) {
    for (const auto& model : result.filtered) {
      const auto it = std::find_if(result.models.begin(), result.models.end(),
                                   [&](const ModelAnalysis& m) { return m.model == model; });
      std::vector<std::pair<std::string, ActionDistribution>> marginals;
      for (const auto& [sid, m] : it->scenarios) marginals.emplace_back(sid, m.marginal);
      result.rule_violations.emplace_back(
          model, rule_violation_counts(marginals, dataset, config.thresholds.strong_preference));
    }
  } else {
    result.notices.push_back("rule-violation counts skipped: dataset lacks rule labels");
  }

  return result;
}

inline AnalysisResult run_analyze(const RunConfig& config, const DatasetRef& ref,
                                  bool persist_mapping = true) {
  const SurveyAssets assets = config.load_assets();
  Dataset ds = load_dataset(ref.path);
  const std::string path = config.log_path(ref.name);
  auto records = read_response_log(path);
  bool pending = std::any_of(records.begin(), records.end(),
                             [](const ResponseRecord& r) { return !r.decision; });
  AnalysisResult result = analyze_records(config, ds, records, assets);
  if (pending && persist_mapping) {
    const std::string tmp = path + ".tmp";
    write_response_log(records, tmp);
    std::filesystem::rename(tmp, path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// table emission
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

/// Comma-delimited table with a provenance comment line before the header.
class TableWriter {
 public:
  TableWriter(const std::string& path, const std::string& config_hash,
              const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write table: " + path);
    out_ << "# config=" << config_hash << " schema=" << kDatasetSchemaVersion << "\n";
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ",";
      out_ << csv_escape(fields[i]);
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

/// Writes the plot-ready tables for one analyzed dataset. Returns the list
/// of emitted files.
inline std::vector<std::string> write_analysis_tables(const AnalysisResult& result,
                                                      const RunConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  const std::string hash = config_hash(config);
  const std::string prefix = config.out_dir + "/" + result.dataset_name + "_";
  std::vector<std::string> written;
  auto track = [&](const std::string& path) {
    written.push_back(path);
    return path;
  };

  {
    TableWriter t(track(prefix + "metrics_scenario.csv"), hash,
                  {"model", "scenario", "p_action1", "marginal_entropy", "qf_c", "qf_e", "fallback_forms"});
    for (const auto& m : result.models)
      for (const auto& [sid, s] : m.scenarios)
        t.row({m.model, sid, format_number(s.marginal.p[0]), format_number(s.marginal_entropy),
               format_number(s.qf_c), format_number(s.qf_e), std::to_string(s.fallback_forms)});
  }
  {
    TableWriter t(track(prefix + "metrics_model.csv"), hash,
                  {"model", "mean_qf_c", "mean_qf_e", "mean_marginal_entropy", "refusal_rate",
                   "invalid_rate", "region", "scenarios", "fallback_scenarios"});
    for (const auto& m : result.models)
      t.row({m.model, format_number(m.metrics.mean_qf_c), format_number(m.metrics.mean_qf_e),
             format_number(m.metrics.mean_marginal_entropy), format_number(m.metrics.refusal_rate),
             format_number(m.metrics.invalid_rate), to_string(m.metrics.region),
             std::to_string(m.metrics.scenario_count), std::to_string(m.metrics.fallback_scenarios)});
  }
  {
    TableWriter t(track(prefix + "consistency_certainty.csv"), hash,
                  {"model", "qf_e", "one_minus_qf_c", "region"});
    for (const auto& m : result.models)
      t.row({m.model, format_number(m.metrics.mean_qf_e), format_number(1.0 - m.metrics.mean_qf_c),
             to_string(m.metrics.region)});
  }
  {
    TableWriter t(track(prefix + "marginal_likelihoods.csv"), hash, {"model", "scenario", "p_action1"});
    for (const auto& m : result.models)
      for (const auto& [sid, p] : m.metrics.marginal_action1)
        t.row({m.model, sid, format_number(p)});
  }
  if (result.correlation) {
    std::vector<std::string> header{"model"};
    header.insert(header.end(), result.correlation->models.begin(), result.correlation->models.end());
    TableWriter t(track(prefix + "correlation.csv"), hash, header);
    for (size_t i = 0; i < result.correlation->models.size(); ++i) {
      std::vector<std::string> row{result.correlation->models[i]};
      for (double v : result.correlation->rho[i]) row.push_back(format_number(v));
      t.row(row);
    }
  }
  if (result.dendrogram) {
    const std::string path = track(prefix + "dendrogram.json");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    json doc = dendrogram_to_json(*result.dendrogram);
    doc["config"] = hash;
    doc["schema"] = kDatasetSchemaVersion;
    out << doc.dump(2) << "\n";
  }
  if (!result.rule_violations.empty()) {
    TableWriter t(track(prefix + "rule_violations.csv"), hash, {"model", "rule", "count"});
    for (const auto& [model, counts] : result.rule_violations)
      for (size_t r = 0; r < counts.size(); ++r)
        t.row({model, moral_rules()[r], std::to_string(counts[r])});
  }
  {
    TableWriter t(track(prefix + "strong_pairs.csv"), hash,
                  {"model_a", "model_b", "scenario", "verdict"});
    for (const auto& row : result.strong_pairs)
      t.row({row.model_a, row.model_b, row.scenario, to_string(row.verdict)});
  }
  {
    TableWriter t(track(prefix + "response_rates.csv"), hash,
                  {"model", "total", "refusals", "invalids", "refusal_rate", "invalid_rate"});
    for (const auto& m : result.models)
      t.row({m.model, std::to_string(m.rates.total), std::to_string(m.rates.refusals),
             std::to_string(m.rates.invalids), format_number(m.rates.refusal_rate),
             format_number(m.rates.invalid_rate)});
  }
  {
    TableWriter t(track(prefix + "style_metrics.csv"), hash,
                  {"model", "style", "qf_c", "qf_e", "scenarios"});
    for (const auto& m : result.models)
      for (const auto& [style, s] : m.styles)
        t.row({m.model, style, format_number(s.qf_c), format_number(s.qf_e),
               std::to_string(s.scenario_count)});
  }
  return written;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

inline void render_dendrogram_text(const Dendrogram& tree, int node_index, int depth,
                                   std::ostream& out) {
  const auto& node = tree.nodes.at(static_cast<size_t>(node_index));
  std::string indent(static_cast<size_t>(depth) * 2, ' ');
  if (node.left < 0) {
    out << indent << "- " << node.members.front() << "\n";
    return;
  }
  out << indent << "+ height " << format_number(node.height) << "\n";
  render_dendrogram_text(tree, node.left, depth + 1, out);
  render_dendrogram_text(tree, node.right, depth + 1, out);
}

/// Human-readable digest of one analyzed dataset.
inline std::string render_report(const AnalysisResult& result, const RunConfig& config) {
  std::ostringstream out;
  out << "dataset: " << result.dataset_name << " (ambiguity " << to_string(result.ambiguity)
      << ", config " << config_hash(config) << ")\n\n";

  out << "per-model metrics:\n";
  for (const auto& m : result.models) {
    out << "  " << m.model << ": mean QF-C " << format_number(m.metrics.mean_qf_c) << ", mean QF-E "
        << format_number(m.metrics.mean_qf_e) << ", region " << to_string(m.metrics.region)
        << ", refusal rate " << format_number(m.rates.refusal_rate) << ", invalid rate "
        << format_number(m.rates.invalid_rate) << " (" << m.metrics.scenario_count << " scenarios)\n";
  }

  out << "\nconsistent-and-certain models:";
  if (result.filtered.empty()) out << " none";
  for (const auto& model : result.filtered) out << " " << model;
  out << "\n";

  if (result.correlation) {
    out << "\npairwise correlations:\n";
    for (size_t i = 0; i < result.correlation->models.size(); ++i)
      for (size_t j = i + 1; j < result.correlation->models.size(); ++j)
        out << "  " << result.correlation->models[i] << " ~ " << result.correlation->models[j]
            << ": " << format_number(result.correlation->rho[i][j]) << "\n";
  }
  if (result.dendrogram) {
    out << "\nagreement dendrogram:\n";
    render_dendrogram_text(*result.dendrogram, result.dendrogram->root, 1, out);
  }

  if (!result.rule_violations.empty()) {
    out << "\nstrong rule violations (count > 0):\n";
    for (const auto& [model, counts] : result.rule_violations) {
      for (size_t r = 0; r < counts.size(); ++r)
        if (counts[r] > 0)
          out << "  " << model << ": " << moral_rules()[r] << " x" << counts[r] << "\n";
    }
  }

  if (!result.strong_pairs.empty()) {
    int agree = 0, disagree = 0;
    for (const auto& row : result.strong_pairs)
      (row.verdict == AgreementVerdict::Agree ? agree : disagree)++;
    out << "\nstrong pairwise verdicts: " << agree << " agreements, " << disagree
        << " disagreements\n";
  }

  for (const auto& notice : result.notices) out << "\nnotice: " << notice << "\n";
  return out.str();
}

}  // namespace moralsurvey
