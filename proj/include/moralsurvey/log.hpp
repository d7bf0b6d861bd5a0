#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moralsurvey/mapper.hpp"

namespace moralsurvey {

/// One sampled completion in the append-only response log.
struct ResponseRecord {
  std::string model;
  std::string scenario;
  std::string form;
  int sample = 0;  // 1-based index within the M samples of a form
  std::string ts;  // ISO-8601 UTC with millisecond precision
  std::string raw;
  bool transport_error = false;
  std::optional<Decision> decision;
  std::optional<MatchTrace> trace;

  bool operator==(const ResponseRecord&) const = default;
};

inline std::string format_timestamp_ms(int64_t ms_since_epoch) {
  std::time_t secs = static_cast<std::time_t>(ms_since_epoch / 1000);
  int ms = static_cast<int>(ms_since_epoch % 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
  return buf;
}

inline int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline json record_to_json(const ResponseRecord& r) {
  json rec{{"model", r.model}, {"scenario", r.scenario}, {"form", r.form},
           {"sample", r.sample}, {"ts", r.ts},           {"raw", r.raw}};
  if (r.transport_error) rec["transport_error"] = true;
  if (r.decision) {
    rec["decision"] = to_string(*r.decision);
    if (r.trace) {
      rec["stage"] = to_string(r.trace->stage);
      if (!r.trace->matched.empty()) rec["matched"] = r.trace->matched;
    }
  }
  return rec;
}

inline ResponseRecord record_from_json(const json& rec) {
  ResponseRecord r;
  r.model = rec.at("model").get<std::string>();
  r.scenario = rec.at("scenario").get<std::string>();
  r.form = rec.at("form").get<std::string>();
  r.sample = rec.at("sample").get<int>();
  r.ts = rec.at("ts").get<std::string>();
  r.raw = rec.at("raw").get<std::string>();
  r.transport_error = rec.value("transport_error", false);
  if (rec.contains("decision")) {
    r.decision = decision_from_string(rec.at("decision").get<std::string>());
    if (rec.contains("stage")) {
      MatchTrace t;
      std::string stage = rec.at("stage").get<std::string>();
      if (stage == "exact") t.stage = MatchTrace::Stage::Exact;
      else if (stage == "expanded") t.stage = MatchTrace::Stage::Expanded;
      else if (stage == "stemmed") t.stage = MatchTrace::Stage::Stemmed;
      else if (stage == "refusal_pattern") t.stage = MatchTrace::Stage::RefusalPattern;
      else if (stage == "none") t.stage = MatchTrace::Stage::None;
      else throw std::invalid_argument("unknown match stage: '" + stage + "'");
      t.matched = rec.value("matched", std::string{});
      r.trace = t;
    }
  }
  return r;
}

inline std::vector<ResponseRecord> read_response_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open response log: " + path);
  std::vector<ResponseRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad log record: " + e.what());
    }
  }
  return records;
}

inline void write_response_log(const std::vector<ResponseRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write response log: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

/// Runs the matching pipeline over every record, filling the decision and
/// trace fields. Re-runnable: decisions are recomputed from the raw text, so
/// a second pass changes nothing. Returns the number of records that had no
/// decision before. Transport failures map to Invalid.
inline size_t map_log(std::vector<ResponseRecord>& records, const Dataset& dataset,
                      const SurveyAssets& assets) {
  std::map<std::pair<std::string, std::string>, ExpectedAnswerSet> cache;
  size_t newly_mapped = 0;
  for (auto& r : records) {
    if (!r.decision) ++newly_mapped;
    if (r.transport_error) {
      r.decision = Decision::invalid();
      r.trace = MatchTrace{MatchTrace::Stage::None, ""};
      continue;
    }
    auto key = std::make_pair(r.scenario, r.form);
    auto it = cache.find(key);
    if (it == cache.end()) {
      const Scenario* scenario = dataset.find(r.scenario);
      if (!scenario)
        throw std::runtime_error("map_log: record (" + r.model + ", " + r.scenario + ", " + r.form +
                                 ", " + std::to_string(r.sample) + ") names an unknown scenario");
      QuestionForm form;
      try {
        form = form_from_id(r.form);
      } catch (const std::exception&) {
        throw std::runtime_error("map_log: record (" + r.model + ", " + r.scenario + ", " + r.form +
                                 ", " + std::to_string(r.sample) + ") names an unknown form");
      }
      it = cache.emplace(key, render(*scenario, form, assets).expected).first;
    }
    auto mapped = map_response(r.raw, it->second, assets.variants.refusals);
    r.decision = mapped.decision;
    r.trace = mapped.trace;
  }
  return newly_mapped;
}

}  // namespace moralsurvey
