#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace moralsurvey {

using json = nlohmann::json;

constexpr int kDatasetSchemaVersion = 1;

enum class Ambiguity { Low, High };

inline std::string to_string(Ambiguity a) { return a == Ambiguity::Low ? "low" : "high"; }

inline Ambiguity ambiguity_from_string(const std::string& s) {
  if (s == "low") return Ambiguity::Low;
  if (s == "high") return Ambiguity::High;
  throw std::invalid_argument("unknown ambiguity level: '" + s + "' (expected 'low' or 'high')");
}

/// The ten common-morality rules used as auxiliary violation labels.
inline const std::array<std::string, 10>& moral_rules() {
  static const std::array<std::string, 10> rules = {
      "Do not kill",
      "Do not cause pain",
      "Do not disable",
      "Do not deprive of freedom",
      "Do not deprive of pleasure",
      "Do not deceive",
      "Do not cheat",
      "Do not break your promises",
      "Do not break the law",
      "Do your duty",
  };
  return rules;
}

inline int rule_index(const std::string& name) {
  const auto& rules = moral_rules();
  for (size_t i = 0; i < rules.size(); ++i)
    if (rules[i] == name) return static_cast<int>(i);
  return -1;
}

/// Per-rule violation flags, one pair per rule: [action1, action2].
struct RuleLabels {
  std::array<std::array<bool, 2>, 10> violates{};

  bool action_violates(int rule, int action_index) const {
    return violates.at(static_cast<size_t>(rule)).at(static_cast<size_t>(action_index - 1));
  }
  void set(const std::string& rule_name, int action_index, bool flag) {
    int r = rule_index(rule_name);
    if (r < 0) throw std::invalid_argument("unknown rule name: '" + rule_name + "'");
    violates[static_cast<size_t>(r)][static_cast<size_t>(action_index - 1)] = flag;
  }
  bool any() const {
    for (const auto& pair : violates)
      if (pair[0] || pair[1]) return true;
    return false;
  }
  bool operator==(const RuleLabels&) const = default;
};

struct ActionDescription {
  int index = 0;  // 1 or 2
  std::string text;
  bool operator==(const ActionDescription&) const = default;
};

struct Scenario {
  std::string id;
  Ambiguity ambiguity = Ambiguity::High;
  std::string context;
  std::array<ActionDescription, 2> actions;
  std::optional<RuleLabels> labels;

  const std::string& action_text(int index) const { return actions.at(static_cast<size_t>(index - 1)).text; }

  std::string full_text() const { return context + " " + actions[0].text + " " + actions[1].text; }

  void validate() const {
    if (id.empty()) throw std::invalid_argument("scenario has empty id");
    if (context.empty()) throw std::invalid_argument("scenario '" + id + "': empty context");
    if (actions[0].text.empty() || actions[1].text.empty())
      throw std::invalid_argument("scenario '" + id + "': empty action text");
    if (actions[0].index != 1 || actions[1].index != 2)
      throw std::invalid_argument("scenario '" + id + "': action indices must be 1 and 2");
  }

  bool operator==(const Scenario&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<Scenario> scenarios;

  Ambiguity ambiguity() const {
    if (scenarios.empty()) throw std::logic_error("dataset '" + name + "' is empty");
    return scenarios.front().ambiguity;
  }

  const Scenario* find(const std::string& id) const {
    for (const auto& s : scenarios)
      if (s.id == id) return &s;
    return nullptr;
  }

  void validate() const {
    for (size_t i = 0; i < scenarios.size(); ++i) {
      scenarios[i].validate();
      if (scenarios[i].ambiguity != scenarios.front().ambiguity)
        throw std::invalid_argument("dataset '" + name + "': mixed ambiguity levels (scenario '" +
                                    scenarios[i].id + "')");
      for (size_t j = i + 1; j < scenarios.size(); ++j)
        if (scenarios[i].id == scenarios[j].id)
          throw std::invalid_argument("dataset '" + name + "': duplicate scenario id '" +
                                      scenarios[i].id + "'");
    }
  }

  bool operator==(const Dataset&) const = default;
};

/// One annotation question put to several annotators.
struct AnnotationBallot {
  std::string scenario_id;
  std::string question_id;
  std::vector<std::string> votes;
};

/// Strict-plurality winner, or nullopt when the ballot is tied.
inline std::optional<std::string> majority_vote(const AnnotationBallot& ballot) {
  if (ballot.votes.empty()) throw std::invalid_argument("majority_vote: empty ballot");
  std::vector<std::pair<std::string, int>> counts;
  for (const auto& v : ballot.votes) {
    bool found = false;
    for (auto& [answer, n] : counts)
      if (answer == v) {
        ++n;
        found = true;
        break;
      }
    if (!found) counts.emplace_back(v, 1);
  }
  const std::pair<std::string, int>* best = &counts.front();
  bool tie = false;
  for (const auto& c : counts) {
    if (c.second > best->second) {
      best = &c;
      tie = false;
    } else if (&c != best && c.second == best->second) {
      tie = true;
    }
  }
  if (tie) return std::nullopt;
  return best->first;
}

namespace detail {

inline json scenario_to_json(const Scenario& s) {
  json rec{{"id", s.id},
           {"ambiguity", to_string(s.ambiguity)},
           {"context", s.context},
           {"action1", s.actions[0].text},
           {"action2", s.actions[1].text}};
  if (s.labels) {
    json labels = json::object();
    const auto& rules = moral_rules();
    for (size_t r = 0; r < rules.size(); ++r) {
      const auto& flags = s.labels->violates[r];
      if (flags[0] || flags[1]) labels[rules[r]] = json{{"action1", flags[0]}, {"action2", flags[1]}};
    }
    rec["labels"] = std::move(labels);
  }
  return rec;
}

inline Scenario scenario_from_json(const json& rec) {
  Scenario s;
  s.id = rec.at("id").get<std::string>();
  s.ambiguity = ambiguity_from_string(rec.at("ambiguity").get<std::string>());
  s.context = rec.at("context").get<std::string>();
  s.actions[0] = {1, rec.at("action1").get<std::string>()};
  s.actions[1] = {2, rec.at("action2").get<std::string>()};
  if (rec.contains("labels")) {
    RuleLabels labels;
    for (auto& [rule, flags] : rec.at("labels").items()) {
      labels.set(rule, 1, flags.value("action1", false));
      labels.set(rule, 2, flags.value("action2", false));
    }
    s.labels = labels;
  }
  return s;
}

}  // namespace detail

/// Parses a line-delimited dataset file. The first record is a header
/// carrying the schema version; each following line is one scenario.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  Dataset ds;
  std::string line;
  size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped;
    for (char c : line)
      if (c != '\r') stripped.push_back(c);
    if (stripped.empty()) continue;

    json rec;
    try {
      rec = json::parse(stripped);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }

    if (!saw_header) {
      if (!rec.contains("schema"))
        throw std::runtime_error(path + ":1: missing schema header record (expected {\"schema\": 1, ...})");
      if (rec.at("schema").get<int>() != kDatasetSchemaVersion)
        throw std::runtime_error(path + ":1: unsupported schema version " + rec.at("schema").dump());
      ds.name = rec.value("name", std::string{});
      saw_header = true;
      continue;
    }

    try {
      ds.scenarios.push_back(detail::scenario_from_json(rec));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad scenario record: " + e.what());
    }
  }
  if (!saw_header)
    throw std::runtime_error(path + ": empty dataset file (missing schema header record)");
  if (ds.name.empty()) ds.name = path;
  ds.validate();
  return ds;
}

inline std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  out << json{{"schema", kDatasetSchemaVersion}, {"name", ds.name}}.dump() << "\n";
  for (const auto& s : ds.scenarios) out << detail::scenario_to_json(s).dump() << "\n";
  return out.str();
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << serialize_dataset(ds);
}

}  // namespace moralsurvey
