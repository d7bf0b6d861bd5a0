#pragma once

#include <set>
#include <string>
#include <vector>

#include "moralsurvey/forms.hpp"
#include "moralsurvey/text.hpp"

namespace moralsurvey {

/// Semantic decision extracted from one raw completion.
struct Decision {
  enum class Kind { Action, Refusal, Invalid };
  Kind kind = Kind::Invalid;
  int action = 0;  // valid only when kind == Action

  static Decision make_action(int index) { return {Kind::Action, index}; }
  static Decision refusal() { return {Kind::Refusal, 0}; }
  static Decision invalid() { return {Kind::Invalid, 0}; }

  bool is_action() const { return kind == Kind::Action; }
  bool operator==(const Decision&) const = default;
};

inline std::string to_string(const Decision& d) {
  switch (d.kind) {
    case Decision::Kind::Action: return "action" + std::to_string(d.action);
    case Decision::Kind::Refusal: return "refusal";
    case Decision::Kind::Invalid: return "invalid";
  }
  throw std::logic_error("bad Decision");
}

inline Decision decision_from_string(const std::string& s) {
  if (s == "action1") return Decision::make_action(1);
  if (s == "action2") return Decision::make_action(2);
  if (s == "refusal") return Decision::refusal();
  if (s == "invalid") return Decision::invalid();
  throw std::invalid_argument("unknown decision value: '" + s + "'");
}

/// Which pipeline stage settled the decision, and on what string.
struct MatchTrace {
  enum class Stage { Exact, Expanded, Stemmed, RefusalPattern, None };
  Stage stage = Stage::None;
  std::string matched;

  bool operator==(const MatchTrace&) const = default;
};

inline std::string to_string(MatchTrace::Stage s) {
  switch (s) {
    case MatchTrace::Stage::Exact: return "exact";
    case MatchTrace::Stage::Expanded: return "expanded";
    case MatchTrace::Stage::Stemmed: return "stemmed";
    case MatchTrace::Stage::RefusalPattern: return "refusal_pattern";
    case MatchTrace::Stage::None: return "none";
  }
  throw std::logic_error("bad Stage");
}

struct MappedDecision {
  Decision decision;
  MatchTrace trace;
};

namespace detail {

struct StageHit {
  std::set<int> actions;
  std::string matched;
};

inline StageHit exact_stage(const std::string& norm, const ExpectedAnswerSet& expected) {
  StageHit hit;
  for (const auto& entry : expected.entries) {
    if (norm == text::normalize_answer(entry.canonical)) {
      hit.actions.insert(entry.action);
      hit.matched = entry.canonical;
    }
  }
  return hit;
}

inline StageHit expanded_stage(const std::string& norm, const ExpectedAnswerSet& expected) {
  StageHit hit;
  for (const auto& entry : expected.entries) {
    for (const auto& variant : entry.variants) {
      bool matched = variant.kind == AnswerPattern::Kind::Literal
                         ? norm == variant.text
                         : text::starts_with_boundary(norm, variant.text);
      if (matched) {
        hit.actions.insert(entry.action);
        if (hit.actions.size() == 1) hit.matched = variant.text;
        break;
      }
    }
  }
  return hit;
}

// Inflection-robust pass: the stemmed content tokens of a known answer must
// appear, in order, inside the stemmed content tokens of the response.
inline StageHit stemmed_stage(const std::string& norm, const ExpectedAnswerSet& expected) {
  StageHit hit;
  const auto raw_tokens = text::stemmed_content_tokens(norm);
  if (raw_tokens.empty()) return hit;
  for (const auto& entry : expected.entries) {
    std::vector<std::string> candidates{text::normalize_answer(entry.canonical)};
    for (const auto& variant : entry.variants)
      if (variant.kind == AnswerPattern::Kind::Literal) candidates.push_back(variant.text);
    for (const auto& candidate : candidates) {
      const auto cand_tokens = text::stemmed_content_tokens(candidate);
      if (!cand_tokens.empty() && text::contains_subsequence(raw_tokens, cand_tokens)) {
        hit.actions.insert(entry.action);
        if (hit.actions.size() == 1) hit.matched = candidate;
        break;
      }
    }
  }
  return hit;
}

inline const RefusalRule* refusal_stage(const std::string& norm,
                                        const std::vector<RefusalRule>& refusals) {
  for (const auto& rule : refusals) {
    switch (rule.kind) {
      case RefusalRule::Kind::Empty:
        if (norm.empty()) return &rule;
        break;
      case RefusalRule::Kind::Literal:
        if (norm == rule.pattern) return &rule;
        break;
      case RefusalRule::Kind::Prefix:
        if (text::starts_with_boundary(norm, rule.pattern)) return &rule;
        break;
    }
  }
  return nullptr;
}

}  // namespace detail

/// Maps a raw completion to a semantic decision. Total: every input yields
/// exactly one Decision. Stages run in order (exact, expanded, stemmed,
/// refusal); a stage that matches both actions yields Invalid.
inline MappedDecision map_response(const std::string& raw, const ExpectedAnswerSet& expected,
                                   const std::vector<RefusalRule>& refusal_patterns) {
  const std::string norm = text::normalize_answer(raw);

  const detail::StageHit stages[] = {detail::exact_stage(norm, expected),
                                     detail::expanded_stage(norm, expected),
                                     detail::stemmed_stage(norm, expected)};
  const MatchTrace::Stage names[] = {MatchTrace::Stage::Exact, MatchTrace::Stage::Expanded,
                                     MatchTrace::Stage::Stemmed};
  for (size_t i = 0; i < 3; ++i) {
    if (stages[i].actions.size() == 1)
      return {Decision::make_action(*stages[i].actions.begin()), {names[i], stages[i].matched}};
    if (stages[i].actions.size() > 1)
      return {Decision::invalid(), {MatchTrace::Stage::None, ""}};  // ambiguous
  }

  if (const RefusalRule* rule = detail::refusal_stage(norm, refusal_patterns)) {
    std::string matched = rule->kind == RefusalRule::Kind::Empty ? "<empty>" : rule->pattern;
    return {Decision::refusal(), {MatchTrace::Stage::RefusalPattern, matched}};
  }

  return {Decision::invalid(), {MatchTrace::Stage::None, ""}};
}

inline MappedDecision map_response(const std::string& raw, const ExpectedAnswerSet& expected,
                                   const AnswerVariantTable& table) {
  return map_response(raw, expected, table.refusals);
}

}  // namespace moralsurvey
