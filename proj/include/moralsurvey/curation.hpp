#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "moralsurvey/dataset.hpp"
#include "moralsurvey/text.hpp"

namespace moralsurvey {

/// Cosine similarity of lowercased word-count vectors, in [0, 1].
inline double lexical_similarity(const std::string& a, const std::string& b) {
  return text::cosine_word_similarity(a, b);
}

struct SimilarityFilterOptions {
  double threshold = 0.6;
  // Deterministic mode drops the later scenario of an over-threshold pair;
  // random mode flips a seeded coin for the victim.
  bool random_drop = false;
  uint64_t seed = 0;
};

namespace detail {

// Greedy single pass over `alive` indices: scans pairs in dataset order and
// drops one member of every over-threshold pair. `text_of` selects which
// text is compared; `comparable` gates which pairs are eligible.
template <typename TextOf, typename Comparable>
inline void greedy_drop_pass(const std::vector<Scenario>& scenarios, std::vector<bool>& alive,
                             const SimilarityFilterOptions& opt, TextOf&& text_of,
                             Comparable&& comparable, std::mt19937_64& rng) {
  for (size_t i = 0; i < scenarios.size(); ++i) {
    if (!alive[i]) continue;
    for (size_t j = i + 1; j < scenarios.size(); ++j) {
      if (!alive[i]) break;
      if (!alive[j] || !comparable(scenarios[i], scenarios[j])) continue;
      if (lexical_similarity(text_of(scenarios[i]), text_of(scenarios[j])) > opt.threshold) {
        if (opt.random_drop && (rng() & 1) == 0)
          alive[i] = false;
        else
          alive[j] = false;
      }
    }
  }
}

// Scenarios are comparable in pass 1 when they share a violated rule;
// unlabeled scenarios form one shared group.
inline bool share_rule_group(const Scenario& a, const Scenario& b) {
  if (!a.labels.has_value() && !b.labels.has_value()) return true;
  if (!a.labels.has_value() || !b.labels.has_value()) return false;
  for (int r = 0; r < 10; ++r) {
    bool a_has = a.labels->action_violates(r, 1) || a.labels->action_violates(r, 2);
    bool b_has = b.labels->action_violates(r, 1) || b.labels->action_violates(r, 2);
    if (a_has && b_has) return true;
  }
  return false;
}

}  // namespace detail

/// Two-pass near-duplicate removal: (1) context-only within each rule group,
/// (2) full text across all survivors.
inline Dataset similarity_filter(const Dataset& input, const SimilarityFilterOptions& opt = {}) {
  if (opt.threshold <= 0.0 || opt.threshold > 1.0)
    throw std::invalid_argument("similarity_filter: threshold must be in (0, 1]");
  std::mt19937_64 rng(opt.seed);
  std::vector<bool> alive(input.scenarios.size(), true);

  detail::greedy_drop_pass(
      input.scenarios, alive, opt, [](const Scenario& s) { return s.context; },
      detail::share_rule_group, rng);
  detail::greedy_drop_pass(
      input.scenarios, alive, opt, [](const Scenario& s) { return s.full_text(); },
      [](const Scenario&, const Scenario&) { return true; }, rng);

  Dataset out;
  out.name = input.name;
  for (size_t i = 0; i < input.scenarios.size(); ++i)
    if (alive[i]) out.scenarios.push_back(input.scenarios[i]);
  return out;
}

inline Dataset similarity_filter(const Dataset& input, double threshold) {
  SimilarityFilterOptions opt;
  opt.threshold = threshold;
  return similarity_filter(input, opt);
}

}  // namespace moralsurvey
