#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "moralsurvey/dataset.hpp"
#include "moralsurvey/stats.hpp"

namespace moralsurvey {

/// Marginal p(action 1) per model (row) and scenario (column).
struct LikelihoodMatrix {
  std::vector<std::string> models;
  std::vector<std::string> scenarios;
  std::vector<std::vector<double>> values;  // values[model][scenario]

  void validate() const {
    if (values.size() != models.size())
      throw std::invalid_argument("LikelihoodMatrix: row count does not match model count");
    for (size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != scenarios.size())
        throw std::invalid_argument("LikelihoodMatrix: row '" + models[i] + "' has wrong length");
      for (double v : values[i])
        if (v < 0.0 || v > 1.0)
          throw std::invalid_argument("LikelihoodMatrix: entry outside [0, 1] in row '" + models[i] + "'");
    }
  }
};

struct CorrelationMatrix {
  std::vector<std::string> models;
  std::vector<std::vector<double>> rho;
};

/// Models whose mean metrics land in the consistent-and-certain region,
/// in stable input order.
inline std::vector<std::string> filter_models(const std::vector<ModelMetrics>& metrics,
                                              double qfc_threshold, double qfe_threshold) {
  std::vector<std::string> out;
  for (const auto& m : metrics)
    if (classify_model(m.mean_qf_c, m.mean_qf_e, qfc_threshold, qfe_threshold) ==
        Region::ConsistentCertain)
      out.push_back(m.model);
  return out;
}

/// Sample Pearson correlation of two equal-length series.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson: needs two equal-length series of length >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson: zero-variance series (correlation undefined)");
  return sxy / std::sqrt(sxx * syy);
}

/// Pairwise Pearson correlations between model rows, over the scenario axis.
inline CorrelationMatrix pearson_matrix(const LikelihoodMatrix& m) {
  m.validate();
  if (m.models.size() < 2 || m.scenarios.size() < 2)
    throw std::invalid_argument("pearson_matrix: needs at least 2 models and 2 scenarios");
  for (size_t i = 0; i < m.models.size(); ++i) {
    double first = m.values[i][0];
    bool constant = std::all_of(m.values[i].begin(), m.values[i].end(),
                                [&](double v) { return v == first; });
    if (constant)
      throw std::invalid_argument("pearson_matrix: model '" + m.models[i] +
                                  "' has zero variance across scenarios");
  }
  CorrelationMatrix out;
  out.models = m.models;
  out.rho.assign(m.models.size(), std::vector<double>(m.models.size(), 1.0));
  for (size_t i = 0; i < m.models.size(); ++i) {
    for (size_t j = i + 1; j < m.models.size(); ++j) {
      double r = pearson(m.values[i], m.values[j]);
      out.rho[i][j] = r;
      out.rho[j][i] = r;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchical clustering on correlation distance
// ---------------------------------------------------------------------------

enum class Linkage { Average, Complete };

/// Binary merge tree. Nodes 0..n-1 are leaves (one per model); internal
/// nodes follow in merge order and carry the linkage distance.
struct Dendrogram {
  struct Node {
    int left = -1;   // node index, or -1 for leaves
    int right = -1;
    double height = 0.0;
    std::vector<std::string> members;  // model ids covered by this node
  };
  std::vector<Node> nodes;
  int root = -1;

  const Node& root_node() const { return nodes.at(static_cast<size_t>(root)); }

  /// Leaf sets of the two subtrees under the root (the top cut).
  std::pair<std::vector<std::string>, std::vector<std::string>> top_cut() const {
    const Node& r = root_node();
    return {nodes.at(static_cast<size_t>(r.left)).members,
            nodes.at(static_cast<size_t>(r.right)).members};
  }
};

/// Agglomerative clustering on distance d = 1 - rho. Ties between candidate
/// merges break on the lexicographically smallest member ids so the tree is
/// reproducible run to run.
inline Dendrogram cluster(const CorrelationMatrix& corr, Linkage linkage = Linkage::Average) {
  const size_t n = corr.models.size();
  if (n < 2) throw std::invalid_argument("cluster: needs at least two models");

  Dendrogram tree;
  std::vector<int> active;           // active cluster -> node index
  std::vector<size_t> sizes;         // active cluster -> member count
  std::vector<std::string> reps;     // active cluster -> smallest member id
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));

  for (size_t i = 0; i < n; ++i) {
    tree.nodes.push_back({-1, -1, 0.0, {corr.models[i]}});
    active.push_back(static_cast<int>(i));
    sizes.push_back(1);
    reps.push_back(corr.models[i]);
    for (size_t j = 0; j < n; ++j) dist[i][j] = 1.0 - corr.rho[i][j];
  }

  while (active.size() > 1) {
    size_t best_a = 0, best_b = 1;
    bool have = false;
    for (size_t a = 0; a < active.size(); ++a) {
      for (size_t b = a + 1; b < active.size(); ++b) {
        double d = dist[a][b];
        if (!have) {
          best_a = a;
          best_b = b;
          have = true;
          continue;
        }
        double best_d = dist[best_a][best_b];
        if (d < best_d) {
          best_a = a;
          best_b = b;
        } else if (d == best_d) {
          auto key = [&](size_t x, size_t y) {
            return std::make_pair(std::min(reps[x], reps[y]), std::max(reps[x], reps[y]));
          };
          if (key(a, b) < key(best_a, best_b)) {
            best_a = a;
            best_b = b;
          }
        }
      }
    }

    const double merge_height = dist[best_a][best_b];
    Dendrogram::Node node;
    node.left = active[best_a];
    node.right = active[best_b];
    node.height = merge_height;
    node.members = tree.nodes[static_cast<size_t>(node.left)].members;
    const auto& right_members = tree.nodes[static_cast<size_t>(node.right)].members;
    node.members.insert(node.members.end(), right_members.begin(), right_members.end());
    tree.nodes.push_back(node);
    const int merged_index = static_cast<int>(tree.nodes.size()) - 1;

    // Lance-Williams update of cluster-to-cluster distances.
    const size_t na = sizes[best_a], nb = sizes[best_b];
    std::vector<double> merged_dist(active.size(), 0.0);
    for (size_t k = 0; k < active.size(); ++k) {
      if (k == best_a || k == best_b) continue;
      merged_dist[k] = linkage == Linkage::Average
                           ? (static_cast<double>(na) * dist[best_a][k] +
                              static_cast<double>(nb) * dist[best_b][k]) /
                                 static_cast<double>(na + nb)
                           : std::max(dist[best_a][k], dist[best_b][k]);
    }

    // Collapse cluster b into a, then drop b.
    active[best_a] = merged_index;
    sizes[best_a] = na + nb;
    reps[best_a] = std::min(reps[best_a], reps[best_b]);
    for (size_t k = 0; k < active.size(); ++k) {
      if (k == best_a || k == best_b) continue;
      dist[best_a][k] = merged_dist[k];
      dist[k][best_a] = merged_dist[k];
    }
    auto drop = [&](auto& v) { v.erase(v.begin() + static_cast<long>(best_b)); };
    drop(active);
    drop(sizes);
    drop(reps);
    dist.erase(dist.begin() + static_cast<long>(best_b));
    for (auto& row : dist) row.erase(row.begin() + static_cast<long>(best_b));
  }

  tree.root = active.front();
  return tree;
}

inline json dendrogram_to_json(const Dendrogram& tree, int node_index) {
  const auto& node = tree.nodes.at(static_cast<size_t>(node_index));
  if (node.left < 0) return json{{"model", node.members.front()}};
  return json{{"height", node.height},
              {"children", json::array({dendrogram_to_json(tree, node.left),
                                        dendrogram_to_json(tree, node.right)})}};
}

inline json dendrogram_to_json(const Dendrogram& tree) { return dendrogram_to_json(tree, tree.root); }

// ---------------------------------------------------------------------------
// Preference analyses
// ---------------------------------------------------------------------------

/// The action the model prefers with likelihood >= threshold, if any.
inline std::optional<int> strong_preference(const ActionDistribution& dist, double threshold = 0.75) {
  if (threshold <= 0.5 || threshold > 1.0)
    throw std::invalid_argument("strong_preference: threshold must be in (0.5, 1]");
  if (dist.p[0] >= threshold) return 1;
  if (dist.p[1] >= threshold) return 2;
  return std::nullopt;
}

enum class AgreementVerdict { Agree, Disagree, Neither };

inline std::string to_string(AgreementVerdict v) {
  switch (v) {
    case AgreementVerdict::Agree: return "agree";
    case AgreementVerdict::Disagree: return "disagree";
    case AgreementVerdict::Neither: return "neither";
  }
  throw std::logic_error("bad AgreementVerdict");
}

/// Strong agreement on one scenario: both models strongly prefer the same
/// action. Strong disagreement: strong preferences on opposite actions.
inline AgreementVerdict strong_agreement(const ActionDistribution& a, const ActionDistribution& b,
                                         double threshold = 0.75) {
  auto pa = strong_preference(a, threshold);
  auto pb = strong_preference(b, threshold);
  if (!pa || !pb) return AgreementVerdict::Neither;
  return *pa == *pb ? AgreementVerdict::Agree : AgreementVerdict::Disagree;
}

/// For each rule, the number of scenarios where the model strongly prefers
/// an action labeled as violating that rule. Requires rule labels.
inline std::array<int, 10> rule_violation_counts(
    const std::vector<std::pair<std::string, ActionDistribution>>& marginals, const Dataset& dataset,
    double threshold = 0.75) {
  std::array<int, 10> counts{};
  for (const auto& [scenario_id, dist] : marginals) {
    const Scenario* s = dataset.find(scenario_id);
    if (!s) throw std::invalid_argument("rule_violation_counts: unknown scenario '" + scenario_id + "'");
    if (!s->labels)
      throw std::invalid_argument("rule_violation_counts: scenario '" + scenario_id +
                                  "' has no rule labels");
    auto preferred = strong_preference(dist, threshold);
    if (!preferred) continue;
    for (int r = 0; r < 10; ++r)
      if (s->labels->action_violates(r, *preferred)) ++counts[static_cast<size_t>(r)];
  }
  return counts;
}

}  // namespace moralsurvey
