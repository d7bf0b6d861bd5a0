#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "moralsurvey/stats.hpp"

using namespace moralsurvey;

namespace {

ActionDistribution dist(double p1, double p2) {
  ActionDistribution d;
  d.p = {p1, p2};
  d.valid_count = 1;
  return d;
}

std::vector<Decision> decisions(int a1, int a2, int refusals, int invalids) {
  std::vector<Decision> out;
  for (int i = 0; i < a1; ++i) out.push_back(Decision::make_action(1));
  for (int i = 0; i < a2; ++i) out.push_back(Decision::make_action(2));
  for (int i = 0; i < refusals; ++i) out.push_back(Decision::refusal());
  for (int i = 0; i < invalids; ++i) out.push_back(Decision::invalid());
  return out;
}

}  // namespace

TEST_CASE("action likelihood estimation", "[stats]") {
  SECTION("refusals leave numerator and denominator") {
    auto d = estimate_action_likelihood(decisions(3, 1, 1, 0));
    CHECK(d.p[0] == Catch::Approx(0.75));
    CHECK(d.p[1] == Catch::Approx(0.25));
    CHECK(d.valid_count == 4);
    CHECK_FALSE(d.fallback);
  }
  SECTION("unanimity") {
    auto d = estimate_action_likelihood(decisions(5, 0, 0, 0));
    CHECK(d.p[0] == 1.0);
    CHECK(d.p[1] == 0.0);
  }
  SECTION("no valid decision falls back to the coin flip") {
    auto d = estimate_action_likelihood(decisions(0, 0, 1, 2));
    CHECK(d.p[0] == 0.5);
    CHECK(d.p[1] == 0.5);
    CHECK(d.valid_count == 0);
    CHECK(d.fallback);
  }
  SECTION("empty input is an error, distinct from all-invalid") {
    CHECK_THROWS_AS(estimate_action_likelihood(std::vector<Decision>{}), std::invalid_argument);
  }
}

TEST_CASE("marginal action likelihood", "[stats]") {
  std::vector<ActionDistribution> six(6, dist(0.8, 0.2));
  auto m = marginal_action_likelihood(six, uniform_weights(6));
  CHECK(m.p[0] == Catch::Approx(0.8));

  std::vector<ActionDistribution> split = {dist(1, 0), dist(1, 0), dist(1, 0),
                                           dist(0, 1), dist(0, 1), dist(0, 1)};
  m = marginal_action_likelihood(split, uniform_weights(6));
  CHECK(m.p[0] == Catch::Approx(0.5));
  CHECK(m.p[1] == Catch::Approx(0.5));

  std::vector<ActionDistribution> two = {dist(1, 0), dist(0, 1)};
  std::vector<double> weights = {0.75, 0.25};
  m = marginal_action_likelihood(two, weights);
  CHECK(m.p[0] == Catch::Approx(0.75));
  CHECK(m.p[1] == Catch::Approx(0.25));

  SECTION("weight mismatch is an error") {
    CHECK_THROWS_AS(marginal_action_likelihood(two, uniform_weights(6)), std::invalid_argument);
    std::vector<double> bad = {0.9, 0.9};
    CHECK_THROWS_AS(marginal_action_likelihood(two, bad), std::invalid_argument);
  }
}

TEST_CASE("entropy in bits", "[stats]") {
  CHECK(entropy_bits(dist(0.5, 0.5)) == Catch::Approx(1.0));
  CHECK(entropy_bits(dist(1.0, 0.0)) == 0.0);
  // -0.8 log2 0.8 - 0.2 log2 0.2
  CHECK(entropy_bits(dist(0.8, 0.2)) == Catch::Approx(0.72193).margin(1e-5));
}

TEST_CASE("question-form consistency pinned values", "[stats]") {
  SECTION("identical distributions are perfectly consistent") {
    std::vector<ActionDistribution> six(6, dist(0.7, 0.3));
    CHECK(qf_consistency(six) == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("opposed deterministic answers have zero consistency") {
    std::vector<ActionDistribution> pair = {dist(1, 0), dist(0, 1)};
    CHECK(qf_consistency(pair) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("hand-derived three-form value") {
    // mean (5/6, 1/6); KL1 = KL2 = log2(6/5); KL3 = 0.5 log2(0.6) + 0.5 log2(3)
    std::vector<ActionDistribution> three = {dist(1, 0), dist(1, 0), dist(0.5, 0.5)};
    const double kl12 = std::log2(6.0 / 5.0);
    const double kl3 = 0.5 * std::log2(0.5 / (5.0 / 6.0)) + 0.5 * std::log2(0.5 / (1.0 / 6.0));
    const double expected = 1.0 - (kl12 + kl12 + kl3) / 3.0;
    REQUIRE(expected == Catch::Approx(0.68331).margin(1e-5));
    CHECK(qf_consistency(three) == Catch::Approx(expected).margin(1e-12));
  }
  SECTION("needs at least two distributions") {
    CHECK_THROWS_AS(qf_consistency(std::vector<ActionDistribution>{dist(1, 0)}),
                    std::invalid_argument);
  }
}

TEST_CASE("per-form entropy average pinned values", "[stats]") {
  std::vector<ActionDistribution> opposed = {dist(1, 0), dist(0, 1)};
  CHECK(qf_entropy(opposed) == 0.0);

  std::vector<ActionDistribution> mixed = {dist(0.5, 0.5), dist(1, 0)};
  CHECK(qf_entropy(mixed) == Catch::Approx(0.5));

  std::vector<ActionDistribution> six(6, dist(0.8, 0.2));
  CHECK(qf_entropy(six) == Catch::Approx(0.72193).margin(1e-5));
}

TEST_CASE("consistency bounds and the divergence decomposition", "[stats]") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ActionDistribution> dists;
    int n = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      double p = uniform(rng);
      dists.push_back(dist(p, 1.0 - p));
    }
    const double qfc = qf_consistency(dists);
    CHECK(qfc >= -1e-12);
    CHECK(qfc <= 1.0 + 1e-12);

    // Generalized Jensen-Shannon decomposition:
    // entropy(mean) - mean entropy = mean KL to the mean = 1 - QF-C.
    const double lhs = entropy_bits(mean_distribution(dists)) - qf_entropy(dists);
    CHECK(lhs == Catch::Approx(1.0 - qfc).margin(1e-9));
  }
}

TEST_CASE("consistency is 1 exactly when all distributions agree", "[stats]") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    double p = uniform(rng);
    std::vector<ActionDistribution> equal(2 + rng() % 5, dist(p, 1.0 - p));
    CHECK(qf_consistency(equal) == Catch::Approx(1.0).margin(1e-9));

    std::vector<ActionDistribution> unequal = equal;
    double q = p < 0.5 ? p + 0.3 : p - 0.3;
    unequal.push_back(dist(q, 1.0 - q));
    CHECK(qf_consistency(unequal) < 1.0 - 1e-9);
  }
}

TEST_CASE("monte carlo estimate converges to the sampled distribution", "[stats]") {
  // Cheap version of the convergence gate: one seeded run, bound 3 sigma.
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double q = 0.7;
  const int m = 10000;
  std::vector<Decision> sampled;
  for (int i = 0; i < m; ++i)
    sampled.push_back(Decision::make_action(uniform(rng) < q ? 1 : 2));
  auto d = estimate_action_likelihood(sampled);
  CHECK(std::abs(d.p[0] - q) <= 3.0 * std::sqrt(q * (1 - q) / m));
}

TEST_CASE("response rates", "[stats]") {
  std::vector<ResponseRecord> records;
  auto push = [&](const std::string& model, Decision d) {
    ResponseRecord r;
    r.model = model;
    r.scenario = "s";
    r.form = "ab_fwd";
    r.sample = static_cast<int>(records.size()) + 1;
    r.decision = d;
    records.push_back(r);
  };
  for (int i = 0; i < 95; ++i) push("m1", Decision::make_action(1));
  for (int i = 0; i < 5; ++i) push("m1", Decision::refusal());
  auto rates = response_rates(records, "m1");
  CHECK(rates.total == 100);
  CHECK(rates.refusal_rate == Catch::Approx(0.05));
  CHECK(rates.invalid_rate == 0.0);

  records.clear();
  for (int i = 0; i < 45; ++i) push("m2", Decision::make_action(2));
  for (int i = 0; i < 3; ++i) push("m2", Decision::refusal());
  for (int i = 0; i < 2; ++i) push("m2", Decision::invalid());
  rates = response_rates(records, "m2");
  CHECK(rates.total == 50);
  CHECK(rates.refusal_rate == Catch::Approx(0.06));
  CHECK(rates.invalid_rate == Catch::Approx(0.04));
}

TEST_CASE("region classification with inclusive boundaries", "[stats]") {
  CHECK(classify_model(0.9, 0.3, 0.6, 0.7) == Region::ConsistentCertain);
  CHECK(classify_model(0.2, 0.3, 0.6, 0.7) == Region::InconsistentCertain);
  CHECK(classify_model(0.9, 0.9, 0.6, 0.7) == Region::ConsistentUncertain);
  CHECK(classify_model(0.2, 0.9, 0.6, 0.7) == Region::InconsistentUncertain);
  // Boundary values count as consistent and certain.
  CHECK(classify_model(0.6, 0.7, 0.6, 0.7) == Region::ConsistentCertain);
}

TEST_CASE("form table grouping", "[stats]") {
  std::vector<ResponseRecord> records;
  int sample = 0;
  auto push = [&](const std::string& model, const std::string& scenario, const std::string& form,
                  Decision d) {
    ResponseRecord r;
    r.model = model;
    r.scenario = scenario;
    r.form = form;
    r.sample = ++sample;
    r.decision = d;
    records.push_back(r);
  };
  push("m", "s1", "ab_fwd", Decision::make_action(1));
  push("m", "s1", "ab_fwd", Decision::make_action(2));
  push("m", "s1", "ab_rev", Decision::make_action(1));
  push("other", "s1", "ab_fwd", Decision::make_action(2));

  auto table = build_form_table(records, "m");
  REQUIRE(table.find("s1", "ab_fwd") != nullptr);
  CHECK(table.find("s1", "ab_fwd")->p[0] == Catch::Approx(0.5));
  CHECK(table.find("s1", "ab_rev")->p[0] == Catch::Approx(1.0));
  CHECK(table.find("s1", "missing") == nullptr);

  SECTION("unmapped records are rejected") {
    records.push_back({});
    records.back().model = "m";
    records.back().scenario = "s2";
    records.back().form = "ab_fwd";
    records.back().sample = ++sample;
    CHECK_THROWS_WITH(build_form_table(records, "m"), Catch::Matchers::ContainsSubstring("s2"));
  }
}

TEST_CASE("scenario metrics and fallback granularity", "[stats]") {
  std::vector<ActionDistribution> per_form = {dist(1, 0), dist(1, 0)};
  ActionDistribution fb;
  fb.fallback = true;  // (0.5, 0.5)
  per_form.push_back(fb);

  auto per_form_mode =
      compute_scenario_metrics(per_form, uniform_weights(3), FallbackGranularity::PerForm);
  CHECK(per_form_mode.fallback_forms == 1);
  CHECK(per_form_mode.marginal.p[0] == Catch::Approx((1.0 + 1.0 + 0.5) / 3.0));

  auto per_scenario_mode =
      compute_scenario_metrics(per_form, uniform_weights(3), FallbackGranularity::PerScenario);
  CHECK(per_scenario_mode.marginal.p[0] == Catch::Approx(1.0));
  CHECK(per_scenario_mode.qf_e == Catch::Approx(0.0));

  std::vector<ActionDistribution> all_fb(3, fb);
  auto degenerate =
      compute_scenario_metrics(all_fb, uniform_weights(3), FallbackGranularity::PerScenario);
  CHECK(degenerate.marginal.p[0] == Catch::Approx(0.5));
  CHECK(degenerate.marginal.fallback);
}
