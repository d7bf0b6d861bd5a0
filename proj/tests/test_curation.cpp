#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "moralsurvey/curation.hpp"

using namespace moralsurvey;

namespace {

Scenario make_scenario(std::string id, std::string context, std::string a1, std::string a2) {
  return {std::move(id), Ambiguity::High, std::move(context),
          {{{1, std::move(a1)}, {2, std::move(a2)}}}, std::nullopt};
}

}  // namespace

TEST_CASE("lexical similarity matches the cosine oracle", "[curation]") {
  CHECK(lexical_similarity("a b", "a b") == Catch::Approx(1.0));
  CHECK(lexical_similarity("a b", "c d") == Catch::Approx(0.0));
  CHECK(lexical_similarity("a b", "a c") == Catch::Approx(0.5));
  CHECK(lexical_similarity("Word word", "word") ==
        Catch::Approx(2.0 / std::sqrt(4.0)));  // raw counts, lowercased
}

TEST_CASE("similarity filter drops near-duplicates", "[curation]") {
  SECTION("identical pair keeps the earlier scenario") {
    Dataset ds{"d", {make_scenario("s1", "same context words", "ant bee", "cat dog"),
                     make_scenario("s2", "same context words", "ant bee", "cat dog")}};
    Dataset out = similarity_filter(ds, 0.99);
    REQUIRE(out.scenarios.size() == 1);
    CHECK(out.scenarios[0].id == "s1");
  }
  SECTION("disjoint scenarios all survive") {
    Dataset ds{"d", {make_scenario("s1", "alpha bravo", "ant bee", "cat dog"),
                     make_scenario("s2", "charlie delta", "elk fox", "gnu hen"),
                     make_scenario("s3", "echo foxtrot", "ibis jay", "kite lark")}};
    CHECK(similarity_filter(ds, 0.6).scenarios.size() == 3);
  }
  SECTION("hand-evaluated greedy pass keeps scenarios 1 and 3") {
    // Contexts 1 and 2 share 5 of 7 words: cosine 5/7 = 0.714 > 0.6.
    // Context 3 shares one word with each: cosine 1/7 = 0.143.
    Dataset ds{"d",
               {make_scenario("s1", "alpha bravo charlie delta echo foxtrot golf", "ant bee", "cat dog"),
                make_scenario("s2", "alpha bravo charlie delta echo xray yankee", "elk fox", "gnu hen"),
                make_scenario("s3", "alpha zulu november mike oscar papa quebec", "ibis jay", "kite lark")}};
    REQUIRE(lexical_similarity(ds.scenarios[0].context, ds.scenarios[1].context) ==
            Catch::Approx(5.0 / 7.0));
    REQUIRE(lexical_similarity(ds.scenarios[0].context, ds.scenarios[2].context) ==
            Catch::Approx(1.0 / 7.0));
    Dataset out = similarity_filter(ds, 0.6);
    REQUIRE(out.scenarios.size() == 2);
    CHECK(out.scenarios[0].id == "s1");
    CHECK(out.scenarios[1].id == "s3");
  }
  SECTION("pass 1 only compares scenarios sharing a violated rule") {
    RuleLabels deceive;
    deceive.set("Do not deceive", 2, true);
    RuleLabels cheat;
    cheat.set("Do not cheat", 2, true);
    auto s1 = make_scenario("s1", "identical context here", "ant bee", "cat dog");
    s1.labels = deceive;
    auto s2 = make_scenario("s2", "identical context here", "elk fox", "gnu hen");
    s2.labels = cheat;
    Dataset ds{"d", {s1, s2}};
    // Same context but different rule groups: pass 1 never compares them,
    // and the full texts are diluted below the threshold by the actions.
    REQUIRE(lexical_similarity(ds.scenarios[0].full_text(), ds.scenarios[1].full_text()) < 0.6);
    CHECK(similarity_filter(ds, 0.6).scenarios.size() == 2);
  }
  SECTION("pass 2 catches full-text duplicates across rule groups") {
    RuleLabels deceive;
    deceive.set("Do not deceive", 2, true);
    RuleLabels cheat;
    cheat.set("Do not cheat", 2, true);
    auto s1 = make_scenario("s1", "identical context here", "ant bee", "cat dog");
    s1.labels = deceive;
    auto s2 = make_scenario("s2", "identical context here", "ant bee", "cat dog");
    s2.labels = cheat;
    Dataset ds{"d", {s1, s2}};
    Dataset out = similarity_filter(ds, 0.6);
    REQUIRE(out.scenarios.size() == 1);
    CHECK(out.scenarios[0].id == "s1");
  }
  SECTION("threshold precondition") {
    Dataset ds{"d", {make_scenario("s1", "a", "b", "c")}};
    CHECK_THROWS_AS(similarity_filter(ds, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(similarity_filter(ds, 1.5), std::invalid_argument);
  }
}

TEST_CASE("similarity filter properties", "[curation]") {
  std::mt19937 rng(11);
  const std::vector<std::string> vocab = {"ant", "bee", "cat", "dog", "elk",
                                          "fox", "gnu", "hen", "ibis", "jay"};
  auto random_text = [&](int words) {
    std::string s;
    for (int i = 0; i < words; ++i) s += vocab[rng() % vocab.size()] + " ";
    return s;
  };

  for (int trial = 0; trial < 50; ++trial) {
    Dataset ds{"d", {}};
    int n = 2 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i)
      ds.scenarios.push_back(make_scenario("s" + std::to_string(i), random_text(4 + rng() % 4),
                                           random_text(3), random_text(3)));
    const double threshold = 0.5;
    Dataset out = similarity_filter(ds, threshold);

    CHECK(out.scenarios.size() <= ds.scenarios.size());
    // Survivors contain no pair above the threshold under the pass-2
    // full-text criterion.
    for (size_t i = 0; i < out.scenarios.size(); ++i)
      for (size_t j = i + 1; j < out.scenarios.size(); ++j)
        CHECK(lexical_similarity(out.scenarios[i].full_text(), out.scenarios[j].full_text()) <=
              threshold);

    // Seeded random-drop mode is reproducible and satisfies the same bound.
    SimilarityFilterOptions opt;
    opt.threshold = threshold;
    opt.random_drop = true;
    opt.seed = trial;
    Dataset r1 = similarity_filter(ds, opt);
    Dataset r2 = similarity_filter(ds, opt);
    CHECK(r1 == r2);
    for (size_t i = 0; i < r1.scenarios.size(); ++i)
      for (size_t j = i + 1; j < r1.scenarios.size(); ++j)
        CHECK(lexical_similarity(r1.scenarios[i].full_text(), r1.scenarios[j].full_text()) <=
              threshold);
  }
}
