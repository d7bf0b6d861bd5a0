#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "moralsurvey/text.hpp"

using namespace moralsurvey;

TEST_CASE("answer normalization", "[text]") {
  CHECK(text::normalize_answer("  A  ") == "a");
  CHECK(text::normalize_answer("\"A\".") == "a");
  CHECK(text::normalize_answer("'Yes.'") == "yes");
  CHECK(text::normalize_answer("Answer:   B") == "answer: b");
  CHECK(text::normalize_answer("line one\n  line two") == "line one line two");
  CHECK(text::normalize_answer("...") == "");
  CHECK(text::normalize_answer("") == "");
  // Structural punctuation that is not trailing survives.
  CHECK(text::normalize_answer("(A) fine.") == "(a) fine");
}

TEST_CASE("boundary prefix matching", "[text]") {
  CHECK(text::starts_with_boundary("a) something", "a)"));
  CHECK(text::starts_with_boundary("option a", "option a"));
  CHECK(text::starts_with_boundary("yes, i agree", "yes"));
  CHECK_FALSE(text::starts_with_boundary("yesterday", "yes"));
  CHECK_FALSE(text::starts_with_boundary("notably", "no"));
  CHECK_FALSE(text::starts_with_boundary("", "a"));
}

TEST_CASE("word tokens and stemming", "[text]") {
  CHECK(text::word_tokens("I deal cards, fairly!") ==
        std::vector<std::string>{"i", "deal", "cards", "fairly"});
  CHECK(text::stem("cards") == "card");
  CHECK(text::stem("fairly") == "fair");
  CHECK(text::stem("killing") == "kill");
  CHECK(text::stem("yes") == "yes");  // too short to strip
  CHECK(text::stem("no") == "no");
  CHECK(text::stem("promises") == "promis");

  auto a = text::stemmed_content_tokens("I deal card fairly from top of deck");
  auto b = text::stemmed_content_tokens("I deal cards fairly from the top of the deck.");
  CHECK(a == b);
}

TEST_CASE("subsequence containment", "[text]") {
  using V = std::vector<std::string>;
  CHECK(text::contains_subsequence(V{"x", "a", "y", "b"}, V{"a", "b"}));
  CHECK_FALSE(text::contains_subsequence(V{"b", "a"}, V{"a", "b"}));
  CHECK_FALSE(text::contains_subsequence(V{"a"}, V{}));
}

TEST_CASE("cosine word similarity pinned values", "[text]") {
  CHECK(text::cosine_word_similarity("a b", "a b") == Catch::Approx(1.0));
  CHECK(text::cosine_word_similarity("a b", "c d") == Catch::Approx(0.0));
  // count vectors (1,1,0) and (1,0,1): 1 / (sqrt(2) * sqrt(2))
  CHECK(text::cosine_word_similarity("a b", "a c") == Catch::Approx(0.5));
  CHECK(text::cosine_word_similarity("", "a b") == 0.0);
  CHECK(text::cosine_word_similarity("?!", "a b") == 0.0);
}

TEST_CASE("cosine similarity is symmetric and unit on identical multisets", "[text]") {
  std::mt19937 rng(7);
  const std::vector<std::string> vocab = {"ant", "bee", "cat", "dog", "elk", "fox"};
  for (int trial = 0; trial < 200; ++trial) {
    auto make = [&] {
      std::string s;
      int n = 1 + static_cast<int>(rng() % 10);
      for (int i = 0; i < n; ++i) s += vocab[rng() % vocab.size()] + " ";
      return s;
    };
    std::string a = make(), b = make();
    CHECK(text::cosine_word_similarity(a, b) == Catch::Approx(text::cosine_word_similarity(b, a)));
    CHECK(text::cosine_word_similarity(a, a) == Catch::Approx(1.0));

    // Shuffled copy has the same token multiset.
    auto tokens = text::word_tokens(a);
    std::shuffle(tokens.begin(), tokens.end(), rng);
    std::string shuffled;
    for (const auto& t : tokens) shuffled += t + " ";
    CHECK(text::cosine_word_similarity(a, shuffled) == Catch::Approx(1.0));
  }
}
