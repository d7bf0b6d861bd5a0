#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace moralsurvey::text {

inline std::string lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Collapse runs of whitespace (including newlines) to single spaces.
inline std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out.push_back(' ');
      in_space = false;
      out.push_back(c);
    }
  }
  return out;
}

/// Lowercased word tokens; punctuation treated as separators.
inline std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Cosine similarity of raw word-count vectors over the union vocabulary.
/// Returns 0 when either text has no tokens.
inline double cosine_word_similarity(std::string_view a, std::string_view b) {
  std::map<std::string, std::pair<int, int>> counts;
  for (auto& t : word_tokens(a)) counts[t].first++;
  for (auto& t : word_tokens(b)) counts[t].second++;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (auto& [tok, c] : counts) {
    dot += static_cast<double>(c.first) * c.second;
    na += static_cast<double>(c.first) * c.first;
    nb += static_cast<double>(c.second) * c.second;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Function words ignored by the stemmed-comparison stage. Single-letter
// words are deliberately absent: bare option letters must stay visible.
inline const std::vector<std::string>& stop_words() {
  static const std::vector<std::string> words = {
      "the", "an", "of", "to", "from", "in", "on", "at", "for", "with", "by", "and", "or"};
  return words;
}

inline bool is_stop_word(std::string_view t) {
  const auto& sw = stop_words();
  return std::find(sw.begin(), sw.end(), t) != sw.end();
}

/// Suffix-stripping stemmer: strips one suffix per token, keeping a stem of
/// at least three characters. Inflection-robust, not linguistically exact.
inline std::string stem(std::string token) {
  if (token.size() > 2 && token.ends_with("'s")) token.resize(token.size() - 2);
  static const std::array<std::string_view, 12> suffixes = {
      "ingly", "edly", "fully", "ness", "ment", "ing", "ed", "ly", "ies", "es", "s", "er"};
  for (auto suf : suffixes) {
    if (token.size() >= suf.size() + 3 && token.ends_with(suf)) {
      token.resize(token.size() - suf.size());
      break;
    }
  }
  return token;
}

/// Stopword-free stemmed token sequence used for inflection-robust matching.
inline std::vector<std::string> stemmed_content_tokens(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : word_tokens(s)) {
    if (is_stop_word(t)) continue;
    out.push_back(stem(t));
  }
  return out;
}

/// True when `needle` occurs inside `haystack` as an ordered subsequence.
inline bool contains_subsequence(const std::vector<std::string>& haystack,
                                 const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  size_t j = 0;
  for (const auto& tok : haystack) {
    if (tok == needle[j] && ++j == needle.size()) return true;
  }
  return false;
}

/// Canonical form used when comparing answers: whitespace collapsed,
/// surrounding quotes and trailing periods stripped, lowercased.
inline std::string normalize_answer(std::string_view raw) {
  std::string s = collapse_spaces(trim(raw));
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    auto matched_quotes = [&](char open, char close) {
      return s.size() >= 2 && s.front() == open && s.back() == close;
    };
    if (matched_quotes('"', '"') || matched_quotes('\'', '\'') || matched_quotes('`', '`')) {
      s = trim(std::string_view(s).substr(1, s.size() - 2));
      changed = true;
    }
    while (!s.empty() && s.back() == '.') {
      s.pop_back();
      changed = true;
    }
    if (changed) s = trim(s);
  }
  return lowercase(s);
}

/// Prefix match on a word boundary: the next character after the prefix,
/// if any, must not be alphanumeric.
inline bool starts_with_boundary(std::string_view s, std::string_view prefix) {
  if (prefix.empty() || s.size() < prefix.size()) return false;
  if (s.substr(0, prefix.size()) != prefix) return false;
  return s.size() == prefix.size() || !std::isalnum(static_cast<unsigned char>(s[prefix.size()]));
}

}  // namespace moralsurvey::text
