#include "contra/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace contra::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> words = {
      "a",       "about",   "above",    "after",   "again",      "against",
      "all",     "am",      "an",       "and",     "any",        "are",
      "as",      "at",      "be",       "because", "been",       "before",
      "being",   "below",   "between",  "both",    "but",        "by",
      "can",     "cannot",  "could",    "did",     "do",         "does",
      "doing",   "down",    "during",   "each",    "few",        "for",
      "from",    "further", "had",      "has",     "have",       "having",
      "he",      "her",     "here",     "hers",    "herself",    "him",
      "himself", "his",     "how",      "i",       "if",         "in",
      "into",    "is",      "it",       "its",     "itself",     "just",
      "me",      "more",    "most",     "my",      "myself",     "no",
      "nor",     "not",     "now",      "of",      "off",        "on",
      "once",    "only",    "or",       "other",   "our",        "ours",
      "out",     "over",    "own",      "same",    "she",        "should",
      "so",      "some",    "such",     "than",    "that",       "the",
      "their",   "theirs",  "them",     "then",    "there",      "these",
      "they",    "this",    "those",    "through", "to",         "too",
      "under",   "until",   "up",       "very",    "was",        "we",
      "were",    "what",    "when",     "where",   "which",      "while",
      "who",     "whom",    "why",      "will",    "with",       "would",
      "you",     "your",    "yours",    "yourself", "yourselves", "themselves",
      "ourselves",
  };
  return words;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string strip_punct(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && !is_alnum(token[b])) ++b;
  while (e > b && !is_alnum(token[e - 1])) --e;
  return std::string(token.substr(b, e - b));
}

bool is_stopword(std::string_view token) {
  return stopword_set().count(std::string(token)) > 0;
}

std::vector<std::string> content_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : tokenize(text)) {
    std::string tok = strip_punct(lowercase(raw));
    if (tok.empty() || is_stopword(tok)) continue;
    out.push_back(std::move(tok));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string current;
  auto is_terminal = [](char c) { return c == '.' || c == '!' || c == '?'; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    bool at_boundary = is_terminal(text[i]) &&
                       (i + 1 == text.size() || is_space(text[i + 1]));
    if (at_boundary) {
      std::string seg = trim(current);
      if (!seg.empty()) sentences.push_back(std::move(seg));
      current.clear();
    }
  }
  std::string tail = trim(current);
  if (!tail.empty()) sentences.push_back(std::move(tail));
  return sentences;
}

double token_overlap_similarity(const std::string& conclusion,
                                const std::string& sentence) {
  std::vector<std::string> conc = content_tokens(conclusion);
  std::vector<std::string> sent = content_tokens(sentence);
  if (conc.empty()) {
    // all-stopword conclusion: fall back to plain lowercased tokens
    for (const auto& raw : tokenize(conclusion)) {
      std::string tok = strip_punct(lowercase(raw));
      if (!tok.empty()) conc.push_back(std::move(tok));
    }
    sent.clear();
    for (const auto& raw : tokenize(sentence)) {
      std::string tok = strip_punct(lowercase(raw));
      if (!tok.empty()) sent.push_back(std::move(tok));
    }
    if (conc.empty()) return 0.0;
  }
  std::unordered_set<std::string> conc_set(conc.begin(), conc.end());
  std::unordered_set<std::string> sent_set(sent.begin(), sent.end());
  std::size_t overlap = 0;
  for (const auto& tok : conc_set) overlap += sent_set.count(tok);
  return static_cast<double>(overlap) / static_cast<double>(conc_set.size());
}

}  // namespace contra::text
