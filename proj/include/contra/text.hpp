#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace contra::text {

// Whitespace tokenization. The default tokenizer everywhere: token counts,
// joint-target formatting and n-gram metrics all agree on this split.
std::vector<std::string> tokenize(std::string_view text);

// Joins tokens with single spaces (inverse of tokenize for canonical text).
std::string join_tokens(std::span<const std::string> tokens);

std::string trim(std::string_view text);
std::string lowercase(std::string_view text);

// Strips leading/trailing non-alphanumeric characters; may return "".
std::string strip_punct(std::string_view token);

// Fixed English stopword list; expects a lowercased token.
bool is_stopword(std::string_view token);

// Lowercased, punctuation-stripped tokens with stopwords removed.
// Pure-punctuation tokens disappear.
std::vector<std::string> content_tokens(std::string_view text);

// Deterministic sentence segmentation: a sentence ends after a run of
// terminal punctuation (. ! ?) followed by whitespace or end of text.
// Never returns empty strings; the token multiset of the segments equals
// the token multiset of the input.
std::vector<std::string> split_sentences(std::string_view text);

// Token-overlap similarity used as the default conclusion/premise-sentence
// similarity: |content(conclusion) n content(sentence)| / |content(conclusion)|.
// Falls back to plain lowercased tokens when the conclusion has no content
// tokens. Returns a value in [0, 1].
double token_overlap_similarity(const std::string& conclusion,
                                const std::string& sentence);

}  // namespace contra::text
