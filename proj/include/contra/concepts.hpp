#pragma once

#include <functional>
#include <string>
#include <vector>

namespace contra::concepts {

// A salient phrase usable as a conclusion prompt.
struct Concept {
  std::string phrase;      // lowercased, at least one content token
  double salience = 0.0;   // finite, >= 0
};

// Pluggable extractor; selected by string id in run configs. The built-in
// id is "np" (noun-phrase frequency). Service-backed extractors implement
// the same signature and read their endpoint from the environment.
using ConceptExtractor =
    std::function<std::vector<Concept>(const std::string& premises, int m)>;

// Default extractor: candidate phrases are contiguous subspans (1..4 tokens)
// of stopword/punctuation-bounded runs of content tokens; salience is
// occurrence count times phrase length in tokens. Case-normalized
// deduplication; ordering is salience desc, then count desc, then first
// occurrence. Returns at most m concepts; empty text or m = 0 gives none.
std::vector<Concept> extract_concepts(const std::string& premises, int m);

// Looks up an extractor by id; throws on unknown ids.
ConceptExtractor extractor_by_id(const std::string& id);

}  // namespace contra::concepts
