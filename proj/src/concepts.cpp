#include "contra/concepts.hpp"

#include <algorithm>
#include <map>

#include "contra/errors.hpp"
#include "contra/text.hpp"

namespace contra::concepts {

namespace {

constexpr std::size_t kMaxPhraseTokens = 4;

struct PhraseStats {
  int count = 0;
  std::size_t first_pos = 0;  // token position of first occurrence
  std::size_t length = 0;
};

// Maximal runs of non-stopword tokens; punctuation attached to a token
// closes the run on that side.
std::vector<std::pair<std::size_t, std::vector<std::string>>> content_runs(
    const std::string& premises) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> runs;
  std::vector<std::string> run;
  std::size_t run_start = 0;
  std::size_t pos = 0;
  auto close = [&]() {
    if (!run.empty()) runs.emplace_back(run_start, std::move(run));
    run.clear();
  };
  for (const std::string& raw : text::tokenize(premises)) {
    std::string lowered = text::lowercase(raw);
    std::string stripped = text::strip_punct(lowered);
    bool leading_punct = !lowered.empty() && !stripped.empty() &&
                         lowered.front() != stripped.front();
    bool trailing_punct = !lowered.empty() && !stripped.empty() &&
                          lowered.back() != stripped.back();
    if (stripped.empty() || text::is_stopword(stripped)) {
      close();
      ++pos;
      continue;
    }
    if (leading_punct) close();
    if (run.empty()) run_start = pos;
    run.push_back(stripped);
    if (trailing_punct) close();
    ++pos;
  }
  close();
  return runs;
}

}  // namespace

std::vector<Concept> extract_concepts(const std::string& premises, int m) {
  if (m < 0) throw PreconditionError("extract_concepts: m must be >= 0");
  if (m == 0) return {};

  std::map<std::string, PhraseStats> stats;
  for (const auto& [start, run] : content_runs(premises)) {
    for (std::size_t i = 0; i < run.size(); ++i) {
      std::string phrase;
      for (std::size_t len = 1; len <= kMaxPhraseTokens && i + len <= run.size();
           ++len) {
        if (len > 1) phrase += ' ';
        phrase += run[i + len - 1];
        auto [it, inserted] = stats.try_emplace(phrase);
        PhraseStats& s = it->second;
        if (inserted) {
          s.first_pos = start + i;
          s.length = len;
        }
        ++s.count;
      }
    }
  }

  std::vector<std::pair<std::string, PhraseStats>> ranked(stats.begin(),
                                                          stats.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    double sa = static_cast<double>(a.second.count) *
                static_cast<double>(a.second.length);
    double sb = static_cast<double>(b.second.count) *
                static_cast<double>(b.second.length);
    if (sa != sb) return sa > sb;
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_pos < b.second.first_pos;
  });

  std::vector<Concept> out;
  for (const auto& [phrase, s] : ranked) {
    if (static_cast<int>(out.size()) >= m) break;
    out.push_back({phrase, static_cast<double>(s.count) *
                               static_cast<double>(s.length)});
  }
  return out;
}

ConceptExtractor extractor_by_id(const std::string& id) {
  if (id == "np") {
    return [](const std::string& premises, int m) {
      return extract_concepts(premises, m);
    };
  }
  throw PreconditionError("unknown concept extractor id: " + id);
}

}  // namespace contra::concepts
