#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace contra::corpus {

// Pro/con orientation of a statement toward a claim.
enum class Stance { pro, con };

std::string to_string(Stance s);
Stance stance_from_string(const std::string& s);

// One candidate counter-argument attached to a post.
struct CounterCandidate {
  std::string text;
  std::optional<double> quality;  // in [0, 1] when present
};

// One training/evaluation record. The post title is the conclusion, the
// body the premises, each comment a candidate counter.
struct Argument {
  std::string id;
  std::string conclusion;
  std::string premises;
  std::vector<CounterCandidate> counters;
  int token_length = 0;                  // premise tokens
  std::optional<double> implicitness;    // max conclusion/premise-sentence similarity

  bool has_counter() const { return !counters.empty(); }
};

// A (claim, statement) pair with its stance label, grouped by debate.
struct ClaimPair {
  std::string claim;
  std::string statement;
  Stance label = Stance::pro;
  std::string debate_id;
};

// Debate-disjoint train/validation/test id assignment.
struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;

  bool in_train(const std::string& id) const;
  bool in_validation(const std::string& id) const;
  bool in_test(const std::string& id) const;
};

// Hierarchical debate: claims connected to their parent by a supporting or
// opposing relation. The root id doubles as the debate id.
struct DebateNode {
  enum class Relation { supporting, opposing };
  std::string text;
  Relation relation = Relation::supporting;  // relation to the parent; unused on the root
  std::vector<DebateNode> children;
};

struct DebateTree {
  std::string id;
  DebateNode root;
};

// Fills missing quality values; maps text -> [0, 1].
using QualityScorer = std::function<double(const std::string&)>;

// Text-pair similarity in [0, 1] for implicitness scoring.
using PairSimilarity = std::function<double(const std::string&, const std::string&)>;

// Fallback scorer for unscored corpora: min(token count, cap) / cap.
QualityScorer length_capped_quality(int cap = 100);

// ---- Ingestion --------------------------------------------------------

// Parses one JSON line {id, title, post, comments:[{text, quality?}]}.
// Rejects malformed JSON, missing keys, an empty post and out-of-range
// quality values with a ParseError carrying the line number.
Argument parse_argument_record(const std::string& line, long line_no = -1);

// Reads a JSON-lines argument file; blank lines are skipped. When
// compute_implicitness is set, each record gets its implicitness score
// under the given similarity (token overlap by default).
std::vector<Argument> load_arguments(const std::filesystem::path& file,
                                     bool compute_implicitness = false,
                                     const PairSimilarity& similarity = nullptr);

void save_arguments(const std::vector<Argument>& arguments,
                    const std::filesystem::path& file);

ClaimPair parse_claim_pair_record(const std::string& line, long line_no = -1);
std::vector<ClaimPair> load_claim_pairs(const std::filesystem::path& file);
void save_claim_pairs(const std::vector<ClaimPair>& pairs,
                      const std::filesystem::path& file);

// Parses a nested debate-tree JSON object:
// {id, text, children: [{relation: "supporting"|"opposing", text, children}]}.
DebateTree parse_debate_tree(const std::string& json_text, long line_no = -1);
std::vector<DebateTree> load_debate_trees(const std::filesystem::path& file);

// ---- Operations -------------------------------------------------------

// Candidate with maximal quality; the scorer fills missing values only.
// Ties resolve to the lowest original index. The returned candidate carries
// its effective quality.
CounterCandidate select_best_counter(const std::vector<CounterCandidate>& counters,
                                     const QualityScorer& scorer);

// Max over premise sentences of similarity(conclusion, sentence) in [0, 1].
// Higher means the conclusion is stated more explicitly in the premises.
double conclusion_implicitness(const Argument& argument,
                               const PairSimilarity& similarity);

// One pair per parent-child edge; supporting -> pro, opposing -> con.
std::vector<ClaimPair> build_claim_pairs(const DebateTree& tree);

// Deterministic, seed-keyed assignment of group keys (debate ids or argument
// ids) to train/validation/test. Duplicate keys collapse to one group; every
// group lands in exactly one split. Ratios must sum to 1 within 1e-9.
SplitSpec make_splits(const std::vector<std::string>& group_keys,
                      const std::array<double, 3>& ratios, std::uint64_t seed);

void save_splits(const SplitSpec& splits, const std::filesystem::path& file);
SplitSpec load_splits(const std::filesystem::path& file);

// Sorts instances ascending by score and cuts them into 5 contiguous bins;
// when the count is not divisible by 5, earlier bins take the extra items.
// Ties keep their input order. Returns original indices per bin.
std::array<std::vector<std::size_t>, 5> quintile_split(
    const std::vector<double>& scores);

}  // namespace contra::corpus
