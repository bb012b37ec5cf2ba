#include "contra/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "contra/errors.hpp"
#include "contra/rng.hpp"
#include "contra/text.hpp"
#include "nlohmann/json.hpp"

namespace contra::corpus {

using nlohmann::json;

std::string to_string(Stance s) { return s == Stance::pro ? "pro" : "con"; }

Stance stance_from_string(const std::string& s) {
  if (s == "pro") return Stance::pro;
  if (s == "con") return Stance::con;
  throw ParseError("unknown stance label: " + s);
}

bool SplitSpec::in_train(const std::string& id) const {
  return std::binary_search(train_ids.begin(), train_ids.end(), id);
}
bool SplitSpec::in_validation(const std::string& id) const {
  return std::binary_search(validation_ids.begin(), validation_ids.end(), id);
}
bool SplitSpec::in_test(const std::string& id) const {
  return std::binary_search(test_ids.begin(), test_ids.end(), id);
}

QualityScorer length_capped_quality(int cap) {
  if (cap < 1) throw PreconditionError("quality cap must be >= 1");
  return [cap](const std::string& t) {
    int n = static_cast<int>(text::tokenize(t).size());
    return static_cast<double>(std::min(n, cap)) / static_cast<double>(cap);
  };
}

// ---- Ingestion --------------------------------------------------------

namespace {

json parse_json_line(const std::string& line, long line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON", line_no);
  if (!j.is_object()) throw ParseError("record is not a JSON object", line_no);
  return j;
}

const json& require_key(const json& j, const char* key, long line_no) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(std::string("missing required key '") + key + "'", line_no);
  }
  return *it;
}

std::string require_string(const json& j, const char* key, long line_no) {
  const json& v = require_key(j, key, line_no);
  if (!v.is_string()) {
    throw ParseError(std::string("key '") + key + "' is not a string", line_no);
  }
  return v.get<std::string>();
}

}  // namespace

Argument parse_argument_record(const std::string& line, long line_no) {
  json j = parse_json_line(line, line_no);
  Argument arg;
  arg.id = require_string(j, "id", line_no);
  arg.conclusion = require_string(j, "title", line_no);
  arg.premises = require_string(j, "post", line_no);
  if (text::trim(arg.premises).empty()) {
    throw ParseError("empty post", line_no);
  }
  const json& comments = require_key(j, "comments", line_no);
  if (!comments.is_array()) throw ParseError("'comments' is not an array", line_no);
  for (const json& c : comments) {
    if (!c.is_object()) throw ParseError("comment is not an object", line_no);
    CounterCandidate cand;
    cand.text = require_string(c, "text", line_no);
    if (text::trim(cand.text).empty()) {
      throw ParseError("empty comment text", line_no);
    }
    if (c.contains("quality") && !c["quality"].is_null()) {
      double q = c["quality"].get<double>();
      if (q < 0.0 || q > 1.0) {
        throw ParseError("comment quality outside [0, 1]", line_no);
      }
      cand.quality = q;
    }
    arg.counters.push_back(std::move(cand));
  }
  arg.token_length = static_cast<int>(text::tokenize(arg.premises).size());
  if (j.contains("implicitness") && !j["implicitness"].is_null()) {
    double score = j["implicitness"].get<double>();
    if (score < 0.0 || score > 1.0) {
      throw ParseError("implicitness outside [0, 1]", line_no);
    }
    arg.implicitness = score;
  }
  return arg;
}

std::vector<Argument> load_arguments(const std::filesystem::path& file,
                                     bool compute_implicitness,
                                     const PairSimilarity& similarity) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read argument file: " + file.string());
  PairSimilarity sim = similarity ? similarity : text::token_overlap_similarity;
  std::vector<Argument> arguments;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Argument arg = parse_argument_record(line, line_no);
    if (compute_implicitness && !text::trim(arg.conclusion).empty()) {
      arg.implicitness = conclusion_implicitness(arg, sim);
    }
    arguments.push_back(std::move(arg));
  }
  return arguments;
}

void save_arguments(const std::vector<Argument>& arguments,
                    const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write argument file: " + file.string());
  for (const Argument& arg : arguments) {
    json comments = json::array();
    for (const CounterCandidate& c : arg.counters) {
      json cj{{"text", c.text}};
      if (c.quality) cj["quality"] = *c.quality;
      comments.push_back(std::move(cj));
    }
    json j{{"id", arg.id},
           {"title", arg.conclusion},
           {"post", arg.premises},
           {"comments", std::move(comments)},
           {"token_length", arg.token_length}};
    if (arg.implicitness) j["implicitness"] = *arg.implicitness;
    out << j.dump() << '\n';
  }
}

ClaimPair parse_claim_pair_record(const std::string& line, long line_no) {
  json j = parse_json_line(line, line_no);
  ClaimPair pair;
  pair.claim = require_string(j, "claim", line_no);
  pair.statement = require_string(j, "statement", line_no);
  pair.label = stance_from_string(require_string(j, "label", line_no));
  pair.debate_id = require_string(j, "debate_id", line_no);
  if (text::trim(pair.claim).empty() || text::trim(pair.statement).empty()) {
    throw ParseError("empty claim or statement", line_no);
  }
  return pair;
}

std::vector<ClaimPair> load_claim_pairs(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read claim-pair file: " + file.string());
  std::vector<ClaimPair> pairs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    pairs.push_back(parse_claim_pair_record(line, line_no));
  }
  return pairs;
}

void save_claim_pairs(const std::vector<ClaimPair>& pairs,
                      const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write claim-pair file: " + file.string());
  for (const ClaimPair& p : pairs) {
    json j{{"claim", p.claim},
           {"statement", p.statement},
           {"label", to_string(p.label)},
           {"debate_id", p.debate_id}};
    out << j.dump() << '\n';
  }
}

namespace {

DebateNode parse_debate_node(const json& j, long line_no, bool is_root) {
  DebateNode node;
  node.text = require_string(j, "text", line_no);
  if (!is_root) {
    std::string rel = require_string(j, "relation", line_no);
    if (rel == "supporting") {
      node.relation = DebateNode::Relation::supporting;
    } else if (rel == "opposing") {
      node.relation = DebateNode::Relation::opposing;
    } else {
      throw ParseError("unknown relation tag: " + rel, line_no);
    }
  }
  if (j.contains("children")) {
    if (!j["children"].is_array()) {
      throw ParseError("'children' is not an array", line_no);
    }
    for (const json& c : j["children"]) {
      node.children.push_back(parse_debate_node(c, line_no, false));
    }
  }
  return node;
}

}  // namespace

DebateTree parse_debate_tree(const std::string& json_text, long line_no) {
  json j = parse_json_line(json_text, line_no);
  DebateTree tree;
  tree.id = require_string(j, "id", line_no);
  tree.root = parse_debate_node(j, line_no, true);
  return tree;
}

std::vector<DebateTree> load_debate_trees(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read debate-tree file: " + file.string());
  std::vector<DebateTree> trees;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    trees.push_back(parse_debate_tree(line, line_no));
  }
  return trees;
}

// ---- Operations -------------------------------------------------------

CounterCandidate select_best_counter(const std::vector<CounterCandidate>& counters,
                                     const QualityScorer& scorer) {
  if (counters.empty()) {
    throw PreconditionError("select_best_counter: empty candidate collection");
  }
  std::size_t best = 0;
  double best_quality = -1.0;
  std::vector<double> effective(counters.size());
  for (std::size_t i = 0; i < counters.size(); ++i) {
    const CounterCandidate& c = counters[i];
    effective[i] = c.quality ? *c.quality : (scorer ? scorer(c.text) : 0.0);
    if (effective[i] > best_quality) {
      best_quality = effective[i];
      best = i;
    }
  }
  CounterCandidate out = counters[best];
  out.quality = effective[best];
  return out;
}

double conclusion_implicitness(const Argument& argument,
                               const PairSimilarity& similarity) {
  if (text::trim(argument.conclusion).empty()) {
    throw PreconditionError("conclusion_implicitness: empty conclusion");
  }
  std::vector<std::string> sentences = text::split_sentences(argument.premises);
  if (sentences.empty()) {
    throw PreconditionError("conclusion_implicitness: premises have no sentences");
  }
  double best = 0.0;
  for (const std::string& s : sentences) {
    best = std::max(best, similarity(argument.conclusion, s));
  }
  return best;
}

namespace {

void collect_pairs(const DebateNode& parent, const std::string& debate_id,
                   std::vector<ClaimPair>& out) {
  for (const DebateNode& child : parent.children) {
    ClaimPair pair;
    pair.claim = parent.text;
    pair.statement = child.text;
    pair.label = child.relation == DebateNode::Relation::supporting
                     ? Stance::pro
                     : Stance::con;
    pair.debate_id = debate_id;
    out.push_back(std::move(pair));
    collect_pairs(child, debate_id, out);
  }
}

}  // namespace

std::vector<ClaimPair> build_claim_pairs(const DebateTree& tree) {
  std::vector<ClaimPair> pairs;
  collect_pairs(tree.root, tree.id, pairs);
  return pairs;
}

SplitSpec make_splits(const std::vector<std::string>& group_keys,
                      const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw PreconditionError("make_splits: ratios must sum to 1");
  }
  // unique groups in first-seen order, then a seeded shuffle
  std::vector<std::string> groups;
  std::unordered_set<std::string> seen;
  for (const std::string& key : group_keys) {
    if (seen.insert(key).second) groups.push_back(key);
  }
  std::mt19937_64 rng(seed);
  deterministic_shuffle(groups, rng);

  const std::size_t n = groups.size();
  auto boundary = [&](double cum) {
    return static_cast<std::size_t>(std::llround(cum * static_cast<double>(n)));
  };
  std::size_t b1 = boundary(ratios[0]);
  std::size_t b2 = boundary(ratios[0] + ratios[1]);
  b1 = std::min(b1, n);
  b2 = std::min(std::max(b2, b1), n);

  SplitSpec spec;
  spec.train_ids.assign(groups.begin(), groups.begin() + static_cast<long>(b1));
  spec.validation_ids.assign(groups.begin() + static_cast<long>(b1),
                             groups.begin() + static_cast<long>(b2));
  spec.test_ids.assign(groups.begin() + static_cast<long>(b2), groups.end());
  std::sort(spec.train_ids.begin(), spec.train_ids.end());
  std::sort(spec.validation_ids.begin(), spec.validation_ids.end());
  std::sort(spec.test_ids.begin(), spec.test_ids.end());
  return spec;
}

void save_splits(const SplitSpec& splits, const std::filesystem::path& file) {
  json j{{"train", splits.train_ids},
         {"validation", splits.validation_ids},
         {"test", splits.test_ids}};
  std::ofstream out(file);
  if (!out) throw Error("cannot write split manifest: " + file.string());
  out << j.dump(2) << '\n';
}

SplitSpec load_splits(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read split manifest: " + file.string());
  json j;
  in >> j;
  SplitSpec spec;
  spec.train_ids = j.at("train").get<std::vector<std::string>>();
  spec.validation_ids = j.at("validation").get<std::vector<std::string>>();
  spec.test_ids = j.at("test").get<std::vector<std::string>>();
  std::sort(spec.train_ids.begin(), spec.train_ids.end());
  std::sort(spec.validation_ids.begin(), spec.validation_ids.end());
  std::sort(spec.test_ids.begin(), spec.test_ids.end());
  return spec;
}

std::array<std::vector<std::size_t>, 5> quintile_split(
    const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  if (n < 5) throw PreconditionError("quintile_split: need at least 5 instances");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::array<std::vector<std::size_t>, 5> bins;
  std::size_t base = n / 5;
  std::size_t extra = n % 5;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    std::size_t size = base + (b < extra ? 1 : 0);
    bins[b].assign(order.begin() + static_cast<long>(pos),
                   order.begin() + static_cast<long>(pos + size));
    pos += size;
  }
  return bins;
}

}  // namespace contra::corpus
