#include "contra/stance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "contra/errors.hpp"
#include "contra/rng.hpp"
#include "contra/text.hpp"

namespace contra::stance {

namespace {

using nlohmann::json;

constexpr std::uint64_t kShuffleBase = 0x7374616e63652121ull;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<std::string> pair_features(const std::string& claim,
                                       const std::string& statement) {
  std::vector<std::string> features;
  for (const std::string& tok : text::tokenize(claim)) {
    features.push_back("c:" + text::lowercase(tok));
  }
  for (const std::string& tok : text::tokenize(statement)) {
    features.push_back("s:" + text::lowercase(tok));
  }
  return features;
}

}  // namespace

StanceVerdict classify_stance(const StanceClassifier& classifier,
                              const std::string& claim,
                              const std::string& statement) {
  if (text::trim(claim).empty() || text::trim(statement).empty()) {
    throw PreconditionError("claim and statement must be non-empty");
  }
  StanceVerdict verdict = classifier.classify(claim, statement);
  if (verdict.probability < 0.0 || verdict.probability > 1.0) {
    throw PreconditionError("verdict probability outside [0,1]");
  }
  return verdict;
}

void LookupStanceClassifier::set(const std::string& claim,
                                 const std::string& statement,
                                 StanceVerdict verdict) {
  table_[{claim, statement}] = verdict;
}

StanceVerdict LookupStanceClassifier::classify(
    const std::string& claim, const std::string& statement) const {
  auto it = table_.find({claim, statement});
  if (it != table_.end()) return it->second;
  if (default_) return *default_;
  throw PreconditionError("no fixture verdict for pair");
}

double ToyStanceClassifier::probability_con(const std::string& claim,
                                            const std::string& statement) const {
  double z = bias_;
  for (const std::string& f : pair_features(claim, statement)) {
    auto it = weights_.find(f);
    if (it != weights_.end()) z += it->second;
  }
  return sigmoid(z);
}

StanceVerdict ToyStanceClassifier::classify(const std::string& claim,
                                            const std::string& statement) const {
  double pr_con = probability_con(claim, statement);
  if (pr_con >= 0.5) return {Stance::con, pr_con};
  return {Stance::pro, 1.0 - pr_con};
}

void ToyStanceClassifier::sgd_batch(std::span<const ClaimPair* const> batch,
                                    double learning_rate) {
  if (batch.empty()) return;
  std::map<std::string, double> grad;
  double bias_grad = 0.0;
  for (const ClaimPair* pair : batch) {
    double y = pair->label == Stance::con ? 1.0 : 0.0;
    double g = probability_con(pair->claim, pair->statement) - y;
    for (const std::string& f : pair_features(pair->claim, pair->statement)) {
      grad[f] += g;
    }
    bias_grad += g;
  }
  double scale = learning_rate / static_cast<double>(batch.size());
  for (const auto& [f, g] : grad) weights_[f] -= scale * g;
  bias_ -= scale * bias_grad;
}

void ToyStanceClassifier::set_weights(std::map<std::string, double> weights,
                                      double bias) {
  weights_ = std::move(weights);
  bias_ = bias;
}

void StanceTrainConfig::validate() const {
  if (learning_rate <= 0.0) throw PreconditionError("learning_rate must be > 0");
  if (epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (validation_ratio < 0.0 || validation_ratio >= 1.0) {
    throw PreconditionError("validation_ratio must lie in [0,1)");
  }
}

TrainedStance train_stance(std::span<const ClaimPair> pairs,
                           const StanceTrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw PreconditionError("empty training set");
  bool has_pro = false;
  bool has_con = false;
  for (const ClaimPair& p : pairs) {
    (p.label == Stance::pro ? has_pro : has_con) = true;
  }
  if (!has_pro || !has_con) {
    throw PreconditionError("training set must contain both labels");
  }

  TrainedStance result;
  result.classifier = std::make_unique<ToyStanceClassifier>();
  if (config.epochs == 0) return result;

  std::vector<std::string> debates;
  debates.reserve(pairs.size());
  for (const ClaimPair& p : pairs) debates.push_back(p.debate_id);
  corpus::SplitSpec splits = corpus::make_splits(
      debates, {1.0 - config.validation_ratio, config.validation_ratio, 0.0},
      config.seed);

  std::vector<const ClaimPair*> train_pairs;
  std::vector<ClaimPair> val_pairs;
  for (const ClaimPair& p : pairs) {
    if (splits.in_validation(p.debate_id)) {
      val_pairs.push_back(p);
    } else {
      train_pairs.push_back(&p);
    }
  }
  if (train_pairs.empty()) {
    throw PreconditionError("validation split swallowed every debate");
  }

  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(
        derive_seed(kShuffleBase, static_cast<std::uint64_t>(epoch)));
    deterministic_shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const ClaimPair*> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_pairs[order[i]]);
      }
      result.classifier->sgd_batch(batch, config.learning_rate);
    }
    if (!val_pairs.empty()) {
      result.validation_f1.push_back(
          evaluate_stance_classifier(*result.classifier, val_pairs));
    }
  }
  return result;
}

double evaluate_stance_classifier(const StanceClassifier& classifier,
                                  std::span<const ClaimPair> pairs) {
  if (pairs.empty()) throw PreconditionError("empty evaluation set");
  // confusion counts indexed by [gold][predicted], pro = 0, con = 1
  long counts[2][2] = {{0, 0}, {0, 0}};
  for (const ClaimPair& p : pairs) {
    StanceVerdict verdict = classify_stance(classifier, p.claim, p.statement);
    int gold = p.label == Stance::con ? 1 : 0;
    int pred = verdict.label == Stance::con ? 1 : 0;
    ++counts[gold][pred];
  }
  double f1_sum = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    double tp = static_cast<double>(counts[cls][cls]);
    double fp = static_cast<double>(counts[1 - cls][cls]);
    double fn = static_cast<double>(counts[cls][1 - cls]);
    double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    double recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    f1_sum += precision + recall > 0.0
                  ? 2.0 * precision * recall / (precision + recall)
                  : 0.0;
  }
  return f1_sum / 2.0;
}

double sentence_contrastiveness(const StanceVerdict& verdict) {
  return verdict.label == Stance::con ? verdict.probability
                                      : -verdict.probability;
}

double counter_contrastiveness(const std::string& conclusion,
                               const std::string& counter,
                               const StanceClassifier& classifier,
                               const SentenceSplitter& splitter) {
  std::vector<std::string> sentences =
      splitter ? splitter(counter) : text::split_sentences(counter);
  if (sentences.empty()) {
    throw PreconditionError("counter has no sentences");
  }
  double total = 0.0;
  for (const std::string& sentence : sentences) {
    total += sentence_contrastiveness(
        classify_stance(classifier, conclusion, sentence));
  }
  return total / static_cast<double>(sentences.size());
}

RankedCandidates rank_candidates(std::span<const CandidatePair> candidates,
                                 const StanceClassifier& classifier,
                                 const std::optional<std::string>& shared_conclusion,
                                 const SentenceSplitter& splitter) {
  if (candidates.empty()) {
    throw PreconditionError("no candidates to rank");
  }
  RankedCandidates ranked;
  ranked.items.assign(candidates.begin(), candidates.end());
  for (CandidatePair& cand : ranked.items) {
    const std::string& conclusion =
        shared_conclusion ? *shared_conclusion : cand.conclusion;
    cand.score =
        counter_contrastiveness(conclusion, cand.counter, classifier, splitter);
  }
  std::stable_sort(ranked.items.begin(), ranked.items.end(),
                   [](const CandidatePair& a, const CandidatePair& b) {
                     return *a.score > *b.score;
                   });
  return ranked;
}

void save_stance_classifier(const std::filesystem::path& dir,
                            const ToyStanceClassifier& classifier,
                            std::span<const double> validation_f1) {
  std::filesystem::create_directories(dir);
  json weights = json::object();
  for (const auto& [f, w] : classifier.weights()) weights[f] = w;
  json blob{{"weights", weights}, {"bias", classifier.bias()}};
  std::ofstream wout(dir / "weights.json");
  if (!wout) throw Error("cannot write weights in " + dir.string());
  wout << blob.dump(2) << '\n';

  json manifest{{"backend_id", "toy"},
                {"label_order", json::array({"pro", "con"})},
                {"validation_f1", std::vector<double>(validation_f1.begin(),
                                                      validation_f1.end())}};
  std::ofstream mout(dir / "manifest.json");
  if (!mout) throw Error("cannot write manifest in " + dir.string());
  mout << manifest.dump(2) << '\n';
}

LoadedStance load_stance_classifier(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw Error("cannot read manifest in " + dir.string());
  json manifest = json::parse(min);
  if (manifest.at("backend_id").get<std::string>() != "toy") {
    throw Error("unsupported stance backend: " +
                manifest.at("backend_id").get<std::string>());
  }
  std::ifstream win(dir / "weights.json");
  if (!win) throw Error("cannot read weights in " + dir.string());
  json blob = json::parse(win);

  LoadedStance loaded;
  loaded.classifier = std::make_unique<ToyStanceClassifier>();
  std::map<std::string, double> weights;
  for (const auto& [f, w] : blob.at("weights").items()) {
    weights[f] = w.get<double>();
  }
  loaded.classifier->set_weights(std::move(weights),
                                 blob.at("bias").get<double>());
  loaded.validation_f1 =
      manifest.at("validation_f1").get<std::vector<double>>();
  return loaded;
}

void save_ranked(const std::filesystem::path& file,
                 std::span<const RankedRecord> records) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  for (const RankedRecord& rec : records) {
    json row{{"argument_id", rec.argument_id},
             {"rank", rec.rank},
             {"conclusion", rec.conclusion},
             {"counter", rec.counter},
             {"score", rec.score}};
    out << row.dump() << '\n';
  }
}

std::vector<RankedRecord> load_ranked(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::vector<RankedRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      json row = json::parse(line);
      RankedRecord rec;
      rec.argument_id = row.at("argument_id").get<std::string>();
      rec.rank = row.at("rank").get<int>();
      rec.conclusion = row.at("conclusion").get<std::string>();
      rec.counter = row.at("counter").get<std::string>();
      rec.score = row.at("score").get<double>();
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return records;
}

}  // namespace contra::stance
