#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contra/corpus.hpp"
#include "contra/generation.hpp"

namespace contra::stance {

using corpus::ClaimPair;
using corpus::Stance;
using gen::CandidatePair;

// Predicted label and its probability (pr_label of a two-way softmax, so
// the probability of the other label is 1 - probability).
struct StanceVerdict {
  Stance label = Stance::pro;
  double probability = 0.5;
};

class StanceClassifier {
 public:
  virtual ~StanceClassifier() = default;
  virtual StanceVerdict classify(const std::string& claim,
                                 const std::string& statement) const = 0;
};

// Validates inputs, delegates to the classifier, and checks the verdict
// probability is a probability.
StanceVerdict classify_stance(const StanceClassifier& classifier,
                              const std::string& claim,
                              const std::string& statement);

// Exact-key fixture: every queried (claim, statement) pair must be present
// unless a default verdict is set.
class LookupStanceClassifier final : public StanceClassifier {
 public:
  void set(const std::string& claim, const std::string& statement,
           StanceVerdict verdict);
  void set_default(StanceVerdict verdict) { default_ = verdict; }
  StanceVerdict classify(const std::string& claim,
                         const std::string& statement) const override;

 private:
  std::map<std::pair<std::string, std::string>, StanceVerdict> table_;
  std::optional<StanceVerdict> default_;
};

// Fixture wrapping an arbitrary function, for property tests.
class FunctionStanceClassifier final : public StanceClassifier {
 public:
  using Fn = std::function<StanceVerdict(const std::string&, const std::string&)>;
  explicit FunctionStanceClassifier(Fn fn) : fn_(std::move(fn)) {}
  StanceVerdict classify(const std::string& claim,
                         const std::string& statement) const override {
    return fn_(claim, statement);
  }

 private:
  Fn fn_;
};

// Bag-of-tokens logistic regression over claim tokens (prefixed "c:") and
// statement tokens (prefixed "s:"). Weights start at zero, so an untrained
// classifier answers (con, 0.5) for everything.
class ToyStanceClassifier final : public StanceClassifier {
 public:
  StanceVerdict classify(const std::string& claim,
                         const std::string& statement) const override;

  // P(con) under the current weights; classify() derives from this.
  double probability_con(const std::string& claim,
                         const std::string& statement) const;

  void sgd_batch(std::span<const ClaimPair* const> batch, double learning_rate);

  const std::map<std::string, double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  void set_weights(std::map<std::string, double> weights, double bias);

 private:
  std::map<std::string, double> weights_;
  double bias_ = 0.0;
};

struct StanceTrainConfig {
  double learning_rate = 2e-5;
  int epochs = 3;
  int batch_size = 64;
  double validation_ratio = 0.2;  // fraction of debates held out
  std::uint64_t seed = 0;         // debate-split seed

  void validate() const;
};

struct TrainedStance {
  std::unique_ptr<ToyStanceClassifier> classifier;
  std::vector<double> validation_f1;  // one entry per epoch
};

// Splits the pairs by debate, then runs mini-batch SGD with an
// epoch-indexed deterministic shuffle, recording validation macro-F1 after
// each epoch. Requires both labels in the input.
TrainedStance train_stance(std::span<const ClaimPair> pairs,
                           const StanceTrainConfig& config);

// Macro-F1 over {pro, con}.
double evaluate_stance_classifier(const StanceClassifier& classifier,
                                  std::span<const ClaimPair> pairs);

// cont = +pr_con when the verdict is con, -pr_pro when it is pro.
double sentence_contrastiveness(const StanceVerdict& verdict);

using SentenceSplitter = std::function<std::vector<std::string>(const std::string&)>;

// Mean sentence_contrastiveness of the counter's sentences, each classified
// against the conclusion. Ranges over [-1, 1].
double counter_contrastiveness(const std::string& conclusion,
                               const std::string& counter,
                               const StanceClassifier& classifier,
                               const SentenceSplitter& splitter = nullptr);

struct RankedCandidates {
  std::vector<CandidatePair> items;  // scores filled, non-increasing

  const CandidatePair& selection() const { return items.front(); }
};

// Scores every candidate by counter_contrastiveness against its own
// conclusion (or shared_conclusion when given, as in two-decoder mode) and
// sorts descending; ties keep their original order.
RankedCandidates rank_candidates(std::span<const CandidatePair> candidates,
                                 const StanceClassifier& classifier,
                                 const std::optional<std::string>& shared_conclusion = std::nullopt,
                                 const SentenceSplitter& splitter = nullptr);

// Classifier artifact directory: weights.json plus manifest.json
// {backend_id, label_order, validation_f1}.
void save_stance_classifier(const std::filesystem::path& dir,
                            const ToyStanceClassifier& classifier,
                            std::span<const double> validation_f1);

struct LoadedStance {
  std::unique_ptr<ToyStanceClassifier> classifier;
  std::vector<double> validation_f1;
};

LoadedStance load_stance_classifier(const std::filesystem::path& dir);

struct RankedRecord {
  std::string argument_id;
  int rank = 1;  // 1-based within the argument
  std::string conclusion;
  std::string counter;
  double score = 0.0;
};

void save_ranked(const std::filesystem::path& file,
                 std::span<const RankedRecord> records);
std::vector<RankedRecord> load_ranked(const std::filesystem::path& file);

}  // namespace contra::stance
