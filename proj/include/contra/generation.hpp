#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contra/concepts.hpp"
#include "contra/corpus.hpp"
#include "contra/model.hpp"

namespace contra::gen {

using concepts::Concept;
using corpus::Argument;
using corpus::CounterCandidate;
using corpus::QualityScorer;

// Conclusion and counter token sequences plus the single marker-delimited
// sequence used by the one-seq variant.
struct JointTarget {
  std::vector<std::string> conclusion_tokens;
  std::vector<std::string> counter_tokens;
  std::vector<std::string> joined;
};

struct TrainingExample {
  std::vector<std::string> premise_tokens;
  JointTarget target;
};

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 3;
  int batch_size = 8;
  double alpha_a = 0.7;  // conclusion-decoder weight (twodec only)
  double alpha_b = 0.3;  // counter-decoder weight (twodec only)

  void validate() const;
};

struct DecodingConfig {
  double nucleus_p = 0.95;
  int top_k = 50;
  int n_candidates = 1;
  int n_concepts = 5;
  int max_conclusion_len = 64;
  int max_counter_len = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CandidatePair {
  std::string conclusion;
  std::string counter;
  std::optional<std::string> prompt_concept;
  std::optional<double> score;
};

// Builds the joined target [<conclusion>] c [<counter>] x. Both texts must
// tokenize to something non-empty and must not contain the marker literals.
JointTarget format_joint_target(const std::string& conclusion,
                                const std::string& counter);

// Inverse of format_joint_target: splits a decoded token sequence at the
// first counter marker. Throws ParseError when the markers are missing or
// out of order (callers may resample).
std::pair<std::string, std::string> parse_joint_output(
    std::span<const std::string> tokens);

struct LmLoss {
  double total;      // -sum log p(target_i | prefix)
  double per_token;  // total / length, for logging
};

// Teacher-forced negative log-likelihood of target_ids given one logit
// vector per position.
LmLoss lm_loss(const std::vector<std::vector<double>>& step_logits,
               std::span<const int> target_ids);

// Weighted sum alpha_a * loss_a + alpha_b * loss_b.
double multitask_loss(double loss_a, double loss_b, double alpha_a,
                      double alpha_b);

// Teacher-forced losses of the two decoders of a twodec model against their
// own targets; the decoders never see each other's output.
std::pair<double, double> twodec_forward(const Seq2SeqModel& model,
                                         std::span<const int> premise_ids,
                                         std::span<const int> conclusion_target,
                                         std::span<const int> counter_target);

// Numerically stable softmax.
std::vector<double> softmax(const std::vector<double>& logits);

// Top-k + nucleus truncation: keeps the k most probable tokens, then the
// smallest descending-probability prefix with cumulative mass >= p (all of
// top-k when their total mass is below p). Ties broken by lower index.
// Returns indices in descending-probability order.
std::vector<int> nucleus_filter(const std::vector<double>& probabilities,
                                double p, int k);

// While position indexes into prompt_tokens, masks every logit except the
// prompt token's to the minimal representable value; past the prompt the
// logits pass through unchanged.
std::vector<double> prompt_constrained_step(std::vector<double> logits,
                                            std::span<const int> prompt_tokens,
                                            std::size_t position);

// Draws one token from probabilities restricted (and renormalized) to the
// allowed set, walking the set in its given order.
int sample_token(const std::vector<double>& probabilities,
                 std::span<const int> allowed, std::mt19937_64& rng);

// One decoded sequence per candidate slot: slots with a concept are prompted
// with [<conclusion>] + concept tokens, surplus slots fall back to
// unprompted sampling, and unparseable outputs are resampled up to 3 times
// and then dropped. Throws GenerationError when nothing parseable survives.
std::vector<CandidatePair> generate_candidates_oneseq(
    const Seq2SeqModel& model, std::span<const std::string> premise_tokens,
    std::span<const Concept> concepts, const DecodingConfig& config);

struct TwodecOutput {
  std::string conclusion;               // greedy decode
  std::vector<std::string> counters;    // nucleus samples
};

TwodecOutput generate_candidates_twodec(const Seq2SeqModel& model,
                                        std::span<const std::string> premise_tokens,
                                        const DecodingConfig& config);

struct EpochLosses {
  double train;
  double validation;
};

struct TrainResult {
  std::vector<EpochLosses> epochs;
  int best_epoch = -1;  // -1 when no epoch ran
};

// Mini-batch SGD with teacher forcing. Shuffles per epoch with a fixed
// epoch-indexed seed, evaluates validation loss at each epoch end, and
// restores the parameter state of the best validation epoch before
// returning. epochs == 0 leaves the model untouched.
TrainResult train(ToyNeuralModel& model,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set,
                  const TrainConfig& config);

struct SequenceLimits {
  int max_premise_len = 256;
  int max_conclusion_len = 64;
  int max_counter_len = 128;
};

// Turns corpus records into training examples: picks each argument's best
// counter, truncates to the limits, and skips records without a usable
// conclusion, premise text, or counter.
std::vector<TrainingExample> build_training_examples(
    std::span<const Argument> records, const SequenceLimits& limits,
    const QualityScorer& scorer);

// Builds a vocabulary over every premise and joined-target sequence.
Vocab build_generation_vocab(std::span<const TrainingExample> examples);

// Checkpoint directory: params.bin + vocab.json (backend-defined) plus
// manifest.json {backend, mode, vocabulary_hash, train_config, epoch_losses}.
void save_checkpoint(const std::filesystem::path& dir,
                     const ToyNeuralModel& model, const TrainConfig& config,
                     const TrainResult& result);

struct Checkpoint {
  std::unique_ptr<ToyNeuralModel> model;
  TrainConfig train_config;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct CandidateRecord {
  std::string argument_id;
  std::string conclusion;
  std::string counter;
  std::optional<std::string> prompt_concept;
  std::uint64_t seed = 0;
};

void save_candidates(const std::filesystem::path& file,
                     std::span<const CandidateRecord> records);
std::vector<CandidateRecord> load_candidates(const std::filesystem::path& file);

}  // namespace contra::gen
