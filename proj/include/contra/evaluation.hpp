#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contra/corpus.hpp"
#include "contra/stance.hpp"

namespace contra::eval {

using corpus::Argument;
using stance::StanceClassifier;

// Token-level similarity backend for the semantic metric.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual double similarity(const std::string& a, const std::string& b) const = 0;
};

// Exact match: 1 when the tokens are equal, 0 otherwise.
class OneHotEmbedder final : public TokenEmbedder {
 public:
  double similarity(const std::string& a, const std::string& b) const override {
    return a == b ? 1.0 : 0.0;
  }
};

// Cosine similarity over vectors loaded from a JSON object
// {token: [components...]}; unknown tokens score 0 against everything.
class WordVectorEmbedder final : public TokenEmbedder {
 public:
  static WordVectorEmbedder load(const std::filesystem::path& file);
  double similarity(const std::string& a, const std::string& b) const override;

 private:
  std::map<std::string, std::vector<double>> vectors_;
};

struct BleuScore {
  double value = 0.0;
  bool empty_candidate = false;
};

// Per-instance BLEU: n-grams up to 4 with clipped counts, add-one smoothing
// on orders 2-4, brevity penalty, max over references. An empty candidate
// scores 0 with the flag set instead of erroring.
BleuScore bleu(const std::string& candidate,
               std::span<const std::string> references);

// Greedy soft token alignment: precision is the mean over candidate tokens
// of the best similarity to any reference token (clamped to [0,1]), recall
// is symmetric, F1 their harmonic mean; max over references. An empty
// candidate scores 0.
double semantic_f1(const std::string& candidate,
                   std::span<const std::string> references,
                   const TokenEmbedder& embedder);

struct CounterConclusionPair {
  std::string counter;
  std::string gold_conclusion;
};

// Mean counter_contrastiveness of each counter against its gold conclusion.
double contrastiveness_metric(std::span<const CounterConclusionPair> pairs,
                              const StanceClassifier& classifier);

// Maps a conclusion to the target phrase being attacked; nullopt = failure.
using TargetExtractor =
    std::function<std::optional<std::string>(const std::string&)>;

// Signed stance of a text toward a target, in [-1,1]; positive = pro.
using StanceScorer = std::function<double(const std::string&, const std::string&)>;

// Default extractor: the conclusion's top concept.
TargetExtractor concept_target_extractor();

// Default scorer: the classifier on (target-as-claim, text), mapped to the
// signed predicted-label probability. The classifier must outlive the scorer.
StanceScorer classifier_stance_scorer(const StanceClassifier& classifier);

struct ConclusionCounter {
  std::string conclusion;
  std::string counter;
};

struct TargetStanceResult {
  double value = 0.0;       // mean over scored instances
  std::size_t n_scored = 0;
  std::size_t n_skipped = 0;  // extractor failures
};

// Per instance: extract target t from the conclusion and take
// |score(counter, t) - score(conclusion, t)|; instances whose extraction
// fails are skipped and tallied. Every instance skipped is an error.
TargetStanceResult target_stance_metric(
    std::span<const ConclusionCounter> instances,
    const TargetExtractor& extractor, const StanceScorer& scorer);

struct GeneratedInstance {
  std::string argument_id;
  std::string conclusion;
  std::string counter;
};

struct InstanceScore {
  std::string argument_id;
  double bleu = 0.0;
  double semantic_f1 = 0.0;
  double contrastiveness = 0.0;
  std::optional<double> stance_diff;  // nullopt when the extractor skipped it
};

struct EvalReport {
  double bleu = 0.0;
  double semantic_f1 = 0.0;
  double contrastiveness = 0.0;
  double stance_diff = 0.0;
  std::size_t n_instances = 0;
  std::size_t stance_skipped = 0;
};

struct EvalRun {
  EvalReport report;
  std::vector<InstanceScore> instances;  // sorted by argument id
};

// Joins generated instances to gold arguments by id (missing or duplicate
// ids error out), scores every instance against the argument's reference
// counters and gold conclusion, and aggregates in sorted-id order.
EvalRun evaluate_run(std::span<const GeneratedInstance> generated,
                     std::span<const Argument> gold,
                     const StanceClassifier& classifier,
                     const TokenEmbedder& embedder,
                     const TargetExtractor& extractor,
                     const StanceScorer& scorer);

enum class AnalysisDimension { length, implicitness };

std::string to_string(AnalysisDimension dimension);
AnalysisDimension dimension_from_string(const std::string& s);

struct QuintileBin {
  double low = 0.0;   // smallest dimension value in the bin
  double high = 0.0;  // largest dimension value in the bin
  std::size_t n = 0;
  double semantic_f1 = 0.0;      // bin mean
  double contrastiveness = 0.0;  // bin mean
};

struct BinAnalysis {
  AnalysisDimension dimension = AnalysisDimension::length;
  std::array<QuintileBin, 5> bins;
};

// Sorts instances by (dimension value, argument id), cuts quintiles, and
// reports per-bin metric means. Length reads the argument's premise token
// count, implicitness its stored implicitness score.
BinAnalysis analysis_report(std::span<const InstanceScore> instances,
                            std::span<const Argument> arguments,
                            AnalysisDimension dimension);

void save_report(const std::filesystem::path& file, const EvalReport& report);
EvalReport load_report(const std::filesystem::path& file);

void save_instance_scores(const std::filesystem::path& file,
                          std::span<const InstanceScore> instances);
std::vector<InstanceScore> load_instance_scores(const std::filesystem::path& file);

// CSV columns: dimension,bin_index,bin_low,bin_high,n,semantic_f1,contrastiveness
void save_bin_analysis_csv(const std::filesystem::path& file,
                           const BinAnalysis& analysis);
void save_bin_analysis_json(const std::filesystem::path& file,
                            const BinAnalysis& analysis);

}  // namespace contra::eval
