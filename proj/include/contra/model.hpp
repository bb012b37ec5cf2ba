#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "contra/vocab.hpp"

namespace contra::gen {

// Joint architecture variant: one shared decoder emitting the marker-joined
// sequence, or one shared encoder with separate conclusion/counter decoders.
enum class JointMode { oneseq, twodec };

std::string to_string(JointMode mode);
JointMode joint_mode_from_string(const std::string& s);
inline int decoder_count(JointMode mode) {
  return mode == JointMode::oneseq ? 1 : 2;
}

// Decoder indices for twodec models.
inline constexpr int kConclusionDecoder = 0;
inline constexpr int kCounterDecoder = 1;

// Sequence-to-sequence backend. decoder_step returns one finite logit per
// vocabulary token for the next position given the premises and the decoded
// prefix. Implementations are pure given fixed parameters, so a frozen model
// may be shared across threads.
class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;

  virtual const Vocab& vocab() const = 0;
  virtual JointMode mode() const = 0;
  int num_decoders() const { return decoder_count(mode()); }

  virtual std::vector<double> decoder_step(int decoder,
                                           std::span<const int> premise_ids,
                                           std::span<const int> prefix_ids) const = 0;
};

// ---- Tabular test backend ---------------------------------------------

// Explicit per-prefix next-token distributions. Deterministic by
// construction; used to pin decoding behavior in tests. Premises are
// ignored. Unlisted prefixes fall back to a default distribution
// (uniform unless overridden).
class TabularModel final : public Seq2SeqModel {
 public:
  TabularModel(Vocab vocab, JointMode mode);

  const Vocab& vocab() const override { return vocab_; }
  JointMode mode() const override { return mode_; }
  std::vector<double> decoder_step(int decoder,
                                   std::span<const int> premise_ids,
                                   std::span<const int> prefix_ids) const override;

  // probs must be non-negative and sum to 1 within 1e-6.
  void set_distribution(int decoder, std::vector<int> prefix,
                        std::vector<double> probs);
  void set_fallback(int decoder, std::vector<double> probs);

  // Registers a point-mass chain so the decoder emits exactly these tokens
  // and then <eos>.
  void set_sequence(int decoder, std::span<const int> tokens);

  // Convenience: point mass on one token.
  std::vector<double> point_mass(int token) const;
  std::vector<double> uniform() const;

 private:
  Vocab vocab_;
  JointMode mode_;
  std::vector<std::map<std::vector<int>, std::vector<double>>> tables_;
  std::vector<std::vector<double>> fallbacks_;
};

// ---- Trainable toy backend --------------------------------------------

// Per-group parameter gradients of the toy model. Layout matches
// encoder_parameters() / decoder_parameters().
struct ToyGradients {
  std::vector<double> encoder;
  std::vector<std::vector<double>> decoders;
};

// Small differentiable sequence model with a shared mean-embedding encoder
// and one log-bilinear decoder per task:
//
//   enc       = mean over premise tokens of E[x]
//   logits[v] = P[prev][v] + Q[v] . enc + b[v]
//
// E is the encoder parameter group; (P, Q, b) belong to each decoder.
// Gradients are computed analytically, so decoder losses depend on the
// other decoder's parameters not at all and on the encoder linearly.
class ToyNeuralModel final : public Seq2SeqModel {
 public:
  ToyNeuralModel(Vocab vocab, JointMode mode, int embed_dim,
                 std::uint64_t init_seed);

  const Vocab& vocab() const override { return vocab_; }
  JointMode mode() const override { return mode_; }
  int embed_dim() const { return dim_; }
  std::vector<double> decoder_step(int decoder,
                                   std::span<const int> premise_ids,
                                   std::span<const int> prefix_ids) const override;

  // Teacher-forced negative log-likelihood (sum over positions) of target
  // under the given decoder. target must be non-empty.
  double sequence_loss(int decoder, std::span<const int> premise_ids,
                       std::span<const int> target_ids) const;

  ToyGradients zero_gradients() const;

  // Adds weight * dLoss/dParams of one decoder's sequence loss into grads;
  // returns the unweighted loss.
  double accumulate_gradients(int decoder, std::span<const int> premise_ids,
                              std::span<const int> target_ids, double weight,
                              ToyGradients& grads) const;

  // Single combined backward over both decoders (twodec models only).
  // Returns (loss_a, loss_b); grads receives the gradient of
  // alpha_a * loss_a + alpha_b * loss_b.
  std::pair<double, double> accumulate_multitask_gradients(
      std::span<const int> premise_ids, std::span<const int> conclusion_target,
      std::span<const int> counter_target, double alpha_a, double alpha_b,
      ToyGradients& grads) const;

  // SGD step: p -= learning_rate * g.
  void apply_update(const ToyGradients& grads, double learning_rate);

  std::vector<double> encoder_parameters() const { return encoder_; }
  void set_encoder_parameters(std::span<const double> params);
  std::vector<double> decoder_parameters(int decoder) const;
  void set_decoder_parameters(int decoder, std::span<const double> params);
  std::size_t parameter_count() const;

  // Flat snapshot of every parameter group, for checkpoint selection.
  std::vector<double> snapshot() const;
  void restore(std::span<const double> state);

  // Parameter blob + vocabulary; the manifest is written by the caller.
  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<ToyNeuralModel> load(const std::filesystem::path& dir,
                                              JointMode mode);

 private:
  struct Decoder {
    std::vector<double> prev_table;  // V x V, row = previous token
    std::vector<double> enc_proj;    // V x dim
    std::vector<double> bias;        // V
  };

  std::vector<double> encode(std::span<const int> premise_ids) const;
  std::vector<double> step_logits(const Decoder& dec, int prev,
                                  const std::vector<double>& enc) const;

  Vocab vocab_;
  JointMode mode_;
  int dim_;
  std::vector<double> encoder_;  // V x dim embedding table
  std::vector<Decoder> decoders_;
};

}  // namespace contra::gen
