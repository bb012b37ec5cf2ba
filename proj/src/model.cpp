#include "contra/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "contra/errors.hpp"
#include "contra/rng.hpp"

namespace contra::gen {

namespace {

// Finite stand-in for log(0); keeps decoder_step logits finite while making
// the softmax probability vanish exactly.
constexpr double kLogZero = -1e9;

double logsumexp(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  return mx + std::log(sum);
}

void validate_distribution(const std::vector<double>& probs, int vocab_size) {
  if (static_cast<int>(probs.size()) != vocab_size) {
    throw PreconditionError("distribution size does not match vocabulary");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw PreconditionError("negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw PreconditionError("distribution does not sum to 1");
  }
}

}  // namespace

std::string to_string(JointMode mode) {
  return mode == JointMode::oneseq ? "oneseq" : "twodec";
}

JointMode joint_mode_from_string(const std::string& s) {
  if (s == "oneseq") return JointMode::oneseq;
  if (s == "twodec") return JointMode::twodec;
  throw PreconditionError("unknown joint mode: " + s);
}

// ---- TabularModel ------------------------------------------------------

TabularModel::TabularModel(Vocab vocab, JointMode mode)
    : vocab_(std::move(vocab)), mode_(mode) {
  tables_.resize(static_cast<std::size_t>(num_decoders()));
  fallbacks_.resize(static_cast<std::size_t>(num_decoders()), uniform());
}

std::vector<double> TabularModel::point_mass(int token) const {
  std::vector<double> probs(static_cast<std::size_t>(vocab_.size()), 0.0);
  probs[static_cast<std::size_t>(token)] = 1.0;
  return probs;
}

std::vector<double> TabularModel::uniform() const {
  return std::vector<double>(static_cast<std::size_t>(vocab_.size()),
                             1.0 / vocab_.size());
}

void TabularModel::set_distribution(int decoder, std::vector<int> prefix,
                                    std::vector<double> probs) {
  validate_distribution(probs, vocab_.size());
  tables_.at(static_cast<std::size_t>(decoder))[std::move(prefix)] =
      std::move(probs);
}

void TabularModel::set_fallback(int decoder, std::vector<double> probs) {
  validate_distribution(probs, vocab_.size());
  fallbacks_.at(static_cast<std::size_t>(decoder)) = std::move(probs);
}

void TabularModel::set_sequence(int decoder, std::span<const int> tokens) {
  std::vector<int> prefix;
  for (int tok : tokens) {
    set_distribution(decoder, prefix, point_mass(tok));
    prefix.push_back(tok);
  }
  set_distribution(decoder, prefix, point_mass(vocab_.eos()));
}

std::vector<double> TabularModel::decoder_step(
    int decoder, std::span<const int> /*premise_ids*/,
    std::span<const int> prefix_ids) const {
  const auto& table = tables_.at(static_cast<std::size_t>(decoder));
  std::vector<int> key(prefix_ids.begin(), prefix_ids.end());
  auto it = table.find(key);
  const std::vector<double>& probs =
      it != table.end() ? it->second
                        : fallbacks_[static_cast<std::size_t>(decoder)];
  std::vector<double> logits(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : kLogZero;
  }
  return logits;
}

// ---- ToyNeuralModel ----------------------------------------------------

ToyNeuralModel::ToyNeuralModel(Vocab vocab, JointMode mode, int embed_dim,
                               std::uint64_t init_seed)
    : vocab_(std::move(vocab)), mode_(mode), dim_(embed_dim) {
  if (embed_dim < 1) throw PreconditionError("embed_dim must be >= 1");
  const std::size_t v = static_cast<std::size_t>(vocab_.size());
  const std::size_t d = static_cast<std::size_t>(dim_);
  std::mt19937_64 rng(init_seed);
  auto init = [&](std::size_t n) {
    std::vector<double> params(n);
    for (double& p : params) p = (uniform_unit(rng) - 0.5) * 0.2;
    return params;
  };
  encoder_ = init(v * d);
  decoders_.resize(static_cast<std::size_t>(num_decoders()));
  for (Decoder& dec : decoders_) {
    dec.prev_table = init(v * v);
    dec.enc_proj = init(v * d);
    dec.bias = init(v);
  }
}

std::vector<double> ToyNeuralModel::encode(
    std::span<const int> premise_ids) const {
  if (premise_ids.empty()) {
    throw PreconditionError("toy model: empty premise sequence");
  }
  const std::size_t d = static_cast<std::size_t>(dim_);
  std::vector<double> enc(d, 0.0);
  for (int id : premise_ids) {
    const double* row = &encoder_[static_cast<std::size_t>(id) * d];
    for (std::size_t j = 0; j < d; ++j) enc[j] += row[j];
  }
  for (std::size_t j = 0; j < d; ++j) {
    enc[j] /= static_cast<double>(premise_ids.size());
  }
  return enc;
}

std::vector<double> ToyNeuralModel::step_logits(
    const Decoder& dec, int prev, const std::vector<double>& enc) const {
  const std::size_t v = static_cast<std::size_t>(vocab_.size());
  const std::size_t d = static_cast<std::size_t>(dim_);
  std::vector<double> logits(v);
  const double* prev_row = &dec.prev_table[static_cast<std::size_t>(prev) * v];
  for (std::size_t t = 0; t < v; ++t) {
    double dot = 0.0;
    const double* proj = &dec.enc_proj[t * d];
    for (std::size_t j = 0; j < d; ++j) dot += proj[j] * enc[j];
    logits[t] = prev_row[t] + dot + dec.bias[t];
  }
  return logits;
}

std::vector<double> ToyNeuralModel::decoder_step(
    int decoder, std::span<const int> premise_ids,
    std::span<const int> prefix_ids) const {
  const Decoder& dec = decoders_.at(static_cast<std::size_t>(decoder));
  int prev = prefix_ids.empty() ? vocab_.bos() : prefix_ids.back();
  return step_logits(dec, prev, encode(premise_ids));
}

double ToyNeuralModel::sequence_loss(int decoder,
                                     std::span<const int> premise_ids,
                                     std::span<const int> target_ids) const {
  if (target_ids.empty()) {
    throw PreconditionError("toy model: empty target sequence");
  }
  const Decoder& dec = decoders_.at(static_cast<std::size_t>(decoder));
  std::vector<double> enc = encode(premise_ids);
  double loss = 0.0;
  for (std::size_t t = 0; t < target_ids.size(); ++t) {
    int prev = t == 0 ? vocab_.bos() : target_ids[t - 1];
    std::vector<double> logits = step_logits(dec, prev, enc);
    loss += logsumexp(logits) - logits[static_cast<std::size_t>(target_ids[t])];
  }
  return loss;
}

ToyGradients ToyNeuralModel::zero_gradients() const {
  ToyGradients grads;
  grads.encoder.assign(encoder_.size(), 0.0);
  grads.decoders.resize(decoders_.size());
  for (std::size_t d = 0; d < decoders_.size(); ++d) {
    grads.decoders[d].assign(decoders_[d].prev_table.size() +
                                 decoders_[d].enc_proj.size() +
                                 decoders_[d].bias.size(),
                             0.0);
  }
  return grads;
}

double ToyNeuralModel::accumulate_gradients(int decoder,
                                            std::span<const int> premise_ids,
                                            std::span<const int> target_ids,
                                            double weight,
                                            ToyGradients& grads) const {
  if (target_ids.empty()) {
    throw PreconditionError("toy model: empty target sequence");
  }
  const std::size_t v = static_cast<std::size_t>(vocab_.size());
  const std::size_t d = static_cast<std::size_t>(dim_);
  const Decoder& dec = decoders_.at(static_cast<std::size_t>(decoder));
  std::vector<double>& dgroup =
      grads.decoders.at(static_cast<std::size_t>(decoder));
  double* dprev = dgroup.data();
  double* dproj = dgroup.data() + v * v;
  double* dbias = dgroup.data() + v * v + v * d;

  std::vector<double> enc = encode(premise_ids);
  std::vector<double> denc(d, 0.0);
  double loss = 0.0;
  for (std::size_t t = 0; t < target_ids.size(); ++t) {
    int prev = t == 0 ? vocab_.bos() : target_ids[t - 1];
    std::vector<double> logits = step_logits(dec, prev, enc);
    double lse = logsumexp(logits);
    int gold = target_ids[t];
    loss += lse - logits[static_cast<std::size_t>(gold)];
    for (std::size_t tok = 0; tok < v; ++tok) {
      double g = std::exp(logits[tok] - lse);  // softmax probability
      if (static_cast<int>(tok) == gold) g -= 1.0;
      g *= weight;
      dprev[static_cast<std::size_t>(prev) * v + tok] += g;
      dbias[tok] += g;
      const double* proj = &dec.enc_proj[tok * d];
      double* dproj_row = dproj + tok * d;
      for (std::size_t j = 0; j < d; ++j) {
        dproj_row[j] += g * enc[j];
        denc[j] += g * proj[j];
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(premise_ids.size());
  for (int id : premise_ids) {
    double* drow = &grads.encoder[static_cast<std::size_t>(id) * d];
    for (std::size_t j = 0; j < d; ++j) drow[j] += denc[j] * inv_n;
  }
  return loss;
}

std::pair<double, double> ToyNeuralModel::accumulate_multitask_gradients(
    std::span<const int> premise_ids, std::span<const int> conclusion_target,
    std::span<const int> counter_target, double alpha_a, double alpha_b,
    ToyGradients& grads) const {
  if (mode_ != JointMode::twodec) {
    throw PreconditionError("multitask gradients require a twodec model");
  }
  double loss_a = accumulate_gradients(kConclusionDecoder, premise_ids,
                                       conclusion_target, alpha_a, grads);
  double loss_b = accumulate_gradients(kCounterDecoder, premise_ids,
                                       counter_target, alpha_b, grads);
  return {loss_a, loss_b};
}

void ToyNeuralModel::apply_update(const ToyGradients& grads,
                                  double learning_rate) {
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    encoder_[i] -= learning_rate * grads.encoder[i];
  }
  for (std::size_t d = 0; d < decoders_.size(); ++d) {
    Decoder& dec = decoders_[d];
    const std::vector<double>& g = grads.decoders[d];
    std::size_t off = 0;
    for (double& p : dec.prev_table) p -= learning_rate * g[off++];
    for (double& p : dec.enc_proj) p -= learning_rate * g[off++];
    for (double& p : dec.bias) p -= learning_rate * g[off++];
  }
}

void ToyNeuralModel::set_encoder_parameters(std::span<const double> params) {
  if (params.size() != encoder_.size()) {
    throw PreconditionError("encoder parameter size mismatch");
  }
  encoder_.assign(params.begin(), params.end());
}

std::vector<double> ToyNeuralModel::decoder_parameters(int decoder) const {
  const Decoder& dec = decoders_.at(static_cast<std::size_t>(decoder));
  std::vector<double> out;
  out.reserve(dec.prev_table.size() + dec.enc_proj.size() + dec.bias.size());
  out.insert(out.end(), dec.prev_table.begin(), dec.prev_table.end());
  out.insert(out.end(), dec.enc_proj.begin(), dec.enc_proj.end());
  out.insert(out.end(), dec.bias.begin(), dec.bias.end());
  return out;
}

void ToyNeuralModel::set_decoder_parameters(int decoder,
                                            std::span<const double> params) {
  Decoder& dec = decoders_.at(static_cast<std::size_t>(decoder));
  std::size_t expected =
      dec.prev_table.size() + dec.enc_proj.size() + dec.bias.size();
  if (params.size() != expected) {
    throw PreconditionError("decoder parameter size mismatch");
  }
  std::size_t off = 0;
  for (double& p : dec.prev_table) p = params[off++];
  for (double& p : dec.enc_proj) p = params[off++];
  for (double& p : dec.bias) p = params[off++];
}

std::size_t ToyNeuralModel::parameter_count() const {
  std::size_t n = encoder_.size();
  for (const Decoder& dec : decoders_) {
    n += dec.prev_table.size() + dec.enc_proj.size() + dec.bias.size();
  }
  return n;
}

std::vector<double> ToyNeuralModel::snapshot() const {
  std::vector<double> state = encoder_;
  for (int d = 0; d < num_decoders(); ++d) {
    std::vector<double> dp = decoder_parameters(d);
    state.insert(state.end(), dp.begin(), dp.end());
  }
  return state;
}

void ToyNeuralModel::restore(std::span<const double> state) {
  if (state.size() != parameter_count()) {
    throw PreconditionError("snapshot size mismatch");
  }
  std::size_t off = encoder_.size();
  set_encoder_parameters(state.subspan(0, off));
  for (int d = 0; d < num_decoders(); ++d) {
    std::size_t len = decoders_[static_cast<std::size_t>(d)].prev_table.size() +
                      decoders_[static_cast<std::size_t>(d)].enc_proj.size() +
                      decoders_[static_cast<std::size_t>(d)].bias.size();
    set_decoder_parameters(d, state.subspan(off, len));
    off += len;
  }
}

namespace {

constexpr char kParamsMagic[8] = {'c', 'o', 'n', 't', 'r', 'a', '0', '1'};

void write_doubles(std::ofstream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t n) {
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error("truncated parameter blob");
  return values;
}

}  // namespace

void ToyNeuralModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  vocab_.save(dir / "vocab.json");
  std::ofstream out(dir / "params.bin", std::ios::binary);
  if (!out) throw Error("cannot write parameter blob in " + dir.string());
  out.write(kParamsMagic, sizeof(kParamsMagic));
  std::uint32_t header[3] = {static_cast<std::uint32_t>(dim_),
                             static_cast<std::uint32_t>(vocab_.size()),
                             static_cast<std::uint32_t>(num_decoders())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  write_doubles(out, encoder_);
  for (int d = 0; d < num_decoders(); ++d) write_doubles(out, decoder_parameters(d));
}

std::unique_ptr<ToyNeuralModel> ToyNeuralModel::load(
    const std::filesystem::path& dir, JointMode mode) {
  Vocab vocab = Vocab::load(dir / "vocab.json");
  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw Error("cannot read parameter blob in " + dir.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0) {
    throw Error("bad parameter blob header in " + dir.string());
  }
  std::uint32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw Error("bad parameter blob header in " + dir.string());
  if (static_cast<int>(header[1]) != vocab.size()) {
    throw Error("parameter blob does not match vocabulary size");
  }
  if (static_cast<int>(header[2]) != decoder_count(mode)) {
    throw Error("parameter blob does not match joint mode");
  }
  auto model = std::make_unique<ToyNeuralModel>(std::move(vocab), mode,
                                                static_cast<int>(header[0]), 0);
  const std::size_t v = static_cast<std::size_t>(model->vocab_.size());
  const std::size_t d = static_cast<std::size_t>(model->dim_);
  model->set_encoder_parameters(read_doubles(in, v * d));
  for (int dec = 0; dec < model->num_decoders(); ++dec) {
    model->set_decoder_parameters(dec, read_doubles(in, v * v + v * d + v));
  }
  return model;
}

}  // namespace contra::gen
