#include "contra/generation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "contra/errors.hpp"
#include "contra/rng.hpp"
#include "contra/text.hpp"

namespace contra::gen {

using text::join_tokens;
using text::tokenize;
using text::trim;

namespace {

using nlohmann::json;

// Base for the epoch-indexed shuffle streams; training is reproducible
// without a seed knob because the schedule is a pure function of the epoch.
constexpr std::uint64_t kShuffleBase = 0x636f6e7472612121ull;

constexpr int kResampleLimit = 3;  // extra attempts per candidate slot

bool has_marker(std::span<const std::string> tokens) {
  return std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) {
    return t == kConclusionMarker || t == kCounterMarker;
  });
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw PreconditionError("learning_rate must be > 0");
  if (epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (alpha_a <= 0.0 || alpha_a > 1.0 || alpha_b <= 0.0 || alpha_b > 1.0) {
    throw PreconditionError("alpha weights must lie in (0,1]");
  }
}

void DecodingConfig::validate() const {
  if (nucleus_p <= 0.0 || nucleus_p > 1.0) {
    throw PreconditionError("nucleus_p must lie in (0,1]");
  }
  if (top_k < 1) throw PreconditionError("top_k must be >= 1");
  if (n_candidates < 1) throw PreconditionError("n_candidates must be >= 1");
  if (n_concepts < 0) throw PreconditionError("n_concepts must be >= 0");
  if (max_conclusion_len < 1 || max_counter_len < 1) {
    throw PreconditionError("length maxima must be >= 1");
  }
}

JointTarget format_joint_target(const std::string& conclusion,
                                const std::string& counter) {
  JointTarget target;
  target.conclusion_tokens = tokenize(conclusion);
  target.counter_tokens = tokenize(counter);
  if (target.conclusion_tokens.empty() || target.counter_tokens.empty()) {
    throw PreconditionError("conclusion and counter must be non-empty");
  }
  if (has_marker(target.conclusion_tokens) || has_marker(target.counter_tokens)) {
    throw PreconditionError("marker literal inside input text");
  }
  target.joined.reserve(target.conclusion_tokens.size() +
                        target.counter_tokens.size() + 2);
  target.joined.push_back(kConclusionMarker);
  target.joined.insert(target.joined.end(), target.conclusion_tokens.begin(),
                       target.conclusion_tokens.end());
  target.joined.push_back(kCounterMarker);
  target.joined.insert(target.joined.end(), target.counter_tokens.begin(),
                       target.counter_tokens.end());
  return target;
}

std::pair<std::string, std::string> parse_joint_output(
    std::span<const std::string> tokens) {
  auto conclusion_it =
      std::find(tokens.begin(), tokens.end(), kConclusionMarker);
  if (conclusion_it == tokens.end()) {
    throw ParseError("missing conclusion marker");
  }
  auto counter_it = std::find(tokens.begin(), tokens.end(), kCounterMarker);
  if (counter_it == tokens.end()) {
    throw ParseError("missing counter marker");
  }
  if (counter_it < conclusion_it) {
    throw ParseError("counter marker precedes conclusion marker");
  }
  std::vector<std::string> conclusion(conclusion_it + 1, counter_it);
  std::vector<std::string> counter(counter_it + 1, tokens.end());
  return {join_tokens(conclusion), join_tokens(counter)};
}

LmLoss lm_loss(const std::vector<std::vector<double>>& step_logits,
               std::span<const int> target_ids) {
  if (step_logits.size() != target_ids.size()) {
    throw PreconditionError("one logit vector per target position required");
  }
  if (target_ids.empty()) {
    throw PreconditionError("empty target sequence");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < target_ids.size(); ++t) {
    const std::vector<double>& logits = step_logits[t];
    int gold = target_ids[t];
    if (gold < 0 || gold >= static_cast<int>(logits.size())) {
      throw PreconditionError("target token outside the logit vector");
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    total += mx + std::log(sum) - logits[static_cast<std::size_t>(gold)];
  }
  return {total, total / static_cast<double>(target_ids.size())};
}

double multitask_loss(double loss_a, double loss_b, double alpha_a,
                      double alpha_b) {
  if (loss_a < 0.0 || loss_b < 0.0) {
    throw PreconditionError("losses must be non-negative");
  }
  if (alpha_a < 0.0 || alpha_b < 0.0) {
    throw PreconditionError("alpha weights must be non-negative");
  }
  return alpha_a * loss_a + alpha_b * loss_b;
}

namespace {

double forced_loss(const Seq2SeqModel& model, int decoder,
                   std::span<const int> premise_ids,
                   std::span<const int> target_ids) {
  if (target_ids.empty()) {
    throw PreconditionError("empty target sequence");
  }
  std::vector<std::vector<double>> step_logits;
  step_logits.reserve(target_ids.size());
  for (std::size_t t = 0; t < target_ids.size(); ++t) {
    step_logits.push_back(
        model.decoder_step(decoder, premise_ids, target_ids.subspan(0, t)));
  }
  return lm_loss(step_logits, target_ids).total;
}

}  // namespace

std::pair<double, double> twodec_forward(const Seq2SeqModel& model,
                                         std::span<const int> premise_ids,
                                         std::span<const int> conclusion_target,
                                         std::span<const int> counter_target) {
  if (model.mode() != JointMode::twodec) {
    throw PreconditionError("twodec_forward requires a two-decoder model");
  }
  double loss_a =
      forced_loss(model, kConclusionDecoder, premise_ids, conclusion_target);
  double loss_b =
      forced_loss(model, kCounterDecoder, premise_ids, counter_target);
  return {loss_a, loss_b};
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw PreconditionError("empty logit vector");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

std::vector<int> nucleus_filter(const std::vector<double>& probabilities,
                                double p, int k) {
  if (p <= 0.0) throw PreconditionError("p must be > 0");
  if (k < 1) throw PreconditionError("k must be >= 1");
  double sum = 0.0;
  for (double q : probabilities) {
    if (q < 0.0) throw PreconditionError("negative probability");
    sum += q;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw PreconditionError("probabilities must sum to 1");
  }
  std::vector<int> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probabilities[static_cast<std::size_t>(a)] >
           probabilities[static_cast<std::size_t>(b)];
  });
  if (static_cast<int>(order.size()) > k) {
    order.resize(static_cast<std::size_t>(k));
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    mass += probabilities[static_cast<std::size_t>(order[i])];
    if (mass >= p) {
      order.resize(i + 1);
      break;
    }
  }
  return order;  // top-k mass < p: keep all of top-k
}

std::vector<double> prompt_constrained_step(std::vector<double> logits,
                                            std::span<const int> prompt_tokens,
                                            std::size_t position) {
  if (position >= prompt_tokens.size()) return logits;
  int keep = prompt_tokens[position];
  if (keep < 0 || keep >= static_cast<int>(logits.size())) {
    throw PreconditionError("prompt token outside the logit vector");
  }
  double kept = logits[static_cast<std::size_t>(keep)];
  std::fill(logits.begin(), logits.end(), std::numeric_limits<double>::lowest());
  logits[static_cast<std::size_t>(keep)] = kept;
  return logits;
}

int sample_token(const std::vector<double>& probabilities,
                 std::span<const int> allowed, std::mt19937_64& rng) {
  if (allowed.empty()) throw PreconditionError("empty allowed set");
  double total = 0.0;
  for (int idx : allowed) total += probabilities[static_cast<std::size_t>(idx)];
  if (total <= 0.0) return allowed[0];
  double u = uniform_unit(rng) * total;
  double cum = 0.0;
  for (int idx : allowed) {
    cum += probabilities[static_cast<std::size_t>(idx)];
    if (u < cum) return idx;
  }
  return allowed.back();
}

namespace {

// Decodes one sequence. Prompt positions are forced; afterwards either the
// argmax token (greedy) or a nucleus sample is taken. Stops at <eos> or the
// length cap; the prompt itself never contains <eos>.
std::vector<int> decode_sequence(const Seq2SeqModel& model, int decoder,
                                 std::span<const int> premise_ids,
                                 std::span<const int> prompt_ids, int max_len,
                                 const DecodingConfig& config, bool greedy,
                                 std::mt19937_64& rng) {
  std::vector<int> out;
  const int eos = model.vocab().eos();
  while (static_cast<int>(out.size()) < max_len) {
    std::vector<double> logits = model.decoder_step(decoder, premise_ids, out);
    logits = prompt_constrained_step(std::move(logits), prompt_ids, out.size());
    int token;
    if (out.size() < prompt_ids.size()) {
      token = prompt_ids[out.size()];
    } else if (greedy) {
      token = static_cast<int>(std::distance(
          logits.begin(), std::max_element(logits.begin(), logits.end())));
    } else {
      std::vector<double> probs = softmax(logits);
      std::vector<int> allowed =
          nucleus_filter(probs, config.nucleus_p, config.top_k);
      token = sample_token(probs, allowed, rng);
    }
    if (token == eos) break;
    out.push_back(token);
  }
  return out;
}

}  // namespace

std::vector<CandidatePair> generate_candidates_oneseq(
    const Seq2SeqModel& model, std::span<const std::string> premise_tokens,
    std::span<const Concept> concepts, const DecodingConfig& config) {
  config.validate();
  if (model.mode() != JointMode::oneseq) {
    throw PreconditionError("generate_candidates_oneseq requires a one-seq model");
  }
  if (premise_tokens.empty()) {
    throw PreconditionError("empty premise sequence");
  }
  const Vocab& vocab = model.vocab();
  std::vector<int> premise_ids = vocab.encode(premise_tokens);
  const int max_len = config.max_conclusion_len + config.max_counter_len + 2;
  const std::size_t n_prompted =
      std::min(concepts.size(), static_cast<std::size_t>(config.n_candidates));

  std::vector<CandidatePair> out;
  for (int slot = 0; slot < config.n_candidates; ++slot) {
    std::vector<int> prompt_ids;
    std::optional<std::string> prompt_concept;
    if (static_cast<std::size_t>(slot) < n_prompted) {
      const Concept& seed_concept = concepts[static_cast<std::size_t>(slot)];
      std::vector<std::string> prompt_tokens{std::string(kConclusionMarker)};
      for (std::string& tok : tokenize(seed_concept.phrase)) {
        prompt_tokens.push_back(std::move(tok));
      }
      prompt_ids = vocab.encode(prompt_tokens);
      prompt_concept = seed_concept.phrase;
    }
    for (int attempt = 0; attempt <= kResampleLimit; ++attempt) {
      std::mt19937_64 rng(derive_seed(
          config.seed, static_cast<std::uint64_t>(slot),
          static_cast<std::uint64_t>(attempt)));
      std::vector<int> ids = decode_sequence(
          model, 0, premise_ids, prompt_ids, max_len, config, false, rng);
      std::vector<std::string> tokens = vocab.decode(ids);
      try {
        auto [conclusion, counter] = parse_joint_output(tokens);
        if (conclusion.empty() || counter.empty()) continue;
        CandidatePair pair;
        pair.conclusion = std::move(conclusion);
        pair.counter = std::move(counter);
        pair.prompt_concept = prompt_concept;
        out.push_back(std::move(pair));
        break;
      } catch (const ParseError&) {
        // fall through to the next attempt
      }
    }
  }
  if (out.empty()) {
    throw GenerationError("no parseable candidate after retries");
  }
  return out;
}

TwodecOutput generate_candidates_twodec(const Seq2SeqModel& model,
                                        std::span<const std::string> premise_tokens,
                                        const DecodingConfig& config) {
  config.validate();
  if (model.mode() != JointMode::twodec) {
    throw PreconditionError("generate_candidates_twodec requires a twodec model");
  }
  if (premise_tokens.empty()) {
    throw PreconditionError("empty premise sequence");
  }
  const Vocab& vocab = model.vocab();
  std::vector<int> premise_ids = vocab.encode(premise_tokens);

  std::mt19937_64 unused(0);
  std::vector<int> conclusion_ids =
      decode_sequence(model, kConclusionDecoder, premise_ids, {},
                      config.max_conclusion_len, config, true, unused);
  if (conclusion_ids.empty()) {
    throw GenerationError("empty conclusion decode");
  }
  TwodecOutput out;
  out.conclusion = join_tokens(vocab.decode(conclusion_ids));

  for (int slot = 0; slot < config.n_candidates; ++slot) {
    for (int attempt = 0; attempt <= kResampleLimit; ++attempt) {
      std::mt19937_64 rng(derive_seed(
          config.seed, static_cast<std::uint64_t>(slot),
          static_cast<std::uint64_t>(attempt)));
      std::vector<int> ids =
          decode_sequence(model, kCounterDecoder, premise_ids, {},
                          config.max_counter_len, config, false, rng);
      if (!ids.empty()) {
        out.counters.push_back(join_tokens(vocab.decode(ids)));
        break;
      }
    }
  }
  if (out.counters.empty()) {
    throw GenerationError("no non-empty counter after retries");
  }
  return out;
}

namespace {

struct EncodedExample {
  std::vector<int> premises;
  std::vector<int> joined;      // oneseq target
  std::vector<int> conclusion;  // twodec targets
  std::vector<int> counter;
};

std::vector<int> encode_with_eos(const Vocab& vocab,
                                 std::span<const std::string> tokens) {
  std::vector<int> ids = vocab.encode(tokens);
  ids.push_back(vocab.eos());
  return ids;
}

std::vector<EncodedExample> encode_examples(
    const Vocab& vocab, std::span<const TrainingExample> examples,
    JointMode mode) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const TrainingExample& ex : examples) {
    EncodedExample enc;
    enc.premises = vocab.encode(ex.premise_tokens);
    if (mode == JointMode::oneseq) {
      enc.joined = encode_with_eos(vocab, ex.target.joined);
    } else {
      enc.conclusion = encode_with_eos(vocab, ex.target.conclusion_tokens);
      enc.counter = encode_with_eos(vocab, ex.target.counter_tokens);
    }
    out.push_back(std::move(enc));
  }
  return out;
}

double example_loss(const ToyNeuralModel& model, const EncodedExample& ex,
                    const TrainConfig& config) {
  if (model.mode() == JointMode::oneseq) {
    return model.sequence_loss(0, ex.premises, ex.joined);
  }
  double loss_a =
      model.sequence_loss(kConclusionDecoder, ex.premises, ex.conclusion);
  double loss_b = model.sequence_loss(kCounterDecoder, ex.premises, ex.counter);
  return multitask_loss(loss_a, loss_b, config.alpha_a, config.alpha_b);
}

double mean_loss(const ToyNeuralModel& model,
                 const std::vector<EncodedExample>& examples,
                 const TrainConfig& config) {
  double total = 0.0;
  for (const EncodedExample& ex : examples) {
    total += example_loss(model, ex, config);
  }
  return total / static_cast<double>(examples.size());
}

}  // namespace

TrainResult train(ToyNeuralModel& model,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw PreconditionError("empty training split");
  TrainResult result;
  if (config.epochs == 0) return result;
  if (validation_set.empty()) throw PreconditionError("empty validation split");

  const JointMode mode = model.mode();
  std::vector<EncodedExample> train_enc =
      encode_examples(model.vocab(), train_set, mode);
  std::vector<EncodedExample> val_enc =
      encode_examples(model.vocab(), validation_set, mode);

  std::vector<std::size_t> order(train_enc.size());
  std::iota(order.begin(), order.end(), 0);

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_state;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(
        derive_seed(kShuffleBase, static_cast<std::uint64_t>(epoch)));
    deterministic_shuffle(order, shuffle_rng);

    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      ToyGradients grads = model.zero_gradients();
      for (std::size_t i = start; i < end; ++i) {
        const EncodedExample& ex = train_enc[order[i]];
        if (mode == JointMode::oneseq) {
          epoch_total +=
              model.accumulate_gradients(0, ex.premises, ex.joined, 1.0, grads);
        } else {
          auto [loss_a, loss_b] = model.accumulate_multitask_gradients(
              ex.premises, ex.conclusion, ex.counter, config.alpha_a,
              config.alpha_b, grads);
          epoch_total +=
              multitask_loss(loss_a, loss_b, config.alpha_a, config.alpha_b);
        }
      }
      model.apply_update(grads,
                         config.learning_rate / static_cast<double>(end - start));
    }

    EpochLosses losses;
    losses.train = epoch_total / static_cast<double>(train_enc.size());
    losses.validation = mean_loss(model, val_enc, config);
    result.epochs.push_back(losses);
    if (losses.validation < best_val) {
      best_val = losses.validation;
      best_state = model.snapshot();
      result.best_epoch = epoch;
    }
  }
  model.restore(best_state);
  return result;
}

std::vector<TrainingExample> build_training_examples(
    std::span<const Argument> records, const SequenceLimits& limits,
    const QualityScorer& scorer) {
  std::vector<TrainingExample> out;
  for (const Argument& arg : records) {
    if (arg.conclusion.empty() || arg.counters.empty()) continue;
    std::vector<std::string> premise_tokens = tokenize(arg.premises);
    if (premise_tokens.empty()) continue;
    if (static_cast<int>(premise_tokens.size()) > limits.max_premise_len) {
      premise_tokens.resize(static_cast<std::size_t>(limits.max_premise_len));
    }
    std::vector<std::string> conclusion_tokens = tokenize(arg.conclusion);
    if (static_cast<int>(conclusion_tokens.size()) > limits.max_conclusion_len) {
      conclusion_tokens.resize(
          static_cast<std::size_t>(limits.max_conclusion_len));
    }
    CounterCandidate best = select_best_counter(arg.counters, scorer);
    std::vector<std::string> counter_tokens = tokenize(best.text);
    if (static_cast<int>(counter_tokens.size()) > limits.max_counter_len) {
      counter_tokens.resize(static_cast<std::size_t>(limits.max_counter_len));
    }
    try {
      TrainingExample ex;
      ex.target = format_joint_target(join_tokens(conclusion_tokens),
                                      join_tokens(counter_tokens));
      ex.premise_tokens = std::move(premise_tokens);
      out.push_back(std::move(ex));
    } catch (const PreconditionError&) {
      // records containing marker literals or empty fields are unusable
    }
  }
  return out;
}

Vocab build_generation_vocab(std::span<const TrainingExample> examples) {
  std::vector<std::vector<std::string>> sequences;
  sequences.reserve(examples.size() * 2);
  for (const TrainingExample& ex : examples) {
    sequences.push_back(ex.premise_tokens);
    sequences.push_back(ex.target.joined);
  }
  return Vocab::build(sequences);
}

namespace {

json config_to_json(const TrainConfig& config) {
  return json{{"learning_rate", config.learning_rate},
              {"epochs", config.epochs},
              {"batch_size", config.batch_size},
              {"alpha_a", config.alpha_a},
              {"alpha_b", config.alpha_b}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig config;
  config.learning_rate = j.at("learning_rate").get<double>();
  config.epochs = j.at("epochs").get<int>();
  config.batch_size = j.at("batch_size").get<int>();
  config.alpha_a = j.at("alpha_a").get<double>();
  config.alpha_b = j.at("alpha_b").get<double>();
  return config;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir,
                     const ToyNeuralModel& model, const TrainConfig& config,
                     const TrainResult& result) {
  model.save(dir);
  json losses = json::object();
  losses["train"] = json::array();
  losses["validation"] = json::array();
  for (const EpochLosses& e : result.epochs) {
    losses["train"].push_back(e.train);
    losses["validation"].push_back(e.validation);
  }
  json manifest{{"backend", "toy"},
                {"mode", to_string(model.mode())},
                {"vocabulary_hash", model.vocab().hash()},
                {"train_config", config_to_json(config)},
                {"epoch_losses", losses},
                {"best_epoch", result.best_epoch}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("cannot read manifest in " + dir.string());
  json manifest = json::parse(in, nullptr, true);
  if (manifest.at("backend").get<std::string>() != "toy") {
    throw Error("unsupported checkpoint backend: " +
                manifest.at("backend").get<std::string>());
  }
  JointMode mode =
      joint_mode_from_string(manifest.at("mode").get<std::string>());
  Checkpoint ckpt;
  ckpt.model = ToyNeuralModel::load(dir, mode);
  if (ckpt.model->vocab().hash() !=
      manifest.at("vocabulary_hash").get<std::string>()) {
    throw Error("vocabulary hash mismatch in " + dir.string());
  }
  ckpt.train_config = config_from_json(manifest.at("train_config"));
  return ckpt;
}

void save_candidates(const std::filesystem::path& file,
                     std::span<const CandidateRecord> records) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  for (const CandidateRecord& rec : records) {
    json row{{"argument_id", rec.argument_id},
             {"conclusion", rec.conclusion},
             {"counter", rec.counter},
             {"seed", rec.seed}};
    row["prompt_concept"] =
        rec.prompt_concept ? json(*rec.prompt_concept) : json(nullptr);
    out << row.dump() << '\n';
  }
}

std::vector<CandidateRecord> load_candidates(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::vector<CandidateRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
      CandidateRecord rec;
      rec.argument_id = row.at("argument_id").get<std::string>();
      rec.conclusion = row.at("conclusion").get<std::string>();
      rec.counter = row.at("counter").get<std::string>();
      rec.seed = row.at("seed").get<std::uint64_t>();
      if (row.contains("prompt_concept") && !row["prompt_concept"].is_null()) {
        rec.prompt_concept = row["prompt_concept"].get<std::string>();
      }
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return records;
}

}  // namespace contra::gen
