// Command-line pipeline: ingest -> train-gen / train-stance -> generate ->
// rank -> evaluate -> analyze. Every subcommand reads a JSON config file
// (flags override file values), validates before writing anything, and
// drops a run_manifest.json next to its artifacts.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "contra/concepts.hpp"
#include "contra/corpus.hpp"
#include "contra/errors.hpp"
#include "contra/evaluation.hpp"
#include "contra/generation.hpp"
#include "contra/model.hpp"
#include "contra/rng.hpp"
#include "contra/run.hpp"
#include "contra/stance.hpp"
#include "contra/text.hpp"
#include "contra/vocab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kRuntimeExit = 1;
constexpr int kUsageExit = 2;

// Bad flags, unreadable config, missing inputs: rejected before any write.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file: " + path);
  json config;
  try {
    config = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed config file " + path + ": " + e.what());
  }
  if (!config.is_object()) {
    throw UsageError("config file must hold a JSON object: " + path);
  }
  return config;
}

// Flag beats config file beats fallback.
template <typename T>
T resolve(const CLI::App& cmd, const std::string& flag, const T& flag_value,
          const json& config, const std::string& key, const T& fallback) {
  if (cmd.count(flag) > 0) return flag_value;
  if (config.contains(key)) {
    try {
      return config.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
  return fallback;
}

fs::path require_file(const std::string& value, const std::string& label) {
  if (value.empty()) throw UsageError("missing required path: " + label);
  fs::path p(value);
  if (!fs::is_regular_file(p)) {
    throw UsageError(label + " is not a readable file: " + value);
  }
  return p;
}

fs::path require_dir(const std::string& value, const std::string& label) {
  if (value.empty()) throw UsageError("missing required path: " + label);
  fs::path p(value);
  if (!fs::is_directory(p)) {
    throw UsageError(label + " is not a directory: " + value);
  }
  return p;
}

fs::path require_out(const std::string& value) {
  if (value.empty()) throw UsageError("missing required path: out");
  return fs::path(value);
}

// --gold accepts either the arguments file or the ingest output directory.
fs::path gold_arguments_path(const std::string& value) {
  if (value.empty()) throw UsageError("missing required path: gold");
  fs::path p(value);
  if (fs::is_directory(p)) p /= "arguments.jsonl";
  if (!fs::is_regular_file(p)) {
    throw UsageError("gold arguments not found: " + p.string());
  }
  return p;
}

// Re-badges config validation failures as usage errors so they exit 2.
template <typename Fn>
void validate_as_usage(Fn&& fn) {
  try {
    fn();
  } catch (const contra::PreconditionError& e) {
    throw UsageError(e.what());
  }
}

struct RunContext {
  std::string command;
  json resolved_config;
  std::map<std::string, std::string> input_digests;
  std::string started;

  void add_input(const std::string& label, const fs::path& file) {
    input_digests[label] = contra::run::file_digest(file);
  }
};

RunContext begin_run(std::string command, json resolved_config) {
  RunContext ctx;
  ctx.command = std::move(command);
  ctx.resolved_config = std::move(resolved_config);
  ctx.started = contra::run::iso_timestamp_utc();
  return ctx;
}

void finish_run(const RunContext& ctx, const fs::path& out_dir,
                std::vector<std::string> artifacts) {
  contra::run::RunManifest manifest;
  manifest.command = ctx.command;
  manifest.config_digest =
      contra::run::string_digest(ctx.resolved_config.dump());
  manifest.input_digests = ctx.input_digests;
  manifest.run_id = contra::run::make_run_id(ctx.command, manifest.config_digest,
                                             manifest.input_digests);
  manifest.started = ctx.started;
  manifest.finished = contra::run::iso_timestamp_utc();
  manifest.artifacts = std::move(artifacts);
  contra::run::save_manifest(out_dir / "run_manifest.json", manifest);
  json summary{{"run_id", manifest.run_id},
               {"out", out_dir.string()},
               {"artifacts", manifest.artifacts}};
  std::cout << summary.dump() << '\n';
}

void warn(const json& record) { std::cerr << record.dump() << '\n'; }

// ---- ingest ------------------------------------------------------------

struct IngestOpts {
  std::string config;
  std::string input;
  std::string out;
  std::string debates;
  double train_ratio = 0.7;
  double validation_ratio = 0.1;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
  bool skip_implicitness = false;
};

void register_ingest(CLI::App& app, IngestOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("ingest",
                           "Parse raw posts into a corpus directory with "
                           "splits and optional stance pairs");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--input", opts.input, "argument posts (JSON lines)");
  cmd->add_option("--out", opts.out, "output corpus directory");
  cmd->add_option("--debates", opts.debates, "debate trees (JSON lines)");
  cmd->add_option("--train-ratio", opts.train_ratio, "train split ratio");
  cmd->add_option("--validation-ratio", opts.validation_ratio,
                  "validation split ratio");
  cmd->add_option("--test-ratio", opts.test_ratio, "test split ratio");
  cmd->add_option("--seed", opts.seed, "split shuffle seed");
  cmd->add_flag("--skip-implicitness", opts.skip_implicitness,
                "do not compute conclusion implicitness");
}

int run_ingest(const CLI::App& cmd, const IngestOpts& flags) {
  json config = read_config_file(flags.config);
  std::string input =
      resolve(cmd, "--input", flags.input, config, "input", std::string());
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());
  std::string debates =
      resolve(cmd, "--debates", flags.debates, config, "debates", std::string());
  double train_ratio = resolve(cmd, "--train-ratio", flags.train_ratio, config,
                               "train_ratio", 0.7);
  double validation_ratio = resolve(cmd, "--validation-ratio",
                                    flags.validation_ratio, config,
                                    "validation_ratio", 0.1);
  double test_ratio =
      resolve(cmd, "--test-ratio", flags.test_ratio, config, "test_ratio", 0.2);
  std::uint64_t seed =
      resolve(cmd, "--seed", flags.seed, config, "seed", std::uint64_t{0});
  bool implicitness = !resolve(cmd, "--skip-implicitness",
                               flags.skip_implicitness, config,
                               "skip_implicitness", false);

  fs::path input_path = require_file(input, "input");
  fs::path out_dir = require_out(out_str);
  std::optional<fs::path> debates_path;
  if (!debates.empty()) debates_path = require_file(debates, "debates");
  if (std::abs(train_ratio + validation_ratio + test_ratio - 1.0) > 1e-9) {
    throw UsageError("split ratios must sum to 1");
  }

  json resolved{{"input", input},         {"out", out_str},
                {"debates", debates},     {"train_ratio", train_ratio},
                {"validation_ratio", validation_ratio},
                {"test_ratio", test_ratio},
                {"seed", seed},           {"implicitness", implicitness}};
  RunContext ctx = begin_run("ingest", resolved);
  ctx.add_input("input", input_path);
  if (debates_path) ctx.add_input("debates", *debates_path);

  std::vector<contra::corpus::Argument> arguments =
      contra::corpus::load_arguments(input_path, implicitness);
  std::vector<std::string> ids;
  ids.reserve(arguments.size());
  for (const auto& arg : arguments) ids.push_back(arg.id);
  contra::corpus::SplitSpec splits = contra::corpus::make_splits(
      ids, {train_ratio, validation_ratio, test_ratio}, seed);

  fs::create_directories(out_dir);
  std::vector<std::string> artifacts{"arguments.jsonl", "splits.json"};
  contra::corpus::save_arguments(arguments, out_dir / "arguments.jsonl");
  contra::corpus::save_splits(splits, out_dir / "splits.json");
  if (debates_path) {
    std::vector<contra::corpus::ClaimPair> pairs;
    for (const auto& tree : contra::corpus::load_debate_trees(*debates_path)) {
      auto tree_pairs = contra::corpus::build_claim_pairs(tree);
      pairs.insert(pairs.end(), tree_pairs.begin(), tree_pairs.end());
    }
    contra::corpus::save_claim_pairs(pairs, out_dir / "claim_pairs.jsonl");
    artifacts.push_back("claim_pairs.jsonl");
  }
  finish_run(ctx, out_dir, std::move(artifacts));
  return 0;
}

// ---- train-gen ----------------------------------------------------------

struct TrainGenOpts {
  std::string config;
  std::string corpus;
  std::string out;
  std::string mode = "oneseq";
  double learning_rate = 5e-5;
  int epochs = 3;
  int batch_size = 8;
  double alpha_a = 0.7;
  double alpha_b = 0.3;
  int embed_dim = 16;
  std::uint64_t init_seed = 1;
  int max_premise_len = 256;
  int max_conclusion_len = 64;
  int max_counter_len = 128;
  int quality_cap = 100;
};

void register_train_gen(CLI::App& app, TrainGenOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("train-gen",
                           "Train a joint generation model on an ingested "
                           "corpus and write a checkpoint");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--corpus", opts.corpus, "ingested corpus directory");
  cmd->add_option("--out", opts.out, "checkpoint output directory");
  cmd->add_option("--mode", opts.mode, "oneseq or twodec");
  cmd->add_option("--lr,--learning-rate", opts.learning_rate, "learning rate");
  cmd->add_option("--epochs", opts.epochs, "training epochs");
  cmd->add_option("--batch-size", opts.batch_size, "batch size");
  cmd->add_option("--alpha-a", opts.alpha_a, "conclusion loss weight");
  cmd->add_option("--alpha-b", opts.alpha_b, "counter loss weight");
  cmd->add_option("--embed-dim", opts.embed_dim, "toy model embedding width");
  cmd->add_option("--init-seed", opts.init_seed, "parameter init seed");
  cmd->add_option("--max-premise-len", opts.max_premise_len,
                  "premise token cap");
  cmd->add_option("--max-conclusion-len", opts.max_conclusion_len,
                  "conclusion token cap");
  cmd->add_option("--max-counter-len", opts.max_counter_len,
                  "counter token cap");
  cmd->add_option("--quality-cap", opts.quality_cap,
                  "token cap of the length-based counter quality scorer");
}

int run_train_gen(const CLI::App& cmd, const TrainGenOpts& flags) {
  json config = read_config_file(flags.config);
  std::string corpus =
      resolve(cmd, "--corpus", flags.corpus, config, "corpus", std::string());
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());
  std::string mode_str =
      resolve(cmd, "--mode", flags.mode, config, "mode", std::string("oneseq"));
  contra::gen::TrainConfig train_config;
  train_config.learning_rate = resolve(cmd, "--lr", flags.learning_rate, config,
                                       "learning_rate", 5e-5);
  train_config.epochs = resolve(cmd, "--epochs", flags.epochs, config, "epochs", 3);
  train_config.batch_size =
      resolve(cmd, "--batch-size", flags.batch_size, config, "batch_size", 8);
  train_config.alpha_a =
      resolve(cmd, "--alpha-a", flags.alpha_a, config, "alpha_a", 0.7);
  train_config.alpha_b =
      resolve(cmd, "--alpha-b", flags.alpha_b, config, "alpha_b", 0.3);
  int embed_dim =
      resolve(cmd, "--embed-dim", flags.embed_dim, config, "embed_dim", 16);
  std::uint64_t init_seed = resolve(cmd, "--init-seed", flags.init_seed, config,
                                    "init_seed", std::uint64_t{1});
  contra::gen::SequenceLimits limits;
  limits.max_premise_len = resolve(cmd, "--max-premise-len",
                                   flags.max_premise_len, config,
                                   "max_premise_len", 256);
  limits.max_conclusion_len = resolve(cmd, "--max-conclusion-len",
                                      flags.max_conclusion_len, config,
                                      "max_conclusion_len", 64);
  limits.max_counter_len = resolve(cmd, "--max-counter-len",
                                   flags.max_counter_len, config,
                                   "max_counter_len", 128);
  int quality_cap =
      resolve(cmd, "--quality-cap", flags.quality_cap, config, "quality_cap", 100);

  fs::path corpus_dir = require_dir(corpus, "corpus");
  fs::path arguments_file =
      require_file((corpus_dir / "arguments.jsonl").string(), "corpus arguments");
  fs::path splits_file =
      require_file((corpus_dir / "splits.json").string(), "corpus splits");
  fs::path out_dir = require_out(out_str);
  contra::gen::JointMode mode{};
  validate_as_usage([&] {
    mode = contra::gen::joint_mode_from_string(mode_str);
    train_config.validate();
    if (embed_dim < 1) throw contra::PreconditionError("embed_dim must be >= 1");
    if (quality_cap < 1) throw contra::PreconditionError("quality_cap must be >= 1");
    if (limits.max_premise_len < 1 || limits.max_conclusion_len < 1 ||
        limits.max_counter_len < 1) {
      throw contra::PreconditionError("length caps must be >= 1");
    }
  });

  json resolved{{"corpus", corpus},
                {"out", out_str},
                {"mode", mode_str},
                {"learning_rate", train_config.learning_rate},
                {"epochs", train_config.epochs},
                {"batch_size", train_config.batch_size},
                {"alpha_a", train_config.alpha_a},
                {"alpha_b", train_config.alpha_b},
                {"embed_dim", embed_dim},
                {"init_seed", init_seed},
                {"max_premise_len", limits.max_premise_len},
                {"max_conclusion_len", limits.max_conclusion_len},
                {"max_counter_len", limits.max_counter_len},
                {"quality_cap", quality_cap}};
  RunContext ctx = begin_run("train-gen", resolved);
  ctx.add_input("arguments", arguments_file);
  ctx.add_input("splits", splits_file);

  std::vector<contra::corpus::Argument> arguments =
      contra::corpus::load_arguments(arguments_file);
  contra::corpus::SplitSpec splits = contra::corpus::load_splits(splits_file);
  std::vector<contra::corpus::Argument> train_records;
  std::vector<contra::corpus::Argument> validation_records;
  for (const auto& arg : arguments) {
    if (splits.in_train(arg.id)) {
      train_records.push_back(arg);
    } else if (splits.in_validation(arg.id)) {
      validation_records.push_back(arg);
    }
  }
  contra::corpus::QualityScorer scorer =
      contra::corpus::length_capped_quality(quality_cap);
  std::vector<contra::gen::TrainingExample> train_examples =
      contra::gen::build_training_examples(train_records, limits, scorer);
  std::vector<contra::gen::TrainingExample> validation_examples =
      contra::gen::build_training_examples(validation_records, limits, scorer);
  if (train_examples.empty()) {
    throw contra::PreconditionError("no usable training records in the corpus");
  }

  contra::Vocab vocab = contra::gen::build_generation_vocab(train_examples);
  contra::gen::ToyNeuralModel model(std::move(vocab), mode, embed_dim, init_seed);
  contra::gen::TrainResult result = contra::gen::train(
      model, train_examples, validation_examples, train_config);

  fs::create_directories(out_dir);
  contra::gen::save_checkpoint(out_dir, model, train_config, result);
  finish_run(ctx, out_dir, {"params.bin", "vocab.json", "manifest.json"});
  return 0;
}

// ---- train-stance ---------------------------------------------------------

struct TrainStanceOpts {
  std::string config;
  std::string pairs;
  std::string out;
  double learning_rate = 2e-5;
  int epochs = 3;
  int batch_size = 64;
  double validation_ratio = 0.2;
  std::uint64_t seed = 0;
};

void register_train_stance(CLI::App& app, TrainStanceOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("train-stance",
                           "Train the stance classifier on claim pairs and "
                           "write a classifier directory");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--pairs", opts.pairs, "claim pairs (JSON lines)");
  cmd->add_option("--out", opts.out, "classifier output directory");
  cmd->add_option("--lr,--learning-rate", opts.learning_rate, "learning rate");
  cmd->add_option("--epochs", opts.epochs, "training epochs");
  cmd->add_option("--batch-size", opts.batch_size, "batch size");
  cmd->add_option("--validation-ratio", opts.validation_ratio,
                  "held-out debate fraction");
  cmd->add_option("--seed", opts.seed, "debate split seed");
}

int run_train_stance(const CLI::App& cmd, const TrainStanceOpts& flags) {
  json config = read_config_file(flags.config);
  std::string pairs_str =
      resolve(cmd, "--pairs", flags.pairs, config, "pairs", std::string());
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());
  contra::stance::StanceTrainConfig stance_config;
  stance_config.learning_rate = resolve(cmd, "--lr", flags.learning_rate,
                                        config, "learning_rate", 2e-5);
  stance_config.epochs = resolve(cmd, "--epochs", flags.epochs, config, "epochs", 3);
  stance_config.batch_size =
      resolve(cmd, "--batch-size", flags.batch_size, config, "batch_size", 64);
  stance_config.validation_ratio =
      resolve(cmd, "--validation-ratio", flags.validation_ratio, config,
              "validation_ratio", 0.2);
  stance_config.seed =
      resolve(cmd, "--seed", flags.seed, config, "seed", std::uint64_t{0});

  fs::path pairs_file = require_file(pairs_str, "pairs");
  fs::path out_dir = require_out(out_str);
  validate_as_usage([&] { stance_config.validate(); });

  json resolved{{"pairs", pairs_str},
                {"out", out_str},
                {"learning_rate", stance_config.learning_rate},
                {"epochs", stance_config.epochs},
                {"batch_size", stance_config.batch_size},
                {"validation_ratio", stance_config.validation_ratio},
                {"seed", stance_config.seed}};
  RunContext ctx = begin_run("train-stance", resolved);
  ctx.add_input("pairs", pairs_file);

  std::vector<contra::corpus::ClaimPair> pairs =
      contra::corpus::load_claim_pairs(pairs_file);
  contra::stance::TrainedStance trained =
      contra::stance::train_stance(pairs, stance_config);

  fs::create_directories(out_dir);
  contra::stance::save_stance_classifier(out_dir, *trained.classifier,
                                         trained.validation_f1);
  finish_run(ctx, out_dir, {"weights.json", "manifest.json"});
  return 0;
}

// ---- generate -------------------------------------------------------------

struct GenerateOpts {
  std::string config;
  std::string corpus;
  std::string model;
  std::string out;
  std::string mode;
  std::string split = "test";
  int n_candidates = 8;
  int n_concepts = 5;
  double nucleus_p = 0.95;
  int top_k = 50;
  std::uint64_t seed = 0;
  int max_conclusion_len = 64;
  int max_counter_len = 128;
};

void register_generate(CLI::App& app, GenerateOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("generate",
                           "Decode candidate conclusion/counter pairs for a "
                           "corpus split");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--corpus", opts.corpus, "ingested corpus directory");
  cmd->add_option("--model", opts.model, "generation checkpoint directory");
  cmd->add_option("--out", opts.out, "run output directory");
  cmd->add_option("--mode", opts.mode,
                  "expected checkpoint mode (consistency check)");
  cmd->add_option("--split", opts.split, "train, validation or test");
  cmd->add_option("--n,--n-candidates", opts.n_candidates,
                  "candidates per argument");
  cmd->add_option("--m,--n-concepts", opts.n_concepts,
                  "prompt concepts per argument");
  cmd->add_option("--p,--nucleus-p", opts.nucleus_p, "nucleus mass");
  cmd->add_option("--top-k", opts.top_k, "nucleus top-k cutoff");
  cmd->add_option("--seed", opts.seed, "decode seed");
  cmd->add_option("--max-conclusion-len", opts.max_conclusion_len,
                  "conclusion decode cap");
  cmd->add_option("--max-counter-len", opts.max_counter_len,
                  "counter decode cap");
}

int run_generate(const CLI::App& cmd, const GenerateOpts& flags) {
  json config = read_config_file(flags.config);
  std::string corpus =
      resolve(cmd, "--corpus", flags.corpus, config, "corpus", std::string());
  std::string model_str =
      resolve(cmd, "--model", flags.model, config, "model", std::string());
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());
  std::string mode_str =
      resolve(cmd, "--mode", flags.mode, config, "mode", std::string());
  std::string split =
      resolve(cmd, "--split", flags.split, config, "split", std::string("test"));
  contra::gen::DecodingConfig decoding;
  decoding.n_candidates =
      resolve(cmd, "--n", flags.n_candidates, config, "n_candidates", 8);
  decoding.n_concepts =
      resolve(cmd, "--m", flags.n_concepts, config, "n_concepts", 5);
  decoding.nucleus_p =
      resolve(cmd, "--p", flags.nucleus_p, config, "nucleus_p", 0.95);
  decoding.top_k = resolve(cmd, "--top-k", flags.top_k, config, "top_k", 50);
  std::uint64_t base_seed =
      resolve(cmd, "--seed", flags.seed, config, "seed", std::uint64_t{0});
  decoding.max_conclusion_len =
      resolve(cmd, "--max-conclusion-len", flags.max_conclusion_len, config,
              "max_conclusion_len", 64);
  decoding.max_counter_len =
      resolve(cmd, "--max-counter-len", flags.max_counter_len, config,
              "max_counter_len", 128);

  fs::path corpus_dir = require_dir(corpus, "corpus");
  fs::path arguments_file =
      require_file((corpus_dir / "arguments.jsonl").string(), "corpus arguments");
  fs::path splits_file =
      require_file((corpus_dir / "splits.json").string(), "corpus splits");
  fs::path model_dir = require_dir(model_str, "model");
  require_file((model_dir / "manifest.json").string(), "model manifest");
  fs::path out_dir = require_out(out_str);
  if (split != "train" && split != "validation" && split != "test") {
    throw UsageError("split must be train, validation or test");
  }
  validate_as_usage([&] { decoding.validate(); });

  json resolved{{"corpus", corpus},
                {"model", model_str},
                {"out", out_str},
                {"split", split},
                {"n_candidates", decoding.n_candidates},
                {"n_concepts", decoding.n_concepts},
                {"nucleus_p", decoding.nucleus_p},
                {"top_k", decoding.top_k},
                {"seed", base_seed},
                {"max_conclusion_len", decoding.max_conclusion_len},
                {"max_counter_len", decoding.max_counter_len}};
  RunContext ctx = begin_run("generate", resolved);
  ctx.add_input("arguments", arguments_file);
  ctx.add_input("splits", splits_file);
  ctx.add_input("model", model_dir / "params.bin");

  contra::gen::Checkpoint checkpoint = contra::gen::load_checkpoint(model_dir);
  if (!mode_str.empty() &&
      contra::gen::joint_mode_from_string(mode_str) != checkpoint.model->mode()) {
    throw UsageError("requested mode does not match the checkpoint");
  }
  std::vector<contra::corpus::Argument> arguments =
      contra::corpus::load_arguments(arguments_file);
  contra::corpus::SplitSpec splits = contra::corpus::load_splits(splits_file);

  std::vector<contra::gen::CandidateRecord> rows;
  std::size_t skipped = 0;
  for (const auto& arg : arguments) {
    bool selected = split == "train"        ? splits.in_train(arg.id)
                    : split == "validation" ? splits.in_validation(arg.id)
                                            : splits.in_test(arg.id);
    if (!selected) continue;
    std::vector<std::string> premise_tokens = contra::text::tokenize(arg.premises);
    if (premise_tokens.empty()) {
      ++skipped;
      warn(json{{"warning", "argument has no premise tokens"},
                {"argument_id", arg.id}});
      continue;
    }
    contra::gen::DecodingConfig arg_config = decoding;
    arg_config.seed = contra::derive_seed(base_seed, contra::fnv1a(arg.id));
    try {
      if (checkpoint.model->mode() == contra::gen::JointMode::oneseq) {
        std::vector<contra::concepts::Concept> prompts =
            contra::concepts::extract_concepts(arg.premises,
                                               arg_config.n_concepts);
        std::vector<contra::gen::CandidatePair> candidates =
            contra::gen::generate_candidates_oneseq(*checkpoint.model,
                                                    premise_tokens, prompts,
                                                    arg_config);
        for (const auto& cand : candidates) {
          rows.push_back({arg.id, cand.conclusion, cand.counter,
                          cand.prompt_concept, arg_config.seed});
        }
      } else {
        contra::gen::TwodecOutput output = contra::gen::generate_candidates_twodec(
            *checkpoint.model, premise_tokens, arg_config);
        for (const std::string& counter : output.counters) {
          rows.push_back(
              {arg.id, output.conclusion, counter, std::nullopt, arg_config.seed});
        }
      }
    } catch (const contra::GenerationError& e) {
      ++skipped;
      warn(json{{"warning", e.what()}, {"argument_id", arg.id}});
    }
  }
  if (rows.empty()) {
    throw contra::GenerationError("no candidates generated for split " + split);
  }
  if (skipped > 0) {
    warn(json{{"warning", "arguments skipped"}, {"count", skipped}});
  }

  fs::create_directories(out_dir);
  contra::gen::save_candidates(out_dir / "candidates.jsonl", rows);
  finish_run(ctx, out_dir, {"candidates.jsonl"});
  return 0;
}

// ---- rank -------------------------------------------------------------

struct RankOpts {
  std::string config;
  std::string candidates;
  std::string classifier;
  std::string out;
};

void register_rank(CLI::App& app, RankOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("rank",
                           "Order candidates by stance contrastiveness per "
                           "argument");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--candidates", opts.candidates, "candidates.jsonl");
  cmd->add_option("--classifier", opts.classifier,
                  "stance classifier directory");
  cmd->add_option("--out", opts.out, "run output directory");
}

int run_rank(const CLI::App& cmd, const RankOpts& flags) {
  json config = read_config_file(flags.config);
  std::string candidates_str = resolve(cmd, "--candidates", flags.candidates,
                                       config, "candidates", std::string());
  std::string classifier_str = resolve(cmd, "--classifier", flags.classifier,
                                       config, "classifier", std::string());
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());

  fs::path candidates_file = require_file(candidates_str, "candidates");
  fs::path classifier_dir = require_dir(classifier_str, "classifier");
  require_file((classifier_dir / "weights.json").string(), "classifier weights");
  fs::path out_dir = require_out(out_str);

  json resolved{{"candidates", candidates_str},
                {"classifier", classifier_str},
                {"out", out_str}};
  RunContext ctx = begin_run("rank", resolved);
  ctx.add_input("candidates", candidates_file);
  ctx.add_input("classifier", classifier_dir / "weights.json");

  std::vector<contra::gen::CandidateRecord> records =
      contra::gen::load_candidates(candidates_file);
  if (records.empty()) {
    throw contra::PreconditionError("no candidates to rank");
  }
  contra::stance::LoadedStance loaded =
      contra::stance::load_stance_classifier(classifier_dir);

  std::map<std::string, std::vector<contra::gen::CandidatePair>> by_argument;
  for (const auto& rec : records) {
    contra::gen::CandidatePair pair;
    pair.conclusion = rec.conclusion;
    pair.counter = rec.counter;
    pair.prompt_concept = rec.prompt_concept;
    by_argument[rec.argument_id].push_back(std::move(pair));
  }

  std::vector<contra::stance::RankedRecord> rows;
  for (const auto& [argument_id, candidates] : by_argument) {
    contra::stance::RankedCandidates ranked =
        contra::stance::rank_candidates(candidates, *loaded.classifier);
    for (std::size_t i = 0; i < ranked.items.size(); ++i) {
      const contra::gen::CandidatePair& item = ranked.items[i];
      rows.push_back({argument_id, static_cast<int>(i) + 1, item.conclusion,
                      item.counter, *item.score});
    }
  }

  fs::create_directories(out_dir);
  contra::stance::save_ranked(out_dir / "ranked.jsonl", rows);
  finish_run(ctx, out_dir, {"ranked.jsonl"});
  return 0;
}

// ---- evaluate -----------------------------------------------------------

struct EvaluateOpts {
  std::string config;
  std::string generated;
  std::string gold;
  std::string classifier;
  std::string embedder;
  std::string out;
};

void register_evaluate(CLI::App& app, EvaluateOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("evaluate",
                           "Score generated counters against gold arguments");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--generated", opts.generated,
                  "ranked.jsonl (top ranks used) or candidates.jsonl");
  cmd->add_option("--gold", opts.gold,
                  "gold arguments file or corpus directory");
  cmd->add_option("--classifier", opts.classifier,
                  "stance classifier directory");
  cmd->add_option("--embedder", opts.embedder,
                  "word vector JSON (defaults to exact-match tokens)");
  cmd->add_option("--out", opts.out, "run output directory");
}

// ranked.jsonl rows carry a rank field; candidates.jsonl rows do not.
bool is_ranked_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw contra::Error("cannot read " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (contra::text::trim(line).empty()) continue;
    json row = json::parse(line, nullptr, false);
    return row.is_object() && row.contains("rank");
  }
  return false;
}

int run_evaluate(const CLI::App& cmd, const EvaluateOpts& flags) {
  json config = read_config_file(flags.config);
  std::string generated_str = resolve(cmd, "--generated", flags.generated,
                                      config, "generated", std::string());
  std::string gold_str =
      resolve(cmd, "--gold", flags.gold, config, "gold", std::string());
  std::string classifier_str = resolve(cmd, "--classifier", flags.classifier,
                                       config, "classifier", std::string());
  std::string embedder_str = resolve(cmd, "--embedder", flags.embedder, config,
                                     "embedder", std::string());
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());

  fs::path generated_file = require_file(generated_str, "generated");
  fs::path gold_file = gold_arguments_path(gold_str);
  fs::path classifier_dir = require_dir(classifier_str, "classifier");
  require_file((classifier_dir / "weights.json").string(), "classifier weights");
  std::optional<fs::path> embedder_file;
  if (!embedder_str.empty()) {
    embedder_file = require_file(embedder_str, "embedder");
  }
  fs::path out_dir = require_out(out_str);

  json resolved{{"generated", generated_str},
                {"gold", gold_str},
                {"classifier", classifier_str},
                {"embedder", embedder_str.empty() ? "onehot" : embedder_str},
                {"out", out_str}};
  RunContext ctx = begin_run("evaluate", resolved);
  ctx.add_input("generated", generated_file);
  ctx.add_input("gold", gold_file);
  ctx.add_input("classifier", classifier_dir / "weights.json");
  if (embedder_file) ctx.add_input("embedder", *embedder_file);

  std::vector<contra::eval::GeneratedInstance> generated;
  if (is_ranked_file(generated_file)) {
    for (const auto& rec : contra::stance::load_ranked(generated_file)) {
      if (rec.rank != 1) continue;
      generated.push_back({rec.argument_id, rec.conclusion, rec.counter});
    }
  } else {
    for (const auto& rec : contra::gen::load_candidates(generated_file)) {
      generated.push_back({rec.argument_id, rec.conclusion, rec.counter});
    }
  }
  std::vector<contra::corpus::Argument> gold =
      contra::corpus::load_arguments(gold_file);
  contra::stance::LoadedStance loaded =
      contra::stance::load_stance_classifier(classifier_dir);
  std::unique_ptr<contra::eval::TokenEmbedder> embedder;
  if (embedder_file) {
    embedder = std::make_unique<contra::eval::WordVectorEmbedder>(
        contra::eval::WordVectorEmbedder::load(*embedder_file));
  } else {
    embedder = std::make_unique<contra::eval::OneHotEmbedder>();
  }

  contra::eval::EvalRun result = contra::eval::evaluate_run(
      generated, gold, *loaded.classifier, *embedder,
      contra::eval::concept_target_extractor(),
      contra::eval::classifier_stance_scorer(*loaded.classifier));

  fs::create_directories(out_dir);
  contra::eval::save_report(out_dir / "report.json", result.report);
  contra::eval::save_instance_scores(out_dir / "instance_scores.jsonl",
                                     result.instances);
  finish_run(ctx, out_dir, {"report.json", "instance_scores.jsonl"});
  return 0;
}

// ---- analyze ------------------------------------------------------------

struct AnalyzeOpts {
  std::string config;
  std::string scores;
  std::string gold;
  std::string dimension = "both";
  std::string out;
};

void register_analyze(CLI::App& app, AnalyzeOpts& opts, CLI::App*& cmd) {
  cmd = app.add_subcommand("analyze",
                           "Quintile analysis of instance scores by argument "
                           "length or conclusion implicitness");
  cmd->add_option("--config", opts.config, "JSON config file");
  cmd->add_option("--scores", opts.scores, "instance_scores.jsonl");
  cmd->add_option("--gold", opts.gold, "gold arguments file or corpus directory");
  cmd->add_option("--dimension", opts.dimension,
                  "length, implicitness or both");
  cmd->add_option("--out", opts.out, "run output directory");
}

int run_analyze(const CLI::App& cmd, const AnalyzeOpts& flags) {
  json config = read_config_file(flags.config);
  std::string scores_str =
      resolve(cmd, "--scores", flags.scores, config, "scores", std::string());
  std::string gold_str =
      resolve(cmd, "--gold", flags.gold, config, "gold", std::string());
  std::string dimension_str = resolve(cmd, "--dimension", flags.dimension,
                                      config, "dimension", std::string("both"));
  std::string out_str =
      resolve(cmd, "--out", flags.out, config, "out", std::string());

  fs::path scores_file = require_file(scores_str, "scores");
  fs::path gold_file = gold_arguments_path(gold_str);
  fs::path out_dir = require_out(out_str);
  std::vector<contra::eval::AnalysisDimension> dimensions;
  if (dimension_str == "both") {
    dimensions = {contra::eval::AnalysisDimension::length,
                  contra::eval::AnalysisDimension::implicitness};
  } else {
    validate_as_usage(
        [&] { dimensions = {contra::eval::dimension_from_string(dimension_str)}; });
  }

  json resolved{{"scores", scores_str},
                {"gold", gold_str},
                {"dimension", dimension_str},
                {"out", out_str}};
  RunContext ctx = begin_run("analyze", resolved);
  ctx.add_input("scores", scores_file);
  ctx.add_input("gold", gold_file);

  std::vector<contra::eval::InstanceScore> instances =
      contra::eval::load_instance_scores(scores_file);
  std::vector<contra::corpus::Argument> gold =
      contra::corpus::load_arguments(gold_file);

  fs::create_directories(out_dir);
  std::vector<std::string> artifacts;
  for (contra::eval::AnalysisDimension dimension : dimensions) {
    contra::eval::BinAnalysis analysis =
        contra::eval::analysis_report(instances, gold, dimension);
    std::string stem = "analysis_" + contra::eval::to_string(dimension);
    contra::eval::save_bin_analysis_csv(out_dir / (stem + ".csv"), analysis);
    contra::eval::save_bin_analysis_json(out_dir / (stem + ".json"), analysis);
    artifacts.push_back(stem + ".csv");
    artifacts.push_back(stem + ".json");
  }
  finish_run(ctx, out_dir, std::move(artifacts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint counter-argument generation pipeline"};
  app.require_subcommand(1);

  IngestOpts ingest_opts;
  TrainGenOpts train_gen_opts;
  TrainStanceOpts train_stance_opts;
  GenerateOpts generate_opts;
  RankOpts rank_opts;
  EvaluateOpts evaluate_opts;
  AnalyzeOpts analyze_opts;
  CLI::App* ingest_cmd = nullptr;
  CLI::App* train_gen_cmd = nullptr;
  CLI::App* train_stance_cmd = nullptr;
  CLI::App* generate_cmd = nullptr;
  CLI::App* rank_cmd = nullptr;
  CLI::App* evaluate_cmd = nullptr;
  CLI::App* analyze_cmd = nullptr;
  register_ingest(app, ingest_opts, ingest_cmd);
  register_train_gen(app, train_gen_opts, train_gen_cmd);
  register_train_stance(app, train_stance_opts, train_stance_cmd);
  register_generate(app, generate_opts, generate_cmd);
  register_rank(app, rank_opts, rank_cmd);
  register_evaluate(app, evaluate_opts, evaluate_cmd);
  register_analyze(app, analyze_opts, analyze_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return kUsageExit;
  }

  try {
    if (ingest_cmd->parsed()) return run_ingest(*ingest_cmd, ingest_opts);
    if (train_gen_cmd->parsed()) {
      return run_train_gen(*train_gen_cmd, train_gen_opts);
    }
    if (train_stance_cmd->parsed()) {
      return run_train_stance(*train_stance_cmd, train_stance_opts);
    }
    if (generate_cmd->parsed()) return run_generate(*generate_cmd, generate_opts);
    if (rank_cmd->parsed()) return run_rank(*rank_cmd, rank_opts);
    if (evaluate_cmd->parsed()) {
      return run_evaluate(*evaluate_cmd, evaluate_opts);
    }
    if (analyze_cmd->parsed()) return run_analyze(*analyze_cmd, analyze_opts);
    std::cerr << json{{"error", "no subcommand"}, {"kind", "usage"}}.dump()
              << '\n';
    return kUsageExit;
  } catch (const UsageError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << '\n';
    return kRuntimeExit;
  }
}
