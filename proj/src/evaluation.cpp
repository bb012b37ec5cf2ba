#include "contra/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "contra/concepts.hpp"
#include "contra/errors.hpp"
#include "contra/text.hpp"

namespace contra::eval {

namespace {

using nlohmann::json;

// Shortest round-trip formatting, shared by the JSON and CSV writers.
std::string format_number(double value) { return json(value).dump(); }

std::map<std::vector<std::string>, long> ngram_counts(
    std::span<const std::string> tokens, std::size_t n) {
  std::map<std::vector<std::string>, long> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string> gram(tokens.begin() + static_cast<long>(i),
                                  tokens.begin() + static_cast<long>(i + n));
    ++counts[std::move(gram)];
  }
  return counts;
}

double bleu_against(std::span<const std::string> cand,
                    std::span<const std::string> ref) {
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto cand_counts = ngram_counts(cand, n);
    auto ref_counts = ngram_counts(ref, n);
    long matches = 0;
    long total = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    double precision;
    if (n == 1) {
      if (matches == 0) return 0.0;  // no unigram overlap: score 0 outright
      precision = static_cast<double>(matches) / static_cast<double>(total);
    } else {
      precision = static_cast<double>(matches + 1) /
                  static_cast<double>(total + 1);  // add-one smoothing
    }
    log_sum += 0.25 * std::log(precision);
  }
  double c = static_cast<double>(cand.size());
  double r = static_cast<double>(ref.size());
  double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

}  // namespace

WordVectorEmbedder WordVectorEmbedder::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  json blob = json::parse(in);
  WordVectorEmbedder embedder;
  for (const auto& [token, vec] : blob.items()) {
    embedder.vectors_[token] = vec.get<std::vector<double>>();
  }
  return embedder;
}

double WordVectorEmbedder::similarity(const std::string& a,
                                      const std::string& b) const {
  auto ia = vectors_.find(a);
  auto ib = vectors_.find(b);
  if (ia == vectors_.end() || ib == vectors_.end()) return 0.0;
  const std::vector<double>& va = ia->second;
  const std::vector<double>& vb = ib->second;
  if (va.size() != vb.size()) return 0.0;
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

BleuScore bleu(const std::string& candidate,
               std::span<const std::string> references) {
  if (references.empty()) {
    throw PreconditionError("references must be non-empty");
  }
  std::vector<std::string> cand = text::tokenize(candidate);
  if (cand.empty()) return {0.0, true};
  double best = 0.0;
  for (const std::string& reference : references) {
    std::vector<std::string> ref = text::tokenize(reference);
    if (ref.empty()) continue;
    best = std::max(best, bleu_against(cand, ref));
  }
  return {best, false};
}

namespace {

// Mean over `from` tokens of the best similarity to any `to` token.
double directed_alignment(std::span<const std::string> from,
                          std::span<const std::string> to,
                          const TokenEmbedder& embedder) {
  double total = 0.0;
  for (const std::string& a : from) {
    double best = 0.0;
    for (const std::string& b : to) {
      best = std::max(best, std::clamp(embedder.similarity(a, b), 0.0, 1.0));
    }
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double semantic_f1(const std::string& candidate,
                   std::span<const std::string> references,
                   const TokenEmbedder& embedder) {
  if (references.empty()) {
    throw PreconditionError("references must be non-empty");
  }
  std::vector<std::string> cand = text::tokenize(candidate);
  if (cand.empty()) return 0.0;
  double best = 0.0;
  for (const std::string& reference : references) {
    std::vector<std::string> ref = text::tokenize(reference);
    if (ref.empty()) continue;
    double precision = directed_alignment(cand, ref, embedder);
    double recall = directed_alignment(ref, cand, embedder);
    if (precision + recall > 0.0) {
      best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
  }
  return best;
}

double contrastiveness_metric(std::span<const CounterConclusionPair> pairs,
                              const StanceClassifier& classifier) {
  if (pairs.empty()) throw PreconditionError("empty evaluation set");
  double total = 0.0;
  for (const CounterConclusionPair& pair : pairs) {
    total += stance::counter_contrastiveness(pair.gold_conclusion, pair.counter,
                                             classifier);
  }
  return total / static_cast<double>(pairs.size());
}

TargetExtractor concept_target_extractor() {
  return [](const std::string& conclusion) -> std::optional<std::string> {
    std::vector<concepts::Concept> top = concepts::extract_concepts(conclusion, 1);
    if (top.empty()) return std::nullopt;
    return top.front().phrase;
  };
}

StanceScorer classifier_stance_scorer(const StanceClassifier& classifier) {
  return [&classifier](const std::string& statement, const std::string& target) {
    stance::StanceVerdict verdict =
        stance::classify_stance(classifier, target, statement);
    return verdict.label == corpus::Stance::pro ? verdict.probability
                                                : -verdict.probability;
  };
}

TargetStanceResult target_stance_metric(
    std::span<const ConclusionCounter> instances,
    const TargetExtractor& extractor, const StanceScorer& scorer) {
  if (instances.empty()) throw PreconditionError("empty evaluation set");
  TargetStanceResult result;
  double total = 0.0;
  for (const ConclusionCounter& inst : instances) {
    std::optional<std::string> target = extractor(inst.conclusion);
    if (!target) {
      ++result.n_skipped;
      continue;
    }
    total += std::abs(scorer(inst.counter, *target) -
                      scorer(inst.conclusion, *target));
    ++result.n_scored;
  }
  if (result.n_scored == 0) {
    throw Error("target extraction failed on every instance");
  }
  result.value = total / static_cast<double>(result.n_scored);
  return result;
}

EvalRun evaluate_run(std::span<const GeneratedInstance> generated,
                     std::span<const Argument> gold,
                     const StanceClassifier& classifier,
                     const TokenEmbedder& embedder,
                     const TargetExtractor& extractor,
                     const StanceScorer& scorer) {
  if (generated.empty()) {
    throw JoinError("no generated instances to evaluate", {});
  }
  std::unordered_map<std::string, const Argument*> by_id;
  for (const Argument& arg : gold) by_id[arg.id] = &arg;

  std::vector<const GeneratedInstance*> ordered;
  ordered.reserve(generated.size());
  std::set<std::string> seen;
  std::vector<std::string> missing;
  for (const GeneratedInstance& inst : generated) {
    if (!seen.insert(inst.argument_id).second) {
      throw PreconditionError("duplicate generated id: " + inst.argument_id);
    }
    if (!by_id.contains(inst.argument_id)) {
      missing.push_back(inst.argument_id);
    }
    ordered.push_back(&inst);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = "generated ids missing from gold:";
    for (const std::string& id : missing) msg += " " + id;
    throw JoinError(msg, std::move(missing));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const GeneratedInstance* a, const GeneratedInstance* b) {
              return a->argument_id < b->argument_id;
            });

  EvalRun run;
  double bleu_total = 0.0;
  double f1_total = 0.0;
  double contr_total = 0.0;
  double stance_total = 0.0;
  for (const GeneratedInstance* inst : ordered) {
    const Argument& arg = *by_id.at(inst->argument_id);
    std::vector<std::string> references;
    for (const corpus::CounterCandidate& c : arg.counters) {
      references.push_back(c.text);
    }
    if (references.empty()) {
      throw PreconditionError("gold argument has no reference counters: " +
                              arg.id);
    }
    InstanceScore score;
    score.argument_id = inst->argument_id;
    score.bleu = bleu(inst->counter, references).value;
    score.semantic_f1 = semantic_f1(inst->counter, references, embedder);
    score.contrastiveness = stance::counter_contrastiveness(
        arg.conclusion, inst->counter, classifier);
    std::optional<std::string> target = extractor(arg.conclusion);
    if (target) {
      score.stance_diff = std::abs(scorer(inst->counter, *target) -
                                   scorer(arg.conclusion, *target));
      stance_total += *score.stance_diff;
    } else {
      ++run.report.stance_skipped;
    }
    bleu_total += score.bleu;
    f1_total += score.semantic_f1;
    contr_total += score.contrastiveness;
    run.instances.push_back(std::move(score));
  }
  std::size_t n = run.instances.size();
  std::size_t n_stance = n - run.report.stance_skipped;
  run.report.n_instances = n;
  run.report.bleu = bleu_total / static_cast<double>(n);
  run.report.semantic_f1 = f1_total / static_cast<double>(n);
  run.report.contrastiveness = contr_total / static_cast<double>(n);
  run.report.stance_diff =
      n_stance > 0 ? stance_total / static_cast<double>(n_stance) : 0.0;
  return run;
}

std::string to_string(AnalysisDimension dimension) {
  return dimension == AnalysisDimension::length ? "length" : "implicitness";
}

AnalysisDimension dimension_from_string(const std::string& s) {
  if (s == "length") return AnalysisDimension::length;
  if (s == "implicitness") return AnalysisDimension::implicitness;
  throw PreconditionError("unknown analysis dimension: " + s);
}

BinAnalysis analysis_report(std::span<const InstanceScore> instances,
                            std::span<const Argument> arguments,
                            AnalysisDimension dimension) {
  std::unordered_map<std::string, const Argument*> by_id;
  for (const Argument& arg : arguments) by_id[arg.id] = &arg;

  struct Row {
    double value;
    const InstanceScore* score;
  };
  std::vector<Row> rows;
  std::vector<std::string> missing;
  for (const InstanceScore& inst : instances) {
    auto it = by_id.find(inst.argument_id);
    if (it == by_id.end()) {
      missing.push_back(inst.argument_id);
      continue;
    }
    const Argument& arg = *it->second;
    double value;
    if (dimension == AnalysisDimension::length) {
      value = static_cast<double>(arg.token_length);
    } else {
      if (!arg.implicitness) {
        throw PreconditionError("argument lacks an implicitness score: " +
                                arg.id);
      }
      value = *arg.implicitness;
    }
    rows.push_back({value, &inst});
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = "instance ids missing from arguments:";
    for (const std::string& id : missing) msg += " " + id;
    throw JoinError(msg, std::move(missing));
  }
  // Deterministic under input permutation: order by (value, id) before
  // cutting quintiles.
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.score->argument_id < b.score->argument_id;
  });
  std::vector<double> values;
  values.reserve(rows.size());
  for (const Row& row : rows) values.push_back(row.value);
  std::array<std::vector<std::size_t>, 5> bins = corpus::quintile_split(values);

  BinAnalysis analysis;
  analysis.dimension = dimension;
  for (std::size_t b = 0; b < 5; ++b) {
    QuintileBin& bin = analysis.bins[b];
    bin.n = bins[b].size();
    double f1_total = 0.0;
    double contr_total = 0.0;
    bin.low = rows[bins[b].front()].value;
    bin.high = rows[bins[b].back()].value;
    for (std::size_t idx : bins[b]) {
      f1_total += rows[idx].score->semantic_f1;
      contr_total += rows[idx].score->contrastiveness;
    }
    bin.semantic_f1 = f1_total / static_cast<double>(bin.n);
    bin.contrastiveness = contr_total / static_cast<double>(bin.n);
  }
  return analysis;
}

void save_report(const std::filesystem::path& file, const EvalReport& report) {
  json blob{{"bleu", report.bleu},
            {"semantic_f1", report.semantic_f1},
            {"contrastiveness", report.contrastiveness},
            {"stance_diff", report.stance_diff},
            {"n_instances", report.n_instances},
            {"stance_skipped", report.stance_skipped}};
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << blob.dump(2) << '\n';
}

EvalReport load_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  json blob = json::parse(in);
  EvalReport report;
  report.bleu = blob.at("bleu").get<double>();
  report.semantic_f1 = blob.at("semantic_f1").get<double>();
  report.contrastiveness = blob.at("contrastiveness").get<double>();
  report.stance_diff = blob.at("stance_diff").get<double>();
  report.n_instances = blob.at("n_instances").get<std::size_t>();
  report.stance_skipped = blob.at("stance_skipped").get<std::size_t>();
  return report;
}

void save_instance_scores(const std::filesystem::path& file,
                          std::span<const InstanceScore> instances) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  for (const InstanceScore& inst : instances) {
    json row{{"argument_id", inst.argument_id},
             {"bleu", inst.bleu},
             {"semantic_f1", inst.semantic_f1},
             {"contrastiveness", inst.contrastiveness}};
    row["stance_diff"] = inst.stance_diff ? json(*inst.stance_diff) : json(nullptr);
    out << row.dump() << '\n';
  }
}

std::vector<InstanceScore> load_instance_scores(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::vector<InstanceScore> instances;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      json row = json::parse(line);
      InstanceScore inst;
      inst.argument_id = row.at("argument_id").get<std::string>();
      inst.bleu = row.at("bleu").get<double>();
      inst.semantic_f1 = row.at("semantic_f1").get<double>();
      inst.contrastiveness = row.at("contrastiveness").get<double>();
      if (row.contains("stance_diff") && !row["stance_diff"].is_null()) {
        inst.stance_diff = row["stance_diff"].get<double>();
      }
      instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return instances;
}

void save_bin_analysis_csv(const std::filesystem::path& file,
                           const BinAnalysis& analysis) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "dimension,bin_index,bin_low,bin_high,n,semantic_f1,contrastiveness\n";
  for (std::size_t b = 0; b < 5; ++b) {
    const QuintileBin& bin = analysis.bins[b];
    out << to_string(analysis.dimension) << ',' << b << ','
        << format_number(bin.low) << ',' << format_number(bin.high) << ','
        << bin.n << ',' << format_number(bin.semantic_f1) << ','
        << format_number(bin.contrastiveness) << '\n';
  }
}

void save_bin_analysis_json(const std::filesystem::path& file,
                            const BinAnalysis& analysis) {
  json bins = json::array();
  for (std::size_t b = 0; b < 5; ++b) {
    const QuintileBin& bin = analysis.bins[b];
    bins.push_back(json{{"bin_index", b},
                        {"bin_low", bin.low},
                        {"bin_high", bin.high},
                        {"n", bin.n},
                        {"semantic_f1", bin.semantic_f1},
                        {"contrastiveness", bin.contrastiveness}});
  }
  json blob{{"dimension", to_string(analysis.dimension)}, {"bins", bins}};
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << blob.dump(2) << '\n';
}

}  // namespace contra::eval
