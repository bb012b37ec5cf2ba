#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "contra/errors.hpp"
#include "contra/evaluation.hpp"
#include "contra/rng.hpp"
#include "contra/stance.hpp"
#include "synthetic.hpp"

using namespace contra;
using namespace contra::eval;
using corpus::Argument;
using corpus::Stance;
using stance::FunctionStanceClassifier;
using stance::StanceVerdict;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("contra_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> refs(std::initializer_list<const char*> texts) {
  return {texts.begin(), texts.end()};
}

FunctionStanceClassifier constant_con(double probability) {
  return FunctionStanceClassifier(
      [probability](const std::string&, const std::string&) {
        return StanceVerdict{Stance::con, probability};
      });
}

}  // namespace

TEST_CASE("bleu") {
  SUBCASE("identity scores 1.0") {
    CHECK(bleu("the cat sat down", refs({"the cat sat down"})).value == 1.0);
    CHECK(bleu("a b", refs({"a b"})).value == 1.0);
  }
  SUBCASE("token-disjoint candidate scores 0.0") {
    BleuScore s = bleu("x y z", refs({"a b c d"}));
    CHECK(s.value == 0.0);
    CHECK_FALSE(s.empty_candidate);
  }
  SUBCASE("the short-candidate worked case equals exp(-1/3)") {
    // p1 = 3/3 unsmoothed; orders 2-4 smoothed to 1; BP = exp(1 - 4/3)
    BleuScore s = bleu("the cat sat", refs({"the cat sat down"}));
    CHECK(s.value == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-9));
  }
  SUBCASE("max over references") {
    CHECK(bleu("the cat sat", refs({"x y z", "the cat sat"})).value == 1.0);
  }
  SUBCASE("empty candidate flags instead of erroring") {
    BleuScore s = bleu("   ", refs({"a b"}));
    CHECK(s.value == 0.0);
    CHECK(s.empty_candidate);
  }
  SUBCASE("empty reference collection is rejected") {
    CHECK_THROWS_AS(bleu("a b", {}), PreconditionError);
  }
  SUBCASE("bounded in [0,1] on random pairs") {
    std::mt19937_64 rng(107);
    for (int i = 0; i < 200; ++i) {
      std::string cand = synth::random_text(rng, 1, 12);
      std::vector<std::string> references{synth::random_text(rng, 1, 12),
                                          synth::random_text(rng, 1, 12)};
      double v = bleu(cand, references).value;
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("semantic_f1 with the one-hot embedder") {
  OneHotEmbedder onehot;
  CHECK(semantic_f1("a b c", refs({"a b c"}), onehot) == 1.0);
  CHECK(semantic_f1("x y", refs({"a b c"}), onehot) == 0.0);
  CHECK(semantic_f1("a b c", refs({"a b d"}), onehot) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  SUBCASE("token-multiset-identical texts score 1.0") {
    CHECK(semantic_f1("c a b", refs({"a b c"}), onehot) == 1.0);
    CHECK(semantic_f1("a a b", refs({"b a a"}), onehot) == 1.0);
  }
  SUBCASE("max over references") {
    CHECK(semantic_f1("a b c", refs({"x y z", "a b c"}), onehot) == 1.0);
  }
  SUBCASE("empty candidate scores 0") {
    CHECK(semantic_f1("", refs({"a b"}), onehot) == 0.0);
  }
  SUBCASE("empty reference collection is rejected") {
    CHECK_THROWS_AS(semantic_f1("a", {}, onehot), PreconditionError);
  }
  SUBCASE("bounded on random pairs") {
    std::mt19937_64 rng(109);
    for (int i = 0; i < 100; ++i) {
      double v = semantic_f1(synth::random_text(rng, 1, 10),
                             refs({"tax health school market"}), onehot);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("WordVectorEmbedder cosine similarity") {
  fs::path dir = temp_dir("eval_vectors");
  std::ofstream(dir / "vectors.json")
      << R"({"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [1.0, 1.0]})";
  WordVectorEmbedder emb = WordVectorEmbedder::load(dir / "vectors.json");
  CHECK(emb.similarity("a", "a") == doctest::Approx(1.0));
  CHECK(emb.similarity("a", "b") == doctest::Approx(0.0));
  CHECK(emb.similarity("a", "c") == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(emb.similarity("c", "a") == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(emb.similarity("a", "zzz") == 0.0);  // OOV
  CHECK(emb.similarity("zzz", "zzz") == 0.0);

  double f1 = semantic_f1("a", refs({"c"}), emb);
  CHECK(f1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("contrastiveness_metric averages per-pair counter scores") {
  SUBCASE("upper bound") {
    FunctionStanceClassifier all_con = constant_con(1.0);
    std::vector<CounterConclusionPair> pairs{{"k one.", "c1"}, {"k two.", "c2"}};
    CHECK(contrastiveness_metric(pairs, all_con) == 1.0);
  }
  SUBCASE("mixed fixture averages to 0.3") {
    FunctionStanceClassifier table(
        [](const std::string&, const std::string& sentence) {
          return sentence == "k one." ? StanceVerdict{Stance::con, 0.8}
                                      : StanceVerdict{Stance::pro, 0.2};
        });
    std::vector<CounterConclusionPair> pairs{{"k one.", "c1"}, {"k two.", "c2"}};
    CHECK(contrastiveness_metric(pairs, table) ==
          doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("empty dataset is rejected") {
    FunctionStanceClassifier any = constant_con(0.5);
    CHECK_THROWS_AS(contrastiveness_metric({}, any), PreconditionError);
  }
}

TEST_CASE("target_stance_metric") {
  TargetExtractor first_word = [](const std::string& conclusion) {
    auto tokens = text::tokenize(conclusion);
    return tokens.empty() ? std::optional<std::string>{}
                          : std::optional<std::string>{tokens.front()};
  };
  SUBCASE("opposed scores reach the upper bound 2.0") {
    StanceScorer scorer = [](const std::string& statement, const std::string&) {
      return statement == "the counter" ? -1.0 : 1.0;
    };
    std::vector<ConclusionCounter> one{{"the conclusion", "the counter"}};
    TargetStanceResult r = target_stance_metric(one, first_word, scorer);
    CHECK(r.value == 2.0);
    CHECK(r.n_scored == 1);
    CHECK(r.n_skipped == 0);
  }
  SUBCASE("identical scores give 0.0") {
    StanceScorer constant = [](const std::string&, const std::string&) {
      return 0.4;
    };
    std::vector<ConclusionCounter> one{{"c words", "k words"}};
    CHECK(target_stance_metric(one, first_word, constant).value == 0.0);
  }
  SUBCASE("extraction failures are skipped and tallied") {
    TargetExtractor picky = [](const std::string& conclusion)
        -> std::optional<std::string> {
      if (conclusion == "bad") return std::nullopt;
      return conclusion;
    };
    StanceScorer scorer = [](const std::string& statement, const std::string&) {
      return statement.size() > 4 ? 0.5 : -0.5;
    };
    std::vector<ConclusionCounter> instances{{"good", "long counter"},
                                             {"bad", "whatever"}};
    TargetStanceResult r = target_stance_metric(instances, picky, scorer);
    CHECK(r.n_scored == 1);
    CHECK(r.n_skipped == 1);
    CHECK(r.value == doctest::Approx(std::abs(0.5 - (-0.5))));
    SUBCASE("every instance skipped is an error") {
      std::vector<ConclusionCounter> all_bad{{"bad", "k"}, {"bad", "k2"}};
      CHECK_THROWS_AS(target_stance_metric(all_bad, picky, scorer), Error);
    }
  }
  SUBCASE("empty instance collection is rejected") {
    StanceScorer any = [](const std::string&, const std::string&) { return 0.0; };
    CHECK_THROWS_AS(target_stance_metric({}, first_word, any),
                    PreconditionError);
  }
}

TEST_CASE("default target extractor and stance scorer") {
  TargetExtractor extractor = concept_target_extractor();
  std::optional<std::string> target =
      extractor("meat production harms animals");
  REQUIRE(target.has_value());
  CHECK(*target == "meat production harms animals");  // single content run
  CHECK_FALSE(extractor("the of and").has_value());

  FunctionStanceClassifier fixture(
      [](const std::string&, const std::string& statement) {
        return statement == "pro text" ? StanceVerdict{Stance::pro, 0.7}
                                       : StanceVerdict{Stance::con, 0.9};
      });
  StanceScorer scorer = classifier_stance_scorer(fixture);
  CHECK(scorer("pro text", "t") == doctest::Approx(0.7));
  CHECK(scorer("con text", "t") == doctest::Approx(-0.9));
}

TEST_CASE("evaluate_run joins, scores, and aggregates by sorted id") {
  std::vector<Argument> gold = synth::topic_arguments(4, 1);
  OneHotEmbedder onehot;
  FunctionStanceClassifier classifier = constant_con(0.8);
  TargetExtractor extractor = concept_target_extractor();
  StanceScorer scorer = classifier_stance_scorer(classifier);

  std::vector<GeneratedInstance> generated;
  for (const Argument& arg : gold) {
    generated.push_back({arg.id, arg.conclusion, arg.counters[0].text});
  }

  SUBCASE("self-evaluation is perfect on the overlap metrics") {
    EvalRun run =
        evaluate_run(generated, gold, classifier, onehot, extractor, scorer);
    CHECK(run.report.n_instances == 4);
    CHECK(run.report.bleu == doctest::Approx(1.0));
    CHECK(run.report.semantic_f1 == doctest::Approx(1.0));
    CHECK(run.report.contrastiveness == doctest::Approx(0.8));
    CHECK(run.report.stance_skipped == 0);
    REQUIRE(run.instances.size() == 4);
    CHECK(std::is_sorted(run.instances.begin(), run.instances.end(),
                         [](const InstanceScore& a, const InstanceScore& b) {
                           return a.argument_id < b.argument_id;
                         }));
  }
  SUBCASE("aggregates equal the means of the instance scores") {
    EvalRun run =
        evaluate_run(generated, gold, classifier, onehot, extractor, scorer);
    double b = 0, f = 0, c = 0, s = 0;
    std::size_t scored = 0;
    for (const InstanceScore& inst : run.instances) {
      b += inst.bleu;
      f += inst.semantic_f1;
      c += inst.contrastiveness;
      if (inst.stance_diff) {
        s += *inst.stance_diff;
        ++scored;
      }
    }
    double n = static_cast<double>(run.instances.size());
    CHECK(run.report.bleu == doctest::Approx(b / n).epsilon(1e-12));
    CHECK(run.report.semantic_f1 == doctest::Approx(f / n).epsilon(1e-12));
    CHECK(run.report.contrastiveness == doctest::Approx(c / n).epsilon(1e-12));
    REQUIRE(scored > 0);
    CHECK(run.report.stance_diff ==
          doctest::Approx(s / static_cast<double>(scored)).epsilon(1e-12));
  }
  SUBCASE("input permutation changes nothing") {
    EvalRun base =
        evaluate_run(generated, gold, classifier, onehot, extractor, scorer);
    std::vector<GeneratedInstance> shuffled = generated;
    std::reverse(shuffled.begin(), shuffled.end());
    std::vector<Argument> gold_shuffled = gold;
    std::reverse(gold_shuffled.begin(), gold_shuffled.end());
    EvalRun moved = evaluate_run(shuffled, gold_shuffled, classifier, onehot,
                                 extractor, scorer);
    CHECK(moved.report.bleu == base.report.bleu);
    CHECK(moved.report.semantic_f1 == base.report.semantic_f1);
    CHECK(moved.report.contrastiveness == base.report.contrastiveness);
    CHECK(moved.report.stance_diff == base.report.stance_diff);
    REQUIRE(moved.instances.size() == base.instances.size());
    for (std::size_t i = 0; i < base.instances.size(); ++i) {
      CHECK(moved.instances[i].argument_id == base.instances[i].argument_id);
      CHECK(moved.instances[i].bleu == base.instances[i].bleu);
      CHECK(moved.instances[i].semantic_f1 == base.instances[i].semantic_f1);
      CHECK(moved.instances[i].contrastiveness ==
            base.instances[i].contrastiveness);
      CHECK(moved.instances[i].stance_diff == base.instances[i].stance_diff);
    }
  }
  SUBCASE("unknown generated ids raise a join error listing them") {
    std::vector<GeneratedInstance> bad = generated;
    bad.push_back({"zz_missing", "c", "k"});
    bad.push_back({"aa_missing", "c", "k"});
    try {
      evaluate_run(bad, gold, classifier, onehot, extractor, scorer);
      FAIL("unreachable");
    } catch (const JoinError& e) {
      REQUIRE(e.missing_ids().size() == 2);
      CHECK(e.missing_ids()[0] == "aa_missing");  // sorted
      CHECK(e.missing_ids()[1] == "zz_missing");
    }
  }
  SUBCASE("empty generated set is a join error") {
    CHECK_THROWS_AS(
        evaluate_run({}, gold, classifier, onehot, extractor, scorer),
        JoinError);
  }
  SUBCASE("duplicate generated ids are rejected") {
    std::vector<GeneratedInstance> dup = generated;
    dup.push_back(generated.front());
    CHECK_THROWS_AS(
        evaluate_run(dup, gold, classifier, onehot, extractor, scorer),
        PreconditionError);
  }
  SUBCASE("gold arguments must carry reference counters") {
    std::vector<Argument> bare = gold;
    bare[0].counters.clear();
    CHECK_THROWS_AS(
        evaluate_run(generated, bare, classifier, onehot, extractor, scorer),
        PreconditionError);
  }
}

TEST_CASE("analysis_report cuts quintiles over the chosen dimension") {
  CHECK(to_string(AnalysisDimension::length) == "length");
  CHECK(to_string(AnalysisDimension::implicitness) == "implicitness");
  CHECK(dimension_from_string("length") == AnalysisDimension::length);
  CHECK(dimension_from_string("implicitness") == AnalysisDimension::implicitness);
  CHECK_THROWS_AS(dimension_from_string("quality"), PreconditionError);

  auto make_fixture = [](int n) {
    std::vector<Argument> args;
    std::vector<InstanceScore> scores;
    for (int i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "a%04d", i);
      Argument arg;
      arg.id = id;
      arg.conclusion = "c";
      arg.premises = "p";
      arg.counters.push_back({"k", std::nullopt});
      arg.token_length = i + 1;
      arg.implicitness = static_cast<double>(i) / n;
      args.push_back(arg);
      InstanceScore score;
      score.argument_id = id;
      score.semantic_f1 = 0.5;
      score.contrastiveness = static_cast<double>(i) / n;  // rises with length
      scores.push_back(score);
    }
    return std::pair(args, scores);
  };

  SUBCASE("constant metric gives equal bin means") {
    auto [args, scores] = make_fixture(10);
    BinAnalysis analysis =
        analysis_report(scores, args, AnalysisDimension::length);
    CHECK(analysis.dimension == AnalysisDimension::length);
    std::size_t total = 0;
    for (const QuintileBin& bin : analysis.bins) {
      CHECK(bin.n == 2);
      total += bin.n;
      CHECK(bin.semantic_f1 == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(total == scores.size());
  }
  SUBCASE("a metric monotone in the dimension gives ordered bin means") {
    for (AnalysisDimension dim :
         {AnalysisDimension::length, AnalysisDimension::implicitness}) {
      auto [args, scores] = make_fixture(25);
      BinAnalysis analysis = analysis_report(scores, args, dim);
      double prev_mean = -1e9;
      double prev_high = -1e9;
      for (const QuintileBin& bin : analysis.bins) {
        CHECK(bin.contrastiveness >= prev_mean);
        prev_mean = bin.contrastiveness;
        CHECK(bin.low >= prev_high);  // ranges ordered, non-overlapping
        CHECK(bin.high >= bin.low);
        prev_high = bin.high;
      }
    }
  }
  SUBCASE("unresolvable instance ids raise a join error") {
    auto [args, scores] = make_fixture(10);
    scores.push_back(scores.back());
    scores.back().argument_id = "phantom";
    CHECK_THROWS_AS(analysis_report(scores, args, AnalysisDimension::length),
                    JoinError);
  }
  SUBCASE("missing implicitness values are rejected") {
    auto [args, scores] = make_fixture(10);
    args[3].implicitness = std::nullopt;
    CHECK_THROWS_AS(
        analysis_report(scores, args, AnalysisDimension::implicitness),
        PreconditionError);
    CHECK_NOTHROW(analysis_report(scores, args, AnalysisDimension::length));
  }
}

TEST_CASE("report and instance-score persistence round-trips") {
  fs::path dir = temp_dir("eval_io");
  EvalReport report;
  report.bleu = 0.25;
  report.semantic_f1 = 0.5;
  report.contrastiveness = 0.1;
  report.stance_diff = 0.75;
  report.n_instances = 7;
  report.stance_skipped = 2;
  save_report(dir / "report.json", report);
  EvalReport loaded = load_report(dir / "report.json");
  CHECK(loaded.bleu == report.bleu);
  CHECK(loaded.semantic_f1 == report.semantic_f1);
  CHECK(loaded.contrastiveness == report.contrastiveness);
  CHECK(loaded.stance_diff == report.stance_diff);
  CHECK(loaded.n_instances == report.n_instances);
  CHECK(loaded.stance_skipped == report.stance_skipped);

  std::vector<InstanceScore> scores{{"a1", 0.5, 0.6, 0.7, 0.4},
                                    {"a2", 0.1, 0.2, -0.3, std::nullopt}};
  save_instance_scores(dir / "scores.jsonl", scores);
  std::vector<InstanceScore> loaded_scores =
      load_instance_scores(dir / "scores.jsonl");
  REQUIRE(loaded_scores.size() == 2);
  CHECK(loaded_scores[0].argument_id == "a1");
  CHECK(loaded_scores[0].bleu == 0.5);
  CHECK(loaded_scores[0].stance_diff == 0.4);
  CHECK(loaded_scores[1].contrastiveness == -0.3);
  CHECK_FALSE(loaded_scores[1].stance_diff.has_value());
}

TEST_CASE("bin analysis exports") {
  fs::path dir = temp_dir("eval_bins");
  BinAnalysis analysis;
  analysis.dimension = AnalysisDimension::implicitness;
  for (std::size_t b = 0; b < 5; ++b) {
    analysis.bins[b] = {0.1 * static_cast<double>(b),
                        0.1 * static_cast<double>(b) + 0.05, 10 + b,
                        0.5 + 0.01 * static_cast<double>(b),
                        -0.2 + 0.1 * static_cast<double>(b)};
  }
  save_bin_analysis_csv(dir / "analysis.csv", analysis);
  std::ifstream csv(dir / "analysis.csv");
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "dimension,bin_index,bin_low,bin_high,n,semantic_f1,contrastiveness");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    CHECK(line.rfind("implicitness,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 5);
  CHECK_NOTHROW(save_bin_analysis_json(dir / "analysis.json", analysis));
}
