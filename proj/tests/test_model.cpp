#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <doctest.h>

#include "contra/errors.hpp"
#include "contra/generation.hpp"
#include "contra/model.hpp"
#include "contra/rng.hpp"
#include "contra/vocab.hpp"

using namespace contra;
using namespace contra::gen;

namespace {

namespace fs = std::filesystem;

Vocab small_vocab() {
  Vocab v;
  for (const char* w : {"a", "b", "c"}) v.add(w);
  return v;
}

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("contra_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Teacher-forced per-position logits, for comparing against sequence_loss.
std::vector<std::vector<double>> forced_logits(const Seq2SeqModel& model,
                                               int decoder,
                                               std::span<const int> premises,
                                               std::span<const int> target) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < target.size(); ++t) {
    rows.push_back(
        model.decoder_step(decoder, premises, target.subspan(0, t)));
  }
  return rows;
}

}  // namespace

TEST_CASE("joint mode strings and decoder counts") {
  CHECK(to_string(JointMode::oneseq) == "oneseq");
  CHECK(to_string(JointMode::twodec) == "twodec");
  CHECK(joint_mode_from_string("oneseq") == JointMode::oneseq);
  CHECK(joint_mode_from_string("twodec") == JointMode::twodec);
  CHECK_THROWS_AS(joint_mode_from_string("threedec"), PreconditionError);
  CHECK(decoder_count(JointMode::oneseq) == 1);
  CHECK(decoder_count(JointMode::twodec) == 2);
  CHECK(kConclusionDecoder == 0);
  CHECK(kCounterDecoder == 1);
}

TEST_CASE("TabularModel maps probabilities to finite log-space logits") {
  Vocab v = small_vocab();
  TabularModel model(v, JointMode::oneseq);
  int a = v.id("a");

  SUBCASE("registered distribution") {
    model.set_distribution(0, {}, model.point_mass(a));
    std::vector<double> logits = model.decoder_step(0, {}, {});
    for (int t = 0; t < v.size(); ++t) {
      if (t == a) {
        CHECK(logits[static_cast<std::size_t>(t)] == 0.0);  // log 1
      } else {
        CHECK(logits[static_cast<std::size_t>(t)] == -1e9);
      }
      CHECK(std::isfinite(logits[static_cast<std::size_t>(t)]));
    }
  }
  SUBCASE("unlisted prefixes fall back to uniform") {
    std::vector<int> prefix{a, a};
    std::vector<double> logits = model.decoder_step(0, {}, prefix);
    for (double l : logits) {
      CHECK(l == doctest::Approx(std::log(1.0 / v.size())));
    }
  }
  SUBCASE("fallback override") {
    std::vector<double> probs(static_cast<std::size_t>(v.size()), 0.0);
    probs[static_cast<std::size_t>(v.eos())] = 1.0;
    model.set_fallback(0, probs);
    std::vector<double> logits = model.decoder_step(0, {}, std::vector<int>{a});
    CHECK(logits[static_cast<std::size_t>(v.eos())] == 0.0);
  }
  SUBCASE("set_sequence chains to <eos>") {
    int b = v.id("b");
    std::vector<int> seq{a, b};
    model.set_sequence(0, seq);
    auto argmax = [](const std::vector<double>& l) {
      return static_cast<int>(std::distance(
          l.begin(), std::max_element(l.begin(), l.end())));
    };
    CHECK(argmax(model.decoder_step(0, {}, {})) == a);
    CHECK(argmax(model.decoder_step(0, {}, std::vector<int>{a})) == b);
    CHECK(argmax(model.decoder_step(0, {}, seq)) == v.eos());
  }
  SUBCASE("distribution validation") {
    CHECK_THROWS_AS(model.set_distribution(0, {}, {0.5, 0.5}),
                    PreconditionError);  // wrong size
    std::vector<double> negative(static_cast<std::size_t>(v.size()), 0.0);
    negative[0] = 1.2;
    negative[1] = -0.2;
    CHECK_THROWS_AS(model.set_distribution(0, {}, negative), PreconditionError);
    std::vector<double> short_sum(static_cast<std::size_t>(v.size()),
                                  1.0 / (v.size() + 1));
    CHECK_THROWS_AS(model.set_fallback(0, short_sum), PreconditionError);
  }
}

TEST_CASE("ToyNeuralModel parameter counts") {
  Vocab bare;  // exactly the five special tokens
  REQUIRE(bare.size() == 5);
  ToyNeuralModel twodec(bare, JointMode::twodec, 2, 1);
  CHECK(twodec.parameter_count() == 90);
  ToyNeuralModel oneseq(bare, JointMode::oneseq, 2, 1);
  CHECK(oneseq.parameter_count() == 50);
}

TEST_CASE("ToyNeuralModel logits are finite and vocabulary-sized") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::twodec, 3, 7);
  std::mt19937_64 rng(2);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<int> premises;
    for (int i = 0; i < 4; ++i) {
      premises.push_back(
          static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(v.size()))));
    }
    std::vector<int> prefix;
    for (int i = 0; i < static_cast<int>(uniform_below(rng, 4)); ++i) {
      prefix.push_back(
          static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(v.size()))));
    }
    for (int dec = 0; dec < model.num_decoders(); ++dec) {
      std::vector<double> logits = model.decoder_step(dec, premises, prefix);
      REQUIRE(logits.size() == static_cast<std::size_t>(v.size()));
      for (double l : logits) CHECK(std::isfinite(l));
    }
  }
  CHECK_THROWS_AS(model.decoder_step(0, {}, {}), PreconditionError);
}

TEST_CASE("sequence_loss equals the teacher-forced lm_loss") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::twodec, 2, 11);
  std::vector<int> premises{v.id("a"), v.id("b")};
  std::vector<int> target{v.id("c"), v.id("a"), v.eos()};
  for (int dec = 0; dec < 2; ++dec) {
    double direct = model.sequence_loss(dec, premises, target);
    LmLoss via_rows = lm_loss(forced_logits(model, dec, premises, target), target);
    CHECK(direct == doctest::Approx(via_rows.total).epsilon(1e-12));
  }
  CHECK_THROWS_AS(model.sequence_loss(0, premises, {}), PreconditionError);
}

TEST_CASE("analytic gradients match central finite differences") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::twodec, 2, 13);
  std::vector<int> premises{v.id("a"), v.id("b"), v.id("a")};
  std::vector<int> target{v.id("b"), v.id("c"), v.eos()};
  const int dec = kCounterDecoder;

  ToyGradients grads = model.zero_gradients();
  double loss = model.accumulate_gradients(dec, premises, target, 1.0, grads);
  CHECK(loss == doctest::Approx(model.sequence_loss(dec, premises, target)));

  const double h = 1e-6;
  SUBCASE("encoder parameters") {
    std::vector<double> params = model.encoder_parameters();
    for (std::size_t i = 0; i < params.size(); i += 3) {
      std::vector<double> bumped = params;
      bumped[i] += h;
      model.set_encoder_parameters(bumped);
      double up = model.sequence_loss(dec, premises, target);
      bumped[i] = params[i] - h;
      model.set_encoder_parameters(bumped);
      double down = model.sequence_loss(dec, premises, target);
      model.set_encoder_parameters(params);
      double numeric = (up - down) / (2 * h);
      CHECK(grads.encoder[i] == doctest::Approx(numeric).epsilon(1e-4));
    }
  }
  SUBCASE("decoder parameters") {
    std::vector<double> params = model.decoder_parameters(dec);
    for (std::size_t i = 0; i < params.size(); i += 7) {
      std::vector<double> bumped = params;
      bumped[i] += h;
      model.set_decoder_parameters(dec, bumped);
      double up = model.sequence_loss(dec, premises, target);
      bumped[i] = params[i] - h;
      model.set_decoder_parameters(dec, bumped);
      double down = model.sequence_loss(dec, premises, target);
      model.set_decoder_parameters(dec, params);
      double numeric = (up - down) / (2 * h);
      CHECK(grads.decoders[static_cast<std::size_t>(dec)][i] ==
            doctest::Approx(numeric).epsilon(1e-4));
    }
  }
  SUBCASE("the other decoder's gradient stays zero") {
    for (double g : grads.decoders[kConclusionDecoder]) CHECK(g == 0.0);
  }
  SUBCASE("weight scales the accumulated gradient linearly") {
    ToyGradients doubled = model.zero_gradients();
    model.accumulate_gradients(dec, premises, target, 2.0, doubled);
    for (std::size_t i = 0; i < grads.encoder.size(); ++i) {
      CHECK(doubled.encoder[i] == doctest::Approx(2.0 * grads.encoder[i]));
    }
  }
}

TEST_CASE("multitask gradients combine the per-decoder backward passes") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::twodec, 2, 17);
  std::vector<int> premises{v.id("c"), v.id("b")};
  std::vector<int> conclusion{v.id("a"), v.eos()};
  std::vector<int> counter{v.id("b"), v.id("b"), v.eos()};

  ToyGradients combined = model.zero_gradients();
  auto [loss_a, loss_b] = model.accumulate_multitask_gradients(
      premises, conclusion, counter, 0.7, 0.3, combined);
  CHECK(loss_a ==
        doctest::Approx(model.sequence_loss(kConclusionDecoder, premises, conclusion)));
  CHECK(loss_b ==
        doctest::Approx(model.sequence_loss(kCounterDecoder, premises, counter)));

  ToyGradients ga = model.zero_gradients();
  model.accumulate_gradients(kConclusionDecoder, premises, conclusion, 1.0, ga);
  ToyGradients gb = model.zero_gradients();
  model.accumulate_gradients(kCounterDecoder, premises, counter, 1.0, gb);
  for (std::size_t i = 0; i < combined.encoder.size(); ++i) {
    CHECK(combined.encoder[i] ==
          doctest::Approx(0.7 * ga.encoder[i] + 0.3 * gb.encoder[i])
              .epsilon(1e-12));
  }

  ToyNeuralModel oneseq(v, JointMode::oneseq, 2, 17);
  ToyGradients g1 = oneseq.zero_gradients();
  CHECK_THROWS_AS(oneseq.accumulate_multitask_gradients(premises, conclusion,
                                                        counter, 0.7, 0.3, g1),
                  PreconditionError);
}

TEST_CASE("apply_update descends the loss") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::oneseq, 2, 19);
  std::vector<int> premises{v.id("a")};
  std::vector<int> target{v.id("b"), v.eos()};
  double before = model.sequence_loss(0, premises, target);
  for (int step = 0; step < 5; ++step) {
    ToyGradients grads = model.zero_gradients();
    model.accumulate_gradients(0, premises, target, 1.0, grads);
    model.apply_update(grads, 0.1);
  }
  CHECK(model.sequence_loss(0, premises, target) < before);
}

TEST_CASE("snapshot/restore round-trips every parameter") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::twodec, 2, 23);
  std::vector<int> premises{v.id("a"), v.id("c")};
  std::vector<double> before = model.decoder_step(1, premises, {});
  std::vector<double> state = model.snapshot();
  CHECK(state.size() == model.parameter_count());

  ToyGradients grads = model.zero_gradients();
  model.accumulate_gradients(1, premises, std::vector<int>{v.id("b"), v.eos()},
                             1.0, grads);
  model.apply_update(grads, 0.5);
  CHECK(model.decoder_step(1, premises, {}) != before);

  model.restore(state);
  CHECK(model.decoder_step(1, premises, {}) == before);
  CHECK_THROWS_AS(model.restore(std::vector<double>{1.0}), PreconditionError);
}

TEST_CASE("toy model save/load round-trip") {
  Vocab v = small_vocab();
  ToyNeuralModel model(v, JointMode::twodec, 3, 29);
  fs::path dir = temp_dir("model_io");
  model.save(dir);
  auto loaded = ToyNeuralModel::load(dir, JointMode::twodec);
  REQUIRE(loaded != nullptr);
  CHECK(loaded->vocab().size() == v.size());
  CHECK(loaded->embed_dim() == 3);
  std::vector<int> premises{v.id("b"), v.id("c")};
  std::vector<int> prefix{v.id("a")};
  for (int dec = 0; dec < 2; ++dec) {
    CHECK(loaded->decoder_step(dec, premises, prefix) ==
          model.decoder_step(dec, premises, prefix));
  }
  CHECK_THROWS_AS(ToyNeuralModel::load(dir, JointMode::oneseq), Error);
  CHECK_THROWS_AS(ToyNeuralModel::load(dir / "missing", JointMode::twodec), Error);
}
