#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "iqlab/estimator.hpp"
#include "iqlab/rng.hpp"
#include "support/finite_diff.hpp"
#include "support/scalar_estimator.hpp"

using namespace iqlab;

namespace {

IqModelConfig small_config(bool bidirectional, bool attention, std::uint64_t seed) {
  IqModelConfig config;
  config.hidden_size = 6;
  config.attention_dim = 5;
  config.bidirectional = bidirectional;
  config.use_attention = attention;
  config.seed = seed;
  return config;
}

std::vector<ExchangeInput> random_prefix(int t, Rng& rng) {
  std::vector<ExchangeInput> prefix(t);
  for (ExchangeInput& e : prefix) {
    const int status = rng.uniform_int(0, 2);
    e = {};
    e[status] = 1.0;
    e[3] = status == 0 ? rng.uniform() : 0.0;
    e[4] = rng.bernoulli(0.2) ? 1.0 : 0.0;
    const int activity = rng.uniform_int(0, 1);
    e[5 + activity] = 1.0;
    e[7] = rng.bernoulli(0.3) ? 1.0 : 0.0;
  }
  return prefix;
}

void zero_all(IqModelParams& params) {
  for (ad::Parameter* p : params.all_parameters()) p->value.fill(0.0);
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("all-zero parameters give the uniform class distribution") {
  for (const bool attention : {false, true}) {
    IqModelParams params = init_iq_model(small_config(true, attention, 1));
    zero_all(params);
    Rng rng(2);
    const Prediction pred = forward(params, random_prefix(4, rng));
    for (double p : pred.probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("attention over a single exchange is the trivial weight") {
  IqModelParams params = init_iq_model(small_config(true, true, 3));
  Rng rng(4);
  const Prediction pred = forward(params, random_prefix(1, rng));
  REQUIRE(pred.attention.size() == 1);
  CHECK(pred.attention[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention weights are a distribution over the prefix") {
  IqModelParams params = init_iq_model(small_config(true, true, 5));
  Rng rng(6);
  for (int t : {2, 5, 9}) {
    const Prediction pred = forward(params, random_prefix(t, rng));
    REQUIRE(static_cast<int>(pred.attention.size()) == t);
    double total = 0.0;
    for (double a : pred.attention) {
      CHECK(a >= 0.0);
      total += a;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("graph forward matches the straight-line scalar oracle") {
  Rng rng(7);
  for (const bool bidirectional : {false, true}) {
    for (const bool attention : {false, true}) {
      IqModelParams params =
          init_iq_model(small_config(bidirectional, attention, 11 + attention));
      for (int t : {1, 4, 7}) {
        const std::vector<ExchangeInput> prefix = random_prefix(t, rng);
        const Prediction graph = forward(params, prefix);
        const testing::ScalarForward scalar = testing::scalar_forward(params, prefix);
        CAPTURE(bidirectional);
        CAPTURE(attention);
        CAPTURE(t);
        for (int c = 0; c < kNumIqClasses; ++c)
          CHECK(graph.probs[c] == doctest::Approx(scalar.probs[c]).epsilon(1e-10));
        if (attention) {
          REQUIRE(graph.attention.size() == scalar.attention.size());
          for (std::size_t i = 0; i < graph.attention.size(); ++i)
            CHECK(graph.attention[i] ==
                  doctest::Approx(scalar.attention[i]).epsilon(1e-10));
        }
      }
    }
  }
}

TEST_CASE("unidirectional hidden state has hidden_size dimensions") {
  const IqModelConfig uni = small_config(false, false, 1);
  CHECK(uni.hidden_dim() == uni.hidden_size);
  const IqModelConfig bi = small_config(true, false, 1);
  CHECK(bi.hidden_dim() == 2 * bi.hidden_size);
  IqModelParams params = init_iq_model(uni);
  CHECK_FALSE(params.backward_cell.has_value());
  CHECK(params.w_out.value.rows == uni.hidden_size);
}

TEST_CASE("empty sub-dialogue is a contract error") {
  IqModelParams params = init_iq_model(small_config(true, true, 1));
  const std::vector<ExchangeInput> empty;
  CHECK_THROWS_AS(forward(params, empty), ContractError);
}

TEST_CASE("argmax label breaks ties toward the lower label") {
  const std::vector<double> clear = {0.1, 0.1, 0.6, 0.1, 0.1};
  CHECK(argmax_label(clear) == 3);
  const std::vector<double> tie = {0.1, 0.35, 0.1, 0.35, 0.1};
  CHECK(argmax_label(tie) == 2);
  const std::vector<double> uniform = {0.2, 0.2, 0.2, 0.2, 0.2};
  CHECK(argmax_label(uniform) == 1);
}

TEST_CASE("zero-parameter model predicts label 1 everywhere") {
  IqModelParams params = init_iq_model(small_config(true, true, 1));
  zero_all(params);
  const Corpus corpus = generate_corpus(3, 9);
  for (const Dialogue& d : corpus.dialogues)
    for (int t = 1; t <= d.length(); ++t) CHECK(predict_iq(params, d, t) == 1);
}

TEST_CASE("prediction is causal in the turn index") {
  IqModelParams params = init_iq_model(small_config(true, true, 13));
  Corpus corpus = generate_corpus(4, 15);
  for (Dialogue& d : corpus.dialogues) {
    if (d.length() < 5) continue;
    const int t = d.length() / 2;
    const int before = predict_iq(params, d, t);
    for (int i = t; i < d.length(); ++i) {
      d.exchanges[i].asr_status = AsrStatus::kNoInput;
      d.exchanges[i].asr_confidence = 0.0;
    }
    CHECK(predict_iq(params, d, t) == before);
  }
}

TEST_CASE("turn index out of range is a contract error") {
  IqModelParams params = init_iq_model(small_config(false, false, 1));
  const Corpus corpus = generate_corpus(1, 5);
  CHECK_THROWS_AS(predict_iq(params, corpus.dialogues[0], 0), ContractError);
  CHECK_THROWS_AS(
      predict_iq(params, corpus.dialogues[0], corpus.dialogues[0].length() + 1),
      ContractError);
}

TEST_CASE("full loss gradient passes finite differences for every variant") {
  Rng rng(21);
  for (const bool bidirectional : {false, true}) {
    for (const bool attention : {false, true}) {
      IqModelConfig config = small_config(bidirectional, attention, 31);
      config.hidden_size = 4;
      config.attention_dim = 3;
      IqModelParams params = init_iq_model(config);
      const std::vector<ExchangeInput> prefix = random_prefix(5, rng);
      auto build = [&](ad::Tape& tape) {
        const ForwardGraph g = build_forward(tape, params, prefix);
        return tape.cross_entropy(g.logits, 2);
      };
      const auto result = testing::check_gradients(build, params.all_parameters());
      CAPTURE(bidirectional);
      CAPTURE(attention);
      INFO("worst at " << result.worst_location);
      CHECK(result.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  GeneratorProfile profile;
  profile.target_turns = 6.0;
  const Corpus corpus = generate_corpus(10, 17, profile);
  IqModelConfig config = small_config(true, true, 29);
  auto run = [&]() {
    auto [params, result] = train_iq_model(corpus, config, 2);
    std::vector<double> values;
    for (ad::Parameter* p : params.all_parameters())
      values.insert(values.end(), p->value.a.begin(), p->value.a.end());
    return values;
  };
  CHECK(run() == run());
}

TEST_CASE("training reduces the loss on a learnable corpus") {
  GeneratorProfile profile;
  profile.target_turns = 8.0;
  const Corpus corpus = generate_corpus(30, 19, profile);
  IqModelConfig config = small_config(true, true, 37);
  config.hidden_size = 8;
  auto [params, result] = train_iq_model(corpus, config, 12);
  REQUIRE(result.epoch_loss.size() == 12);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
}

TEST_CASE("validation tracking reverts to the best epoch") {
  GeneratorProfile profile;
  profile.target_turns = 6.0;
  const Corpus corpus = generate_corpus(14, 23, profile);
  const std::vector<PrefixSample> samples = all_prefix_samples(corpus);
  std::vector<PrefixSample> fit, val;
  for (const PrefixSample& s : samples)
    (s.dialogue_index < 11 ? fit : val).push_back(s);
  IqModelParams params = init_iq_model(small_config(true, false, 41));
  const TrainResult result = train(params, corpus, fit, 4, val);
  CHECK(result.best_epoch >= 1);
  CHECK(result.best_epoch <= 4);
  REQUIRE(result.validation_uar.size() == 4);
  // The restored parameters must reproduce the best validation score.
  std::vector<LabelPair> pairs;
  for (const PrefixSample& s : val) {
    const Dialogue& d = corpus.dialogues[s.dialogue_index];
    pairs.emplace_back(d.exchanges[s.t - 1].iq_label, predict_iq(params, d, s.t));
  }
  const double best =
      *std::max_element(result.validation_uar.begin(), result.validation_uar.end());
  CHECK(uar(pairs) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("neural checkpoint round-trips bit-exactly") {
  const std::string path = "/tmp/iqlab_test_model.bin";
  GeneratorProfile profile;
  profile.target_turns = 5.0;
  const Corpus corpus = generate_corpus(6, 43, profile);
  auto [params, result] = train_iq_model(corpus, small_config(true, true, 47), 2);
  save_model(params, path);
  IqModelParams loaded = load_iq_model(path);
  Rng rng(3);
  for (int t : {1, 3, 6}) {
    const std::vector<ExchangeInput> prefix = random_prefix(t, rng);
    const Prediction a = forward(params, prefix);
    const Prediction b = forward(loaded, prefix);
    CHECK(a.probs == b.probs);  // bit-exact
  }
}

TEST_CASE("corrupted model header is rejected") {
  const std::string path = "/tmp/iqlab_test_corrupt.bin";
  std::ofstream(path) << "definitely not a model";
  CHECK_THROWS_AS(load_iq_model(path), ValidationError);
}

TEST_CASE("loading the wrong variant is an explicit mismatch error") {
  const std::string path = "/tmp/iqlab_test_variant.bin";
  const Corpus corpus = generate_corpus(5, 51);
  save_model(train_svm_baseline(corpus), path);
  CHECK_THROWS_WITH_AS(load_iq_model(path), doctest::Contains("variant mismatch"),
                       ValidationError);
  // And the svm loader accepts it.
  const SvmBaselineParams svm = load_svm_model(path);
  CHECK_FALSE(svm.degenerate);
}

TEST_CASE("svm separates a linearly separable two-class toy set") {
  // Low-confidence failing dialogues get label 1, clean ones label 5.
  Corpus corpus;
  for (int i = 0; i < 20; ++i) {
    Dialogue d;
    d.id = "toy_" + std::to_string(i);
    const bool good = i % 2 == 0;
    for (int t = 1; t <= 4; ++t) {
      Exchange e;
      e.turn_index = t;
      e.asr_status = good ? AsrStatus::kSuccess : AsrStatus::kNoMatch;
      e.asr_confidence = good ? 0.9 : 0.0;
      e.activity_type = ActivityType::kQuestion;
      e.iq_label = good ? 5 : 1;
      d.exchanges.push_back(e);
    }
    corpus.dialogues.push_back(d);
  }
  const SvmBaselineParams params = train_svm_baseline(corpus);
  int correct = 0, total = 0;
  for (const Dialogue& d : corpus.dialogues)
    for (int t = 1; t <= d.length(); ++t) {
      ++total;
      if (predict_svm(params, d, t) == d.exchanges[t - 1].iq_label) ++correct;
    }
  CHECK(correct == total);
}

TEST_CASE("svm on identical features predicts a constant") {
  Corpus corpus;
  for (int i = 0; i < 6; ++i) {
    Dialogue d;
    d.id = "const_" + std::to_string(i);
    Exchange e;
    e.turn_index = 1;
    e.asr_status = AsrStatus::kSuccess;
    e.asr_confidence = 0.5;
    e.iq_label = i < 3 ? 2 : 4;  // labels differ, features do not
    d.exchanges.push_back(e);
    corpus.dialogues.push_back(d);
  }
  const SvmBaselineParams params = train_svm_baseline(corpus);
  const int first = predict_svm(params, corpus.dialogues[0], 1);
  for (const Dialogue& d : corpus.dialogues) CHECK(predict_svm(params, d, 1) == first);
}

TEST_CASE("degenerate single-class training yields a constant classifier") {
  Corpus corpus = generate_corpus(5, 53);
  for (Dialogue& d : corpus.dialogues)
    for (Exchange& e : d.exchanges) e.iq_label = 4;
  const SvmBaselineParams params = train_svm_baseline(corpus);
  CHECK(params.degenerate);
  CHECK(predict_svm(params, corpus.dialogues[0], 1) == 4);
}

TEST_CASE("svm prediction uses parameters only, not the training set") {
  const Corpus corpus = generate_corpus(15, 57);
  const SvmBaselineParams params = train_svm_baseline(corpus);
  const std::string path = "/tmp/iqlab_test_svm.bin";
  save_model(params, path);
  const SvmBaselineParams loaded = load_svm_model(path);
  for (const Dialogue& d : corpus.dialogues)
    for (int t = 1; t <= d.length(); ++t)
      CHECK(predict_svm(params, d, t) == predict_svm(loaded, d, t));
}

}  // TEST_SUITE
