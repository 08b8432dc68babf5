#include <doctest.h>

#include <cmath>
#include <sstream>

#include "iqlab/runner.hpp"

using namespace iqlab;

TEST_SUITE("runner") {

TEST_CASE("welch t-test sanity") {
  const std::vector<double> a = {1.0, 1.1, 0.9, 1.05};
  CHECK(welch_t_test_p(a, a) == doctest::Approx(1.0));
  const std::vector<double> b = {5.0, 5.1, 4.9, 5.05};
  CHECK(welch_t_test_p(a, b) < 0.001);
  const std::vector<double> c = {1.02, 0.97, 1.08, 0.95};
  CHECK(welch_t_test_p(a, c) > 0.3);
}

TEST_CASE("mann-whitney sanity") {
  std::vector<double> a, b;
  for (int i = 0; i < 50; ++i) {
    a.push_back(i % 5);
    b.push_back(i % 5);
  }
  CHECK(mann_whitney_u_p(a, b) > 0.9);
  std::vector<double> high;
  for (int i = 0; i < 50; ++i) high.push_back(3 + i % 3);
  CHECK(mann_whitney_u_p(a, high) < 0.001);
  // all tied
  const std::vector<double> flat_a = {2, 2, 2}, flat_b = {2, 2};
  CHECK(mann_whitney_u_p(flat_a, flat_b) == 1.0);
}

TEST_CASE("estimator factory seeds are reproducible per training subset") {
  const Corpus corpus = generate_corpus(12, 3);
  EstimatorBenchmarkConfig config;
  config.epochs = 2;
  config.hidden_size = 4;
  config.attention_dim = 4;
  const EstimatorFactory factory = make_estimator_factory("lstm", config);
  const std::vector<PrefixSample> samples = all_prefix_samples(corpus);
  const std::span<const PrefixSample> train(samples.data(), samples.size() / 2);
  const TrainedPredictor a = factory(corpus, train);
  const TrainedPredictor b = factory(corpus, train);
  for (const Dialogue& d : corpus.dialogues)
    CHECK(a.predict(d, d.length()) == b.predict(d, d.length()));
}

TEST_CASE("unknown variant names are rejected") {
  EstimatorBenchmarkConfig config;
  CHECK_THROWS_AS(make_estimator_factory("transformer", config), ValidationError);
}

TEST_CASE("estimator benchmark produces one pooled row per variant and mode") {
  GeneratorProfile profile;
  profile.target_turns = 5.0;
  const Corpus corpus = generate_corpus(20, 5, profile);
  EstimatorBenchmarkConfig config;
  config.variants = {"svm", "lstm"};
  config.modes = {CvMode::kTurnWise, CvMode::kDialogueWise};
  config.n_folds = 4;
  config.epochs = 2;
  config.hidden_size = 4;
  config.attention_dim = 4;
  config.threads = 2;
  const std::vector<EstimatorBenchmarkRow> rows =
      run_estimator_benchmark(corpus, config);
  int pooled = 0, per_fold = 0;
  for (const EstimatorBenchmarkRow& row : rows) {
    CHECK_FALSE(row.failed);
    if (row.fold < 0)
      ++pooled;
    else
      ++per_fold;
  }
  CHECK(pooled == 4);       // 2 variants x 2 modes
  CHECK(per_fold == 4 * 4); // folds per job
}

TEST_CASE("estimator report emission is deterministic") {
  GeneratorProfile profile;
  profile.target_turns = 4.0;
  const Corpus corpus = generate_corpus(12, 9, profile);
  EstimatorBenchmarkConfig config;
  config.variants = {"svm"};
  config.n_folds = 3;
  config.threads = 1;
  const std::vector<EstimatorBenchmarkRow> rows =
      run_estimator_benchmark(corpus, config);
  std::ostringstream a, b;
  write_estimator_report(rows, a);
  write_estimator_report(rows, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("variant,cv_mode,fold") != std::string::npos);
}

TEST_CASE("policy report round-trips through the csv reader") {
  PolicyBenchmarkResult result;
  result.rows = {
      {"CR", 0.0, RewardKind::kTaskSuccess, 0.98, 3.2, 3.4, 5.1, 3},
      {"CR", 0.0, RewardKind::kIqBiLstm, 0.97, 3.5, 3.8, 4.9, 3},
      {"CH", 0.15, RewardKind::kIqSvm, 0.88, 2.9, 3.0, 7.2, 3},
  };
  std::ostringstream out;
  write_policy_report(result, out);
  std::istringstream in(out.str());
  const std::vector<ResultRow> rows = read_policy_report(in);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].domain == "CR");
  CHECK(rows[0].tsr == doctest::Approx(0.98));
  CHECK(rows[1].reward == RewardKind::kIqBiLstm);
  CHECK(rows[2].ser == doctest::Approx(0.15));
  CHECK(rows[2].adl == doctest::Approx(7.2));

  // Re-emission from the parsed rows is byte-identical.
  PolicyBenchmarkResult again;
  again.rows = rows;
  std::ostringstream out2;
  write_policy_report(again, out2);
  CHECK(out2.str() == out.str());
}

TEST_CASE("plot data covers exactly the configured ser set") {
  std::vector<ResultRow> rows = {
      {"CR", 0.0, RewardKind::kTaskSuccess, 1.0, 3, 3, 5, 3},
      {"CR", 0.15, RewardKind::kTaskSuccess, 0.9, 3, 3, 6, 3},
      {"CR", 0.3, RewardKind::kTaskSuccess, 0.8, 3, 3, 7, 3},
  };
  std::ostringstream out;
  write_aiq_curves(rows, out);
  const std::string text = out.str();
  for (const char* ser : {"0.00", "0.15", "0.30"})
    CHECK(text.find(ser) != std::string::npos);
  std::ostringstream bars;
  write_tsr_bars(rows, bars);
  CHECK(bars.str().find("CR,0.15,ts,0.9000") != std::string::npos);
}

TEST_CASE("a tiny policy cell runs end to end") {
  // Train throwaway estimators on a small corpus, then run a reduced cell.
  GeneratorProfile profile;
  profile.target_turns = 5.0;
  const Corpus corpus = generate_corpus(15, 13, profile);
  const std::string svm_path = "/tmp/iqlab_test_cell_svm.bin";
  const std::string bilstm_path = "/tmp/iqlab_test_cell_bilstm.bin";
  save_model(train_svm_baseline(corpus), svm_path);
  IqModelConfig model_config;
  model_config.hidden_size = 4;
  model_config.attention_dim = 4;
  auto [params, train_result] = train_iq_model(corpus, model_config, 1);
  save_model(params, bilstm_path);

  PolicyBenchmarkConfig config;
  config.iq_svm_checkpoint = svm_path;
  config.iq_bilstm_checkpoint = bilstm_path;
  config.train_dialogues = 30;
  config.eval_dialogues = 10;
  config.gp.dictionary_cap = 150;
  const IqEstimators estimators = load_estimators(config);
  const DomainOntology ontology = make_domain_preset("CR");
  const PolicyCellResult cell = run_policy_cell(ontology, 0.0, RewardKind::kIqBiLstm,
                                                7, config, estimators);
  CHECK(cell.tsr >= 0.0);
  CHECK(cell.tsr <= 1.0);
  CHECK(cell.adl >= 1.0);
  CHECK(cell.aiq_bilstm >= 1.0);
  CHECK(cell.aiq_bilstm <= 5.0);
  CHECK(cell.iq_bilstm_per_dialogue.size() == 10);
}

TEST_CASE("missing checkpoints are a startup error") {
  PolicyBenchmarkConfig config;
  config.iq_svm_checkpoint = "";
  CHECK_THROWS_AS(load_estimators(config), ValidationError);
  config.iq_svm_checkpoint = "/tmp/does_not_exist_iqlab.bin";
  config.iq_bilstm_checkpoint = "/tmp/does_not_exist_iqlab.bin";
  CHECK_THROWS_AS(load_estimators(config), IoError);
}

}  // TEST_SUITE
