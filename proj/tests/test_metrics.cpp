#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "iqlab/metrics.hpp"
#include "iqlab/rng.hpp"
#include "support/reference_metrics.hpp"

using namespace iqlab;

namespace {

std::vector<LabelPair> random_pairs(Rng& rng, int n) {
  std::vector<LabelPair> pairs;
  pairs.reserve(n);
  for (int i = 0; i < n; ++i)
    pairs.emplace_back(rng.uniform_int(1, 5), rng.uniform_int(1, 5));
  return pairs;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfect predictions score 1.0 everywhere") {
  std::vector<LabelPair> pairs = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}, {3, 3}};
  CHECK(uar(pairs) == 1.0);
  CHECK(weighted_kappa_linear(pairs) == doctest::Approx(1.0));
  CHECK(extended_accuracy(pairs) == 1.0);
  CHECK(spearman_rho(pairs).value() == doctest::Approx(1.0));
}

TEST_CASE("uar hand example") {
  // truth [1,1,2], pred [1,2,2] -> recalls 0.5 and 1.0
  std::vector<LabelPair> pairs = {{1, 1}, {1, 2}, {2, 2}};
  CHECK(uar(pairs) == doctest::Approx(0.75));
}

TEST_CASE("uar on a single-class truth set averages one class") {
  std::vector<LabelPair> pairs = {{3, 3}, {3, 3}, {3, 3}};
  CHECK(uar(pairs) == 1.0);
}

TEST_CASE("kappa equals the reference implementation on the reversal case") {
  std::vector<LabelPair> pairs = {{5, 1}, {5, 1}, {1, 5}, {1, 5}};
  CHECK(weighted_kappa_linear(pairs) ==
        doctest::Approx(testing::ref_weighted_kappa(pairs)).epsilon(1e-12));
}

TEST_CASE("kappa near zero for marginal-matched random predictions") {
  Rng rng(99);
  std::vector<int> truth;
  for (int i = 0; i < 10000; ++i) truth.push_back(rng.uniform_int(1, 5));
  std::vector<int> pred = truth;
  rng.shuffle(pred);  // a draw from the truth marginal
  std::vector<LabelPair> pairs;
  for (std::size_t i = 0; i < truth.size(); ++i) pairs.emplace_back(truth[i], pred[i]);
  CHECK(std::abs(weighted_kappa_linear(pairs)) < 0.05);
}

TEST_CASE("spearman basics: identity, reversal, ties") {
  std::vector<LabelPair> identity = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
  CHECK(spearman_rho(identity).value() == doctest::Approx(1.0));
  std::vector<LabelPair> reversal = {{1, 5}, {2, 4}, {3, 3}, {4, 2}, {5, 1}};
  CHECK(spearman_rho(reversal).value() == doctest::Approx(-1.0));
  std::vector<LabelPair> ties = {{1, 1}, {1, 2}, {2, 2}};
  CHECK(spearman_rho(ties).value() ==
        doctest::Approx(testing::ref_spearman(ties).value()).epsilon(1e-12));
}

TEST_CASE("spearman is undefined for zero-variance inputs") {
  std::vector<LabelPair> flat = {{3, 1}, {3, 2}, {3, 5}};
  CHECK_FALSE(spearman_rho(flat).has_value());
}

TEST_CASE("extended accuracy counts neighbours") {
  std::vector<LabelPair> pairs = {{3, 4}, {3, 5}, {1, 1}};
  CHECK(extended_accuracy(pairs) == doctest::Approx(2.0 / 3.0));
  std::vector<LabelPair> far = {{1, 5}, {1, 5}};
  CHECK(extended_accuracy(far) == 0.0);
}

TEST_CASE("all metrics agree with brute-force references on random lists") {
  Rng rng(123);
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<LabelPair> pairs = random_pairs(rng, rng.uniform_int(1, 60));
    CAPTURE(trial);
    CHECK(uar(pairs) == doctest::Approx(testing::ref_uar(pairs)).epsilon(1e-10));
    CHECK(weighted_kappa_linear(pairs) ==
          doctest::Approx(testing::ref_weighted_kappa(pairs)).epsilon(1e-10));
    CHECK(extended_accuracy(pairs) ==
          doctest::Approx(testing::ref_extended_accuracy(pairs)).epsilon(1e-10));
    const auto rho = spearman_rho(pairs);
    const auto ref_rho = testing::ref_spearman(pairs);
    CHECK(rho.has_value() == ref_rho.has_value());
    if (rho && ref_rho)
      CHECK(*rho == doctest::Approx(*ref_rho).epsilon(1e-10));
  }
}

TEST_CASE("metrics are permutation invariant") {
  Rng rng(7);
  std::vector<LabelPair> pairs = random_pairs(rng, 40);
  std::vector<LabelPair> shuffled = pairs;
  rng.shuffle(shuffled);
  CHECK(uar(pairs) == uar(shuffled));
  CHECK(weighted_kappa_linear(pairs) == weighted_kappa_linear(shuffled));
  CHECK(extended_accuracy(pairs) == extended_accuracy(shuffled));
  CHECK(spearman_rho(pairs) == spearman_rho(shuffled));
}

TEST_CASE("extended accuracy dominates exact accuracy") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<LabelPair> pairs = random_pairs(rng, 30);
    CHECK(extended_accuracy(pairs) >= accuracy(pairs));
  }
}

TEST_CASE("empty pair list is a contract error") {
  std::vector<LabelPair> empty;
  CHECK_THROWS_AS(uar(empty), ContractError);
  CHECK_THROWS_AS(weighted_kappa_linear(empty), ContractError);
  CHECK_THROWS_AS(spearman_rho(empty), ContractError);
  CHECK_THROWS_AS(extended_accuracy(empty), ContractError);
}

TEST_CASE("dialogue-wise folds keep each dialogue intact") {
  const Corpus corpus = generate_corpus(25, 13);
  const CvPlan plan = make_cv_plan(corpus, CvMode::kDialogueWise, 10, 1);
  std::map<int, int> dialogue_fold;
  for (std::size_t i = 0; i < plan.samples.size(); ++i) {
    const int di = plan.samples[i].dialogue_index;
    const auto it = dialogue_fold.find(di);
    if (it == dialogue_fold.end())
      dialogue_fold[di] = plan.fold_of_sample[i];
    else
      CHECK(it->second == plan.fold_of_sample[i]);
  }
  // Fold sizes in dialogues differ by at most one.
  std::vector<int> fold_sizes(10, 0);
  for (const auto& [di, fold] : dialogue_fold) ++fold_sizes[fold];
  const auto [lo, hi] = std::minmax_element(fold_sizes.begin(), fold_sizes.end());
  CHECK(*hi - *lo <= 1);
}

TEST_CASE("turn-wise folds partition the samples evenly") {
  const Corpus corpus = generate_corpus(12, 19);
  const CvPlan plan = make_cv_plan(corpus, CvMode::kTurnWise, 10, 1);
  std::vector<int> fold_sizes(10, 0);
  for (int f : plan.fold_of_sample) ++fold_sizes[f];
  const auto [lo, hi] = std::minmax_element(fold_sizes.begin(), fold_sizes.end());
  CHECK(*hi - *lo <= 1);
}

TEST_CASE("dialogue-wise cv with fewer dialogues than folds is rejected") {
  const Corpus corpus = generate_corpus(5, 3);
  CHECK_THROWS_AS(make_cv_plan(corpus, CvMode::kDialogueWise, 10, 1), ContractError);
}

TEST_CASE("run_cv: no test dialogue leaks into its own training fold") {
  const Corpus corpus = generate_corpus(20, 29);
  const CvPlan plan = make_cv_plan(corpus, CvMode::kDialogueWise, 5, 2);
  // The factory asserts the separation property on every call.
  const EstimatorFactory factory =
      [&corpus, &plan](const Corpus& c,
                       std::span<const PrefixSample> train) -> TrainedPredictor {
    std::vector<bool> train_dialogues(c.dialogues.size(), false);
    for (const PrefixSample& s : train) train_dialogues[s.dialogue_index] = true;
    // Find which fold this is by looking at an excluded sample.
    for (std::size_t i = 0; i < plan.samples.size(); ++i) {
      if (!train_dialogues[plan.samples[i].dialogue_index]) {
        // Every sample of that dialogue must be excluded.
        const int di = plan.samples[i].dialogue_index;
        for (std::size_t j = 0; j < plan.samples.size(); ++j)
          if (plan.samples[j].dialogue_index == di)
            CHECK_FALSE(train_dialogues[di]);
      }
    }
    return TrainedPredictor{[](const Dialogue&, int) { return 3; }, -1};
  };
  const CvReport report = run_cv(corpus, factory, plan);
  CHECK(report.pooled_pairs.size() == corpus.total_exchanges());
}

TEST_CASE("memorizing classifier: turn-wise inflates, dialogue-wise does not") {
  // Nearest-neighbour on the full prefix feature string memorizes training
  // prefixes; adjacent prefixes of the same dialogue are near-duplicates.
  const Corpus corpus = generate_corpus(60, 31);
  const EstimatorFactory memorizer =
      [](const Corpus& c, std::span<const PrefixSample> train) -> TrainedPredictor {
    struct Entry {
      const Dialogue* d;
      int t;
      int label;
    };
    auto entries = std::make_shared<std::vector<Entry>>();
    for (const PrefixSample& s : train)
      entries->push_back({&c.dialogues[s.dialogue_index], s.t,
                          c.dialogues[s.dialogue_index].exchanges[s.t - 1].iq_label});
    return TrainedPredictor{
        [entries](const Dialogue& d, int t) {
          // distance between prefixes: sum of |confidence| differences over
          // the shared length plus a mild length penalty, so the adjacent
          // prefix of the same dialogue wins when it is in the training set
          double best = 1e300;
          int label = 3;
          for (const Entry& e : *entries) {
            const int shared = std::min(t, e.t);
            double dist = std::abs(t - e.t) * 0.5;
            for (int i = 0; i < shared; ++i) {
              dist += std::abs(d.exchanges[i].asr_confidence -
                               e.d->exchanges[i].asr_confidence);
              dist += d.exchanges[i].asr_status == e.d->exchanges[i].asr_status ? 0 : 1;
            }
            if (dist < best) {
              best = dist;
              label = e.label;
            }
          }
          return label;
        },
        -1};
  };
  const CvPlan turn_plan = make_cv_plan(corpus, CvMode::kTurnWise, 5, 3);
  const CvPlan dlg_plan = make_cv_plan(corpus, CvMode::kDialogueWise, 5, 3);
  const double turn_uar = run_cv(corpus, memorizer, turn_plan).pooled.uar;
  const double dlg_uar = run_cv(corpus, memorizer, dlg_plan).pooled.uar;
  // Label steps are stochastic, so even a perfect memorizer is capped by
  // the step noise at the final turn; the inflation gap is the point.
  CHECK(turn_uar > 0.55);
  CHECK(dlg_uar < turn_uar - 0.05);
}

}  // TEST_SUITE
