#pragma once

// Ordinal evaluation measures over (true, predicted) label pairs in [1, 5],
// plus the two cross-validation regimes used for estimator benchmarking.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "iqlab/corpus.hpp"

namespace iqlab {

inline constexpr int kNumIqClasses = 5;

// (truth, prediction), both in [1, 5].
using LabelPair = std::pair<int, int>;

// Arithmetic mean of per-class recalls, over classes present in the truth set.
double uar(std::span<const LabelPair> pairs);

// Cohen's kappa with linear weights w_ij = |i-j| / 4. Zero expected
// disagreement with zero observed disagreement is defined as 1.
double weighted_kappa_linear(std::span<const LabelPair> pairs);

// Pearson correlation of average ranks. Empty-variance inputs are undefined
// and reported as nullopt.
std::optional<double> spearman_rho(std::span<const LabelPair> pairs);

// Fraction of predictions within +-1 of the truth.
double extended_accuracy(std::span<const LabelPair> pairs);

double accuracy(std::span<const LabelPair> pairs);

// One training sample: the prefix of dialogue `dialogue_index` up to turn t.
struct PrefixSample {
  int dialogue_index = 0;
  int t = 1;
};

std::vector<PrefixSample> all_prefix_samples(const Corpus& corpus);

enum class CvMode { kTurnWise, kDialogueWise };

// Fold assignment over the corpus prefix samples. In DialogueWise mode all
// prefixes of one dialogue share a fold.
struct CvPlan {
  CvMode mode = CvMode::kDialogueWise;
  int n_folds = 10;
  std::vector<PrefixSample> samples;
  std::vector<int> fold_of_sample;  // parallel to samples
};

CvPlan make_cv_plan(const Corpus& corpus, CvMode mode, int n_folds,
                    std::uint64_t seed);

// A trained predictor: maps (dialogue, turn) to a label in [1, 5].
struct TrainedPredictor {
  std::function<int(const Dialogue&, int)> predict;
  int best_epoch = -1;  // -1 when epoch selection does not apply
};

// Trains on the given subset of prefix samples.
using EstimatorFactory = std::function<TrainedPredictor(
    const Corpus&, std::span<const PrefixSample> train)>;

struct MetricSet {
  double uar = 0.0;
  double kappa = 0.0;
  std::optional<double> rho;
  double extended_accuracy = 0.0;
  std::size_t n = 0;
};

MetricSet compute_metrics(std::span<const LabelPair> pairs);

struct CvFoldResult {
  MetricSet metrics;
  int best_epoch = -1;
};

struct CvReport {
  std::vector<CvFoldResult> folds;
  MetricSet pooled;          // over the union of all fold test predictions
  int mean_best_epoch = -1;  // rounded mean over folds; -1 when n/a
  std::vector<LabelPair> pooled_pairs;
};

// Runs the plan: per fold, trains via the factory on the training samples and
// scores the held-out samples. Folds run on up to n_threads workers; results
// merge deterministically by fold index.
CvReport run_cv(const Corpus& corpus, const EstimatorFactory& factory,
                const CvPlan& plan, int n_threads = 1);

}  // namespace iqlab
