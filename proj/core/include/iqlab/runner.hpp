#pragma once

// Experiment orchestration: the estimator cross-validation benchmark, the
// policy benchmark grid (domains x error rates x reward models x seeds) and
// deterministic report emission.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "iqlab/corpus.hpp"
#include "iqlab/dialenv.hpp"
#include "iqlab/estimator.hpp"
#include "iqlab/metrics.hpp"
#include "iqlab/policy.hpp"
#include "iqlab/reward.hpp"

namespace iqlab {

// ---------------------------------------------------------------------------
// Estimator benchmark

struct EstimatorBenchmarkConfig {
  std::vector<std::string> variants = {"lstm", "bilstm", "lstm-att", "bilstm-att",
                                       "svm"};
  std::vector<CvMode> modes = {CvMode::kTurnWise, CvMode::kDialogueWise};
  int n_folds = 10;
  int epochs = 30;
  int hidden_size = 16;
  int attention_dim = 16;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  int threads = 2;
};

// Builds a factory for one variant name ("lstm", "bilstm", "lstm-att",
// "bilstm-att", "svm"); the per-fold seed derives from the training subset
// so parallel fold order cannot change results.
EstimatorFactory make_estimator_factory(const std::string& variant,
                                        const EstimatorBenchmarkConfig& config);

struct EstimatorBenchmarkRow {
  std::string variant;
  CvMode mode = CvMode::kDialogueWise;
  int fold = -1;  // -1: pooled row
  MetricSet metrics;
  int best_epoch = -1;
  bool failed = false;
  std::string error;
};

std::vector<EstimatorBenchmarkRow> run_estimator_benchmark(
    const Corpus& corpus, const EstimatorBenchmarkConfig& config);

void write_estimator_report(const std::vector<EstimatorBenchmarkRow>& rows,
                            std::ostream& out);

// ---------------------------------------------------------------------------
// Policy benchmark

struct PolicyBenchmarkConfig {
  std::vector<std::string> domains = {"CR", "CH", "SR", "SH", "L"};
  std::vector<double> ser_levels = {0.0, 0.15, 0.30};
  std::vector<RewardKind> rewards = {RewardKind::kTaskSuccess, RewardKind::kIqSvm,
                                     RewardKind::kIqBiLstm};
  std::vector<std::uint64_t> seeds = {101, 202, 303};
  int train_dialogues = 1000;
  int eval_dialogues = 100;
  std::string iq_svm_checkpoint;
  std::string iq_bilstm_checkpoint;
  GpPolicyConfig gp;
  int turn_cap = 25;
  ErrorModelConfig error_model;
  int threads = 2;
};

// One training/evaluation cycle: a fixed (domain, ser, reward, seed) cell.
struct PolicyCellResult {
  std::string domain;
  double ser = 0.0;
  RewardKind reward = RewardKind::kTaskSuccess;
  std::uint64_t seed = 0;
  double tsr = 0.0;
  double aiq_svm = 0.0;
  double aiq_bilstm = 0.0;
  double adl = 0.0;
  std::vector<int> iq_svm_per_dialogue;     // evaluation dialogues
  std::vector<int> iq_bilstm_per_dialogue;  // evaluation dialogues
};

// Aggregated over seeds; the Table-style result row.
struct ResultRow {
  std::string domain;
  double ser = 0.0;
  RewardKind reward = RewardKind::kTaskSuccess;
  double tsr = 0.0;
  double aiq_svm = 0.0;
  double aiq_bilstm = 0.0;
  double adl = 0.0;
  int n_seeds = 0;
};

struct SignificanceRow {
  std::string domain;
  double ser = 0.0;
  std::string metric;    // "tsr", "adl", "aiq_svm", "aiq_bilstm"
  RewardKind reward_a = RewardKind::kTaskSuccess;
  RewardKind reward_b = RewardKind::kTaskSuccess;
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
};

struct PolicyBenchmarkResult {
  std::vector<PolicyCellResult> cells;
  std::vector<ResultRow> rows;
  std::vector<SignificanceRow> significance;
};

// Loaded estimator checkpoints used both for reward estimation and passive
// scoring of every evaluation dialogue.
struct IqEstimators {
  SvmBaselineParams svm;
  IqModelParams bilstm;
};

IqEstimators load_estimators(const PolicyBenchmarkConfig& config);

PolicyCellResult run_policy_cell(const DomainOntology& ontology, double ser,
                                 RewardKind reward, std::uint64_t seed,
                                 const PolicyBenchmarkConfig& config,
                                 const IqEstimators& estimators,
                                 GpPolicy* trained_out = nullptr);

PolicyBenchmarkResult run_policy_benchmark(const PolicyBenchmarkConfig& config);

// ---------------------------------------------------------------------------
// Reports (deterministic bytes for fixed inputs)

void write_policy_report(const PolicyBenchmarkResult& result, std::ostream& out);
void write_significance_report(const PolicyBenchmarkResult& result, std::ostream& out);
// Plot data: per-domain TSR bars and per-SER AIQ curves.
void write_tsr_bars(const std::vector<ResultRow>& rows, std::ostream& out);
void write_aiq_curves(const std::vector<ResultRow>& rows, std::ostream& out);

std::vector<ResultRow> read_policy_report(std::istream& in);

// ---------------------------------------------------------------------------
// Statistics used by the significance report.

// Welch's two-sample t-test, two-sided p-value.
double welch_t_test_p(std::span<const double> a, std::span<const double> b);
// Mann-Whitney U, normal approximation with tie correction, two-sided.
double mann_whitney_u_p(std::span<const double> a, std::span<const double> b);

}  // namespace iqlab
