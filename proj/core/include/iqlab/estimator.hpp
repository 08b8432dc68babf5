#pragma once

// Recurrent interaction-quality estimators: LSTM / BiLSTM over the
// exchange-level feature sequence, optional self-attention over all hidden
// states of the sub-dialogue, softmax classification head. Also carries the
// linear-SVM baseline over the full 16-parameter feature set and model
// serialization for both.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iqlab/autodiff.hpp"
#include "iqlab/corpus.hpp"
#include "iqlab/features.hpp"
#include "iqlab/metrics.hpp"

namespace iqlab {

struct IqModelConfig {
  int hidden_size = 64;
  bool bidirectional = true;
  bool use_attention = true;
  int attention_dim = 0;  // 0: match the concatenated hidden dimension
  int input_size = kExchangeFeatureDim;
  int n_classes = kNumIqClasses;
  std::uint64_t seed = 0;
  int batch_size = 16;
  ad::RmsPropConfig optimizer;

  int hidden_dim() const { return bidirectional ? 2 * hidden_size : hidden_size; }
  int attn_dim() const { return attention_dim > 0 ? attention_dim : hidden_dim(); }
  std::string variant_name() const;
};

// One LSTM direction, separate weights per gate: input / forget / output /
// candidate. wx_*: [input x hidden], wh_*: [hidden x hidden], b_*: [1 x hidden].
struct LstmCellParams {
  ad::Parameter wx_i, wx_f, wx_o, wx_c;
  ad::Parameter wh_i, wh_f, wh_o, wh_c;
  ad::Parameter b_i, b_f, b_o, b_c;

  void collect(std::vector<ad::Parameter*>& out);
};

// Scoring network of the self-attention block: the current hidden state is
// the query, every position in the sub-dialogue is a key.
struct AttentionParams {
  ad::Parameter w_query;  // [hidden_dim x attn_dim]
  ad::Parameter w_key;    // [hidden_dim x attn_dim]
  ad::Parameter b_hidden; // [1 x attn_dim]
  ad::Parameter w_score;  // [attn_dim x 1]
  ad::Parameter b_score;  // [1 x 1]

  void collect(std::vector<ad::Parameter*>& out);
};

struct IqModelParams {
  IqModelConfig config;
  LstmCellParams forward_cell;
  std::optional<LstmCellParams> backward_cell;
  std::optional<AttentionParams> attention;
  ad::Parameter w_out;  // [hidden_dim x n_classes]
  ad::Parameter b_out;  // [1 x n_classes]

  std::vector<ad::Parameter*> all_parameters();
};

// Fresh parameters: uniform +-1/sqrt(fan_in) weights, zero biases except the
// forget gate bias at +1.
IqModelParams init_iq_model(const IqModelConfig& config);

using ExchangeInput = std::array<double, kExchangeFeatureDim>;

// Builds the classification graph for one sub-dialogue e_1..e_t on the tape.
struct ForwardGraph {
  ad::Var logits;
  ad::Var probs;
  ad::Var attention_weights;  // invalid when attention is disabled
};

ForwardGraph build_forward(ad::Tape& tape, IqModelParams& params,
                           std::span<const ExchangeInput> prefix);

// Plain evaluation without gradient bookkeeping kept around.
struct Prediction {
  std::array<double, kNumIqClasses> probs{};
  std::vector<double> attention;  // empty when attention is disabled
};

Prediction forward(IqModelParams& params, std::span<const ExchangeInput> prefix);

// Argmax label in [1, 5]; ties break toward the lower label.
int predict_iq(IqModelParams& params, const Dialogue& dialogue, int t);
int argmax_label(std::span<const double> probs);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  int best_epoch = -1;             // 1-based; -1 without validation
  std::vector<double> validation_uar;
};

// Mini-batch RmsProp training over sub-dialogue prefixes. Deterministic for
// a fixed config seed. When validation samples are given, parameters revert
// to the epoch with the highest validation UAR.
TrainResult train(IqModelParams& params, const Corpus& corpus,
                  std::span<const PrefixSample> train_samples, int epochs,
                  std::span<const PrefixSample> validation_samples = {});

// Convenience: fresh model on every (dialogue, t) prefix of the corpus.
std::pair<IqModelParams, TrainResult> train_iq_model(const Corpus& corpus,
                                                     const IqModelConfig& config,
                                                     int epochs);

// ---------------------------------------------------------------------------
// Linear-SVM baseline (one-vs-rest hinge loss, subgradient descent) over the
// z-normalized 16-parameter feature set.

struct SvmConfig {
  double lambda = 1e-4;
  int epochs = 40;
  std::uint64_t seed = 0;
};

struct SvmBaselineParams {
  std::array<std::vector<double>, kNumIqClasses> weights;  // each [kFullFeatureDim]
  std::array<double, kNumIqClasses> bias{};
  std::vector<double> feature_mean;  // training-fold normalization
  std::vector<double> feature_scale;
  bool degenerate = false;  // single-class training set
  int degenerate_class = 0;
};

SvmBaselineParams train_svm_baseline(const Corpus& corpus,
                                     const SvmConfig& config = {});
SvmBaselineParams train_svm_on(const Corpus& corpus,
                               std::span<const PrefixSample> samples,
                               const SvmConfig& config = {});
int predict_svm(const SvmBaselineParams& params, const Dialogue& dialogue, int t);

// ---------------------------------------------------------------------------
// Serialization. Versioned binary container; loads reproduce predictions
// bit-exactly. Wrong-variant loads fail with an explicit error.

void save_model(const IqModelParams& params, const std::string& path);
void save_model(const SvmBaselineParams& params, const std::string& path);
IqModelParams load_iq_model(const std::string& path);
SvmBaselineParams load_svm_model(const std::string& path);

}  // namespace iqlab
