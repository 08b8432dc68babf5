#pragma once

// Interaction-parameter encoding: the exchange-level block fed to the
// recurrent estimators plus dialogue- and window-level aggregates for the
// SVM baseline. All aggregates are causal in the turn index.

#include <array>
#include <iosfwd>
#include <span>

#include "iqlab/corpus.hpp"

namespace iqlab {

// 1-hot(status: 3) | confidence | reprompt | 1-hot(activity: 2) | confirmation
inline constexpr int kExchangeFeatureDim = 8;

// Flattened 16-parameter set (nominal parameters one-hot): 8 + 6 + 5.
inline constexpr int kFullFeatureDim = 19;

std::array<double, kExchangeFeatureDim> exchange_features(
    std::span<const Exchange> exchanges, int t);
std::array<double, kExchangeFeatureDim> exchange_features(const Dialogue& d, int t);

struct FeatureVector {
  std::array<double, kExchangeFeatureDim> exchange_block{};

  // Dialogue level, over turns 1..t.
  double mean_asr_confidence = 0.0;  // over successful recognitions; 0 if none
  double n_exchanges = 0.0;
  double n_asr_success = 0.0;
  double rate_asr_success = 0.0;
  double n_asr_rejections = 0.0;
  double rate_asr_rejections = 0.0;

  // Window level, over turns max(1, t-2)..t.
  double win_mean_asr_confidence = 0.0;
  double win_asr_success = 0.0;
  double win_asr_rejections = 0.0;
  double win_reprompts = 0.0;
  double win_system_questions = 0.0;

  std::array<double, kFullFeatureDim> flat() const;
};

FeatureVector full_features(std::span<const Exchange> exchanges, int t);
FeatureVector full_features(const Dialogue& d, int t);

// Debug export: one row per sub-dialogue (dialogue id, t, then the
// flattened feature vector).
void write_feature_csv(const Corpus& corpus, std::ostream& out);

}  // namespace iqlab
