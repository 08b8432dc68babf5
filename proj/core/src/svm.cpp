#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "iqlab/estimator.hpp"
#include "iqlab/rng.hpp"

namespace iqlab {

namespace {

std::array<double, kFullFeatureDim> normalized_features(
    const SvmBaselineParams& params, const Dialogue& d, int t) {
  std::array<double, kFullFeatureDim> x = full_features(d, t).flat();
  for (int i = 0; i < kFullFeatureDim; ++i)
    x[i] = (x[i] - params.feature_mean[i]) / params.feature_scale[i];
  return x;
}

}  // namespace

SvmBaselineParams train_svm_on(const Corpus& corpus,
                               std::span<const PrefixSample> samples,
                               const SvmConfig& config) {
  if (samples.empty()) throw ContractError("train_svm: no samples");
  const std::size_t n = samples.size();

  std::vector<std::array<double, kFullFeatureDim>> x(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Dialogue& d = corpus.dialogues[samples[i].dialogue_index];
    x[i] = full_features(d, samples[i].t).flat();
    y[i] = d.exchanges[samples[i].t - 1].iq_label;
  }

  SvmBaselineParams params;
  params.feature_mean.assign(kFullFeatureDim, 0.0);
  params.feature_scale.assign(kFullFeatureDim, 1.0);
  for (int j = 0; j < kFullFeatureDim; ++j) {
    double mean = 0.0;
    for (const auto& xi : x) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& xi : x) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(n);
    params.feature_mean[j] = mean;
    params.feature_scale[j] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  for (auto& xi : x)
    for (int j = 0; j < kFullFeatureDim; ++j)
      xi[j] = (xi[j] - params.feature_mean[j]) / params.feature_scale[j];

  const bool single_class = std::all_of(y.begin(), y.end(),
                                        [&](int label) { return label == y[0]; });
  for (auto& w : params.weights) w.assign(kFullFeatureDim, 0.0);
  if (single_class) {
    params.degenerate = true;
    params.degenerate_class = y[0];
    std::cerr << "warning: svm training set contains a single class ("
              << y[0] << "); returning a constant classifier\n";
    return params;
  }

  // One-vs-rest hinge loss, Pegasos-style subgradient steps with a shared
  // decaying step size.
  Rng rng(Rng::derive_seed(config.seed, 0x73766d));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      ++step;
      const double eta = 1.0 / (config.lambda * static_cast<double>(step));
      const auto& xi = x[idx];
      for (int k = 0; k < kNumIqClasses; ++k) {
        std::vector<double>& w = params.weights[k];
        const double target = y[idx] == k + 1 ? 1.0 : -1.0;
        double margin = params.bias[k];
        for (int j = 0; j < kFullFeatureDim; ++j) margin += w[j] * xi[j];
        const double shrink = 1.0 - eta * config.lambda;
        for (int j = 0; j < kFullFeatureDim; ++j) w[j] *= shrink;
        if (target * margin < 1.0) {
          for (int j = 0; j < kFullFeatureDim; ++j) w[j] += eta * target * xi[j];
          params.bias[k] += eta * target;
        }
      }
    }
  }
  return params;
}

SvmBaselineParams train_svm_baseline(const Corpus& corpus, const SvmConfig& config) {
  const std::vector<PrefixSample> samples = all_prefix_samples(corpus);
  return train_svm_on(corpus, samples, config);
}

int predict_svm(const SvmBaselineParams& params, const Dialogue& dialogue, int t) {
  if (t < 1 || t > dialogue.length())
    throw ContractError("predict_svm: turn index out of range");
  if (params.degenerate) return params.degenerate_class;
  const std::array<double, kFullFeatureDim> xi =
      normalized_features(params, dialogue, t);
  int best = 0;
  double best_margin = -1e300;
  for (int k = 0; k < kNumIqClasses; ++k) {
    double margin = params.bias[k];
    for (int j = 0; j < kFullFeatureDim; ++j) margin += params.weights[k][j] * xi[j];
    if (margin > best_margin) {
      best_margin = margin;
      best = k;
    }
  }
  return best + 1;
}

}  // namespace iqlab
