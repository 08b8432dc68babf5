#include "iqlab/metrics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <future>
#include <numeric>

#include "iqlab/rng.hpp"

namespace iqlab {

namespace {

void check_pairs(std::span<const LabelPair> pairs) {
  if (pairs.empty()) throw ContractError("metric on empty pair list");
  for (const auto& [t, p] : pairs) {
    if (t < 1 || t > kNumIqClasses || p < 1 || p > kNumIqClasses)
      throw ContractError("label outside [1,5]");
  }
}

std::array<std::array<double, kNumIqClasses>, kNumIqClasses> confusion(
    std::span<const LabelPair> pairs) {
  std::array<std::array<double, kNumIqClasses>, kNumIqClasses> m{};
  for (const auto& [t, p] : pairs) m[t - 1][p - 1] += 1.0;
  return m;
}

// Average ranks with ties.
std::vector<double> average_ranks(std::span<const int> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double uar(std::span<const LabelPair> pairs) {
  check_pairs(pairs);
  const auto m = confusion(pairs);
  double recall_sum = 0.0;
  int classes_present = 0;
  for (int c = 0; c < kNumIqClasses; ++c) {
    double row = 0.0;
    for (int p = 0; p < kNumIqClasses; ++p) row += m[c][p];
    if (row > 0.0) {
      recall_sum += m[c][c] / row;
      ++classes_present;
    }
  }
  return recall_sum / classes_present;
}

double weighted_kappa_linear(std::span<const LabelPair> pairs) {
  check_pairs(pairs);
  const auto m = confusion(pairs);
  const double n = static_cast<double>(pairs.size());
  std::array<double, kNumIqClasses> row_marginal{}, col_marginal{};
  for (int i = 0; i < kNumIqClasses; ++i)
    for (int j = 0; j < kNumIqClasses; ++j) {
      row_marginal[i] += m[i][j];
      col_marginal[j] += m[i][j];
    }
  double observed = 0.0, expected = 0.0;
  for (int i = 0; i < kNumIqClasses; ++i)
    for (int j = 0; j < kNumIqClasses; ++j) {
      const double w = std::abs(i - j) / 4.0;
      observed += w * m[i][j] / n;
      expected += w * row_marginal[i] * col_marginal[j] / (n * n);
    }
  if (expected == 0.0) return observed == 0.0 ? 1.0 : 0.0;
  return 1.0 - observed / expected;
}

std::optional<double> spearman_rho(std::span<const LabelPair> pairs) {
  check_pairs(pairs);
  const std::size_t n = pairs.size();
  std::vector<int> truth(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = pairs[i].first;
    pred[i] = pairs[i].second;
  }
  const std::vector<double> rt = average_ranks(truth);
  const std::vector<double> rp = average_ranks(pred);
  const double mt = std::accumulate(rt.begin(), rt.end(), 0.0) / n;
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  double num = 0.0, vt = 0.0, vp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rt[i] - mt) * (rp[i] - mp);
    vt += (rt[i] - mt) * (rt[i] - mt);
    vp += (rp[i] - mp) * (rp[i] - mp);
  }
  if (vt == 0.0 || vp == 0.0) return std::nullopt;
  return num / std::sqrt(vt * vp);
}

double extended_accuracy(std::span<const LabelPair> pairs) {
  check_pairs(pairs);
  std::size_t hit = 0;
  for (const auto& [t, p] : pairs)
    if (std::abs(t - p) <= 1) ++hit;
  return static_cast<double>(hit) / pairs.size();
}

double accuracy(std::span<const LabelPair> pairs) {
  check_pairs(pairs);
  std::size_t hit = 0;
  for (const auto& [t, p] : pairs)
    if (t == p) ++hit;
  return static_cast<double>(hit) / pairs.size();
}

MetricSet compute_metrics(std::span<const LabelPair> pairs) {
  MetricSet m;
  m.uar = uar(pairs);
  m.kappa = weighted_kappa_linear(pairs);
  m.rho = spearman_rho(pairs);
  m.extended_accuracy = extended_accuracy(pairs);
  m.n = pairs.size();
  return m;
}

std::vector<PrefixSample> all_prefix_samples(const Corpus& corpus) {
  std::vector<PrefixSample> samples;
  for (int di = 0; di < static_cast<int>(corpus.dialogues.size()); ++di)
    for (int t = 1; t <= corpus.dialogues[di].length(); ++t)
      samples.push_back({di, t});
  return samples;
}

CvPlan make_cv_plan(const Corpus& corpus, CvMode mode, int n_folds,
                    std::uint64_t seed) {
  if (n_folds < 2) throw ContractError("cv plan: need at least 2 folds");
  CvPlan plan;
  plan.mode = mode;
  plan.n_folds = n_folds;
  plan.samples = all_prefix_samples(corpus);
  plan.fold_of_sample.assign(plan.samples.size(), 0);
  Rng rng(seed);
  if (mode == CvMode::kTurnWise) {
    std::vector<std::size_t> order(plan.samples.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i)
      plan.fold_of_sample[order[i]] = static_cast<int>(i % n_folds);
  } else {
    const int n_dialogues = static_cast<int>(corpus.dialogues.size());
    if (n_dialogues < n_folds)
      throw ContractError("dialogue-wise cv: fewer dialogues than folds");
    std::vector<int> dialogue_order(n_dialogues);
    std::iota(dialogue_order.begin(), dialogue_order.end(), 0);
    rng.shuffle(dialogue_order);
    std::vector<int> fold_of_dialogue(n_dialogues, 0);
    for (int i = 0; i < n_dialogues; ++i)
      fold_of_dialogue[dialogue_order[i]] = i % n_folds;
    for (std::size_t i = 0; i < plan.samples.size(); ++i)
      plan.fold_of_sample[i] = fold_of_dialogue[plan.samples[i].dialogue_index];
  }
  return plan;
}

CvReport run_cv(const Corpus& corpus, const EstimatorFactory& factory,
                const CvPlan& plan, int n_threads) {
  if (plan.samples.size() != plan.fold_of_sample.size())
    throw ContractError("cv plan: sample/fold arrays out of sync");
  struct FoldOutput {
    std::vector<LabelPair> pairs;
    int best_epoch = -1;
  };
  auto run_fold = [&](int fold) {
    std::vector<PrefixSample> train, test;
    for (std::size_t i = 0; i < plan.samples.size(); ++i) {
      (plan.fold_of_sample[i] == fold ? test : train).push_back(plan.samples[i]);
    }
    FoldOutput out;
    if (test.empty()) return out;
    if (train.empty()) throw ContractError("cv fold with empty training set");
    TrainedPredictor predictor = factory(corpus, train);
    out.best_epoch = predictor.best_epoch;
    out.pairs.reserve(test.size());
    for (const PrefixSample& s : test) {
      const Dialogue& d = corpus.dialogues[s.dialogue_index];
      out.pairs.emplace_back(d.exchanges[s.t - 1].iq_label, predictor.predict(d, s.t));
    }
    return out;
  };

  std::vector<FoldOutput> outputs(plan.n_folds);
  if (n_threads <= 1) {
    for (int f = 0; f < plan.n_folds; ++f) outputs[f] = run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    for (int w = 0; w < std::min(n_threads, plan.n_folds); ++w) {
      workers.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const int f = next.fetch_add(1);
          if (f >= plan.n_folds) return;
          outputs[f] = run_fold(f);
        }
      }));
    }
    for (auto& w : workers) w.get();
  }

  CvReport report;
  double epoch_sum = 0.0;
  int epoch_count = 0;
  for (int f = 0; f < plan.n_folds; ++f) {
    const FoldOutput& out = outputs[f];
    CvFoldResult fr;
    fr.best_epoch = out.best_epoch;
    if (!out.pairs.empty()) fr.metrics = compute_metrics(out.pairs);
    report.folds.push_back(fr);
    report.pooled_pairs.insert(report.pooled_pairs.end(), out.pairs.begin(),
                               out.pairs.end());
    if (out.best_epoch >= 0) {
      epoch_sum += out.best_epoch;
      ++epoch_count;
    }
  }
  if (report.pooled_pairs.empty()) throw ContractError("cv produced no predictions");
  report.pooled = compute_metrics(report.pooled_pairs);
  if (epoch_count > 0)
    report.mean_best_epoch = static_cast<int>(std::lround(epoch_sum / epoch_count));
  return report;
}

}  // namespace iqlab
