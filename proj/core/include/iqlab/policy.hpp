#pragma once

// GP-SARSA policy learner: a Gaussian-process Q-function over summary
// state/action pairs with a sparse support dictionary, Thompson-sampling
// exploration and per-episode temporal-difference updates.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iqlab/autodiff.hpp"  // ad::Mat
#include "iqlab/rng.hpp"

namespace iqlab {

struct GpPolicyConfig {
  double prior_variance = 25.0;  // k(x, x)
  double length_scale = 1.0;     // squared-exponential over summary vectors
  double noise_variance = 5.0;   // TD residual noise
  double nu = 0.01;              // residual threshold, relative to the prior
  int dictionary_cap = 1000;
  double gamma = 1.0;  // episodic task; the per-turn penalty carries cost
  double jitter = 1e-6;
};

struct QEstimate {
  double mean = 0.0;
  double variance = 0.0;
};

// One step of an episode: the reward observed after taking `action` in
// `state`. The last step of a trajectory is terminal.
struct TdStep {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
};

class GpPolicy {
 public:
  GpPolicy(int n_actions, GpPolicyConfig config = {});

  int n_actions() const { return n_actions_; }
  const GpPolicyConfig& config() const { return config_; }
  std::size_t dictionary_size() const { return entries_.size(); }
  int recondition_count() const { return recondition_count_; }

  // Posterior mean and variance of Q(state, action).
  QEstimate q_posterior(std::span<const double> state, int action) const;

  // explore: Thompson sampling over the allowed set; otherwise greedy on the
  // posterior means. Ties break toward the lowest action index.
  int select_action(std::span<const double> state, const std::vector<bool>& allowed,
                    bool explore, Rng& rng) const;

  // Sparse online update from one episode. The dictionary grows only where
  // the kernel-span residual exceeds nu * prior_variance (and the cap allows).
  void episode_update(std::span<const TdStep> trajectory);

  void save(const std::string& path) const;
  static GpPolicy load(const std::string& path);

 private:
  struct Entry {
    std::vector<double> state;
    int action = 0;
  };

  double kernel_state(std::span<const double> a, std::span<const double> b) const;
  // Block projection of (state, action) onto the dictionary entries sharing
  // the action: coefficients plus the kernel-span residual.
  void project(std::span<const double> state, int action,
               std::vector<double>& coeffs, double& residual) const;
  bool grow(const std::vector<double>& state, int action);
  void rank_one_update(const std::vector<double>& h, double reward);
  void refresh_mean();
  void recondition();
  void check_state_dim(std::span<const double> state) const;

  int n_actions_ = 0;
  GpPolicyConfig config_;
  int state_dim_ = -1;

  std::vector<Entry> entries_;               // global dictionary
  std::vector<std::vector<int>> block_;      // per-action entry indices
  std::vector<ad::Mat> block_k_inv_;         // per-action inverse Gram
  ad::Mat posterior_cov_;                    // P = (K^-1 + G/noise)^-1
  ad::Mat gram_accum_;                       // G = sum h h^T
  std::vector<double> reward_accum_;         // w = sum r h
  std::vector<double> posterior_mean_;       // mu = P w / noise
  int recondition_count_ = 0;
};

}  // namespace iqlab
