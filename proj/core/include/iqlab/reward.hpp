#pragma once

// Episode reward models: task success and estimated interaction quality,
// with the per-turn decomposition used during policy learning.

#include <string>

#include "iqlab/errors.hpp"

namespace iqlab {

enum class RewardKind { kTaskSuccess, kIqSvm, kIqBiLstm };

const char* to_string(RewardKind k);
RewardKind reward_kind_from_string(const std::string& s);

struct RewardSpec {
  RewardKind kind = RewardKind::kTaskSuccess;
  double turn_penalty = -1.0;
  double iq_scale = 5.0;
  double ts_bonus = 20.0;
};

struct EpisodeOutcome {
  int length = 1;        // T, in exchanges
  bool success = false;  // simulation-only oracle
  int final_iq = 1;      // from the active estimator, in [1, 5]
};

// -T + 5 * (iq - 1)
double reward_iq(int length, int iq, const RewardSpec& spec = {});

// -T + 20 * [success]
double reward_ts(int length, bool success, const RewardSpec& spec = {});

// Per-turn decomposition: the turn penalty on every turn, plus the terminal
// bonus on the final turn, so the episode sum telescopes to the closed form.
double per_turn_reward(const RewardSpec& spec, bool turn_is_final,
                       const EpisodeOutcome* outcome);

}  // namespace iqlab
