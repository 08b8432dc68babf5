#include "iqlab/reward.hpp"

#include <string>

namespace iqlab {

const char* to_string(RewardKind k) {
  switch (k) {
    case RewardKind::kTaskSuccess: return "ts";
    case RewardKind::kIqSvm: return "iq-svm";
    case RewardKind::kIqBiLstm: return "iq-bilstm";
  }
  return "?";
}

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "ts") return RewardKind::kTaskSuccess;
  if (s == "iq-svm") return RewardKind::kIqSvm;
  if (s == "iq-bilstm") return RewardKind::kIqBiLstm;
  throw ValidationError("unknown reward kind: " + s);
}

namespace {

double terminal_bonus(const RewardSpec& spec, const EpisodeOutcome& outcome) {
  if (spec.kind == RewardKind::kTaskSuccess)
    return outcome.success ? spec.ts_bonus : 0.0;
  if (outcome.final_iq < 1 || outcome.final_iq > 5)
    throw ContractError("final_iq outside [1,5]");
  return spec.iq_scale * (outcome.final_iq - 1);
}

}  // namespace

double reward_iq(int length, int iq, const RewardSpec& spec) {
  if (length < 1) throw ContractError("reward_iq: length must be >= 1");
  if (iq < 1 || iq > 5) throw ContractError("reward_iq: iq outside [1,5]");
  return spec.turn_penalty * length + spec.iq_scale * (iq - 1);
}

double reward_ts(int length, bool success, const RewardSpec& spec) {
  if (length < 1) throw ContractError("reward_ts: length must be >= 1");
  return spec.turn_penalty * length + (success ? spec.ts_bonus : 0.0);
}

double per_turn_reward(const RewardSpec& spec, bool turn_is_final,
                       const EpisodeOutcome* outcome) {
  if (!turn_is_final) return spec.turn_penalty;
  if (outcome == nullptr)
    throw ContractError("per_turn_reward: final turn requires an outcome");
  return spec.turn_penalty + terminal_bonus(spec, *outcome);
}

}  // namespace iqlab
