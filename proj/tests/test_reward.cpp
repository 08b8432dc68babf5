#include <doctest.h>

#include "iqlab/reward.hpp"
#include "iqlab/rng.hpp"

using namespace iqlab;

TEST_SUITE("reward") {

TEST_CASE("closed-form anchors: best one-turn dialogue and worst long one") {
  CHECK(reward_iq(1, 5) == 19.0);
  CHECK(reward_iq(10, 1) == -10.0);
  CHECK(reward_iq(7, 3) == 3.0);
}

TEST_CASE("task-success closed form") {
  CHECK(reward_ts(5, true) == 15.0);
  CHECK(reward_ts(5, false) == -5.0);
}

TEST_CASE("a fully satisfied dialogue is worth a success") {
  for (int t = 1; t <= 50; ++t) CHECK(reward_ts(t, true) == reward_iq(t, 5));
}

TEST_CASE("reward_iq is monotone in iq and antitone in length") {
  for (int t = 1; t < 30; ++t) {
    for (int iq = 1; iq < 5; ++iq) CHECK(reward_iq(t, iq + 1) > reward_iq(t, iq));
    CHECK(reward_iq(t + 1, 3) < reward_iq(t, 3));
  }
}

TEST_CASE("contract errors for out-of-range arguments") {
  CHECK_THROWS_AS(reward_iq(0, 3), ContractError);
  CHECK_THROWS_AS(reward_iq(5, 0), ContractError);
  CHECK_THROWS_AS(reward_iq(5, 6), ContractError);
  CHECK_THROWS_AS(reward_ts(0, true), ContractError);
}

TEST_CASE("per-turn rewards telescope to the closed forms") {
  RewardSpec ts_spec;
  ts_spec.kind = RewardKind::kTaskSuccess;
  EpisodeOutcome outcome{3, true, 1};
  CHECK(per_turn_reward(ts_spec, false, nullptr) == -1.0);
  CHECK(per_turn_reward(ts_spec, true, &outcome) == 19.0);

  RewardSpec iq_spec;
  iq_spec.kind = RewardKind::kIqBiLstm;
  EpisodeOutcome iq_outcome{3, false, 4};
  // [-1, -1, 14] sums to reward_iq(3, 4) = 12
  CHECK(per_turn_reward(iq_spec, false, nullptr) == -1.0);
  CHECK(per_turn_reward(iq_spec, true, &iq_outcome) == 14.0);
  CHECK(-1.0 + -1.0 + 14.0 == reward_iq(3, 4));
}

TEST_CASE("final turn without an outcome is a contract error") {
  RewardSpec spec;
  CHECK_THROWS_AS(per_turn_reward(spec, true, nullptr), ContractError);
}

TEST_CASE("episode sums equal closed forms over random episodes") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const int length = rng.uniform_int(1, 40);
    const bool success = rng.bernoulli(0.5);
    const int iq = rng.uniform_int(1, 5);
    EpisodeOutcome outcome{length, success, iq};

    RewardSpec spec;
    spec.kind = rng.bernoulli(0.5) ? RewardKind::kTaskSuccess : RewardKind::kIqBiLstm;
    double total = 0.0;
    for (int t = 1; t <= length; ++t)
      total += per_turn_reward(spec, t == length, t == length ? &outcome : nullptr);
    const double expected = spec.kind == RewardKind::kTaskSuccess
                                ? reward_ts(length, success)
                                : reward_iq(length, iq);
    CHECK(total == expected);
  }
}

TEST_CASE("reward range stays within [-T, 19]") {
  for (int t = 1; t <= 50; ++t)
    for (int iq = 1; iq <= 5; ++iq) {
      const double r = reward_iq(t, iq);
      CHECK(r >= -t);
      CHECK(r <= 19.0);
    }
}

}  // TEST_SUITE
