#include <doctest.h>

#include <cmath>
#include <vector>

#include "iqlab/policy.hpp"

using namespace iqlab;

namespace {

std::vector<double> state(double a, double b) { return {a, b}; }

GpPolicyConfig tight_config() {
  GpPolicyConfig config;
  config.prior_variance = 2.0;
  config.length_scale = 0.25;  // nearly tabular over one-hot states
  config.noise_variance = 0.1;
  config.nu = 1e-6;
  config.dictionary_cap = 64;
  config.gamma = 0.9;
  return config;
}

// Dense GP solve over the raw TD system, written independently of GpPolicy:
// mean(z) = k_z^T H^T (H K H^T + noise I)^-1 r.
struct DenseTdOracle {
  std::vector<std::vector<double>> points;  // sequence states
  std::vector<int> actions;
  std::vector<std::vector<double>> h_rows;
  std::vector<double> rewards;
  double prior, length_scale, noise, gamma;

  double kernel(const std::vector<double>& a, int aa, const std::vector<double>& b,
                int ab) const {
    if (aa != ab) return 0.0;
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return prior * std::exp(-d2 / (2.0 * length_scale * length_scale));
  }

  void add_episode(const std::vector<TdStep>& steps) {
    const std::size_t base = points.size();
    for (const TdStep& s : steps) {
      points.push_back(s.state);
      actions.push_back(s.action);
    }
    for (std::size_t t = 0; t < steps.size(); ++t) {
      std::vector<double> row;  // filled later, sized on demand
      row.assign(base + steps.size(), 0.0);
      row[base + t] = 1.0;
      if (t + 1 < steps.size()) row[base + t + 1] = -gamma;
      h_rows.push_back(std::move(row));
      rewards.push_back(steps[t].reward);
    }
    for (std::vector<double>& row : h_rows) row.resize(points.size(), 0.0);
  }

  double mean_at(const std::vector<double>& z, int action) const {
    const std::size_t m = h_rows.size();
    const std::size_t n = points.size();
    // A = H K H^T + noise I
    std::vector<std::vector<double>> hk(m, std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t j = 0; j < n; ++j)
          hk[r][c] += h_rows[r][j] * kernel(points[j], actions[j], points[c], actions[c]);
    std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t j = 0; j < n; ++j) a[r][c] += hk[r][j] * h_rows[c][j];
        if (r == c) a[r][c] += noise;
      }
    // Solve a * y = rewards by Gaussian elimination.
    std::vector<double> y = rewards;
    for (std::size_t col = 0; col < m; ++col) {
      std::size_t pivot = col;
      for (std::size_t r = col + 1; r < m; ++r)
        if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
      std::swap(a[pivot], a[col]);
      std::swap(y[pivot], y[col]);
      for (std::size_t r = 0; r < m; ++r) {
        if (r == col) continue;
        const double f = a[r][col] / a[col][col];
        for (std::size_t c = col; c < m; ++c) a[r][c] -= f * a[col][c];
        y[r] -= f * y[col];
      }
    }
    for (std::size_t r = 0; r < m; ++r) y[r] /= a[r][r];
    // mean = k_z^T H^T y
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      double hk_z = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        hk_z += h_rows[r][j] * kernel(points[j], actions[j], z, action);
      mean += hk_z * y[r];
    }
    return mean;
  }
};

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("empty dictionary: prior mean zero, prior variance everywhere") {
  GpPolicy policy(3, tight_config());
  const QEstimate q = policy.q_posterior(state(0.2, 0.8), 1);
  CHECK(q.mean == 0.0);
  CHECK(q.variance == doctest::Approx(2.0));
}

TEST_CASE("one noiseless-ish observation shrinks the mean toward the return") {
  GpPolicyConfig config = tight_config();
  GpPolicy policy(2, config);
  const std::vector<TdStep> episode = {{state(1, 0), 0, 1.5}};
  policy.episode_update(episode);
  CHECK(policy.dictionary_size() == 1);
  const QEstimate q = policy.q_posterior(state(1, 0), 0);
  // Hand GP regression with one observation: mean = r * v0 / (v0 + noise).
  const double expected = 1.5 * config.prior_variance /
                          (config.prior_variance + config.noise_variance);
  CHECK(q.mean == doctest::Approx(expected).epsilon(1e-9));
  CHECK(q.variance < config.prior_variance);
}

TEST_CASE("revisiting a dictionary point does not grow the dictionary") {
  GpPolicy policy(2, tight_config());
  const std::vector<TdStep> episode = {{state(1, 0), 0, 1.0}};
  policy.episode_update(episode);
  CHECK(policy.dictionary_size() == 1);
  policy.episode_update(episode);
  policy.episode_update(episode);
  CHECK(policy.dictionary_size() == 1);
}

TEST_CASE("all-zero rewards keep the posterior means at zero") {
  GpPolicy policy(2, tight_config());
  for (int ep = 0; ep < 5; ++ep) {
    const std::vector<TdStep> episode = {{state(1, 0), 0, 0.0},
                                         {state(0, 1), 1, 0.0}};
    policy.episode_update(episode);
  }
  CHECK(policy.q_posterior(state(1, 0), 0).mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(policy.q_posterior(state(0, 1), 1).mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single allowed action is always chosen") {
  GpPolicy policy(4, tight_config());
  Rng rng(3);
  const std::vector<bool> allowed = {false, false, true, false};
  CHECK(policy.select_action(state(0, 1), allowed, true, rng) == 2);
  CHECK(policy.select_action(state(0, 1), allowed, false, rng) == 2);
}

TEST_CASE("empty allowed set is a contract error") {
  GpPolicy policy(3, tight_config());
  Rng rng(5);
  CHECK_THROWS_AS(policy.select_action(state(0, 1), {false, false, false}, false, rng),
                  ContractError);
}

TEST_CASE("exploit mode picks the argmax of the posterior means") {
  GpPolicy policy(2, tight_config());
  const std::vector<TdStep> low = {{state(1, 0), 0, 0.2}};
  const std::vector<TdStep> high = {{state(1, 0), 1, 1.0}};
  policy.episode_update(low);
  policy.episode_update(high);
  Rng rng(7);
  CHECK(policy.select_action(state(1, 0), {true, true}, false, rng) == 1);
  // Argmax choice is invariant under a positive affine transform.
  const double m0 = policy.q_posterior(state(1, 0), 0).mean;
  const double m1 = policy.q_posterior(state(1, 0), 1).mean;
  CHECK((3.0 * m1 + 2.0 > 3.0 * m0 + 2.0) == (m1 > m0));
}

TEST_CASE("degenerate posterior makes explore and exploit agree") {
  // Drive the variance at a visited point to near zero with many updates and
  // tiny noise.
  GpPolicyConfig config = tight_config();
  config.noise_variance = 1e-6;
  GpPolicy policy(2, config);
  for (int i = 0; i < 30; ++i) {
    const std::vector<TdStep> a0 = {{state(1, 0), 0, 0.5}};
    const std::vector<TdStep> a1 = {{state(1, 0), 1, 1.5}};
    policy.episode_update(a0);
    policy.episode_update(a1);
  }
  CHECK(policy.q_posterior(state(1, 0), 0).variance < 1e-6);
  Rng rng(11);
  for (int i = 0; i < 20; ++i)
    CHECK(policy.select_action(state(1, 0), {true, true}, true, rng) ==
          policy.select_action(state(1, 0), {true, true}, false, rng));
}

TEST_CASE("ties break toward the lowest action index") {
  GpPolicy policy(3, tight_config());  // all means zero
  Rng rng(13);
  CHECK(policy.select_action(state(1, 0), {true, true, true}, false, rng) == 0);
}

TEST_CASE("posterior interpolates returns in the noiseless setting") {
  GpPolicyConfig config = tight_config();
  config.noise_variance = 1e-8;
  config.nu = 0.0;
  GpPolicy policy(2, config);
  // One deterministic episode; returns with gamma = 0.9.
  const std::vector<TdStep> episode = {{state(1, 0), 0, 1.0},
                                       {state(0, 1), 1, -1.0},
                                       {state(1, 1), 0, 2.0}};
  policy.episode_update(episode);
  // Returns: 2.0; -1 + 0.9*2 = 0.8; 1 + 0.9*0.8 = 1.72.
  CHECK(policy.q_posterior(state(1, 1), 0).mean == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(policy.q_posterior(state(0, 1), 1).mean == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(policy.q_posterior(state(1, 0), 0).mean == doctest::Approx(1.72).epsilon(1e-4));
}

TEST_CASE("sparse posterior matches the dense gp-td solve") {
  GpPolicyConfig config = tight_config();
  config.noise_variance = 0.5;
  config.length_scale = 0.7;  // overlapping kernels: projections matter
  config.nu = 0.0;
  GpPolicy policy(2, config);
  DenseTdOracle oracle{{}, {}, {}, {}, config.prior_variance, config.length_scale,
                       config.noise_variance, config.gamma};

  Rng rng(17);
  for (int ep = 0; ep < 4; ++ep) {
    std::vector<TdStep> episode;
    const int len = 2 + ep % 3;
    for (int t = 0; t < len; ++t) {
      episode.push_back({state(rng.uniform_int(0, 2) * 0.5, rng.uniform_int(0, 2) * 0.5),
                         rng.uniform_int(0, 1), rng.uniform(-1.0, 1.0)});
    }
    policy.episode_update(episode);
    oracle.add_episode(episode);
  }
  // Compare at every visited point.
  for (std::size_t i = 0; i < oracle.points.size(); ++i) {
    const double sparse = policy.q_posterior(oracle.points[i], oracle.actions[i]).mean;
    const double dense = oracle.mean_at(oracle.points[i], oracle.actions[i]);
    CAPTURE(i);
    CHECK(sparse == doctest::Approx(dense).epsilon(1e-6));
  }
}

TEST_CASE("dictionary growth is monotone and capped") {
  GpPolicyConfig config = tight_config();
  config.dictionary_cap = 3;
  GpPolicy policy(2, config);
  Rng rng(19);
  std::size_t previous = 0;
  for (int ep = 0; ep < 10; ++ep) {
    const std::vector<TdStep> episode = {
        {state(rng.uniform(), rng.uniform()), rng.uniform_int(0, 1), rng.uniform()}};
    policy.episode_update(episode);
    CHECK(policy.dictionary_size() >= previous);
    previous = policy.dictionary_size();
    CHECK(policy.dictionary_size() <= 3);
  }
  CHECK(policy.dictionary_size() == 3);
}

TEST_CASE("variance never goes negative") {
  GpPolicy policy(2, tight_config());
  Rng rng(23);
  for (int ep = 0; ep < 20; ++ep) {
    std::vector<TdStep> episode;
    for (int t = 0; t < 4; ++t)
      episode.push_back(
          {state(rng.uniform(), rng.uniform()), rng.uniform_int(0, 1), rng.uniform()});
    policy.episode_update(episode);
  }
  for (int i = 0; i < 30; ++i) {
    const QEstimate q =
        policy.q_posterior(state(rng.uniform(), rng.uniform()), rng.uniform_int(0, 1));
    CHECK(q.variance >= 0.0);
  }
}

TEST_CASE("two-state toy mdp converges to the value-iteration optimum") {
  // s0 --a0/r0--> s1; s0 --a1/r0.3--> end;
  // s1 --a0/r1.0--> end; s1 --a1/r0.95--> end. gamma 0.9.
  // Optimal: a0 everywhere; Q*(s0,a0)=0.9, Q*(s0,a1)=0.3,
  // Q*(s1,a0)=1.0, Q*(s1,a1)=0.95. Suboptimal actions terminate, so their
  // values are anchored by direct observations rather than bootstrap chains.
  const std::vector<double> s0 = state(1, 0);
  const std::vector<double> s1 = state(0, 1);
  struct Transition {
    int next;  // -1: terminal
    double reward;
  };
  const Transition mdp[2][2] = {{{1, 0.0}, {-1, 0.3}}, {{-1, 1.0}, {-1, 0.95}}};

  // Value-iteration oracle.
  double q_star[2][2] = {};
  for (int sweep = 0; sweep < 500; ++sweep) {
    double next_q[2][2];
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) {
        const Transition& tr = mdp[s][a];
        const double v_next =
            tr.next < 0 ? 0.0 : std::max(q_star[tr.next][0], q_star[tr.next][1]);
        next_q[s][a] = tr.reward + 0.9 * v_next;
      }
    std::copy(&next_q[0][0], &next_q[0][0] + 4, &q_star[0][0]);
  }
  CHECK(q_star[0][0] == doctest::Approx(0.9));
  CHECK(q_star[1][1] == doctest::Approx(0.95));

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    GpPolicy policy(2, tight_config());
    Rng rng(seed);
    for (int ep = 0; ep < 500; ++ep) {
      std::vector<TdStep> episode;
      int s = 0;
      for (int step = 0; step < 50 && s >= 0; ++step) {
        const std::vector<double>& sv = s == 0 ? s0 : s1;
        const int a = policy.select_action(sv, {true, true}, true, rng);
        const Transition& tr = mdp[s][a];
        episode.push_back({sv, a, tr.reward});
        s = tr.next;
      }
      policy.episode_update(episode);
    }
    CAPTURE(seed);
    for (int s = 0; s < 2; ++s) {
      const std::vector<double>& sv = s == 0 ? s0 : s1;
      Rng greedy_rng(99);
      CHECK(policy.select_action(sv, {true, true}, false, greedy_rng) == 0);
      for (int a = 0; a < 2; ++a) {
        const double mean = policy.q_posterior(sv, a).mean;
        CAPTURE(s);
        CAPTURE(a);
        CHECK(std::abs(mean - q_star[s][a]) < 0.1);
      }
    }
  }
}

TEST_CASE("policy checkpoints round-trip") {
  GpPolicy policy(3, tight_config());
  Rng rng(29);
  for (int ep = 0; ep < 8; ++ep) {
    std::vector<TdStep> episode;
    for (int t = 0; t < 3; ++t)
      episode.push_back(
          {state(rng.uniform(), rng.uniform()), rng.uniform_int(0, 2), rng.uniform()});
    policy.episode_update(episode);
  }
  const std::string path = "/tmp/iqlab_test_policy.bin";
  policy.save(path);
  const GpPolicy loaded = GpPolicy::load(path);
  CHECK(loaded.dictionary_size() == policy.dictionary_size());
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> z = state(rng.uniform(), rng.uniform());
    for (int a = 0; a < 3; ++a) {
      const QEstimate qa = policy.q_posterior(z, a);
      const QEstimate qb = loaded.q_posterior(z, a);
      CHECK(qa.mean == qb.mean);
      CHECK(qa.variance == qb.variance);
    }
  }
}

}  // TEST_SUITE
