#include "iqlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "binary_io.hpp"

namespace iqlab {

using ad::Mat;

namespace {

// Gauss-Jordan inverse with partial pivoting; throws NumericsError on a
// singular matrix.
Mat invert(Mat m) {
  const int n = m.rows;
  if (n != m.cols) throw ContractError("invert: matrix not square");
  Mat inv(n, n);
  for (int i = 0; i < n; ++i) inv(i, i) = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
    if (std::abs(m(pivot, col)) < 1e-300)
      throw NumericsError("invert: singular matrix");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) {
        std::swap(m(pivot, c), m(col, c));
        std::swap(inv(pivot, c), inv(col, c));
      }
    }
    const double d = m(col, col);
    for (int c = 0; c < n; ++c) {
      m(col, c) /= d;
      inv(col, c) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m(r, col);
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        m(r, c) -= f * m(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

Mat grow_mat(const Mat& m) {
  Mat out(m.rows + 1, m.cols + 1);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out(r, c) = m(r, c);
  return out;
}

std::vector<double> matvec(const Mat& m, std::span<const double> v) {
  std::vector<double> out(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += m(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

GpPolicy::GpPolicy(int n_actions, GpPolicyConfig config)
    : n_actions_(n_actions), config_(config), block_(n_actions) {
  if (n_actions < 1) throw ContractError("GpPolicy: need at least one action");
  if (config.prior_variance <= 0.0 || config.noise_variance <= 0.0)
    throw ContractError("GpPolicy: variances must be positive");
  block_k_inv_.assign(n_actions, Mat());
}

void GpPolicy::check_state_dim(std::span<const double> state) const {
  if (state_dim_ >= 0 && static_cast<int>(state.size()) != state_dim_)
    throw ContractError("GpPolicy: state dimension changed");
}

double GpPolicy::kernel_state(std::span<const double> a,
                              std::span<const double> b) const {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return config_.prior_variance *
         std::exp(-d2 / (2.0 * config_.length_scale * config_.length_scale));
}

void GpPolicy::project(std::span<const double> state, int action,
                       std::vector<double>& coeffs, double& residual) const {
  const std::vector<int>& block = block_[action];
  const int nb = static_cast<int>(block.size());
  coeffs.assign(nb, 0.0);
  if (nb == 0) {
    residual = config_.prior_variance;
    return;
  }
  std::vector<double> k(nb);
  for (int i = 0; i < nb; ++i)
    k[i] = kernel_state(state, entries_[block[i]].state);
  const Mat& k_inv = block_k_inv_[action];
  for (int r = 0; r < nb; ++r) {
    double acc = 0.0;
    for (int c = 0; c < nb; ++c) acc += k_inv(r, c) * k[c];
    coeffs[r] = acc;
  }
  residual = std::max(0.0, config_.prior_variance - dot(k, coeffs));
}

QEstimate GpPolicy::q_posterior(std::span<const double> state, int action) const {
  if (action < 0 || action >= n_actions_)
    throw ContractError("q_posterior: action index out of range");
  check_state_dim(state);
  QEstimate q;
  if (entries_.empty()) {
    q.mean = 0.0;
    q.variance = config_.prior_variance;
    return q;
  }
  std::vector<double> coeffs;
  double residual = 0.0;
  project(state, action, coeffs, residual);
  const std::vector<int>& block = block_[action];
  double mean = 0.0;
  for (std::size_t i = 0; i < block.size(); ++i)
    mean += coeffs[i] * posterior_mean_[block[i]];
  double quad = 0.0;
  for (std::size_t i = 0; i < block.size(); ++i)
    for (std::size_t j = 0; j < block.size(); ++j)
      quad += coeffs[i] * posterior_cov_(block[i], block[j]) * coeffs[j];
  q.mean = mean;
  q.variance = std::max(0.0, residual + quad);
  return q;
}

int GpPolicy::select_action(std::span<const double> state,
                            const std::vector<bool>& allowed, bool explore,
                            Rng& rng) const {
  if (std::none_of(allowed.begin(), allowed.end(), [](bool b) { return b; }))
    throw ContractError("select_action: empty allowed set");
  int best = -1;
  double best_score = 0.0;
  for (int a = 0; a < static_cast<int>(allowed.size()); ++a) {
    if (!allowed[a]) continue;
    const QEstimate q = q_posterior(state, a);
    const double score =
        explore ? q.mean + std::sqrt(q.variance) * rng.normal() : q.mean;
    if (best < 0 || score > best_score) {
      best = a;
      best_score = score;
    }
  }
  return best;
}

bool GpPolicy::grow(const std::vector<double>& state, int action) {
  if (static_cast<int>(entries_.size()) >= config_.dictionary_cap) return false;
  std::vector<double> g_block;
  double residual = 0.0;
  project(state, action, g_block, residual);
  if (residual <= config_.nu * config_.prior_variance) return false;

  const int n = static_cast<int>(entries_.size());
  const std::vector<int>& block = block_[action];
  const int nb = static_cast<int>(block.size());

  // Block inverse Gram update (partitioned inverse).
  Mat new_k_inv(nb + 1, nb + 1);
  const Mat& old = block_k_inv_[action];
  for (int r = 0; r < nb; ++r)
    for (int c = 0; c < nb; ++c)
      new_k_inv(r, c) = old(r, c) + g_block[r] * g_block[c] / residual;
  for (int i = 0; i < nb; ++i) {
    new_k_inv(i, nb) = -g_block[i] / residual;
    new_k_inv(nb, i) = -g_block[i] / residual;
  }
  new_k_inv(nb, nb) = 1.0 / residual;
  block_k_inv_[action] = std::move(new_k_inv);

  // Posterior covariance: bordered update of P^-1 = K^-1 + G/noise, where the
  // new point has no observations yet. Embed the block projection globally.
  if (n == 0) {
    // With a single point and no data, P = (K^-1)^-1 = K = prior.
    posterior_cov_ = Mat(1, 1);
    posterior_cov_(0, 0) = config_.prior_variance;
    gram_accum_ = Mat(1, 1);
    reward_accum_.assign(1, 0.0);
    posterior_mean_.assign(1, 0.0);
  } else {
    std::vector<double> g(n, 0.0);
    for (int i = 0; i < nb; ++i) g[block[i]] = g_block[i];
    // A^-1 = (P^-1 + g g^T / residual)^-1 via Sherman-Morrison.
    const std::vector<double> pg = matvec(posterior_cov_, g);
    const double sm_denom = residual + dot(g, pg);
    if (sm_denom <= 0.0) {
      // Fall back to a full rebuild below.
      entries_.push_back({state, action});
      block_[action].push_back(n);
      gram_accum_ = grow_mat(gram_accum_);
      reward_accum_.push_back(0.0);
      posterior_mean_.push_back(0.0);
      state_dim_ = static_cast<int>(state.size());
      recondition();
      return true;
    }
    Mat a_inv = posterior_cov_;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a_inv(r, c) -= pg[r] * pg[c] / sm_denom;
    const std::vector<double> ag = matvec(a_inv, g);
    const double gag = dot(g, ag);
    const double schur = 1.0 / residual - gag / (residual * residual);
    if (schur <= 0.0) {
      entries_.push_back({state, action});
      block_[action].push_back(n);
      gram_accum_ = grow_mat(gram_accum_);
      reward_accum_.push_back(0.0);
      posterior_mean_.push_back(0.0);
      state_dim_ = static_cast<int>(state.size());
      recondition();
      return true;
    }
    Mat p_new(n + 1, n + 1);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        p_new(r, c) = a_inv(r, c) + ag[r] * ag[c] / (residual * residual * schur);
    for (int i = 0; i < n; ++i) {
      p_new(i, n) = ag[i] / (residual * schur);
      p_new(n, i) = p_new(i, n);
    }
    p_new(n, n) = 1.0 / schur;
    posterior_cov_ = std::move(p_new);
    gram_accum_ = grow_mat(gram_accum_);
    reward_accum_.push_back(0.0);
    posterior_mean_.push_back(0.0);
  }

  entries_.push_back({state, action});
  block_[action].push_back(n);
  state_dim_ = static_cast<int>(state.size());
  refresh_mean();
  return true;
}

void GpPolicy::rank_one_update(const std::vector<double>& h, double reward) {
  const int n = static_cast<int>(entries_.size());
  const std::vector<double> d = matvec(posterior_cov_, h);
  const double denom = config_.noise_variance + dot(h, d);
  if (denom <= config_.noise_variance * 1e-12) {
    recondition();
    return rank_one_update(h, reward);
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) posterior_cov_(r, c) -= d[r] * d[c] / denom;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) gram_accum_(r, c) += h[r] * h[c];
  for (int r = 0; r < n; ++r) reward_accum_[r] += reward * h[r];
  refresh_mean();
}

void GpPolicy::refresh_mean() {
  const std::vector<double> pw = matvec(posterior_cov_, reward_accum_);
  posterior_mean_.assign(pw.begin(), pw.end());
  for (double& x : posterior_mean_) x /= config_.noise_variance;
}

void GpPolicy::recondition() {
  // Rebuild P from the exact sufficient statistics with added jitter.
  const int n = static_cast<int>(entries_.size());
  Mat m(n, n);
  for (int a = 0; a < n_actions_; ++a) {
    const std::vector<int>& block = block_[a];
    const Mat& k_inv = block_k_inv_[a];
    for (std::size_t i = 0; i < block.size(); ++i)
      for (std::size_t j = 0; j < block.size(); ++j)
        m(block[i], block[j]) = k_inv(static_cast<int>(i), static_cast<int>(j));
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) m(r, c) += gram_accum_(r, c) / config_.noise_variance;
    m(r, r) += config_.jitter;
  }
  posterior_cov_ = invert(std::move(m));
  refresh_mean();
  ++recondition_count_;
  std::cerr << "gp-policy: reconditioned posterior with jitter (count="
            << recondition_count_ << ")\n";
}

void GpPolicy::episode_update(std::span<const TdStep> trajectory) {
  if (trajectory.empty()) throw ContractError("episode_update: empty trajectory");
  for (const TdStep& step : trajectory) {
    if (step.action < 0 || step.action >= n_actions_)
      throw ContractError("episode_update: action index out of range");
    if (state_dim_ >= 0 && static_cast<int>(step.state.size()) != state_dim_)
      throw ContractError("episode_update: state dimension changed");
    if (state_dim_ < 0) state_dim_ = static_cast<int>(step.state.size());
  }

  // Pass 1: extend the dictionary where the episode leaves the kernel span.
  for (const TdStep& step : trajectory) grow(step.state, step.action);

  // Pass 2: fold in the TD observations against the final dictionary.
  const int n = static_cast<int>(entries_.size());
  std::vector<double> h(n), proj_curr, proj_next;
  double residual = 0.0;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const TdStep& step = trajectory[t];
    project(step.state, step.action, proj_curr, residual);
    std::fill(h.begin(), h.end(), 0.0);
    const std::vector<int>& block = block_[step.action];
    for (std::size_t i = 0; i < proj_curr.size(); ++i) h[block[i]] += proj_curr[i];
    if (t + 1 < trajectory.size()) {
      const TdStep& next = trajectory[t + 1];
      project(next.state, next.action, proj_next, residual);
      const std::vector<int>& nblock = block_[next.action];
      for (std::size_t i = 0; i < proj_next.size(); ++i)
        h[nblock[i]] -= config_.gamma * proj_next[i];
    }
    rank_one_update(h, step.reward);
  }
}

void GpPolicy::save(const std::string& path) const {
  io::Writer w(path);
  io::write_header(w, io::kKindPolicy);
  w.put(static_cast<std::int32_t>(n_actions_));
  w.put(static_cast<std::int32_t>(state_dim_));
  w.put(config_.prior_variance);
  w.put(config_.length_scale);
  w.put(config_.noise_variance);
  w.put(config_.nu);
  w.put(static_cast<std::int32_t>(config_.dictionary_cap));
  w.put(config_.gamma);
  w.put(config_.jitter);
  w.put(static_cast<std::int32_t>(recondition_count_));
  w.put(static_cast<std::uint64_t>(entries_.size()));
  for (const Entry& e : entries_) {
    w.put_doubles(e.state);
    w.put(static_cast<std::int32_t>(e.action));
  }
  for (const Mat& k_inv : block_k_inv_) w.put_mat(k_inv);
  w.put_mat(posterior_cov_);
  w.put_mat(gram_accum_);
  w.put_doubles(reward_accum_);
  w.put_doubles(posterior_mean_);
  w.finish();
}

GpPolicy GpPolicy::load(const std::string& path) {
  io::Reader r(path);
  io::read_header(r, io::kKindPolicy, "gp policy");
  const int n_actions = r.get<std::int32_t>();
  const int state_dim = r.get<std::int32_t>();
  GpPolicyConfig config;
  config.prior_variance = r.get<double>();
  config.length_scale = r.get<double>();
  config.noise_variance = r.get<double>();
  config.nu = r.get<double>();
  config.dictionary_cap = r.get<std::int32_t>();
  config.gamma = r.get<double>();
  config.jitter = r.get<double>();
  GpPolicy policy(n_actions, config);
  policy.state_dim_ = state_dim;
  policy.recondition_count_ = r.get<std::int32_t>();
  const std::uint64_t n_entries = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_entries; ++i) {
    Entry e;
    e.state = r.get_doubles();
    e.action = r.get<std::int32_t>();
    if (e.action < 0 || e.action >= n_actions)
      throw ValidationError(path + ": dictionary action out of range");
    policy.block_[e.action].push_back(static_cast<int>(policy.entries_.size()));
    policy.entries_.push_back(std::move(e));
  }
  for (Mat& k_inv : policy.block_k_inv_) k_inv = r.get_mat();
  policy.posterior_cov_ = r.get_mat();
  policy.gram_accum_ = r.get_mat();
  policy.reward_accum_ = r.get_doubles();
  policy.posterior_mean_ = r.get_doubles();
  const int n = static_cast<int>(policy.entries_.size());
  if (policy.posterior_cov_.rows != n || policy.gram_accum_.rows != n ||
      static_cast<int>(policy.reward_accum_.size()) != n ||
      static_cast<int>(policy.posterior_mean_.size()) != n)
    throw ValidationError(path + ": inconsistent policy checkpoint");
  return policy;
}

}  // namespace iqlab
