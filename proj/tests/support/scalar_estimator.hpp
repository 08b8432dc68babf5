#pragma once

// Straight-line scalar reimplementation of the recurrent IQ estimator: plain
// loops over doubles, no tape, reading IqModelParams directly. Used as the
// independent oracle for the graph-built forward pass.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "iqlab/estimator.hpp"

namespace iqlab::testing {

inline std::vector<double> cell_step(const LstmCellParams& cell,
                                     std::span<const double> x,
                                     const std::vector<double>& h_prev,
                                     std::vector<double>& c_state) {
  const int hidden = cell.b_i.value.cols;
  const int input = cell.wx_i.value.rows;
  auto affine = [&](const ad::Parameter& wx, const ad::Parameter& wh,
                    const ad::Parameter& b, int j) {
    double acc = b.value.a[j];
    for (int i = 0; i < input; ++i) acc += x[i] * wx.value(i, j);
    for (int i = 0; i < hidden; ++i) acc += h_prev[i] * wh.value(i, j);
    return acc;
  };
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> h(hidden);
  for (int j = 0; j < hidden; ++j) {
    const double gi = sigmoid(affine(cell.wx_i, cell.wh_i, cell.b_i, j));
    const double gf = sigmoid(affine(cell.wx_f, cell.wh_f, cell.b_f, j));
    const double go = sigmoid(affine(cell.wx_o, cell.wh_o, cell.b_o, j));
    const double gc = std::tanh(affine(cell.wx_c, cell.wh_c, cell.b_c, j));
    c_state[j] = gf * c_state[j] + gi * gc;
    h[j] = go * std::tanh(c_state[j]);
  }
  return h;
}

struct ScalarForward {
  std::array<double, kNumIqClasses> probs{};
  std::vector<double> attention;
};

inline ScalarForward scalar_forward(const IqModelParams& params,
                                    std::span<const ExchangeInput> prefix) {
  const IqModelConfig& cfg = params.config;
  const int t_len = static_cast<int>(prefix.size());
  const int hidden = cfg.hidden_size;

  // Forward recurrence h_fwd[i], i = 0..t-1.
  std::vector<std::vector<double>> h_fwd(t_len);
  {
    std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
    for (int i = 0; i < t_len; ++i) {
      h = cell_step(params.forward_cell, prefix[i], h, c);
      h_fwd[i] = h;
    }
  }
  // Backward recurrence runs from the end of the prefix toward its start.
  std::vector<std::vector<double>> h_all(t_len);
  if (cfg.bidirectional) {
    std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
    std::vector<std::vector<double>> h_bwd(t_len);
    for (int i = t_len - 1; i >= 0; --i) {
      h = cell_step(*params.backward_cell, prefix[i], h, c);
      h_bwd[i] = h;
    }
    for (int i = 0; i < t_len; ++i) {
      h_all[i] = h_fwd[i];
      h_all[i].insert(h_all[i].end(), h_bwd[i].begin(), h_bwd[i].end());
    }
  } else {
    h_all = h_fwd;
  }

  const int hdim = cfg.hidden_dim();
  std::vector<double> summary;
  ScalarForward out;
  if (cfg.use_attention) {
    const AttentionParams& att = *params.attention;
    const int adim = cfg.attn_dim();
    const std::vector<double>& query_h = h_all[t_len - 1];
    std::vector<double> scores(t_len);
    for (int i = 0; i < t_len; ++i) {
      double score_in = att.b_score.value.a[0];
      for (int a = 0; a < adim; ++a) {
        double g = att.b_hidden.value.a[a];
        for (int k = 0; k < hdim; ++k) {
          g += query_h[k] * att.w_query.value(k, a);
          g += h_all[i][k] * att.w_key.value(k, a);
        }
        score_in += std::tanh(g) * att.w_score.value(a, 0);
      }
      scores[i] = 1.0 / (1.0 + std::exp(-score_in));
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    out.attention.resize(t_len);
    for (int i = 0; i < t_len; ++i) {
      out.attention[i] = std::exp(scores[i] - mx);
      z += out.attention[i];
    }
    for (double& a : out.attention) a /= z;
    summary.assign(hdim, 0.0);
    for (int i = 0; i < t_len; ++i)
      for (int k = 0; k < hdim; ++k) summary[k] += out.attention[i] * h_all[i][k];
  } else {
    summary = h_all[t_len - 1];
  }

  std::array<double, kNumIqClasses> logits{};
  for (int c = 0; c < cfg.n_classes; ++c) {
    double acc = params.b_out.value.a[c];
    for (int k = 0; k < hdim; ++k) acc += summary[k] * params.w_out.value(k, c);
    logits[c] = acc;
  }
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double z = 0.0;
  for (int c = 0; c < cfg.n_classes; ++c) {
    out.probs[c] = std::exp(logits[c] - mx);
    z += out.probs[c];
  }
  for (double& p : out.probs) p /= z;
  return out;
}

}  // namespace iqlab::testing
