#include "iqlab/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iqlab/rng.hpp"

namespace iqlab {

using ad::Mat;
using ad::Parameter;
using ad::Tape;
using ad::Var;

std::string IqModelConfig::variant_name() const {
  std::string name = bidirectional ? "bilstm" : "lstm";
  if (use_attention) name += "-att";
  return name;
}

void LstmCellParams::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&wx_i, &wx_f, &wx_o, &wx_c, &wh_i, &wh_f, &wh_o, &wh_c,
                       &b_i, &b_f, &b_o, &b_c})
    out.push_back(p);
}

void AttentionParams::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_query, &w_key, &b_hidden, &w_score, &b_score})
    out.push_back(p);
}

std::vector<Parameter*> IqModelParams::all_parameters() {
  std::vector<Parameter*> out;
  forward_cell.collect(out);
  if (backward_cell) backward_cell->collect(out);
  if (attention) attention->collect(out);
  out.push_back(&w_out);
  out.push_back(&b_out);
  return out;
}

namespace {

Mat uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  Mat m(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : m.a) x = rng.uniform(-bound, bound);
  return m;
}

LstmCellParams init_cell(const std::string& prefix, int input, int hidden,
                         Rng& rng) {
  auto wx = [&](const char* g) {
    return Parameter(prefix + ".wx_" + g, uniform_init(input, hidden, input, rng));
  };
  auto wh = [&](const char* g) {
    return Parameter(prefix + ".wh_" + g, uniform_init(hidden, hidden, hidden, rng));
  };
  auto bias = [&](const char* g, double init) {
    Mat m(1, hidden);
    m.fill(init);
    return Parameter(prefix + ".b_" + g, std::move(m));
  };
  // Forget-gate bias starts at +1 so early gradients reach back in time.
  return LstmCellParams{wx("i"), wx("f"), wx("o"), wx("c"),
                        wh("i"), wh("f"), wh("o"), wh("c"),
                        bias("i", 0.0), bias("f", 1.0), bias("o", 0.0),
                        bias("c", 0.0)};
}

}  // namespace

IqModelParams init_iq_model(const IqModelConfig& config) {
  if (config.hidden_size < 1) throw ContractError("hidden_size must be >= 1");
  Rng rng(Rng::derive_seed(config.seed, 0x696e6974));  // init stream
  IqModelParams params{.config = config,
                       .forward_cell = init_cell("fwd", config.input_size,
                                                 config.hidden_size, rng),
                       .backward_cell = std::nullopt,
                       .attention = std::nullopt,
                       .w_out = Parameter(),
                       .b_out = Parameter()};
  if (config.bidirectional)
    params.backward_cell =
        init_cell("bwd", config.input_size, config.hidden_size, rng);
  const int hdim = config.hidden_dim();
  if (config.use_attention) {
    // Wider init on the scoring path: near-zero scores leave the softmax at
    // uniform weights, where its common-mode gradient vanishes and the
    // mechanism barely trains.
    const int adim = config.attn_dim();
    params.attention = AttentionParams{
        Parameter("att.w_query", uniform_init(hdim, adim, hdim / 16 + 1, rng)),
        Parameter("att.w_key", uniform_init(hdim, adim, hdim / 16 + 1, rng)),
        Parameter("att.b_hidden", Mat(1, adim)),
        Parameter("att.w_score", uniform_init(adim, 1, adim / 16 + 1, rng)),
        Parameter("att.b_score", Mat(1, 1))};
  }
  params.w_out = Parameter("out.w", uniform_init(hdim, config.n_classes, hdim, rng));
  params.b_out = Parameter("out.b", Mat(1, config.n_classes));
  return params;
}

namespace {

struct CellVars {
  Var wx_i, wx_f, wx_o, wx_c;
  Var wh_i, wh_f, wh_o, wh_c;
  Var b_i, b_f, b_o, b_c;
};

CellVars bind_cell(Tape& tape, LstmCellParams& p) {
  return CellVars{tape.param(p.wx_i), tape.param(p.wx_f), tape.param(p.wx_o),
                  tape.param(p.wx_c), tape.param(p.wh_i), tape.param(p.wh_f),
                  tape.param(p.wh_o), tape.param(p.wh_c), tape.param(p.b_i),
                  tape.param(p.b_f),  tape.param(p.b_o),  tape.param(p.b_c)};
}

struct LstmState {
  Var h, c;
};

LstmState lstm_step(Tape& tape, const CellVars& w, Var x, const LstmState& prev) {
  auto gate = [&](Var wx, Var wh, Var b) {
    return tape.add(tape.add(tape.matmul(x, wx), tape.matmul(prev.h, wh)), b);
  };
  const Var i = tape.sigmoid(gate(w.wx_i, w.wh_i, w.b_i));
  const Var f = tape.sigmoid(gate(w.wx_f, w.wh_f, w.b_f));
  const Var o = tape.sigmoid(gate(w.wx_o, w.wh_o, w.b_o));
  const Var g = tape.tanh(gate(w.wx_c, w.wh_c, w.b_c));
  const Var c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  const Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

}  // namespace

ForwardGraph build_forward(Tape& tape, IqModelParams& params,
                           std::span<const ExchangeInput> prefix) {
  const IqModelConfig& cfg = params.config;
  const int t = static_cast<int>(prefix.size());
  if (t < 1) throw ContractError("forward: empty sub-dialogue");
  for (const ExchangeInput& e : prefix)
    if (static_cast<int>(e.size()) != cfg.input_size)
      throw ContractError("forward: input dimension mismatch");

  std::vector<Var> inputs(t);
  for (int i = 0; i < t; ++i) inputs[i] = tape.constant_row(prefix[i]);

  const Mat zero_h(1, cfg.hidden_size);
  const CellVars fwd = bind_cell(tape, params.forward_cell);
  std::vector<Var> h_fwd(t);
  LstmState state{tape.constant(zero_h), tape.constant(zero_h)};
  for (int i = 0; i < t; ++i) {
    state = lstm_step(tape, fwd, inputs[i], state);
    h_fwd[i] = state.h;
  }

  // Per-position hidden representation of the sub-dialogue.
  std::vector<Var> h(t);
  if (cfg.bidirectional) {
    const CellVars bwd = bind_cell(tape, *params.backward_cell);
    std::vector<Var> h_bwd(t);
    LstmState bstate{tape.constant(zero_h), tape.constant(zero_h)};
    for (int i = t - 1; i >= 0; --i) {
      bstate = lstm_step(tape, bwd, inputs[i], bstate);
      h_bwd[i] = bstate.h;
    }
    for (int i = 0; i < t; ++i) {
      const Var parts[] = {h_fwd[i], h_bwd[i]};
      h[i] = tape.concat_cols(parts);
    }
  } else {
    h = h_fwd;
  }

  ForwardGraph out;
  Var summary;
  if (cfg.use_attention) {
    AttentionParams& att = *params.attention;
    const Var w_query = tape.param(att.w_query);
    const Var w_key = tape.param(att.w_key);
    const Var b_hidden = tape.param(att.b_hidden);
    const Var w_score = tape.param(att.w_score);
    const Var b_score = tape.param(att.b_score);
    const Var query = tape.matmul(h[t - 1], w_query);
    std::vector<Var> scores(t);
    for (int i = 0; i < t; ++i) {
      const Var g =
          tape.tanh(tape.add(tape.add(query, tape.matmul(h[i], w_key)), b_hidden));
      scores[i] = tape.sigmoid(tape.add(tape.matmul(g, w_score), b_score));
    }
    const Var score_row = tape.concat_cols(scores);
    out.attention_weights = tape.softmax_rows(score_row);
    const Var stacked = tape.concat_rows(h);
    summary = tape.matmul(out.attention_weights, stacked);
  } else {
    summary = h[t - 1];
  }

  out.logits = tape.add(tape.matmul(summary, tape.param(params.w_out)),
                        tape.param(params.b_out));
  out.probs = tape.softmax_rows(out.logits);
  return out;
}

namespace {

Prediction forward_on(Tape& tape, IqModelParams& params,
                      std::span<const ExchangeInput> prefix) {
  tape.reset();
  const ForwardGraph g = build_forward(tape, params, prefix);
  Prediction pred;
  const std::span<const double> probs = tape.value(g.probs);
  std::copy(probs.begin(), probs.end(), pred.probs.begin());
  if (g.attention_weights.valid()) {
    const std::span<const double> att = tape.value(g.attention_weights);
    pred.attention.assign(att.begin(), att.end());
  }
  return pred;
}

std::vector<ExchangeInput> prefix_inputs(const Dialogue& d, int t) {
  std::vector<ExchangeInput> inputs(t);
  for (int i = 1; i <= t; ++i) inputs[i - 1] = exchange_features(d, i);
  return inputs;
}

}  // namespace

Prediction forward(IqModelParams& params, std::span<const ExchangeInput> prefix) {
  Tape tape;
  return forward_on(tape, params, prefix);
}

int argmax_label(std::span<const double> probs) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(probs.size()); ++k)
    if (probs[k] > probs[best]) best = k;
  return best + 1;
}

int predict_iq(IqModelParams& params, const Dialogue& dialogue, int t) {
  if (t < 1 || t > dialogue.length())
    throw ContractError("predict_iq: turn index out of range");
  const Prediction pred = forward(params, prefix_inputs(dialogue, t));
  return argmax_label(pred.probs);
}

TrainResult train(IqModelParams& params, const Corpus& corpus,
                  std::span<const PrefixSample> train_samples, int epochs,
                  std::span<const PrefixSample> validation_samples) {
  if (corpus.dialogues.empty()) throw ContractError("train: empty corpus");
  if (train_samples.empty()) throw ContractError("train: no training samples");
  if (epochs < 1) throw ContractError("train: epochs must be >= 1");
  const IqModelConfig& cfg = params.config;

  // Exchange features per dialogue, computed once.
  std::vector<std::vector<ExchangeInput>> features(corpus.dialogues.size());
  auto dialogue_features = [&](int di) -> const std::vector<ExchangeInput>& {
    std::vector<ExchangeInput>& f = features[di];
    if (f.empty()) f = prefix_inputs(corpus.dialogues[di], corpus.dialogues[di].length());
    return f;
  };

  const std::vector<Parameter*> param_ptrs = params.all_parameters();
  ad::RmsProp optimizer(cfg.optimizer);
  Rng rng(Rng::derive_seed(cfg.seed, 0x747261696e));  // training stream
  Tape tape;
  Tape eval_tape;

  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best_uar = -1.0;
  std::vector<Mat> best_values;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      tape.reset();
      Var total;
      for (std::size_t k = b0; k < b1; ++k) {
        const PrefixSample& s = train_samples[order[k]];
        const auto& feats = dialogue_features(s.dialogue_index);
        const std::span<const ExchangeInput> prefix(feats.data(),
                                                    static_cast<std::size_t>(s.t));
        const ForwardGraph g = build_forward(tape, params, prefix);
        const int label = corpus.dialogues[s.dialogue_index].exchanges[s.t - 1].iq_label;
        const Var loss = tape.cross_entropy(g.logits, label - 1);
        total = total.valid() ? tape.add(total, loss) : loss;
      }
      const Var mean_loss = tape.scale(total, 1.0 / static_cast<double>(b1 - b0));
      tape.backward(mean_loss);
      loss_sum += tape.scalar(total);
      seen += b1 - b0;
      optimizer.step(param_ptrs);
      for (Parameter* p : param_ptrs) p->zero_grad();
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));

    if (!validation_samples.empty()) {
      std::vector<LabelPair> pairs;
      pairs.reserve(validation_samples.size());
      for (const PrefixSample& s : validation_samples) {
        const auto& feats = dialogue_features(s.dialogue_index);
        const std::span<const ExchangeInput> prefix(feats.data(),
                                                    static_cast<std::size_t>(s.t));
        const Prediction pred = forward_on(eval_tape, params, prefix);
        pairs.emplace_back(corpus.dialogues[s.dialogue_index].exchanges[s.t - 1].iq_label,
                           argmax_label(pred.probs));
      }
      const double val_uar = uar(pairs);
      result.validation_uar.push_back(val_uar);
      if (val_uar > best_uar) {
        best_uar = val_uar;
        result.best_epoch = epoch;
        best_values.clear();
        for (Parameter* p : param_ptrs) best_values.push_back(p->value);
      }
    }
  }

  if (!validation_samples.empty() && !best_values.empty()) {
    for (std::size_t i = 0; i < param_ptrs.size(); ++i)
      param_ptrs[i]->value = best_values[i];
  }
  return result;
}

std::pair<IqModelParams, TrainResult> train_iq_model(const Corpus& corpus,
                                                     const IqModelConfig& config,
                                                     int epochs) {
  IqModelParams params = init_iq_model(config);
  const std::vector<PrefixSample> samples = all_prefix_samples(corpus);
  TrainResult result = train(params, corpus, samples, epochs);
  return {std::move(params), std::move(result)};
}

}  // namespace iqlab
