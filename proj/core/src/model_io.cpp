#include <cstdint>

#include "binary_io.hpp"
#include "iqlab/estimator.hpp"

// Estimator checkpoints. Doubles are written raw (host byte order) so a load
// reproduces predictions bit-exactly.

namespace iqlab {

using io::Reader;
using io::Writer;

namespace {

void write_cell(Writer& w, const LstmCellParams& cell) {
  for (const ad::Parameter* p :
       {&cell.wx_i, &cell.wx_f, &cell.wx_o, &cell.wx_c, &cell.wh_i, &cell.wh_f,
        &cell.wh_o, &cell.wh_c, &cell.b_i, &cell.b_f, &cell.b_o, &cell.b_c})
    w.put_mat(p->value);
}

void read_cell(Reader& r, LstmCellParams& cell) {
  for (ad::Parameter* p :
       {&cell.wx_i, &cell.wx_f, &cell.wx_o, &cell.wx_c, &cell.wh_i, &cell.wh_f,
        &cell.wh_o, &cell.wh_c, &cell.b_i, &cell.b_f, &cell.b_o, &cell.b_c}) {
    ad::Mat m = r.get_mat();
    if (m.rows != p->value.rows || m.cols != p->value.cols)
      throw ValidationError(r.path() + ": parameter shape mismatch for " + p->name);
    p->value = std::move(m);
  }
}

}  // namespace

void save_model(const IqModelParams& params, const std::string& path) {
  Writer w(path);
  io::write_header(w, io::kKindIqModel);
  const IqModelConfig& c = params.config;
  w.put(static_cast<std::int32_t>(c.hidden_size));
  w.put(static_cast<std::uint8_t>(c.bidirectional));
  w.put(static_cast<std::uint8_t>(c.use_attention));
  w.put(static_cast<std::int32_t>(c.attention_dim));
  w.put(static_cast<std::int32_t>(c.input_size));
  w.put(static_cast<std::int32_t>(c.n_classes));
  w.put(c.seed);
  w.put(static_cast<std::int32_t>(c.batch_size));
  w.put(c.optimizer.learning_rate);
  w.put(c.optimizer.decay);
  w.put(c.optimizer.epsilon);
  write_cell(w, params.forward_cell);
  if (params.backward_cell) write_cell(w, *params.backward_cell);
  if (params.attention) {
    w.put_mat(params.attention->w_query.value);
    w.put_mat(params.attention->w_key.value);
    w.put_mat(params.attention->b_hidden.value);
    w.put_mat(params.attention->w_score.value);
    w.put_mat(params.attention->b_score.value);
  }
  w.put_mat(params.w_out.value);
  w.put_mat(params.b_out.value);
  w.finish();
}

IqModelParams load_iq_model(const std::string& path) {
  Reader r(path);
  io::read_header(r, io::kKindIqModel, "iq estimator");
  IqModelConfig c;
  c.hidden_size = r.get<std::int32_t>();
  c.bidirectional = r.get<std::uint8_t>() != 0;
  c.use_attention = r.get<std::uint8_t>() != 0;
  c.attention_dim = r.get<std::int32_t>();
  c.input_size = r.get<std::int32_t>();
  c.n_classes = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  c.batch_size = r.get<std::int32_t>();
  c.optimizer.learning_rate = r.get<double>();
  c.optimizer.decay = r.get<double>();
  c.optimizer.epsilon = r.get<double>();
  if (c.hidden_size < 1 || c.input_size < 1 || c.n_classes < 2)
    throw ValidationError(path + ": corrupt model configuration");
  IqModelParams params = init_iq_model(c);
  read_cell(r, params.forward_cell);
  if (params.backward_cell) read_cell(r, *params.backward_cell);
  if (params.attention) {
    for (ad::Parameter* p :
         {&params.attention->w_query, &params.attention->w_key,
          &params.attention->b_hidden, &params.attention->w_score,
          &params.attention->b_score}) {
      ad::Mat m = r.get_mat();
      if (m.rows != p->value.rows || m.cols != p->value.cols)
        throw ValidationError(path + ": parameter shape mismatch for " + p->name);
      p->value = std::move(m);
    }
  }
  ad::Mat w_out = r.get_mat();
  ad::Mat b_out = r.get_mat();
  if (w_out.rows != params.w_out.value.rows || w_out.cols != params.w_out.value.cols ||
      b_out.rows != 1 || b_out.cols != params.b_out.value.cols)
    throw ValidationError(path + ": output layer shape mismatch");
  params.w_out.value = std::move(w_out);
  params.b_out.value = std::move(b_out);
  return params;
}

void save_model(const SvmBaselineParams& params, const std::string& path) {
  Writer w(path);
  io::write_header(w, io::kKindSvm);
  w.put(static_cast<std::int32_t>(kFullFeatureDim));
  for (int k = 0; k < kNumIqClasses; ++k) {
    w.put_doubles(params.weights[k]);
    w.put(params.bias[k]);
  }
  w.put_doubles(params.feature_mean);
  w.put_doubles(params.feature_scale);
  w.put(static_cast<std::uint8_t>(params.degenerate));
  w.put(static_cast<std::int32_t>(params.degenerate_class));
  w.finish();
}

SvmBaselineParams load_svm_model(const std::string& path) {
  Reader r(path);
  io::read_header(r, io::kKindSvm, "svm baseline");
  const std::int32_t dim = r.get<std::int32_t>();
  if (dim != kFullFeatureDim)
    throw ValidationError(path + ": feature dimension mismatch");
  SvmBaselineParams params;
  for (int k = 0; k < kNumIqClasses; ++k) {
    params.weights[k] = r.get_doubles();
    if (static_cast<int>(params.weights[k].size()) != kFullFeatureDim)
      throw ValidationError(path + ": weight vector size mismatch");
    params.bias[k] = r.get<double>();
  }
  params.feature_mean = r.get_doubles();
  params.feature_scale = r.get_doubles();
  if (static_cast<int>(params.feature_mean.size()) != kFullFeatureDim ||
      static_cast<int>(params.feature_scale.size()) != kFullFeatureDim)
    throw ValidationError(path + ": normalization vector size mismatch");
  params.degenerate = r.get<std::uint8_t>() != 0;
  params.degenerate_class = r.get<std::int32_t>();
  return params;
}

}  // namespace iqlab
