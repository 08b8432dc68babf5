#include "iqlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace iqlab::ad {

Mat::Mat(int r, int c, std::vector<double> values)
    : rows(r), cols(c), a(std::move(values)) {
  if (static_cast<std::size_t>(r) * c != a.size())
    throw ContractError("Mat: value count does not match shape");
}

Mat Mat::row(std::span<const double> values) {
  Mat m(1, static_cast<int>(values.size()));
  std::copy(values.begin(), values.end(), m.a.begin());
  return m;
}

bool operator==(const Mat& x, const Mat& y) {
  return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw ContractError("Tape: invalid Var handle");
  return nodes_[v.id];
}

int Tape::alloc(Op op, int rows, int cols, int a, int b) {
  Node n;
  n.op = op;
  n.rows = rows;
  n.cols = cols;
  n.a = a;
  n.b = b;
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  n.v_off = vbuf_.size();
  n.g_off = gbuf_.size();
  vbuf_.resize(vbuf_.size() + count, 0.0);
  gbuf_.resize(gbuf_.size() + count, 0.0);
  nodes_.push_back(n);
  grads_valid_ = false;
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_finite(int id, const char* what) const {
  const Node& n = nodes_[id];
  const double* v = vptr(id);
  const std::size_t count = static_cast<std::size_t>(n.rows) * n.cols;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(v[i]))
      throw NumericsError(std::string("non-finite value produced by ") + what);
  }
}

Var Tape::constant(const Mat& m) {
  const int id = alloc(Op::kLeaf, m.rows, m.cols, -1, -1);
  std::copy(m.a.begin(), m.a.end(), vptr(id));
  check_finite(id, "constant");
  return {id};
}

Var Tape::constant_row(std::span<const double> values) {
  const int id = alloc(Op::kLeaf, 1, static_cast<int>(values.size()), -1, -1);
  std::copy(values.begin(), values.end(), vptr(id));
  check_finite(id, "constant");
  return {id};
}

Var Tape::param(Parameter& p) {
  for (const auto& [bp, bid] : bound_params_)
    if (bp == &p) return {bid};
  const int id = alloc(Op::kParam, p.value.rows, p.value.cols, -1, -1);
  std::copy(p.value.a.begin(), p.value.a.end(), vptr(id));
  nodes_[id].bound = &p;
  bound_params_.emplace_back(&p, id);
  check_finite(id, "parameter");
  return {id};
}

Var Tape::matmul(Var a, Var b) {
  const int m = node(a).rows, k = node(a).cols;
  const int kb = node(b).rows, n = node(b).cols;
  if (k != kb) throw ContractError("matmul: inner dimensions differ");
  const int id = alloc(Op::kMatMul, m, n, a.id, b.id);
  const double* av = vptr(a.id);
  const double* bv = vptr(b.id);
  double* cv = vptr(id);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + static_cast<std::size_t>(p) * n;
      double* crow = cv + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  check_finite(id, "matmul");
  return {id};
}

Var Tape::add(Var a, Var b) {
  const int rows = node(a).rows, cols = node(a).cols;
  const int brows = node(b).rows, bcols = node(b).cols;
  const bool same = rows == brows && cols == bcols;
  const bool row_bias = brows == 1 && cols == bcols;
  if (!same && !row_bias)
    throw ContractError("add: shapes incompatible (same shape or row bias only)");
  const int id = alloc(Op::kAdd, rows, cols, a.id, b.id);
  const double* av = vptr(a.id);
  const double* bv = vptr(b.id);
  double* cv = vptr(id);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      cv[i * cols + j] = av[i * cols + j] + bv[(same ? i : 0) * cols + j];
  check_finite(id, "add");
  return {id};
}

Var Tape::tanh(Var a) {
  const int rows = node(a).rows, cols = node(a).cols;
  const int id = alloc(Op::kTanh, rows, cols, a.id, -1);
  const double* av = vptr(a.id);
  double* cv = vptr(id);
  for (int i = 0; i < rows * cols; ++i) cv[i] = std::tanh(av[i]);
  check_finite(id, "tanh");
  return {id};
}

Var Tape::sigmoid(Var a) {
  const int rows = node(a).rows, cols = node(a).cols;
  const int id = alloc(Op::kSigmoid, rows, cols, a.id, -1);
  const double* av = vptr(a.id);
  double* cv = vptr(id);
  for (int i = 0; i < rows * cols; ++i) {
    const double x = av[i];
    cv[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                     : std::exp(x) / (1.0 + std::exp(x));
  }
  check_finite(id, "sigmoid");
  return {id};
}

Var Tape::softmax_rows(Var a) {
  const int rows = node(a).rows, cols = node(a).cols;
  const int id = alloc(Op::kSoftmaxRows, rows, cols, a.id, -1);
  const double* av = vptr(a.id);
  double* cv = vptr(id);
  for (int i = 0; i < rows; ++i) {
    const double* in = av + static_cast<std::size_t>(i) * cols;
    double* out = cv + static_cast<std::size_t>(i) * cols;
    double mx = in[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (int j = 0; j < cols; ++j) {
      out[j] = std::exp(in[j] - mx);
      z += out[j];
    }
    for (int j = 0; j < cols; ++j) out[j] /= z;
  }
  check_finite(id, "softmax");
  return {id};
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const int r = node(parts[0]).rows;
  int total = 0;
  for (Var p : parts) {
    if (node(p).rows != r) throw ContractError("concat_cols: row counts differ");
    total += node(p).cols;
  }
  const int id = alloc(Op::kConcatCols, r, total, -1, -1);
  nodes_[id].extra_begin = static_cast<int>(extras_.size());
  nodes_[id].extra_count = static_cast<int>(parts.size());
  for (Var p : parts) extras_.push_back(p.id);
  double* cv = vptr(id);
  int col0 = 0;
  for (Var p : parts) {
    const Node& np = nodes_[p.id];
    const double* pv = vptr(p.id);
    for (int i = 0; i < np.rows; ++i)
      std::memcpy(cv + static_cast<std::size_t>(i) * total + col0,
                  pv + static_cast<std::size_t>(i) * np.cols,
                  sizeof(double) * np.cols);
    col0 += np.cols;
  }
  return {id};
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const int c = node(parts[0]).cols;
  int total = 0;
  for (Var p : parts) {
    if (node(p).cols != c) throw ContractError("concat_rows: column counts differ");
    total += node(p).rows;
  }
  const int id = alloc(Op::kConcatRows, total, c, -1, -1);
  nodes_[id].extra_begin = static_cast<int>(extras_.size());
  nodes_[id].extra_count = static_cast<int>(parts.size());
  for (Var p : parts) extras_.push_back(p.id);
  double* cv = vptr(id);
  int row0 = 0;
  for (Var p : parts) {
    const Node& np = nodes_[p.id];
    std::memcpy(cv + static_cast<std::size_t>(row0) * c, vptr(p.id),
                sizeof(double) * np.rows * c);
    row0 += np.rows;
  }
  return {id};
}

Var Tape::mul(Var a, Var b) {
  const int rows = node(a).rows, cols = node(a).cols;
  if (rows != node(b).rows || cols != node(b).cols)
    throw ContractError("mul: shapes differ");
  const int id = alloc(Op::kMul, rows, cols, a.id, b.id);
  const double* av = vptr(a.id);
  const double* bv = vptr(b.id);
  double* cv = vptr(id);
  for (int i = 0; i < rows * cols; ++i) cv[i] = av[i] * bv[i];
  check_finite(id, "mul");
  return {id};
}

Var Tape::scale(Var a, double factor) {
  const int rows = node(a).rows, cols = node(a).cols;
  const int id = alloc(Op::kScale, rows, cols, a.id, -1);
  nodes_[id].aux = factor;
  const double* av = vptr(a.id);
  double* cv = vptr(id);
  for (int i = 0; i < rows * cols; ++i) cv[i] = factor * av[i];
  check_finite(id, "scale");
  return {id};
}

Var Tape::sum(Var a) {
  const int count = node(a).rows * node(a).cols;
  const int id = alloc(Op::kSum, 1, 1, a.id, -1);
  const double* av = vptr(a.id);
  double acc = 0.0;
  for (int i = 0; i < count; ++i) acc += av[i];
  *vptr(id) = acc;
  check_finite(id, "sum");
  return {id};
}

Var Tape::cross_entropy(Var logits, int target) {
  const int rows = node(logits).rows, cols = node(logits).cols;
  if (rows != 1) throw ContractError("cross_entropy: logits must be a row");
  if (target < 0 || target >= cols)
    throw ContractError("cross_entropy: target out of range");
  const int id = alloc(Op::kCrossEntropy, 1, 1, logits.id, -1);
  nodes_[id].aux = static_cast<double>(target);
  const double* lv = vptr(logits.id);
  double mx = lv[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, lv[j]);
  double z = 0.0;
  for (int j = 0; j < cols; ++j) z += std::exp(lv[j] - mx);
  *vptr(id) = std::log(z) + mx - lv[target];
  check_finite(id, "cross_entropy");
  return {id};
}

void Tape::backward_node(int id) {
  const Node& n = nodes_[id];
  const double* g = gptr(id);
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kParam:
      // Accumulated into Parameter::grad at the end of backward().
      break;
    case Op::kMatMul: {
      const Node& na = nodes_[n.a];
      const Node& nb = nodes_[n.b];
      const int m = na.rows, k = na.cols, c = nb.cols;
      const double* av = vptr(n.a);
      const double* bv = vptr(n.b);
      double* ga = gptr(n.a);
      double* gb = gptr(n.b);
      // dA += dC * B^T
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const double* grow = g + static_cast<std::size_t>(i) * c;
          const double* brow = bv + static_cast<std::size_t>(p) * c;
          double acc = 0.0;
          for (int j = 0; j < c; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      // dB += A^T * dC
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          const double* grow = g + static_cast<std::size_t>(i) * c;
          double* gbrow = gb + static_cast<std::size_t>(p) * c;
          for (int j = 0; j < c; ++j) gbrow[j] += aip * grow[j];
        }
      break;
    }
    case Op::kAdd: {
      const Node& na = nodes_[n.a];
      const Node& nb = nodes_[n.b];
      double* ga = gptr(n.a);
      double* gb = gptr(n.b);
      const bool same = na.rows == nb.rows;
      for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < na.cols; ++j) {
          const double gij = g[i * na.cols + j];
          ga[i * na.cols + j] += gij;
          gb[(same ? i : 0) * na.cols + j] += gij;
        }
      break;
    }
    case Op::kTanh: {
      const double* v = vptr(id);
      double* ga = gptr(n.a);
      for (int i = 0; i < n.rows * n.cols; ++i) ga[i] += g[i] * (1.0 - v[i] * v[i]);
      break;
    }
    case Op::kSigmoid: {
      const double* v = vptr(id);
      double* ga = gptr(n.a);
      for (int i = 0; i < n.rows * n.cols; ++i) ga[i] += g[i] * v[i] * (1.0 - v[i]);
      break;
    }
    case Op::kSoftmaxRows: {
      const double* v = vptr(id);
      double* ga = gptr(n.a);
      for (int i = 0; i < n.rows; ++i) {
        const double* vrow = v + static_cast<std::size_t>(i) * n.cols;
        const double* grow = g + static_cast<std::size_t>(i) * n.cols;
        double dot = 0.0;
        for (int j = 0; j < n.cols; ++j) dot += grow[j] * vrow[j];
        double* garow = ga + static_cast<std::size_t>(i) * n.cols;
        for (int j = 0; j < n.cols; ++j) garow[j] += vrow[j] * (grow[j] - dot);
      }
      break;
    }
    case Op::kConcatCols: {
      int col0 = 0;
      for (int e = 0; e < n.extra_count; ++e) {
        const int pid = extras_[n.extra_begin + e];
        const Node& np = nodes_[pid];
        double* gp = gptr(pid);
        for (int i = 0; i < np.rows; ++i)
          for (int j = 0; j < np.cols; ++j)
            gp[i * np.cols + j] += g[static_cast<std::size_t>(i) * n.cols + col0 + j];
        col0 += np.cols;
      }
      break;
    }
    case Op::kConcatRows: {
      int row0 = 0;
      for (int e = 0; e < n.extra_count; ++e) {
        const int pid = extras_[n.extra_begin + e];
        const Node& np = nodes_[pid];
        double* gp = gptr(pid);
        for (int i = 0; i < np.rows * np.cols; ++i)
          gp[i] += g[static_cast<std::size_t>(row0) * n.cols + i];
        row0 += np.rows;
      }
      break;
    }
    case Op::kMul: {
      const double* av = vptr(n.a);
      const double* bv = vptr(n.b);
      double* ga = gptr(n.a);
      double* gb = gptr(n.b);
      for (int i = 0; i < n.rows * n.cols; ++i) {
        ga[i] += g[i] * bv[i];
        gb[i] += g[i] * av[i];
      }
      break;
    }
    case Op::kScale: {
      double* ga = gptr(n.a);
      for (int i = 0; i < n.rows * n.cols; ++i) ga[i] += n.aux * g[i];
      break;
    }
    case Op::kSum: {
      const Node& na = nodes_[n.a];
      double* ga = gptr(n.a);
      const double g0 = g[0];
      for (int i = 0; i < na.rows * na.cols; ++i) ga[i] += g0;
      break;
    }
    case Op::kCrossEntropy: {
      const Node& nl = nodes_[n.a];
      const double* lv = vptr(n.a);
      double* gl = gptr(n.a);
      const int target = static_cast<int>(n.aux);
      double mx = lv[0];
      for (int j = 1; j < nl.cols; ++j) mx = std::max(mx, lv[j]);
      double z = 0.0;
      for (int j = 0; j < nl.cols; ++j) z += std::exp(lv[j] - mx);
      const double g0 = g[0];
      for (int j = 0; j < nl.cols; ++j) {
        const double p = std::exp(lv[j] - mx) / z;
        gl[j] += g0 * (p - (j == target ? 1.0 : 0.0));
      }
      break;
    }
  }
}

void Tape::backward(Var loss) {
  const Node& n = node(loss);
  if (n.rows != 1 || n.cols != 1)
    throw ContractError("backward: loss must be a 1x1 scalar");
  std::fill(gbuf_.begin(), gbuf_.end(), 0.0);
  *gptr(loss.id) = 1.0;
  for (int id = loss.id; id >= 0; --id) backward_node(id);
  for (const auto& [p, id] : bound_params_) {
    const double* g = gptr(id);
    for (int i = 0; i < p->grad.size(); ++i) p->grad.a[i] += g[i];
  }
  grads_valid_ = true;
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {vptr(v.id), static_cast<std::size_t>(n.rows) * n.cols};
}

std::span<const double> Tape::grad(Var v) const {
  if (!grads_valid_) throw ContractError("grad: backward has not run");
  const Node& n = node(v);
  return {gptr(v.id), static_cast<std::size_t>(n.rows) * n.cols};
}

double Tape::scalar(Var v) const {
  const Node& n = node(v);
  if (n.rows != 1 || n.cols != 1) throw ContractError("scalar: node is not 1x1");
  return *vptr(v.id);
}

void Tape::reset() {
  nodes_.clear();
  vbuf_.clear();
  gbuf_.clear();
  extras_.clear();
  bound_params_.clear();
  grads_valid_ = false;
}

std::vector<double>& RmsProp::state_for(Parameter& p) {
  for (auto& [ptr, s] : state_)
    if (ptr == &p) return s;
  state_.emplace_back(&p, std::vector<double>(p.value.size(), 0.0));
  return state_.back().second;
}

void RmsProp::step(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    std::vector<double>& s = state_for(*p);
    if (static_cast<int>(s.size()) != p->value.size())
      throw ContractError("rmsprop: parameter shape changed under optimizer");
    for (int i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.a[i];
      s[i] = config_.decay * s[i] + (1.0 - config_.decay) * g * g;
      p->value.a[i] -= config_.learning_rate * g / (std::sqrt(s[i]) + config_.epsilon);
    }
  }
}

}  // namespace iqlab::ad
