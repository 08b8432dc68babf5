#pragma once

// Reverse-mode differentiation over dense 2-D tensors. The graph is rebuilt
// on every forward pass (define-by-run), which keeps variable-length
// sub-dialogue graphs simple. Everything is 64-bit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iqlab/errors.hpp"

namespace iqlab::ad {

// Plain row-major matrix, used both as tensor storage and as a small
// general-purpose matrix type elsewhere in the project.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> values);

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  void fill(double x) { std::fill(a.begin(), a.end(), x); }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat row(std::span<const double> values);
};

bool operator==(const Mat& x, const Mat& y);

// A named, persistent trainable tensor. Gradients accumulate here across
// Tape::backward calls until zero_grad.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() { grad.fill(0.0); }
};

// Opaque node handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : std::uint8_t {
  kLeaf,
  kParam,
  kMatMul,
  kAdd,         // same shape, or [1 x n] row bias broadcast over rows
  kTanh,
  kSigmoid,
  kSoftmaxRows,
  kConcatCols,  // n-ary
  kConcatRows,  // n-ary
  kMul,         // elementwise
  kScale,
  kSum,          // all entries -> 1x1
  kCrossEntropy  // fused softmax + NLL of a [1 x K] logit row
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(const Mat& m);
  Var constant_row(std::span<const double> values);
  // Binds a persistent parameter; repeated calls with the same parameter
  // return the same node, so its gradient accumulates over all uses.
  Var param(Parameter& p);

  // Ops. Shapes are validated; outputs are checked finite.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var sum(Var a);
  // target is a 0-based class index into the [1 x K] logit row.
  Var cross_entropy(Var logits, int target);

  // Seeds d(loss)/d(loss) = 1 and sweeps the graph in reverse. Parameter
  // gradients are accumulated into Parameter::grad. Throws ContractError if
  // loss is not 1x1.
  void backward(Var loss);

  std::span<const double> value(Var v) const;
  std::span<const double> grad(Var v) const;
  double scalar(Var v) const;
  int rows(Var v) const { return node(v).rows; }
  int cols(Var v) const { return node(v).cols; }

  // Drops all nodes but keeps buffer capacity; parameters are unbound.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int rows, cols;
    int a = -1, b = -1;
    std::size_t v_off = 0, g_off = 0;
    double aux = 0.0;          // scale factor / cross-entropy target index
    int extra_begin = 0, extra_count = 0;  // n-ary parents for concat
    Parameter* bound = nullptr;
  };

  const Node& node(Var v) const;
  int alloc(Op op, int rows, int cols, int a, int b);
  double* vptr(int id) { return vbuf_.data() + nodes_[id].v_off; }
  const double* vptr(int id) const { return vbuf_.data() + nodes_[id].v_off; }
  double* gptr(int id) { return gbuf_.data() + nodes_[id].g_off; }
  const double* gptr(int id) const { return gbuf_.data() + nodes_[id].g_off; }
  void check_finite(int id, const char* what) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
  std::vector<double> vbuf_;
  std::vector<double> gbuf_;
  std::vector<int> extras_;
  std::vector<std::pair<Parameter*, int>> bound_params_;
  bool grads_valid_ = false;
};

// RmsProp: s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s)+eps).
struct RmsPropConfig {
  double learning_rate = 0.001;
  double decay = 0.9;
  double epsilon = 1e-8;
};

class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig config = {}) : config_(config) {}

  // Applies one update from the accumulated gradients. Gradients are left
  // untouched; callers zero them between steps.
  void step(std::span<Parameter* const> params);

  const RmsPropConfig& config() const { return config_; }

 private:
  RmsPropConfig config_;
  // Running squared-gradient averages, keyed by parameter identity.
  std::vector<std::pair<Parameter*, std::vector<double>>> state_;
  std::vector<double>& state_for(Parameter& p);
};

}  // namespace iqlab::ad
