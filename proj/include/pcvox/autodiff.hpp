#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "pcvox/errors.hpp"

namespace pcvox::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

// One value in the computation graph: rows x cols activations plus the
// gradient accumulated during the backward pass.
struct Node {
  Matrix value;
  Matrix grad;  // empty until the first accumulation
  bool needs_grad = true;

  Node() = default;
  explicit Node(Matrix v, bool needs = true) : value(std::move(v)), needs_grad(needs) {}

  void accumulate(const Eigen::Ref<const Matrix>& g) {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    grad += g;
  }
  void zero_grad() {
    if (grad.size() != 0) grad.setZero();
  }
  bool has_grad() const { return grad.size() != 0; }
};

using NodePtr = std::shared_ptr<Node>;

inline NodePtr make_node(Matrix v, bool needs_grad = true) {
  return std::make_shared<Node>(std::move(v), needs_grad);
}
inline NodePtr make_constant(Matrix v) { return make_node(std::move(v), false); }
inline NodePtr make_scalar(double v, bool needs_grad = false) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return make_node(std::move(m), needs_grad);
}

// Records the forward pass; backward() replays it in exact reverse order.
// One tape per forward pass; parameters outlive tapes and keep their
// accumulated gradients until the optimizer consumes them.
class Tape {
public:
  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

  void backward(const NodePtr& loss) {
    if (loss->value.rows() != 1 || loss->value.cols() != 1)
      throw ContractViolation("Tape::backward: loss must be scalar");
    Matrix seed(1, 1);
    seed(0, 0) = 1.0;
    loss->accumulate(seed);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  // FLOPs ledger: each convolution adds 2 * N_a * C_i * C_o, with N_a the
  // activated coordinates of its input tensor.
  void add_conv_flops(long n_active, int c_in, int c_out) {
    flops_ += 2L * n_active * long(c_in) * long(c_out);
  }
  long flops() const { return flops_; }
  size_t op_count() const { return ops_.size(); }

private:
  std::vector<std::function<void()>> ops_;
  long flops_ = 0;
};

inline long count_flops(const Tape& trace) { return trace.flops(); }
inline long conv_flops(long n_active, long c_in, long c_out) {
  return 2L * n_active * c_in * c_out;
}

// ---- elementwise and structural ops ----

NodePtr relu(Tape& t, const NodePtr& x);
NodePtr sigmoid(Tape& t, const NodePtr& x);
// Hard threshold at 0.5 forward (1 iff x >= 0.5); identity backward.
NodePtr ste_round(Tape& t, const NodePtr& x);
NodePtr add(Tape& t, const NodePtr& a, const NodePtr& b);
NodePtr mul(Tape& t, const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr scale(Tape& t, const NodePtr& x, double s);
NodePtr concat_cols(Tape& t, const NodePtr& a, const NodePtr& b);
NodePtr slice_cols(Tape& t, const NodePtr& x, int begin, int count);
NodePtr gather_rows(Tape& t, const NodePtr& x, std::shared_ptr<const std::vector<int>> rows);
// Row-major reinterpretation; element count must be preserved.
NodePtr reshape(Tape& t, const NodePtr& x, int rows, int cols);
NodePtr matmul(Tape& t, const NodePtr& x, const NodePtr& w);
NodePtr add_row_bias(Tape& t, const NodePtr& x, const NodePtr& bias);
NodePtr sum_all(Tape& t, const NodePtr& x);

// Binary cross-entropy in nats, summed over all entries; p is clamped to
// [1e-7, 1-1e-7]. Gradients flow into both the probabilities and the
// targets (the latter carries rate gradients through STE-rounded bits).
NodePtr bce_sum(Tape& t, const NodePtr& targets, const NodePtr& probs);

// Scalar helper, same clamping. Rate in bits is bce(b,p)/ln 2.
double bce(double b, double p);

inline constexpr double kBceClamp = 1e-7;

}  // namespace pcvox::nn
