#include "pcvox/autodiff.hpp"

#include <cmath>

namespace pcvox::nn {

NodePtr relu(Tape& t, const NodePtr& x) {
  NodePtr out = make_node(x->value.cwiseMax(0.0));
  t.record([x, out] {
    if (!out->has_grad() || !x->needs_grad) return;
    x->accumulate((x->value.array() > 0.0).cast<double>().matrix().cwiseProduct(out->grad));
  });
  return out;
}

NodePtr sigmoid(Tape& t, const NodePtr& x) {
  NodePtr out = make_node((1.0 / (1.0 + (-x->value.array()).exp())).matrix());
  t.record([x, out] {
    if (!out->has_grad() || !x->needs_grad) return;
    Matrix d = out->value.array() * (1.0 - out->value.array());
    x->accumulate(d.cwiseProduct(out->grad));
  });
  return out;
}

NodePtr ste_round(Tape& t, const NodePtr& x) {
  NodePtr out = make_node((x->value.array() >= 0.5).cast<double>().matrix());
  t.record([x, out] {
    if (!out->has_grad() || !x->needs_grad) return;
    x->accumulate(out->grad);
  });
  return out;
}

NodePtr add(Tape& t, const NodePtr& a, const NodePtr& b) {
  if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
    throw ContractViolation("add: shape mismatch");
  NodePtr out = make_node(a->value + b->value);
  t.record([a, b, out] {
    if (!out->has_grad()) return;
    if (a->needs_grad) a->accumulate(out->grad);
    if (b->needs_grad) b->accumulate(out->grad);
  });
  return out;
}

NodePtr mul(Tape& t, const NodePtr& a, const NodePtr& b) {
  if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
    throw ContractViolation("mul: shape mismatch");
  NodePtr out = make_node(a->value.cwiseProduct(b->value));
  t.record([a, b, out] {
    if (!out->has_grad()) return;
    if (a->needs_grad) a->accumulate(out->grad.cwiseProduct(b->value));
    if (b->needs_grad) b->accumulate(out->grad.cwiseProduct(a->value));
  });
  return out;
}

NodePtr scale(Tape& t, const NodePtr& x, double s) {
  NodePtr out = make_node(x->value * s);
  t.record([x, out, s] {
    if (out->has_grad() && x->needs_grad) x->accumulate(out->grad * s);
  });
  return out;
}

NodePtr concat_cols(Tape& t, const NodePtr& a, const NodePtr& b) {
  if (a->value.rows() != b->value.rows()) throw ContractViolation("concat_cols: row mismatch");
  Matrix v(a->value.rows(), a->value.cols() + b->value.cols());
  v << a->value, b->value;
  NodePtr out = make_node(std::move(v));
  int ca = int(a->value.cols()), cb = int(b->value.cols());
  t.record([a, b, out, ca, cb] {
    if (!out->has_grad()) return;
    if (a->needs_grad) a->accumulate(out->grad.leftCols(ca));
    if (b->needs_grad) b->accumulate(out->grad.rightCols(cb));
  });
  return out;
}

NodePtr slice_cols(Tape& t, const NodePtr& x, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > x->value.cols())
    throw ContractViolation("slice_cols: range out of bounds");
  NodePtr out = make_node(x->value.middleCols(begin, count));
  t.record([x, out, begin, count] {
    if (!out->has_grad() || !x->needs_grad) return;
    Matrix g = Matrix::Zero(x->value.rows(), x->value.cols());
    g.middleCols(begin, count) = out->grad;
    x->accumulate(g);
  });
  return out;
}

NodePtr gather_rows(Tape& t, const NodePtr& x, std::shared_ptr<const std::vector<int>> rows) {
  Matrix v(rows->size(), x->value.cols());
  for (size_t i = 0; i < rows->size(); ++i) v.row(Eigen::Index(i)) = x->value.row((*rows)[i]);
  NodePtr out = make_node(std::move(v));
  t.record([x, rows, out] {
    if (!out->has_grad() || !x->needs_grad) return;
    Matrix g = Matrix::Zero(x->value.rows(), x->value.cols());
    for (size_t i = 0; i < rows->size(); ++i) g.row((*rows)[i]) += out->grad.row(Eigen::Index(i));
    x->accumulate(g);
  });
  return out;
}

NodePtr reshape(Tape& t, const NodePtr& x, int rows, int cols) {
  if (Eigen::Index(rows) * cols != x->value.size())
    throw ContractViolation("reshape: element count mismatch");
  // Row-major storage makes this a contiguous reinterpretation.
  Matrix v = Eigen::Map<const Matrix>(x->value.data(), rows, cols);
  NodePtr out = make_node(std::move(v));
  t.record([x, out] {
    if (!out->has_grad() || !x->needs_grad) return;
    x->accumulate(
        Eigen::Map<const Matrix>(out->grad.data(), x->value.rows(), x->value.cols()));
  });
  return out;
}

NodePtr matmul(Tape& t, const NodePtr& x, const NodePtr& w) {
  if (x->value.cols() != w->value.rows()) throw ContractViolation("matmul: inner dim mismatch");
  NodePtr out = make_node(x->value * w->value);
  t.record([x, w, out] {
    if (!out->has_grad()) return;
    if (x->needs_grad) x->accumulate(out->grad * w->value.transpose());
    if (w->needs_grad) w->accumulate(x->value.transpose() * out->grad);
  });
  return out;
}

NodePtr add_row_bias(Tape& t, const NodePtr& x, const NodePtr& bias) {
  if (bias->value.rows() != 1 || bias->value.cols() != x->value.cols())
    throw ContractViolation("add_row_bias: bias shape mismatch");
  NodePtr out = make_node(x->value.rowwise() + bias->value.row(0));
  t.record([x, bias, out] {
    if (!out->has_grad()) return;
    if (x->needs_grad) x->accumulate(out->grad);
    if (bias->needs_grad) bias->accumulate(out->grad.colwise().sum());
  });
  return out;
}

NodePtr sum_all(Tape& t, const NodePtr& x) {
  NodePtr out = make_scalar(x->value.sum(), true);
  t.record([x, out] {
    if (!out->has_grad() || !x->needs_grad) return;
    x->accumulate(Matrix::Constant(x->value.rows(), x->value.cols(), out->grad(0, 0)));
  });
  return out;
}

double bce(double b, double p) {
  double pc = std::min(std::max(p, kBceClamp), 1.0 - kBceClamp);
  return -b * std::log(pc) - (1.0 - b) * std::log(1.0 - pc);
}

NodePtr bce_sum(Tape& t, const NodePtr& targets, const NodePtr& probs) {
  if (targets->value.rows() != probs->value.rows() ||
      targets->value.cols() != probs->value.cols())
    throw ContractViolation("bce_sum: shape mismatch");
  Eigen::ArrayXXd p = probs->value.array().min(1.0 - kBceClamp).max(kBceClamp);
  Eigen::ArrayXXd b = targets->value.array();
  double loss = (-b * p.log() - (1.0 - b) * (1.0 - p).log()).sum();
  NodePtr out = make_scalar(loss, true);
  // Clamp saturation zeroes the probability gradient outside the interval.
  t.record([targets, probs, out, p = std::move(p), b = std::move(b)] {
    if (!out->has_grad()) return;
    double g = out->grad(0, 0);
    if (probs->needs_grad) {
      Eigen::ArrayXXd inside = (probs->value.array() >= kBceClamp &&
                                probs->value.array() <= 1.0 - kBceClamp)
                                   .cast<double>();
      Matrix dp = (g * inside * (-b / p + (1.0 - b) / (1.0 - p))).matrix();
      probs->accumulate(dp);
    }
    if (targets->needs_grad) {
      Matrix db = (g * ((1.0 - p).log() - p.log())).matrix();
      targets->accumulate(db);
    }
  });
  return out;
}

}  // namespace pcvox::nn
