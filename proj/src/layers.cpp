#include "pcvox/layers.hpp"

#include <cmath>

namespace pcvox::nn {

Matrix he_normal(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  return m;
}

Conv::Conv(ParamRegistry& reg, const std::string& name, int kernel, int stride, int c_in,
           int c_out, std::mt19937_64& rng)
    : kernel_(kernel), stride_(stride), c_in_(c_in), c_out_(c_out) {
  int n_offsets = int(kernel_offsets(kernel).size());
  weight_ = reg.add_param(name + ".weight",
                          he_normal(n_offsets * c_in, c_out, n_offsets * c_in, rng));
  bias_ = reg.add_param(name + ".bias", Matrix::Zero(1, c_out));
}

SparseTensor Conv::forward(Tape& t, const SparseTensor& in,
                           std::shared_ptr<const GatherPlan> plan) const {
  SparseTensor out;
  if (plan && stride_ == 1) {
    out.coords = in.coords;
    out.depth = in.depth;
  } else {
    plan = std::make_shared<GatherPlan>(
        build_conv_plan(in.coords, in.depth, kernel_, stride_, out.coords, out.depth));
  }
  out.features = apply_conv_plan(t, in.features, weight_, bias_, plan, c_in_, c_out_);
  return out;
}

SparseTensor Conv::forward_transposed(Tape& t, const SparseTensor& in) const {
  if (kernel_ != 2 || stride_ != 2)
    throw ContractViolation("transposed convolution requires kernel 2, stride 2");
  SparseTensor out;
  auto plan = std::make_shared<GatherPlan>(
      build_transposed_plan(in.coords, in.depth, out.coords, out.depth));
  out.features = apply_conv_plan(t, in.features, weight_, bias_, plan, c_in_, c_out_);
  return out;
}

BatchNorm::BatchNorm(ParamRegistry& reg, const std::string& name, int channels)
    : channels_(channels) {
  gamma_ = reg.add_param(name + ".gamma", Matrix::Ones(1, channels));
  beta_ = reg.add_param(name + ".beta", Matrix::Zero(1, channels));
  running_mean_ = reg.add_buffer(name + ".running_mean", Matrix::Zero(1, channels));
  running_var_ = reg.add_buffer(name + ".running_var", Matrix::Ones(1, channels));
}

NodePtr BatchNorm::forward(Tape& t, const NodePtr& x, bool training) const {
  if (x->value.cols() != channels_) throw ContractViolation("BatchNorm: channel mismatch");

  if (!training) {
    RowVector sigma = (running_var_->value.array() + eps_).sqrt().matrix().row(0);
    RowVector scale = (gamma_->value.array().row(0) / sigma.array()).matrix();
    RowVector shift =
        (beta_->value.array().row(0) - running_mean_->value.array().row(0) * scale.array())
            .matrix();
    Matrix y = (x->value.array().rowwise() * scale.array()).rowwise() + shift.array();
    NodePtr out = make_node(std::move(y));
    NodePtr gamma = gamma_;
    NodePtr beta = beta_;
    NodePtr rmean = running_mean_;
    t.record([x, out, gamma, beta, rmean, sigma, scale] {
      if (!out->has_grad()) return;
      if (x->needs_grad)
        x->accumulate((out->grad.array().rowwise() * scale.array()).matrix());
      if (beta->needs_grad) beta->accumulate(out->grad.colwise().sum());
      if (gamma->needs_grad) {
        Matrix xhat = ((x->value.rowwise() - rmean->value.row(0)).array().rowwise() /
                       sigma.array())
                          .matrix();
        gamma->accumulate(out->grad.cwiseProduct(xhat).colwise().sum());
      }
    });
    return out;
  }

  RowVector mean = x->value.colwise().mean();
  Matrix centered = x->value.rowwise() - mean;
  RowVector var = centered.array().square().colwise().mean();
  RowVector inv_sigma = (var.array() + eps_).rsqrt().matrix();
  Matrix xhat = centered.array().rowwise() * inv_sigma.array();
  Matrix y = (xhat.array().rowwise() * gamma_->value.array().row(0)).rowwise() +
             beta_->value.array().row(0);

  running_mean_->value = (1.0 - momentum_) * running_mean_->value + momentum_ * mean;
  running_var_->value = (1.0 - momentum_) * running_var_->value + momentum_ * var;

  NodePtr out = make_node(std::move(y));
  NodePtr gamma = gamma_, beta = beta_;
  auto xhat_keep = std::make_shared<Matrix>(std::move(xhat));
  auto inv_sigma_keep = std::make_shared<RowVector>(std::move(inv_sigma));
  t.record([x, out, gamma, beta, xhat_keep, inv_sigma_keep] {
    if (!out->has_grad()) return;
    const Matrix& dy = out->grad;
    const Matrix& xh = *xhat_keep;
    if (beta->needs_grad) beta->accumulate(dy.colwise().sum());
    if (gamma->needs_grad) gamma->accumulate(dy.cwiseProduct(xh).colwise().sum());
    if (x->needs_grad) {
      RowVector mean_dy = dy.colwise().mean();
      RowVector mean_dy_xhat = dy.cwiseProduct(xh).colwise().mean();
      Matrix dx = dy;
      dx.array().rowwise() -= mean_dy.array();
      dx -= (xh.array().rowwise() * mean_dy_xhat.array()).matrix();
      dx.array().rowwise() *= (gamma->value.array().row(0) * inv_sigma_keep->array());
      x->accumulate(dx);
    }
  });
  return out;
}

ConvBlock::ConvBlock(ParamRegistry& reg, const std::string& name, int kernel, int stride,
                     int c_in, int c_out, std::mt19937_64& rng)
    : conv_(reg, name + ".conv", kernel, stride, c_in, c_out, rng),
      bn_(reg, name + ".bn", c_out) {}

SparseTensor ConvBlock::forward(Tape& t, const SparseTensor& in, bool training,
                                std::shared_ptr<const GatherPlan> plan) const {
  SparseTensor out = conv_.forward(t, in, std::move(plan));
  out.features = relu(t, bn_.forward(t, out.features, training));
  return out;
}

InceptionResNet::InceptionResNet(ParamRegistry& reg, const std::string& name, int channels,
                                 std::mt19937_64& rng)
    : channels_(channels) {
  if (channels % 2 != 0) throw ContractViolation("InceptionResNet: channels must be even");
  int half = channels / 2;
  branch_a_ = ConvBlock(reg, name + ".a", 3, 1, half, half, rng);
  branch_b1_ = ConvBlock(reg, name + ".b1", 3, 1, half, half, rng);
  branch_b2_ = ConvBlock(reg, name + ".b2", 3, 1, half, half, rng);
  fuse_ = Conv(reg, name + ".fuse", 1, 1, channels, channels, rng);
}

SparseTensor InceptionResNet::forward(Tape& t, const SparseTensor& in, bool training,
                                      std::shared_ptr<const GatherPlan> plan) const {
  if (in.channels() != channels_) throw ContractViolation("InceptionResNet: channel mismatch");
  int half = channels_ / 2;
  SparseTensor lo{in.depth, in.coords, slice_cols(t, in.features, 0, half)};
  SparseTensor hi{in.depth, in.coords, slice_cols(t, in.features, half, half)};
  SparseTensor a = branch_a_.forward(t, lo, training, plan);
  SparseTensor b = branch_b2_.forward(t, branch_b1_.forward(t, hi, training, plan), training, plan);
  SparseTensor cat{in.depth, in.coords, concat_cols(t, a.features, b.features)};
  SparseTensor fused = fuse_.forward(t, cat);
  fused.features = add(t, fused.features, in.features);
  return fused;
}

}  // namespace pcvox::nn
