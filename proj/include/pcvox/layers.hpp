#pragma once

#include <random>
#include <string>

#include "pcvox/sparse_tensor.hpp"

namespace pcvox::nn {

// Named parameter registry, shared by checkpointing and the optimizer.
// Buffers (running statistics) are saved but never optimized.
struct ParamRegistry {
  std::vector<std::pair<std::string, NodePtr>> params;
  std::vector<std::pair<std::string, NodePtr>> buffers;

  NodePtr add_param(const std::string& name, Matrix init) {
    params.push_back({name, make_node(std::move(init), true)});
    return params.back().second;
  }
  NodePtr add_buffer(const std::string& name, Matrix init) {
    buffers.push_back({name, make_node(std::move(init), false)});
    return buffers.back().second;
  }
};

Matrix he_normal(int rows, int cols, int fan_in, std::mt19937_64& rng);

// Sparse convolution. Weight layout: (K^3 * c_in) x c_out with kernel
// offsets x-major, bias 1 x c_out.
class Conv {
public:
  Conv() = default;
  Conv(ParamRegistry& reg, const std::string& name, int kernel, int stride, int c_in, int c_out,
       std::mt19937_64& rng);

  // plan may carry a precomputed routing for these coords (kernel/stride
  // permitting); callers coding many passes over one level reuse it.
  SparseTensor forward(Tape& t, const SparseTensor& in,
                       std::shared_ptr<const GatherPlan> plan = nullptr) const;
  SparseTensor forward_transposed(Tape& t, const SparseTensor& in) const;

  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int c_in() const { return c_in_; }
  int c_out() const { return c_out_; }
  const NodePtr& weight() const { return weight_; }
  const NodePtr& bias() const { return bias_; }

private:
  int kernel_ = 0, stride_ = 0, c_in_ = 0, c_out_ = 0;
  NodePtr weight_, bias_;
};

// Per-channel normalization over all active coordinates of the tensor,
// with learned affine and running statistics for inference.
class BatchNorm {
public:
  BatchNorm() = default;
  BatchNorm(ParamRegistry& reg, const std::string& name, int channels);

  NodePtr forward(Tape& t, const NodePtr& x, bool training) const;

private:
  int channels_ = 0;
  NodePtr gamma_, beta_;
  NodePtr running_mean_, running_var_;  // buffers, 1 x C
  double momentum_ = 0.1;
  double eps_ = 1e-5;
};

// SConv -> BatchNorm -> ReLU.
class ConvBlock {
public:
  ConvBlock() = default;
  ConvBlock(ParamRegistry& reg, const std::string& name, int kernel, int stride, int c_in,
            int c_out, std::mt19937_64& rng);

  SparseTensor forward(Tape& t, const SparseTensor& in, bool training,
                       std::shared_ptr<const GatherPlan> plan = nullptr) const;
  const Conv& conv() const { return conv_; }

private:
  Conv conv_;
  BatchNorm bn_;
};

// Residual block with two parallel branches on channel halves (one and two
// ConvBlocks), concatenated and fused by a 1x1x1 convolution before the
// residual add. Channel count must be even.
class InceptionResNet {
public:
  InceptionResNet() = default;
  InceptionResNet(ParamRegistry& reg, const std::string& name, int channels,
                  std::mt19937_64& rng);

  SparseTensor forward(Tape& t, const SparseTensor& in, bool training,
                       std::shared_ptr<const GatherPlan> plan = nullptr) const;

private:
  int channels_ = 0;
  ConvBlock branch_a_;
  ConvBlock branch_b1_, branch_b2_;
  Conv fuse_;
};

}  // namespace pcvox::nn
