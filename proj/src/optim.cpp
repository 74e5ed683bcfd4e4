#include "pcvox/optim.hpp"

#include <cmath>

namespace pcvox::nn {

Adam::Adam(std::vector<NodePtr> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const NodePtr& p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i];
    Matrix g = p.has_grad() ? p.grad : Matrix::Zero(p.value.rows(), p.value.cols());
    if (!g.allFinite()) throw TrainingDiverged("Adam: non-finite gradient");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix mhat = m_[i] / bc1;
    Matrix vhat = v_[i] / bc2;
    p.value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    p.zero_grad();
  }
}

void Adam::zero_grad() {
  for (const NodePtr& p : params_) p->zero_grad();
}

}  // namespace pcvox::nn
