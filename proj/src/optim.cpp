#include "hoimotion/nn/optim.hpp"

#include <cmath>

namespace hoimo::nn {

AdamW::AdamW(ParamMap& params, AdamWOptions opts) : params_(params), opts_(opts) {
  for (auto& [_, p] : params_.entries()) {
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step() {
  ++step_count_;
  double bc1 = 1.0 - std::pow(opts_.beta1, step_count_);
  double bc2 = 1.0 - std::pow(opts_.beta2, step_count_);
  size_t i = 0;
  for (auto& [_, p] : params_.entries()) {
    if (!p.requires_grad()) { ++i; continue; }
    const Mat& g = p.grad();
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
    v_[i] = opts_.beta2 * v_[i].array().matrix() + (1.0 - opts_.beta2) * g.cwiseProduct(g);
    Mat m_hat = m_[i] / bc1;
    Mat v_hat = v_[i] / bc2;
    Mat update = m_hat.array() / (v_hat.array().sqrt() + opts_.eps);
    // Decoupled weight decay.
    p.set_value(p.value() - opts_.lr * (update + opts_.weight_decay * p.value()));
    ++i;
  }
  zero_grad();
}

void AdamW::zero_grad() { params_.zero_grad(); }

}  // namespace hoimo::nn
