#include "gcope/optim.hpp"

#include <cmath>

#include "gcope/error.hpp"

namespace gcope {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  for (auto* p : params_) {
    if (!p->grad.allFinite()) fail(ErrorCode::NonFiniteUpdate, "non-finite gradient in " + p->name);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (Index k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data()[k];
      double& mk = m.data()[k];
      double& vk = v.data()[k];
      mk = cfg_.beta1 * mk + (1.0 - cfg_.beta1) * g;
      vk = cfg_.beta2 * vk + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = mk / bc1;
      const double v_hat = vk / bc2;
      p.value.data()[k] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
    if (!p.value.allFinite()) fail(ErrorCode::NonFiniteUpdate, "non-finite value after update of " + p.name);
    p.zero_grad();
  }
}

}  // namespace gcope
