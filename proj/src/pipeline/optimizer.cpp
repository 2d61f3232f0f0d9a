#include "mammil/optimizer.hpp"

#include <cmath>

namespace mammil {

RAdam::RAdam(NamedTensors params, RAdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void RAdam::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void RAdam::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2, lr = options_.learning_rate;
  const double t = double(step_);
  const double bias1 = 1.0 - std::pow(b1, t);
  const double b2t = std::pow(b2, t);
  const double bias2 = 1.0 - b2t;
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * b2t / bias2;
  double rect = 0;
  const bool adaptive = rho_t > 5.0;
  if (adaptive) {
    rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  }
  const double decay = 1.0 - lr * options_.weight_decay;

  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].second;
    auto values = p.data();
    const auto grads = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      double value = double(values[i]) * decay;
      const double m_hat = m[i] / bias1;
      if (adaptive) {
        const double adapt = std::sqrt(bias2) / (std::sqrt(v[i]) + options_.epsilon);
        value -= lr * m_hat * rect * adapt;
      } else {
        value -= lr * m_hat;
      }
      values[i] = real(value);
    }
  }
}

}  // namespace mammil
