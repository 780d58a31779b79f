#include "satp/numerics/optim.hpp"

#include <cmath>

#include "satp/error.hpp"

namespace satp {

void Adam::step(ParameterSet& params, double lr) {
  if (params.frozen()) throw UsageError("Adam::step: parameter set is frozen");
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& [name, p] : params.mutable_parameters()) {
    if (!p.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != p.numel()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    auto value = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

double steplr(std::size_t epoch, double base_lr, std::size_t step_size, double gamma) {
  if (step_size == 0) throw UsageError("steplr: step_size must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("steplr: gamma must lie in (0, 1]");
  return base_lr * std::pow(gamma, static_cast<double>(epoch / step_size));
}

}  // namespace satp
