#pragma once

// Central finite-difference oracle for gradient tests. Independent of the
// backward implementations: it only evaluates forward passes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "satp/numerics/tensor.hpp"

namespace satp::testing {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Max over all input elements of |analytic - numeric| / max(|analytic|,
// |numeric|, floor).
inline double max_relative_error(const ScalarFn& f, std::vector<Tensor> inputs, double h = 1e-6,
                                 double floor = 1e-3) {
  for (auto& t : inputs) t.zero_grad();
  Tensor loss = f(inputs);
  loss.backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      double plus, minus;
      {
        NoGradGuard guard;
        data[j] = saved + h;
        plus = f(inputs).item();
        data[j] = saved - h;
        minus = f(inputs).item();
      }
      data[j] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::fabs(analytic[j]), std::fabs(numeric), floor});
      worst = std::max(worst, std::fabs(analytic[j] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace satp::testing
