#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "satp/numerics/parameters.hpp"

namespace satp {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. First and second moments are kept per
// parameter name, so one optimizer instance serves one ParameterSet.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Applies one update using the gradients currently stored in `params`.
  // Throws UsageError when `params` is frozen.
  void step(ParameterSet& params, double lr);
  void step(ParameterSet& params) { step(params, options_.lr); }

  std::size_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

// base_lr * gamma^floor(epoch / step_size)
double steplr(std::size_t epoch, double base_lr, std::size_t step_size, double gamma);

}  // namespace satp
