#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "satp/numerics/layers.hpp"
#include "satp/numerics/parameters.hpp"
#include "satp/numerics/rng.hpp"

namespace satp {

enum class Fusion { GF, Add, Concat };
enum class Estimator { None, Mlp, Conv, Lstm };
enum class LabelForm { Velocity, PositionXY, Distance };

std::string_view to_string(Fusion f);
std::string_view to_string(Estimator e);
std::string_view to_string(LabelForm l);
// Case-insensitive; throws UsageError on unknown names.
Fusion parse_fusion(std::string_view name);
Estimator parse_estimator(std::string_view name);
LabelForm parse_label_form(std::string_view name);

struct SaConfig {
  Fusion fusion = Fusion::Concat;
  Estimator estimator = Estimator::Lstm;
  LabelForm label_form = LabelForm::Distance;
  std::size_t hidden = 64;
  std::size_t rnn_layers = 2;
  std::size_t feature_channels = 64;  // must match the predictor
  std::size_t future_len = 6;
  double rate_hz = 2.0;
  // Predicted increments enter the fusion in units of 1 / increment_scale metres.
  double increment_scale = 0.1;

  std::size_t label_dim() const { return label_form == LabelForm::Distance ? 1 : 2; }
  void validate() const;
};

ParameterSet init_selfaware(const SaConfig& cfg, Rng& rng);

// feature (t_h, N, C_feat), increments (t_f, N, 2) metres -> z_hat (t_f, N, d).
// With detach_inputs the inputs are treated as constants so no gradient can
// reach the predictor; joint training passes false.
Tensor sa_forward(const Tensor& feature, const Tensor& increments, const ParameterSet& weights,
                  const SaConfig& cfg, bool detach_inputs = true);

// truth/pred (t_f, N, 2) absolute, anchor (N, 2). Returns (t_f, N, d) values
// without gradient history.
Tensor error_labels(const Tensor& truth, const Tensor& pred, const Tensor& anchor, LabelForm form,
                    double rate_hz = 2.0);

// Mean over valid agents of (1/t_f) sum_t |z - z_hat| (d = 1) or the L2 norm
// of the per-step error vector (d = 2). Empty `valid` means all agents.
Tensor sa_loss(const Tensor& labels, const Tensor& z_hat, const std::vector<bool>& valid = {});

// Per-agent (ade_est, fde_est); for d = 2 the per-step vector norms are used.
std::pair<std::vector<double>, std::vector<double>> integrate_diagnostics(const Tensor& z_hat);

}  // namespace satp
