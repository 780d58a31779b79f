#include "satp/selfaware/selfaware.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "satp/error.hpp"

namespace satp {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

nn::RecurrentSpec gru(const SaConfig& cfg, std::size_t input) {
  return {nn::CellKind::Gru, input, cfg.hidden, cfg.rnn_layers};
}

nn::RecurrentSpec lstm(const SaConfig& cfg) {
  return {nn::CellKind::Lstm, cfg.hidden, cfg.hidden, 2};
}

std::size_t fused_width(const SaConfig& cfg) {
  switch (cfg.fusion) {
    case Fusion::GF: return cfg.hidden;
    case Fusion::Add: return 2;
    case Fusion::Concat: return cfg.hidden + 2;
  }
  return 0;
}

}  // namespace

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::GF: return "gf";
    case Fusion::Add: return "add";
    case Fusion::Concat: return "concat";
  }
  return "?";
}
std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::None: return "none";
    case Estimator::Mlp: return "mlp";
    case Estimator::Conv: return "conv";
    case Estimator::Lstm: return "lstm";
  }
  return "?";
}
std::string_view to_string(LabelForm l) {
  switch (l) {
    case LabelForm::Velocity: return "velocity";
    case LabelForm::PositionXY: return "position";
    case LabelForm::Distance: return "distance";
  }
  return "?";
}

Fusion parse_fusion(std::string_view name) {
  const auto s = lower(name);
  for (auto f : {Fusion::GF, Fusion::Add, Fusion::Concat})
    if (to_string(f) == s) return f;
  throw UsageError("unknown fusion '" + std::string(name) + "' (gf, add, concat)");
}
Estimator parse_estimator(std::string_view name) {
  const auto s = lower(name);
  for (auto e : {Estimator::None, Estimator::Mlp, Estimator::Conv, Estimator::Lstm})
    if (to_string(e) == s) return e;
  throw UsageError("unknown estimator '" + std::string(name) + "' (none, mlp, conv, lstm)");
}
LabelForm parse_label_form(std::string_view name) {
  const auto s = lower(name);
  for (auto l : {LabelForm::Velocity, LabelForm::PositionXY, LabelForm::Distance})
    if (to_string(l) == s) return l;
  throw UsageError("unknown label form '" + std::string(name) + "' (velocity, position, distance)");
}

void SaConfig::validate() const {
  if (hidden == 0 || rnn_layers == 0 || feature_channels == 0 || future_len == 0) {
    throw UsageError("selfaware: dimensions must be positive");
  }
  if (!(rate_hz > 0)) throw UsageError("selfaware: rate_hz must be positive");
  if (!(increment_scale > 0)) throw UsageError("selfaware: increment_scale must be positive");
}

ParameterSet init_selfaware(const SaConfig& cfg, Rng& rng) {
  cfg.validate();
  ParameterSet p;
  const std::size_t H = cfg.hidden;
  nn::add_recurrent(p, "sa.enc", gru(cfg, cfg.feature_channels), rng);
  nn::add_recurrent(p, "sa.dec", gru(cfg, H), rng);
  if (cfg.fusion == Fusion::Add) nn::add_linear(p, "sa.proj", H, 2, rng);
  const std::size_t in = fused_width(cfg);
  const std::size_t d = cfg.label_dim();
  if (cfg.estimator == Estimator::None) {
    nn::add_linear(p, "sa.readout", in, d, rng);
  } else {
    nn::add_linear(p, "sa.mlp_in", in, H, rng);
    switch (cfg.estimator) {
      case Estimator::Mlp: nn::add_linear(p, "sa.core", H, H, rng); break;
      case Estimator::Conv: nn::add_conv_time(p, "sa.core", 3, H, H, rng); break;
      case Estimator::Lstm: nn::add_recurrent(p, "sa.core", lstm(cfg), rng); break;
      case Estimator::None: break;
    }
    nn::add_linear(p, "sa.mlp_hidden", H, H, rng);
    nn::add_linear(p, "sa.readout", H, d, rng);
  }
  // A positive start keeps the output ReLU of the distance form alive.
  if (cfg.label_form == LabelForm::Distance) {
    for (auto& b : p.mutable_parameters().at("sa.readout.bias").mutable_data()) b = 1.0;
  }
  return p;
}

Tensor sa_forward(const Tensor& feature, const Tensor& increments, const ParameterSet& weights,
                  const SaConfig& cfg, bool detach_inputs) {
  if (feature.ndim() != 3 || feature.dim(2) != cfg.feature_channels) {
    throw ShapeError("sa_forward: graph feature " + shape_str(feature.shape()) +
                     " does not have " + std::to_string(cfg.feature_channels) + " channels");
  }
  const std::size_t N = feature.dim(1);
  const std::size_t tf = cfg.future_len;
  if (increments.shape() != Shape{tf, N, 2}) {
    throw ShapeError("sa_forward: predicted increments " + shape_str(increments.shape()) +
                     " do not match (" + std::to_string(tf) + ", " + std::to_string(N) + ", 2)");
  }
  const Tensor gf = detach_inputs ? feature.detach() : feature;
  const Tensor inc = detach_inputs ? increments.detach() : increments;

  const auto enc = gru(cfg, cfg.feature_channels);
  const auto dec = gru(cfg, cfg.hidden);
  nn::RecurrentState state = nn::zero_state(enc, N);
  nn::run_recurrent(weights, "sa.enc", enc, gf, state);
  Tensor input = Tensor::zeros({N, cfg.hidden});
  std::vector<Tensor> steps;
  for (std::size_t t = 0; t < tf; ++t) {
    input = nn::step_recurrent(weights, "sa.dec", dec, input, state);
    steps.push_back(input);
  }
  Tensor processed = ops::stack(steps);  // (t_f, N, H)

  const Tensor traj = ops::scale(inc, cfg.increment_scale);
  Tensor fused;
  switch (cfg.fusion) {
    case Fusion::GF: fused = processed; break;
    case Fusion::Add: fused = nn::linear(weights, "sa.proj", processed) + traj; break;
    case Fusion::Concat: fused = ops::concat({processed, traj}, 2); break;
  }

  Tensor out;
  if (cfg.estimator == Estimator::None) {
    out = nn::linear(weights, "sa.readout", fused);
  } else {
    Tensor h = ops::relu(nn::linear(weights, "sa.mlp_in", fused));
    switch (cfg.estimator) {
      case Estimator::Mlp: h = ops::relu(nn::linear(weights, "sa.core", h)); break;
      case Estimator::Conv: h = ops::relu(nn::conv_time(weights, "sa.core", h)); break;
      case Estimator::Lstm: {
        const auto spec = lstm(cfg);
        nn::RecurrentState s = nn::zero_state(spec, N);
        h = nn::run_recurrent(weights, "sa.core", spec, h, s);
        break;
      }
      case Estimator::None: break;
    }
    h = ops::relu(nn::linear(weights, "sa.mlp_hidden", h));
    out = nn::linear(weights, "sa.readout", h);
  }
  if (cfg.label_form == LabelForm::Distance) out = ops::relu(out);
  return out;
}

Tensor error_labels(const Tensor& truth, const Tensor& pred, const Tensor& anchor, LabelForm form,
                    double rate_hz) {
  if (truth.shape() != pred.shape() || truth.ndim() != 3 || truth.dim(2) != 2) {
    throw ShapeError("error_labels: expected matching (t_f, N, 2) tensors, got " +
                     shape_str(truth.shape()) + " and " + shape_str(pred.shape()));
  }
  const std::size_t T = truth.dim(0), N = truth.dim(1);
  const auto a = truth.data();
  const auto b = pred.data();
  std::vector<double> out;
  if (form == LabelForm::Distance) {
    out.resize(T * N);
    for (std::size_t k = 0; k < T * N; ++k) out[k] = std::hypot(a[2 * k] - b[2 * k], a[2 * k + 1] - b[2 * k + 1]);
    return Tensor::from({T, N, 1}, std::move(out));
  }
  out.resize(T * N * 2);
  if (form == LabelForm::PositionXY) {
    for (std::size_t k = 0; k < T * N * 2; ++k) out[k] = std::fabs(a[k] - b[k]);
    return Tensor::from({T, N, 2}, std::move(out));
  }
  if (anchor.shape() != Shape{N, 2}) throw ShapeError("error_labels: anchor must be (N, 2)");
  const auto an = anchor.data();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t d = 0; d < 2; ++d) {
        const std::size_t k = (t * N + i) * 2 + d;
        const double prev_a = t == 0 ? an[2 * i + d] : a[k - 2 * N];
        const double prev_b = t == 0 ? an[2 * i + d] : b[k - 2 * N];
        out[k] = std::fabs((a[k] - prev_a) - (b[k] - prev_b)) * rate_hz;
      }
  return Tensor::from({T, N, 2}, std::move(out));
}

Tensor sa_loss(const Tensor& labels, const Tensor& z_hat, const std::vector<bool>& valid) {
  if (labels.shape() != z_hat.shape() || labels.ndim() != 3) {
    throw ShapeError("sa_loss: label " + shape_str(labels.shape()) + " and estimate " +
                     shape_str(z_hat.shape()) + " differ");
  }
  const std::size_t T = labels.dim(0), N = labels.dim(1);
  if (!valid.empty() && valid.size() != N) throw ShapeError("sa_loss: valid mask length mismatch");
  std::size_t count = 0;
  for (std::size_t i = 0; i < N; ++i) count += valid.empty() || valid[i];
  if (count == 0) throw DataError("sa_loss: no valid agents");
  std::vector<double> w(T * N, 0.0);
  const double share = 1.0 / static_cast<double>(count * T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      if (valid.empty() || valid[i]) w[t * N + i] = share;
  // |e| is the one-element L2 norm, so both label widths share the path.
  return ops::sum(ops::l2norm(z_hat - labels) * Tensor::from({T, N}, std::move(w)));
}

std::pair<std::vector<double>, std::vector<double>> integrate_diagnostics(const Tensor& z_hat) {
  if (z_hat.ndim() != 3) throw ShapeError("integrate_diagnostics: expected (t_f, N, d)");
  const std::size_t T = z_hat.dim(0), N = z_hat.dim(1), D = z_hat.dim(2);
  const auto v = z_hat.data();
  std::vector<double> ade(N, 0.0), fde(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      double sq = 0;
      for (std::size_t d = 0; d < D; ++d) sq += v[(t * N + i) * D + d] * v[(t * N + i) * D + d];
      const double norm = D == 1 ? std::fabs(v[(t * N + i) * D]) : std::sqrt(sq);
      ade[i] += norm;
      if (t + 1 == T) fde[i] = norm;
    }
    ade[i] /= static_cast<double>(T);
  }
  return {ade, fde};
}

}  // namespace satp
