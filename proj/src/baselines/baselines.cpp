#include "satp/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "satp/error.hpp"

namespace satp {

namespace {

constexpr double kMinDisplacement = 0.1;

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t k) {
  std::vector<double> v(labels.size() * k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) v[i * k + labels[i]] = 1.0;
  return Tensor::from({labels.size(), k}, std::move(v));
}

Tensor maneuver_logits(const Tensor& feature, const ParameterSet& weights) {
  Tensor pooled = ops::mean_axis(feature, 0);  // (N, C)
  Tensor h = ops::relu(nn::linear(weights, "tp.mhead.l0", pooled));
  return nn::linear(weights, "tp.mhead.l1", h);
}

void check_mu(const PredictorConfig& cfg, const ParameterSet& weights) {
  if (cfg.maneuvers != kManeuvers || !weights.contains("tp.mhead.l1.weight")) {
    throw UsageError("mu_forward: weights lack a " + std::to_string(kManeuvers) +
                     "-way maneuver head");
  }
}

nn::RecurrentSpec ae_spec(const AeConfig& cfg) {
  return {nn::CellKind::Gru, cfg.feature_channels, cfg.hidden, cfg.rnn_layers};
}

}  // namespace

std::size_t maneuver_label(Vec2 anchor, const std::vector<Vec2>& future) {
  if (future.size() < 2) return kStraight;
  const double x0 = future[0].x - anchor.x, y0 = future[0].y - anchor.y;
  const auto n = future.size();
  const double x1 = future[n - 1].x - future[n - 2].x, y1 = future[n - 1].y - future[n - 2].y;
  if (std::hypot(x0, y0) < kMinDisplacement || std::hypot(x1, y1) < kMinDisplacement) {
    return kStraight;
  }
  const double change = std::atan2(x0 * y1 - y0 * x1, x0 * x1 + y0 * y1) * 180.0 / std::numbers::pi;
  if (change > kManeuverThresholdDeg) return kLeft;
  if (change < -kManeuverThresholdDeg) return kRight;
  return kStraight;
}

std::vector<std::size_t> maneuver_labels(const SceneBatch& batch) {
  const std::size_t N = batch.agents(), T = batch.future.dim(0);
  const auto f = batch.future.data();
  const auto a = batch.anchor.data();
  std::vector<std::size_t> labels(N);
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<Vec2> fut(T);
    for (std::size_t t = 0; t < T; ++t) fut[t] = {f[(t * N + i) * 2], f[(t * N + i) * 2 + 1]};
    labels[i] = maneuver_label({a[2 * i], a[2 * i + 1]}, fut);
  }
  return labels;
}

Tensor SampleBundle::average() const {
  if (members.empty()) throw UsageError("SampleBundle: empty bundle");
  const std::size_t T = members[0].dim(0), N = members[0].dim(1);
  std::vector<double> out(T * N * 2, 0.0);
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto v = members[m].data();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t d = 0; d < 2; ++d) {
          const std::size_t k = (t * N + i) * 2 + d;
          out[k] += weights[i][m] * v[k];
        }
  }
  return Tensor::from({T, N, 2}, std::move(out));
}

SampleBundle uniform_bundle(std::vector<Tensor> members) {
  if (members.empty()) throw UsageError("uniform_bundle: no members");
  SampleBundle b;
  const std::size_t N = members[0].dim(1);
  for (const auto& m : members) {
    if (m.shape() != members[0].shape()) throw ShapeError("uniform_bundle: member shapes differ");
  }
  b.weights.assign(N, std::vector<double>(members.size(), 1.0 / static_cast<double>(members.size())));
  b.members = std::move(members);
  return b;
}

MuOutput mu_forward(const SceneBatch& batch, ParameterSet& weights, const PredictorConfig& cfg) {
  check_mu(cfg, weights);
  NoGradGuard guard;
  Tensor feature = encode_features(batch, weights, cfg, Mode::Eval);
  MuOutput out;
  out.logits = maneuver_logits(feature, weights);
  out.probabilities = ops::softmax(out.logits, 1);
  const std::size_t N = batch.agents();
  for (std::size_t k = 0; k < kManeuvers; ++k) {
    const Tensor cond = one_hot(std::vector<std::size_t>(N, k), kManeuvers);
    out.bundle.members.push_back(decode_trajectory(batch, feature, weights, cfg, &cond).positions);
  }
  const auto p = out.probabilities.data();
  out.bundle.weights.assign(N, std::vector<double>(kManeuvers));
  out.argmax.assign(N, 0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < kManeuvers; ++k) out.bundle.weights[i][k] = p[i * kManeuvers + k];
    out.argmax[i] = static_cast<std::size_t>(
        std::max_element(p.begin() + static_cast<long>(i * kManeuvers),
                         p.begin() + static_cast<long>((i + 1) * kManeuvers)) -
        (p.begin() + static_cast<long>(i * kManeuvers)));
  }
  const std::size_t T = cfg.future_len;
  std::vector<double> point(T * N * 2);
  for (std::size_t i = 0; i < N; ++i) {
    const auto v = out.bundle.members[out.argmax[i]].data();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = 0; d < 2; ++d) point[(t * N + i) * 2 + d] = v[(t * N + i) * 2 + d];
  }
  out.point = Tensor::from({T, N, 2}, std::move(point));
  return out;
}

MuLoss mu_loss(const SceneBatch& batch, ParameterSet& weights, const PredictorConfig& cfg,
               Mode mode, double ce_weight) {
  check_mu(cfg, weights);
  const auto labels = maneuver_labels(batch);
  const Tensor cond = one_hot(labels, kManeuvers);
  Tensor feature = encode_features(batch, weights, cfg, mode);
  const PredictorOutput pred = decode_trajectory(batch, feature, weights, cfg, &cond);
  MuLoss loss;
  loss.trajectory = tp_loss(pred.positions, batch.future);
  const Tensor logp = ops::log_softmax(maneuver_logits(feature, weights), 1);
  loss.classification =
      ops::scale(ops::sum(logp * cond), -1.0 / static_cast<double>(batch.agents()));
  loss.total = loss.trajectory + ops::scale(loss.classification, ce_weight);
  return loss;
}

double nmap(const std::vector<double>& probabilities) {
  if (probabilities.empty()) throw UsageError("nmap: empty probability vector");
  return -*std::max_element(probabilities.begin(), probabilities.end());
}

std::vector<double> nmap(const Tensor& probabilities) {
  if (probabilities.ndim() != 2) throw ShapeError("nmap: expected (N, K) probabilities");
  const std::size_t N = probabilities.dim(0), K = probabilities.dim(1);
  const auto p = probabilities.data();
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = nmap(std::vector<double>(p.begin() + static_cast<long>(i * K),
                                      p.begin() + static_cast<long>((i + 1) * K)));
  }
  return out;
}

double predictive_entropy(const SampleBundle& bundle, std::size_t agent, std::size_t t) {
  if (bundle.members.empty()) throw UsageError("predictive_entropy: empty bundle");
  const std::size_t N = bundle.members[0].dim(1);
  const auto& w = bundle.weights.at(agent);
  double mx = 0, my = 0;
  for (std::size_t m = 0; m < bundle.size(); ++m) {
    const auto v = bundle.members[m].data();
    mx += w[m] * v[(t * N + agent) * 2];
    my += w[m] * v[(t * N + agent) * 2 + 1];
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t m = 0; m < bundle.size(); ++m) {
    const auto v = bundle.members[m].data();
    const double dx = v[(t * N + agent) * 2] - mx;
    const double dy = v[(t * N + agent) * 2 + 1] - my;
    sxx += w[m] * dx * dx;
    sxy += w[m] * dx * dy;
    syy += w[m] * dy * dy;
  }
  const double det = (sxx + kEntropyFloor) * (syy + kEntropyFloor) - sxy * sxy;
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  return 0.5 * std::log(two_pi_e * two_pi_e * det);
}

std::pair<std::vector<double>, std::vector<double>> ape_fpe(const SampleBundle& bundle) {
  if (bundle.members.empty()) throw UsageError("ape_fpe: empty bundle");
  const std::size_t T = bundle.members[0].dim(0), N = bundle.agents();
  std::vector<double> ape(N, 0.0), fpe(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double h = predictive_entropy(bundle, i, t);
      ape[i] += h / static_cast<double>(T);
      if (t + 1 == T) fpe[i] = h;
    }
  }
  return {ape, fpe};
}

SampleBundle mc_dropout_predict(const SceneBatch& batch, ParameterSet& weights,
                                const PredictorConfig& cfg, double rate, std::size_t samples,
                                const Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("mc_dropout_predict: rate must lie in [0, 1)");
  if (samples == 0) throw UsageError("mc_dropout_predict: need at least one sample");
  NoGradGuard guard;
  std::vector<Tensor> members;
  for (std::size_t s = 0; s < samples; ++s) {
    Rng stream = rng.fork(static_cast<std::uint64_t>(s));
    ForwardOptions opts{&stream, rate};
    members.push_back(predictor_forward(batch, weights, cfg, Mode::Eval, opts).positions);
  }
  return uniform_bundle(std::move(members));
}

SampleBundle ensemble_predict(const SceneBatch& batch, std::vector<ParameterSet>& members,
                              const PredictorConfig& cfg, std::size_t expected) {
  if (members.size() != expected) {
    throw UsageError("ensemble_predict: expected " + std::to_string(expected) +
                     " submodels, got " + std::to_string(members.size()));
  }
  NoGradGuard guard;
  std::vector<Tensor> out;
  for (auto& w : members) out.push_back(predictor_forward(batch, w, cfg, Mode::Eval).positions);
  return uniform_bundle(std::move(out));
}

ParameterSet init_ae(const AeConfig& cfg, Rng& rng) {
  ParameterSet p;
  nn::add_recurrent(p, "ae.rnn", ae_spec(cfg), rng);
  nn::add_linear(p, "ae.out", cfg.hidden, 2, rng);
  return p;
}

Tensor ae_reconstruct(const Tensor& feature, const ParameterSet& weights, const AeConfig& cfg) {
  if (feature.ndim() != 3 || feature.dim(0) != cfg.history_len ||
      feature.dim(2) != cfg.feature_channels) {
    throw ShapeError("ae_reconstruct: feature " + shape_str(feature.shape()) + " does not match (" +
                     std::to_string(cfg.history_len) + ", N, " +
                     std::to_string(cfg.feature_channels) + ")");
  }
  const auto spec = ae_spec(cfg);
  nn::RecurrentState state = nn::zero_state(spec, feature.dim(1));
  Tensor h = nn::run_recurrent(weights, "ae.rnn", spec, feature.detach(), state);
  return ops::scale(nn::linear(weights, "ae.out", h), 1.0 / cfg.position_scale);
}

Tensor history_offsets(const SceneBatch& batch, double position_scale) {
  return ops::scale(ops::slice(batch.input, 2, 0, 2), 1.0 / position_scale).detach();
}

std::vector<double> reconstruction_error(const Tensor& reconstructed, const Tensor& truth) {
  if (reconstructed.shape() != truth.shape() || truth.ndim() != 3 || truth.dim(2) != 2) {
    throw ShapeError("reconstruction_error: expected matching (t_h, N, 2) tensors");
  }
  const std::size_t T = truth.dim(0), N = truth.dim(1);
  const auto a = reconstructed.data();
  const auto b = truth.data();
  std::vector<double> out(N, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t k = (t * N + i) * 2;
      out[i] += std::hypot(a[k] - b[k], a[k + 1] - b[k + 1]) / static_cast<double>(T);
    }
  return out;
}

}  // namespace satp
