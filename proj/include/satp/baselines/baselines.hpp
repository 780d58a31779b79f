#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "satp/predictor/predictor.hpp"

namespace satp {

// ---- maneuver uncertainty -------------------------------------------------

enum Maneuver : std::size_t { kLeft = 0, kStraight = 1, kRight = 2 };
inline constexpr std::size_t kManeuvers = 3;
inline constexpr double kManeuverThresholdDeg = 15.0;

// Heading change between the first future displacement (from the anchor)
// and the last one; displacements shorter than 0.1 m count as straight.
// Positive (counter-clockwise) change beyond the threshold is a left turn.
std::size_t maneuver_label(Vec2 anchor, const std::vector<Vec2>& future);
// Per agent of a batch, from batch.anchor and batch.future.
std::vector<std::size_t> maneuver_labels(const SceneBatch& batch);

// M predicted trajectories with per-agent member weights.
struct SampleBundle {
  std::vector<Tensor> members;               // each (t_f, N, 2) absolute
  std::vector<std::vector<double>> weights;  // [agent][member], rows sum to 1
  std::size_t size() const { return members.size(); }
  std::size_t agents() const { return weights.size(); }
  // Weighted member mean, (t_f, N, 2).
  Tensor average() const;
};

SampleBundle uniform_bundle(std::vector<Tensor> members);

struct MuOutput {
  Tensor logits;         // (N, K)
  Tensor probabilities;  // (N, K)
  SampleBundle bundle;   // one member per maneuver, weighted by probability
  Tensor point;          // (t_f, N, 2) trajectory of the most probable maneuver
  std::vector<std::size_t> argmax;
};

// cfg.maneuvers must equal kManeuvers.
MuOutput mu_forward(const SceneBatch& batch, ParameterSet& weights, const PredictorConfig& cfg);

// tp_loss of the decoder conditioned on the true maneuver plus
// ce_weight * cross-entropy of the maneuver head.
struct MuLoss {
  Tensor total;
  Tensor trajectory;
  Tensor classification;
};
MuLoss mu_loss(const SceneBatch& batch, ParameterSet& weights, const PredictorConfig& cfg,
               Mode mode, double ce_weight = 0.5);

// Negative maximum softmax probability per agent of a (N, K) tensor.
std::vector<double> nmap(const Tensor& probabilities);
double nmap(const std::vector<double>& probabilities);

inline constexpr double kEntropyFloor = 1e-6;  // m^2

// Gaussian differential entropy of the weighted positional spread of one
// agent at step t (0-based).
double predictive_entropy(const SampleBundle& bundle, std::size_t agent, std::size_t t);
// Per agent (ape, fpe): mean entropy over steps and entropy at the last step.
std::pair<std::vector<double>, std::vector<double>> ape_fpe(const SampleBundle& bundle);

// ---- MC dropout and deep ensemble -------------------------------------------

inline constexpr double kMcDropoutRate = 0.5;
inline constexpr std::size_t kMcSamples = 5;
inline constexpr std::size_t kEnsembleMembers = 5;

// Batch-norm in eval mode, dropout active; one rng stream per sample.
SampleBundle mc_dropout_predict(const SceneBatch& batch, ParameterSet& weights,
                                const PredictorConfig& cfg, double rate, std::size_t samples,
                                const Rng& rng);

SampleBundle ensemble_predict(const SceneBatch& batch, std::vector<ParameterSet>& members,
                              const PredictorConfig& cfg,
                              std::size_t expected = kEnsembleMembers);

// ---- autoencoder reconstruction -------------------------------------------

struct AeConfig {
  std::size_t feature_channels = 64;
  std::size_t hidden = 64;
  std::size_t rnn_layers = 2;
  std::size_t history_len = 6;
  double position_scale = 0.1;
};

ParameterSet init_ae(const AeConfig& cfg, Rng& rng);

// Reconstructed history offsets relative to the anchor, (t_h, N, 2) metres.
Tensor ae_reconstruct(const Tensor& feature, const ParameterSet& weights, const AeConfig& cfg);
// True history offsets of a batch in metres, (t_h, N, 2).
Tensor history_offsets(const SceneBatch& batch, double position_scale);
// Mean per-step Euclidean distance per agent.
std::vector<double> reconstruction_error(const Tensor& reconstructed, const Tensor& truth);

}  // namespace satp
