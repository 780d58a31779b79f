#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "satp/data/types.hpp"
#include "satp/numerics/layers.hpp"
#include "satp/numerics/ops.hpp"
#include "satp/numerics/parameters.hpp"
#include "satp/numerics/rng.hpp"

namespace satp {

enum class Mode { Train, Eval };

struct PredictorConfig {
  std::size_t history_len = 6;
  std::size_t future_len = 6;
  std::size_t n_max = 32;
  double d_close = 10.0;
  std::size_t feature_channels = 64;  // C_feat
  std::size_t hidden = 64;
  std::size_t blocks = 3;
  std::size_t kernel = 3;
  std::size_t rnn_layers = 2;
  bool type_channels = true;
  // Offsets enter the network in units of 1 / position_scale metres.
  double position_scale = 0.1;
  // Maneuver-conditioned variant when > 0 (adds a classification head).
  std::size_t maneuvers = 0;

  // 2 offsets, optional 4 type one-hots, presence.
  std::size_t channels() const { return 2 + (type_channels ? kAgentTypes.size() : 0) + 1; }
  void validate() const;
};

inline constexpr std::size_t kNoSource = std::numeric_limits<std::size_t>::max();

// One scene padded to n_max slots. `values` is time-major (t_h, n, c);
// to_channel_major gives the (c, t_h, n) view.
struct SceneTensor {
  Tensor values;
  std::vector<std::uint8_t> mask;  // (t_h, n) row-major presence
  std::vector<std::int64_t> agent_ids;
  std::vector<Vec2> anchor;
  std::vector<bool> valid;
  std::vector<AgentType> types;
  std::vector<bool> hard;
  std::vector<std::size_t> source;  // agent index in the Sample, kNoSource for padding
  Tensor future;                    // (t_f, n, 2) absolute truth, zeros on padding
  std::size_t n() const { return valid.size(); }
};

struct FixedGraph {
  std::size_t n = 0;
  std::vector<double> adjacency;  // (n, n) row-major, Λ⁻¹(A + I) on present agents
  double at(std::size_t i, std::size_t j) const { return adjacency[i * n + j]; }
};

// Agents sorted by distance of their t=0 position to the scene centroid,
// nearest first; agents beyond n_max are dropped. Throws DataError when the
// sample has no agents.
std::pair<SceneTensor, FixedGraph> build_scene(const Sample& sample, const PredictorConfig& cfg);

// Present agents of several scenes packed along the agent axis with a
// block-diagonal graph. Padding slots never enter the network, so they
// cannot influence valid agents and do not skew batch statistics.
struct SceneBatch {
  Tensor input;           // (t_h, N, c)
  Tensor last_increment;  // (N, 2), scaled network units
  Tensor anchor;          // (N, 2) metres
  Tensor future;          // (t_f, N, 2) absolute truth
  AgentGraph graph;
  std::vector<AgentType> types;
  std::vector<bool> hard;
  std::vector<std::pair<std::size_t, std::size_t>> origin;  // (scene, slot)
  std::size_t agents() const { return origin.size(); }
};

SceneBatch make_batch(const std::vector<const SceneTensor*>& scenes,
                      const std::vector<const FixedGraph*>& graphs);
SceneBatch make_batch(const SceneTensor& scene, const FixedGraph& graph);

struct ForwardOptions {
  Rng* dropout_rng = nullptr;  // enables dropout when set together with a rate
  double dropout_rate = 0.0;
};

struct PredictorOutput {
  Tensor feature;     // (t_h, N, C_feat)
  Tensor increments;  // (t_f, N, 2) metres
  Tensor positions;   // (t_f, N, 2) absolute metres
};

ParameterSet init_predictor(const PredictorConfig& cfg, Rng& rng);

// Channel embedding followed by the residual graph blocks.
Tensor encode_features(const SceneBatch& batch, ParameterSet& weights, const PredictorConfig& cfg,
                       Mode mode, const ForwardOptions& opts = {});

// Seq2Seq decoder from a feature tensor. `condition` (N, K) is appended to
// every decoder input for the maneuver-conditioned variant.
PredictorOutput decode_trajectory(const SceneBatch& batch, const Tensor& feature,
                                  const ParameterSet& weights, const PredictorConfig& cfg,
                                  const Tensor* condition = nullptr,
                                  const ForwardOptions& opts = {});

PredictorOutput predictor_forward(const SceneBatch& batch, ParameterSet& weights,
                                  const PredictorConfig& cfg, Mode mode,
                                  const ForwardOptions& opts = {});

// Padded-scene convenience: runs the network on present agents and scatters
// results back to n slots. Feature comes back as (C_feat, t_h, n) and
// positions as (n, t_f, 2); padding entries are zero.
struct ScenePrediction {
  Tensor feature;
  Tensor positions;
  std::vector<bool> valid;
};
ScenePrediction predictor_forward(const SceneTensor& scene, const FixedGraph& graph,
                                  ParameterSet& weights, const PredictorConfig& cfg, Mode mode);

// Mean Euclidean distance over valid agents and all steps. pred/truth are
// (t_f, N, 2); an empty `valid` means all agents.
Tensor tp_loss(const Tensor& pred, const Tensor& truth, const std::vector<bool>& valid = {});

// Layout helpers (value copies, no gradient).
Tensor to_channel_major(const Tensor& tnc);  // (T, N, C) -> (C, T, N)
Tensor to_agent_major(const Tensor& tnd);    // (T, N, D) -> (N, T, D)

}  // namespace satp
