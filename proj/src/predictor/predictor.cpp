#include "satp/predictor/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "satp/error.hpp"

namespace satp {

namespace {

nn::RecurrentSpec encoder_spec(const PredictorConfig& cfg) {
  return {nn::CellKind::Gru, cfg.feature_channels, cfg.hidden, cfg.rnn_layers};
}
nn::RecurrentSpec decoder_spec(const PredictorConfig& cfg) {
  return {nn::CellKind::Gru, 2 + cfg.maneuvers, cfg.hidden, cfg.rnn_layers};
}

std::string block(std::size_t b) { return "tp.block" + std::to_string(b); }

}  // namespace

void PredictorConfig::validate() const {
  if (history_len < 2) throw UsageError("predictor: history_len must be >= 2");
  if (future_len < 1) throw UsageError("predictor: future_len must be >= 1");
  if (n_max < 1) throw UsageError("predictor: n_max must be >= 1");
  if (feature_channels < 1 || hidden < 1 || rnn_layers < 1) {
    throw UsageError("predictor: dimensions must be positive");
  }
  if (kernel % 2 == 0) throw UsageError("predictor: kernel must be odd");
  if (!(d_close > 0)) throw UsageError("predictor: d_close must be positive");
  if (!(position_scale > 0)) throw UsageError("predictor: position_scale must be positive");
}

std::pair<SceneTensor, FixedGraph> build_scene(const Sample& sample, const PredictorConfig& cfg) {
  const std::size_t total = sample.agents();
  if (total == 0) throw DataError("build_scene: sample " + sample.record_id + "@" +
                                  std::to_string(sample.start_frame) + " has no agents");
  const std::size_t th = cfg.history_len, tf = cfg.future_len;
  if (sample.history_len != th || sample.future_len != tf) {
    throw ShapeError("build_scene: sample window " + std::to_string(sample.history_len) + "+" +
                     std::to_string(sample.future_len) + " does not match the predictor " +
                     std::to_string(th) + "+" + std::to_string(tf));
  }
  double cx = 0, cy = 0;
  for (std::size_t i = 0; i < total; ++i) {
    cx += sample.history[i][th - 1].x;
    cy += sample.history[i][th - 1].y;
  }
  cx /= static_cast<double>(total);
  cy /= static_cast<double>(total);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(total);
  for (std::size_t i = 0; i < total; ++i) {
    dist[i] = std::hypot(sample.history[i][th - 1].x - cx, sample.history[i][th - 1].y - cy);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  const std::size_t n = cfg.n_max;
  const std::size_t kept = std::min(total, n);
  const std::size_t c = cfg.channels();
  SceneTensor scene;
  scene.mask.assign(th * n, 0);
  scene.agent_ids.assign(n, -1);
  scene.anchor.assign(n, Vec2{});
  scene.valid.assign(n, false);
  scene.types.assign(n, AgentType::SmallVehicle);
  scene.hard.assign(n, false);
  scene.source.assign(n, kNoSource);
  std::vector<double> values(th * n * c, 0.0);
  std::vector<double> future(tf * n * 2, 0.0);
  for (std::size_t slot = 0; slot < kept; ++slot) {
    const std::size_t a = order[slot];
    const Vec2 anchor = sample.history[a][th - 1];
    scene.agent_ids[slot] = sample.track_ids[a];
    scene.anchor[slot] = anchor;
    scene.valid[slot] = true;
    scene.types[slot] = sample.types[a];
    scene.hard[slot] = a < sample.hard.size() && sample.hard[a];
    scene.source[slot] = a;
    for (std::size_t t = 0; t < th; ++t) {
      const bool present = sample.history_mask.empty() || sample.history_mask[a][t];
      if (!present) continue;
      scene.mask[t * n + slot] = 1;
      double* v = &values[(t * n + slot) * c];
      v[0] = (sample.history[a][t].x - anchor.x) * cfg.position_scale;
      v[1] = (sample.history[a][t].y - anchor.y) * cfg.position_scale;
      if (cfg.type_channels) v[2 + type_index(sample.types[a])] = 1.0;
      v[c - 1] = 1.0;
    }
    for (std::size_t t = 0; t < tf; ++t) {
      future[(t * n + slot) * 2] = sample.future[a][t].x;
      future[(t * n + slot) * 2 + 1] = sample.future[a][t].y;
    }
  }
  scene.values = Tensor::from({th, n, c}, std::move(values));
  scene.future = Tensor::from({tf, n, 2}, std::move(future));

  FixedGraph graph;
  graph.n = n;
  graph.adjacency.assign(n * n, 0.0);
  for (std::size_t i = 0; i < kept; ++i) {
    std::size_t degree = 0;
    for (std::size_t j = 0; j < kept; ++j) {
      const double d = std::hypot(scene.anchor[i].x - scene.anchor[j].x,
                                  scene.anchor[i].y - scene.anchor[j].y);
      if (i == j || d < cfg.d_close) {
        graph.adjacency[i * n + j] = 1.0;
        ++degree;
      }
    }
    for (std::size_t j = 0; j < kept; ++j) graph.adjacency[i * n + j] /= static_cast<double>(degree);
  }
  return {std::move(scene), std::move(graph)};
}

SceneBatch make_batch(const std::vector<const SceneTensor*>& scenes,
                      const std::vector<const FixedGraph*>& graphs) {
  if (scenes.size() != graphs.size()) throw ShapeError("make_batch: scene/graph count mismatch");
  if (scenes.empty()) throw DataError("make_batch: no scenes");
  const std::size_t th = scenes[0]->values.dim(0);
  const std::size_t c = scenes[0]->values.dim(2);
  const std::size_t tf = scenes[0]->future.dim(0);
  SceneBatch batch;
  std::vector<AgentGraph> parts;
  std::vector<std::vector<std::size_t>> slots(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& sc = *scenes[s];
    if (sc.values.dim(0) != th || sc.values.dim(2) != c || sc.future.dim(0) != tf) {
      throw ShapeError("make_batch: scene " + std::to_string(s) + " has inconsistent dimensions");
    }
    if (graphs[s]->n != sc.n()) throw ShapeError("make_batch: graph size differs from scene");
    for (std::size_t i = 0; i < sc.n(); ++i) {
      if (!sc.valid[i]) continue;
      slots[s].push_back(i);
      batch.origin.emplace_back(s, i);
      batch.types.push_back(sc.types[i]);
      batch.hard.push_back(sc.hard[i]);
    }
    const auto& sl = slots[s];
    std::vector<double> dense(sl.size() * sl.size());
    for (std::size_t a = 0; a < sl.size(); ++a)
      for (std::size_t b = 0; b < sl.size(); ++b) dense[a * sl.size() + b] = graphs[s]->at(sl[a], sl[b]);
    parts.push_back(AgentGraph::from_dense(sl.size(), dense));
  }
  const std::size_t N = batch.origin.size();
  if (N == 0) throw DataError("make_batch: no present agents");
  std::vector<double> input(th * N * c), future(tf * N * 2), anchor(N * 2), last(N * 2);
  for (std::size_t k = 0; k < N; ++k) {
    const auto [s, i] = batch.origin[k];
    const auto& sc = *scenes[s];
    const std::size_t n = sc.n();
    const auto v = sc.values.data();
    for (std::size_t t = 0; t < th; ++t)
      std::copy_n(&v[(t * n + i) * c], c, &input[(t * N + k) * c]);
    const auto f = sc.future.data();
    for (std::size_t t = 0; t < tf; ++t) {
      future[(t * N + k) * 2] = f[(t * n + i) * 2];
      future[(t * N + k) * 2 + 1] = f[(t * n + i) * 2 + 1];
    }
    anchor[2 * k] = sc.anchor[i].x;
    anchor[2 * k + 1] = sc.anchor[i].y;
    for (std::size_t d = 0; d < 2; ++d) {
      last[2 * k + d] = v[((th - 1) * n + i) * c + d] - v[((th - 2) * n + i) * c + d];
    }
  }
  batch.input = Tensor::from({th, N, c}, std::move(input));
  batch.future = Tensor::from({tf, N, 2}, std::move(future));
  batch.anchor = Tensor::from({N, 2}, std::move(anchor));
  batch.last_increment = Tensor::from({N, 2}, std::move(last));
  batch.graph = AgentGraph::block_diagonal(parts);
  return batch;
}

SceneBatch make_batch(const SceneTensor& scene, const FixedGraph& graph) {
  return make_batch(std::vector<const SceneTensor*>{&scene}, std::vector<const FixedGraph*>{&graph});
}

ParameterSet init_predictor(const PredictorConfig& cfg, Rng& rng) {
  cfg.validate();
  ParameterSet p;
  const std::size_t C = cfg.feature_channels;
  nn::add_linear(p, "tp.embed", cfg.channels(), C, rng);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    nn::add_linear(p, block(b) + ".mix", C, C, rng);
    nn::add_conv_time(p, block(b) + ".conv", cfg.kernel, C, C, rng);
    nn::add_batch_norm(p, block(b) + ".bn", C);
  }
  nn::add_recurrent(p, "tp.enc", encoder_spec(cfg), rng);
  nn::add_recurrent(p, "tp.dec", decoder_spec(cfg), rng);
  nn::add_linear(p, "tp.out", cfg.hidden, 2, rng);
  if (cfg.maneuvers > 0) {
    nn::add_linear(p, "tp.mhead.l0", C, cfg.hidden, rng);
    nn::add_linear(p, "tp.mhead.l1", cfg.hidden, cfg.maneuvers, rng);
  }
  return p;
}

Tensor encode_features(const SceneBatch& batch, ParameterSet& weights, const PredictorConfig& cfg,
                       Mode mode, const ForwardOptions& opts) {
  if (batch.input.ndim() != 3 || batch.input.dim(0) != cfg.history_len ||
      batch.input.dim(2) != cfg.channels()) {
    throw ShapeError("predictor: input " + shape_str(batch.input.shape()) + " does not match (" +
                     std::to_string(cfg.history_len) + ", N, " + std::to_string(cfg.channels()) +
                     ")");
  }
  const nn::Dropout drop{opts.dropout_rate, opts.dropout_rng};
  Tensor x = nn::dropout(nn::linear(weights, "tp.embed", batch.input), drop);
  const bool training = mode == Mode::Train;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    Tensor h = ops::graph_mix(x, batch.graph);
    h = nn::linear(weights, block(b) + ".mix", h);
    h = nn::conv_time(weights, block(b) + ".conv", h);
    h = nn::batch_norm(weights, block(b) + ".bn", h, training);
    x = ops::relu(h) + x;
  }
  return x;
}

PredictorOutput decode_trajectory(const SceneBatch& batch, const Tensor& feature,
                                  const ParameterSet& weights, const PredictorConfig& cfg,
                                  const Tensor* condition, const ForwardOptions& opts) {
  const std::size_t N = feature.dim(1);
  if ((condition != nullptr) != (cfg.maneuvers > 0) ||
      (condition && (condition->ndim() != 2 || condition->dim(0) != N ||
                     condition->dim(1) != cfg.maneuvers))) {
    throw ShapeError("predictor: maneuver condition must be (N, " + std::to_string(cfg.maneuvers) +
                     ") exactly when maneuvers > 0");
  }
  const nn::Dropout drop{opts.dropout_rate, opts.dropout_rng};
  const auto enc = encoder_spec(cfg);
  const auto dec = decoder_spec(cfg);
  nn::RecurrentState state = nn::zero_state(enc, N);
  nn::run_recurrent(weights, "tp.enc", enc, feature, state, drop);
  Tensor input = batch.last_increment;
  std::vector<Tensor> steps;
  for (std::size_t t = 0; t < cfg.future_len; ++t) {
    Tensor in = condition ? ops::concat({input, *condition}, 1) : input;
    Tensor h = nn::step_recurrent(weights, "tp.dec", dec, in, state, drop);
    input = nn::linear(weights, "tp.out", h);
    steps.push_back(input);
  }
  PredictorOutput out;
  out.feature = feature;
  out.increments = ops::scale(ops::stack(steps), 1.0 / cfg.position_scale);
  // anchor (N, 2) broadcast over time through a stack of copies
  std::vector<Tensor> anchors(cfg.future_len, batch.anchor);
  out.positions = ops::cumsum(out.increments, 0) + ops::stack(anchors);
  return out;
}

PredictorOutput predictor_forward(const SceneBatch& batch, ParameterSet& weights,
                                  const PredictorConfig& cfg, Mode mode,
                                  const ForwardOptions& opts) {
  if (cfg.maneuvers > 0) {
    throw UsageError("predictor_forward: maneuver-conditioned weights need mu_forward");
  }
  Tensor feature = encode_features(batch, weights, cfg, mode, opts);
  return decode_trajectory(batch, feature, weights, cfg, nullptr, opts);
}

ScenePrediction predictor_forward(const SceneTensor& scene, const FixedGraph& graph,
                                  ParameterSet& weights, const PredictorConfig& cfg, Mode mode) {
  const SceneBatch batch = make_batch(scene, graph);
  const PredictorOutput out = predictor_forward(batch, weights, cfg, mode);
  const std::size_t n = scene.n(), th = cfg.history_len, tf = cfg.future_len;
  const std::size_t C = cfg.feature_channels;
  std::vector<double> feat(C * th * n, 0.0), pos(n * tf * 2, 0.0);
  const auto f = out.feature.data();
  const auto p = out.positions.data();
  const std::size_t N = batch.agents();
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t i = batch.origin[k].second;
    for (std::size_t t = 0; t < th; ++t)
      for (std::size_t ch = 0; ch < C; ++ch) feat[(ch * th + t) * n + i] = f[(t * N + k) * C + ch];
    for (std::size_t t = 0; t < tf; ++t)
      for (std::size_t d = 0; d < 2; ++d) pos[(i * tf + t) * 2 + d] = p[(t * N + k) * 2 + d];
  }
  return {Tensor::from({C, th, n}, std::move(feat)), Tensor::from({n, tf, 2}, std::move(pos)),
          scene.valid};
}

Tensor tp_loss(const Tensor& pred, const Tensor& truth, const std::vector<bool>& valid) {
  if (pred.shape() != truth.shape() || pred.ndim() != 3 || pred.dim(2) != 2) {
    throw ShapeError("tp_loss: expected matching (t_f, N, 2) tensors, got " +
                     shape_str(pred.shape()) + " and " + shape_str(truth.shape()));
  }
  const std::size_t T = pred.dim(0), N = pred.dim(1);
  if (!valid.empty() && valid.size() != N) throw ShapeError("tp_loss: valid mask length mismatch");
  std::size_t count = 0;
  for (std::size_t i = 0; i < N; ++i) count += valid.empty() || valid[i];
  if (count == 0) throw DataError("tp_loss: no valid agents");
  std::vector<double> w(T * N, 0.0);
  const double share = 1.0 / static_cast<double>(count * T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      if (valid.empty() || valid[i]) w[t * N + i] = share;
  return ops::sum(ops::l2norm(pred - truth) * Tensor::from({T, N}, std::move(w)));
}

Tensor to_channel_major(const Tensor& tnc) {
  if (tnc.ndim() != 3) throw ShapeError("to_channel_major: expected (T, N, C)");
  const std::size_t T = tnc.dim(0), N = tnc.dim(1), C = tnc.dim(2);
  std::vector<double> out(T * N * C);
  const auto v = tnc.data();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < C; ++c) out[(c * T + t) * N + i] = v[(t * N + i) * C + c];
  return Tensor::from({C, T, N}, std::move(out));
}

Tensor to_agent_major(const Tensor& tnd) {
  if (tnd.ndim() != 3) throw ShapeError("to_agent_major: expected (T, N, D)");
  const std::size_t T = tnd.dim(0), N = tnd.dim(1), D = tnd.dim(2);
  std::vector<double> out(T * N * D);
  const auto v = tnd.data();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t d = 0; d < D; ++d) out[(i * T + t) * D + d] = v[(t * N + i) * D + d];
  return Tensor::from({N, T, D}, std::move(out));
}

}  // namespace satp
