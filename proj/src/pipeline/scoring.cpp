#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "satp/error.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace satp {

namespace {

constexpr std::size_t kChunk = 64;

std::vector<std::vector<std::size_t>> chunks(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += kChunk) {
    std::vector<std::size_t> c(std::min(kChunk, n - s));
    std::iota(c.begin(), c.end(), s);
    out.push_back(std::move(c));
  }
  return out;
}

// Appends per-agent results for one batch. diag_steps (t_f, N) may be empty.
void append(ScoredSet& out, const SceneBatch& b, const Tensor& positions, const std::vector<double>& diag_ade,
            const std::vector<double>& diag_fde, const std::vector<std::vector<double>>& diag_steps) {
  const std::size_t T = positions.dim(0), N = positions.dim(1);
  const auto p = positions.data();
  const auto f = b.future.data();
  if (out.step_errors.empty()) out.step_errors.resize(T);
  if (!diag_steps.empty() && out.step_diag.empty()) out.step_diag.resize(T);
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> steps(T);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t k = (t * N + i) * 2;
      steps[t] = std::hypot(p[k] - f[k], p[k + 1] - f[k + 1]);
      out.step_errors[t].push_back(steps[t]);
      if (!diag_steps.empty()) out.step_diag[t].push_back(diag_steps[t][i]);
    }
    out.samples.push_back(make_scored(std::move(steps), diag_ade[i], diag_fde[i], b.types[i], b.hard[i]));
  }
}

std::vector<std::vector<double>> entropy_steps(const SampleBundle& bundle) {
  const std::size_t T = bundle.members.at(0).dim(0), N = bundle.agents();
  std::vector<std::vector<double>> h(T, std::vector<double>(N));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i) h[t][i] = predictive_entropy(bundle, i, t);
  return h;
}

// Norm of each per-step estimate, (t_f, N).
std::vector<std::vector<double>> sa_steps(const Tensor& z) {
  const std::size_t T = z.dim(0), N = z.dim(1), D = z.dim(2);
  const auto v = z.data();
  std::vector<std::vector<double>> out(T, std::vector<double>(N));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i) {
      double sq = 0;
      for (std::size_t d = 0; d < D; ++d) sq += v[(t * N + i) * D + d] * v[(t * N + i) * D + d];
      out[t][i] = D == 1 ? std::fabs(v[(t * N + i) * D]) : std::sqrt(sq);
    }
  return out;
}

Tensor gather(const std::vector<Tensor>& per_scene, const std::vector<std::size_t>& idx) {
  std::vector<Tensor> parts;
  for (std::size_t i : idx) parts.push_back(per_scene.at(i));
  return parts.size() == 1 ? parts[0] : ops::concat(parts, 1);
}

const Checkpoint& need(const std::optional<Checkpoint>& c, const std::string& method, const char* what) {
  if (!c) throw DataError("evaluate: method '" + method + "' needs a " + what + " checkpoint");
  return *c;
}

void check_stage(const Checkpoint& c, std::initializer_list<const char*> stages, const std::string& method) {
  for (const char* s : stages)
    if (c.stage == s) return;
  throw DataError("evaluate: method '" + method + "' cannot use a '" + c.stage + "' checkpoint");
}

// Learnable scalars across sets, counting a name shared by two sets once.
std::size_t union_count(const std::vector<const ParameterSet*>& parts) {
  std::set<std::string> seen;
  std::size_t n = 0;
  for (const auto* p : parts)
    for (const auto& [name, t] : p->parameters())
      if (seen.insert(name).second) n += t.numel();
  return n;
}

// Loaded networks for one method.
struct Loaded {
  ParameterSet primary;
  ParameterSet secondary;
  std::vector<ParameterSet> members;
  std::size_t parameters = 0;
};

Loaded load_models(const std::string& method, const ModelBundle& m, const TrainConfig& cfg) {
  Loaded l;
  const std::uint64_t pd = predictor_digest(cfg);
  auto check_digest = [&](const Checkpoint& c, std::uint64_t want) {
    if (c.config_digest != want) {
      throw DataError("evaluate: '" + c.stage + "' checkpoint digest " + hex64(c.config_digest) +
                      " does not match the configuration (" + hex64(want) + ")");
    }
  };
  if (method == "ours") {
    const auto& p = need(m.predictor, method, "predictor");
    const auto& s = need(m.selfaware, method, "self-awareness");
    check_stage(p, {kStagePredictor, kStageJoint}, method);
    check_stage(s, {kStageSelfaware, kStageJoint}, method);
    check_digest(p, p.stage == std::string(kStageJoint) ? selfaware_digest(cfg) : pd);
    check_digest(s, selfaware_digest(cfg));
    l.primary = p.params;
    l.secondary = s.params;
    l.parameters = union_count({&l.primary, &l.secondary});
  } else if (method == "mu") {
    const auto& c = need(m.mu, method, "mu");
    check_stage(c, {kStageMu}, method);
    check_digest(c, pd);
    l.primary = c.params;
    l.parameters = count_parameters({&l.primary});
  } else if (method == "mc_dropout") {
    const auto& c = need(m.dropout, method, "dropout");
    check_stage(c, {kStageDropout}, method);
    check_digest(c, pd);
    l.primary = c.params;
    l.parameters = count_parameters({&l.primary});
  } else if (method == "ensemble") {
    if (m.ensemble.size() != cfg.ensemble_members) {
      throw DataError("evaluate: method 'ensemble' needs " + std::to_string(cfg.ensemble_members) +
                      " member checkpoints, got " + std::to_string(m.ensemble.size()));
    }
    std::vector<const ParameterSet*> ptrs;
    for (const auto& c : m.ensemble) {
      check_stage(c, {kStageEnsemble}, method);
      check_digest(c, pd);
      l.members.push_back(c.params);
    }
    for (const auto& p : l.members) ptrs.push_back(&p);
    l.parameters = count_parameters(ptrs);
  } else if (method == "ae") {
    const auto& p = need(m.predictor, method, "predictor");
    const auto& a = need(m.ae, method, "autoencoder");
    check_stage(p, {kStagePredictor}, method);
    check_stage(a, {kStageAe}, method);
    check_digest(p, pd);
    check_digest(a, pd);
    l.primary = p.params;
    l.secondary = a.params;
    l.parameters = union_count({&l.primary, &l.secondary});
  } else {
    throw UsageError("evaluate: unknown method '" + method + "'");
  }
  return l;
}

}  // namespace

ScoredSet score_selfaware_cached(const SceneSet& set, const FrozenOutputs& frozen, const ParameterSet& sa,
                                 const TrainConfig& cfg) {
  if (frozen.size() != set.size()) throw UsageError("score: cached outputs do not match the scene set");
  NoGradGuard guard;
  ScoredSet out;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    const Tensor z = sa_forward(gather(frozen.feature, c), gather(frozen.increments, c), sa, cfg.selfaware);
    auto [ade, fde] = integrate_diagnostics(z);
    append(out, b, gather(frozen.positions, c), ade, fde, sa_steps(z));
    out.sa_values.insert(out.sa_values.end(), z.values().begin(), z.values().end());
  }
  return out;
}

ScoredSet score_selfaware(const SceneSet& set, ParameterSet& predictor, const ParameterSet& sa,
                          const TrainConfig& cfg) {
  return score_selfaware_cached(set, run_frozen(set, predictor, cfg.predictor), sa, cfg);
}

ScoredSet score_mu(const SceneSet& set, ParameterSet& mu, const TrainConfig& cfg) {
  const PredictorConfig pc = mu_predictor_config(cfg);
  ScoredSet out;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    const MuOutput m = mu_forward(b, mu, pc);
    const auto d = nmap(m.probabilities);
    append(out, b, m.point, d, d, {});
  }
  return out;
}

ScoredSet score_mc_dropout(const SceneSet& set, ParameterSet& dropout, const TrainConfig& cfg) {
  const Rng base = Rng(cfg.seed).fork("mc-eval");
  ScoredSet out;
  std::uint64_t k = 0;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    const SampleBundle bundle =
        mc_dropout_predict(b, dropout, cfg.predictor, cfg.dropout_rate, cfg.mc_samples, base.fork(k++));
    auto [ape, fpe] = ape_fpe(bundle);
    append(out, b, bundle.average(), ape, fpe, entropy_steps(bundle));
  }
  return out;
}

ScoredSet score_ensemble(const SceneSet& set, std::vector<ParameterSet>& members, const TrainConfig& cfg) {
  ScoredSet out;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    const SampleBundle bundle = ensemble_predict(b, members, cfg.predictor, members.size());
    auto [ape, fpe] = ape_fpe(bundle);
    append(out, b, bundle.average(), ape, fpe, entropy_steps(bundle));
  }
  return out;
}

ScoredSet score_ae(const SceneSet& set, ParameterSet& predictor, const ParameterSet& ae, const TrainConfig& cfg) {
  NoGradGuard guard;
  const AeConfig ac = cfg.ae();
  ScoredSet out;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    const PredictorOutput p = predictor_forward(b, predictor, cfg.predictor, Mode::Eval);
    const auto err = reconstruction_error(ae_reconstruct(p.feature, ae, ac),
                                          history_offsets(b, cfg.predictor.position_scale));
    append(out, b, p.positions, err, err, {});
  }
  return out;
}

EvalReport make_report(const std::string& method, const std::string& dataset, const ScoredSet& scored,
                       std::size_t total_parameters, std::optional<double> ms_per_frame,
                       const TrainConfig& cfg) {
  if (scored.samples.size() < 2) throw DataError("evaluate: fewer than two scored agents");
  const auto grid = cfg.grid();
  std::vector<double> ade, fde, dade, dfde;
  for (const auto& s : scored.samples) {
    ade.push_back(s.ade);
    fde.push_back(s.fde);
    dade.push_back(s.diag_ade);
    dfde.push_back(s.diag_fde);
  }
  EvalReport r;
  r.method = method;
  r.dataset = dataset;
  r.samples = ade.size();
  r.mean_ade = std::accumulate(ade.begin(), ade.end(), 0.0) / static_cast<double>(ade.size());
  r.mean_fde = std::accumulate(fde.begin(), fde.end(), 0.0) / static_cast<double>(fde.size());
  r.ade = sas_detail(ade, dade, grid);
  r.fde = sas_detail(fde, dfde, grid);
  if (!scored.step_diag.empty()) r.per_moment = per_moment_report(scored.step_errors, scored.step_diag, grid);
  r.per_type = per_type_report(scored.samples, grid);
  r.total_parameters = total_parameters;
  r.avg_ms_per_frame = ms_per_frame;
  r.seed = cfg.seed;
  r.config_digest = config_digest(cfg);
  r.curve_ade = cutoff_curve(ade, dade, grid);
  r.curve_fde = cutoff_curve(fde, dfde, grid);
  return r;
}

EvalReport evaluate_method(const std::string& method, const Corpus& corpus, const ModelBundle& models,
                           const TrainConfig& cfg) {
  cfg.validate();
  Loaded l = load_models(method, models, cfg);
  ScoredSet s;
  if (method == "ours") {
    s = score_selfaware(corpus.test, l.primary, l.secondary, cfg);
  } else if (method == "mu") {
    s = score_mu(corpus.test, l.primary, cfg);
  } else if (method == "mc_dropout") {
    s = score_mc_dropout(corpus.test, l.primary, cfg);
  } else if (method == "ensemble") {
    s = score_ensemble(corpus.test, l.members, cfg);
  } else {
    s = score_ae(corpus.test, l.primary, l.secondary, cfg);
  }
  std::optional<double> ms;
  if (cfg.eval.measure_timing) ms = time_method(method, corpus, models, cfg);
  return make_report(method, corpus.name, s, l.parameters, ms, cfg);
}

double time_method(const std::string& method, const Corpus& corpus, const ModelBundle& models,
                   const TrainConfig& cfg) {
  Loaded l = load_models(method, models, cfg);
  if (corpus.test.size() == 0) throw DataError("timing: no test scenes");
  std::vector<SceneBatch> frames;
  for (std::size_t i = 0; i < corpus.test.size(); ++i) frames.push_back(corpus.test.batch({i}));
  const Rng base = Rng(cfg.seed).fork("timing");
  std::function<void(std::size_t)> frame;
  const PredictorConfig& pc = cfg.predictor;
  if (method == "ours") {
    frame = [&](std::size_t k) {
      NoGradGuard guard;
      const auto& b = frames[k % frames.size()];
      const PredictorOutput p = predictor_forward(b, l.primary, pc, Mode::Eval);
      integrate_diagnostics(sa_forward(p.feature, p.increments, l.secondary, cfg.selfaware));
    };
  } else if (method == "mu") {
    const PredictorConfig mc = mu_predictor_config(cfg);
    frame = [&, mc](std::size_t k) { nmap(mu_forward(frames[k % frames.size()], l.primary, mc).probabilities); };
  } else if (method == "mc_dropout") {
    frame = [&](std::size_t k) {
      ape_fpe(mc_dropout_predict(frames[k % frames.size()], l.primary, pc, cfg.dropout_rate, cfg.mc_samples,
                                 base.fork(static_cast<std::uint64_t>(k))));
    };
  } else if (method == "ensemble") {
    frame = [&](std::size_t k) {
      ape_fpe(ensemble_predict(frames[k % frames.size()], l.members, pc, l.members.size()));
    };
  } else {
    const AeConfig ac = cfg.ae();
    frame = [&, ac](std::size_t k) {
      NoGradGuard guard;
      const auto& b = frames[k % frames.size()];
      const PredictorOutput p = predictor_forward(b, l.primary, pc, Mode::Eval);
      reconstruction_error(ae_reconstruct(p.feature, l.secondary, ac), history_offsets(b, pc.position_scale));
    };
  }
  return time_per_frame(frame, cfg.eval.timing_frames, cfg.eval.timing_warmup);
}

}  // namespace satp
