#include <cmath>
#include <numeric>

#include "satp/error.hpp"
#include "satp/numerics/optim.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace satp {

namespace {

constexpr std::size_t kEvalChunk = 64;

using StepFn = std::function<Tensor(const std::vector<std::size_t>& idx, std::size_t epoch, std::size_t batch)>;
using ValFn = std::function<double()>;

struct Loop {
  std::string stage;
  StageConfig schedule;
  std::size_t n_train = 0;
  std::size_t batch_size = 32;
  Rng shuffle;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TrainResult run_loop(Loop loop, ParameterSet& w, const StepFn& step, const ValFn& val, Checkpoint ckpt,
                     const Logger& log) {
  if (loop.n_train == 0) throw DataError(loop.stage + ": no training samples");
  Adam opt;
  TrainResult result;
  double best = val();
  ParameterSet best_params = w;
  std::size_t best_epoch = 0;
  for (std::size_t e = 0; e < loop.schedule.epochs; ++e) {
    const double lr = steplr(e, loop.schedule.lr, loop.schedule.step_size, loop.schedule.gamma);
    std::vector<std::size_t> order(loop.n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng r = loop.shuffle.fork(static_cast<std::uint64_t>(e));
    r.shuffle(order);
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t b = 0, start = 0; start < order.size(); ++b, start += loop.batch_size) {
      const std::size_t end = std::min(order.size(), start + loop.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(end));
      w.zero_grad();
      Tensor loss = step(idx, e, b);
      const double v = loss.item();
      if (!std::isfinite(v)) {
        throw DivergenceError(loop.stage + ": non-finite loss at epoch " + std::to_string(e + 1) +
                              ", batch " + std::to_string(b + 1));
      }
      loss.backward();
      opt.step(w, lr);
      sum += v * static_cast<double>(idx.size());
      count += idx.size();
    }
    EpochLog entry{e + 1, lr, sum / static_cast<double>(count), val()};
    if (!std::isfinite(entry.val_loss)) {
      throw DivergenceError(loop.stage + ": non-finite validation loss at epoch " + std::to_string(e + 1));
    }
    result.log.push_back(entry);
    if (log) {
      log(loop.stage + " epoch " + std::to_string(e + 1) + "/" + std::to_string(loop.schedule.epochs) +
          " lr " + fmt("%.3g", lr) + " train " + fmt("%.5f", entry.train_loss) + " val " +
          fmt("%.5f", entry.val_loss));
    }
    if (entry.val_loss < best) {
      best = entry.val_loss;
      best_params = w;
      best_epoch = e + 1;
    }
  }
  ckpt.params = std::move(best_params);
  ckpt.epoch = best_epoch;
  ckpt.set_metric("val_loss", best);
  result.checkpoint = std::move(ckpt);
  return result;
}

Checkpoint blank(const char* stage, const TrainConfig& cfg, std::uint64_t digest) {
  Checkpoint c;
  c.stage = stage;
  c.seed = cfg.seed;
  c.config_digest = digest;
  return c;
}

std::vector<std::vector<std::size_t>> chunks(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += kEvalChunk) {
    std::vector<std::size_t> c(std::min(kEvalChunk, n - s));
    std::iota(c.begin(), c.end(), s);
    out.push_back(std::move(c));
  }
  return out;
}

// Agent-weighted mean of a per-batch loss over a scene set.
double mean_loss(const SceneSet& set, const std::function<double(const SceneBatch&)>& loss) {
  NoGradGuard guard;
  double sum = 0;
  std::size_t n = 0;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    sum += loss(b) * static_cast<double>(b.agents());
    n += b.agents();
  }
  return sum / static_cast<double>(n);
}

const SceneSet& validation_set(const Corpus& c) { return c.val.size() > 0 ? c.val : c.train; }

Tensor gather(const std::vector<Tensor>& per_scene, const std::vector<std::size_t>& idx) {
  std::vector<Tensor> parts;
  parts.reserve(idx.size());
  for (std::size_t i : idx) parts.push_back(per_scene.at(i));
  return parts.size() == 1 ? parts[0] : ops::concat(parts, 1);
}

std::vector<Tensor> make_labels(const SceneSet& set, const FrozenOutputs& frozen, const SaConfig& sa) {
  std::vector<Tensor> labels;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const SceneBatch b = set.batch({i});
    labels.push_back(error_labels(b.future, frozen.positions[i], b.anchor, sa.label_form, sa.rate_hz));
  }
  return labels;
}

double sa_mean_loss(const FrozenOutputs& f, const std::vector<Tensor>& labels, const ParameterSet& w,
                    const SaConfig& sa) {
  NoGradGuard guard;
  double sum = 0;
  std::size_t n = 0;
  for (const auto& c : chunks(f.size())) {
    const Tensor z = sa_forward(gather(f.feature, c), gather(f.increments, c), w, sa);
    const std::size_t agents = z.dim(1);
    sum += sa_loss(gather(labels, c), z).item() * static_cast<double>(agents);
    n += agents;
  }
  return sum / static_cast<double>(n);
}

ParameterSet load_predictor(const Checkpoint& ckpt, const TrainConfig& cfg, const std::string& stage) {
  if (ckpt.config_digest != predictor_digest(cfg)) {
    throw DataError(stage + ": predictor checkpoint was trained with different model settings (digest " +
                    hex64(ckpt.config_digest) + ", expected " + hex64(predictor_digest(cfg)) + ")");
  }
  return ckpt.params;
}

}  // namespace

FrozenOutputs run_frozen(const SceneSet& set, ParameterSet& predictor, const PredictorConfig& cfg) {
  NoGradGuard guard;
  FrozenOutputs f;
  for (const auto& c : chunks(set.size())) {
    const SceneBatch b = set.batch(c);
    const PredictorOutput out = predictor_forward(b, predictor, cfg, Mode::Eval);
    std::size_t start = 0;
    for (std::size_t i : c) {
      const auto& v = set.scenes[i].valid;
      const auto n = static_cast<std::size_t>(std::count(v.begin(), v.end(), true));
      f.feature.push_back(ops::slice(out.feature, 1, start, n));
      f.increments.push_back(ops::slice(out.increments, 1, start, n));
      f.positions.push_back(ops::slice(out.positions, 1, start, n));
      start += n;
    }
  }
  return f;
}

TrainResult train_stage1(const TrainConfig& cfg, const Corpus& corpus, const Logger& log) {
  cfg.validate();
  const Rng base = Rng(cfg.seed).fork("stage1");
  Rng init = base.fork("init");
  ParameterSet w = init_predictor(cfg.predictor, init);
  const auto& pc = cfg.predictor;
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t, std::size_t) {
    const SceneBatch b = corpus.train.batch(idx);
    return tp_loss(predictor_forward(b, w, pc, Mode::Train).positions, b.future);
  };
  auto val = [&] {
    return mean_loss(validation_set(corpus), [&](const SceneBatch& b) {
      return tp_loss(predictor_forward(b, w, pc, Mode::Eval).positions, b.future).item();
    });
  };
  return run_loop({"stage 1", cfg.stage1, corpus.train.size(), cfg.batch_size, base.fork("shuffle")}, w, step,
                  val, blank(kStagePredictor, cfg, predictor_digest(cfg)), log);
}

TrainResult train_selfaware_cached(const TrainConfig& cfg, const Corpus& corpus, const FrozenOutputs& train,
                                   const FrozenOutputs& val, const Logger& log) {
  cfg.validate();
  const SceneSet& vset = validation_set(corpus);
  if (train.size() != corpus.train.size() || val.size() != vset.size()) {
    throw UsageError("stage 2: cached predictor outputs do not match the corpus");
  }
  const auto train_labels = make_labels(corpus.train, train, cfg.selfaware);
  const auto val_labels = make_labels(vset, val, cfg.selfaware);

  const Rng base = Rng(cfg.seed).fork("stage2");
  Rng init = base.fork("init");
  ParameterSet w = init_selfaware(cfg.selfaware, init);
  const auto& sa = cfg.selfaware;
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t, std::size_t) {
    const Tensor z = sa_forward(gather(train.feature, idx), gather(train.increments, idx), w, sa);
    return sa_loss(gather(train_labels, idx), z);
  };
  auto vfn = [&] { return sa_mean_loss(val, val_labels, w, sa); };
  return run_loop({"stage 2", cfg.stage2, corpus.train.size(), cfg.batch_size, base.fork("shuffle")}, w, step, vfn,
                  blank(kStageSelfaware, cfg, selfaware_digest(cfg)), log);
}

TrainResult train_stage2(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                         const Logger& log) {
  cfg.validate();
  ParameterSet frozen = load_predictor(predictor, cfg, "stage 2");
  frozen.freeze();
  const std::uint64_t before = frozen.digest();

  const FrozenOutputs train = run_frozen(corpus.train, frozen, cfg.predictor);
  const FrozenOutputs val = run_frozen(validation_set(corpus), frozen, cfg.predictor);
  TrainResult r = train_selfaware_cached(cfg, corpus, train, val, log);
  r.checkpoint.metadata["predictor_params"] = hex64(before);
  if (frozen.digest() != before) throw Error("stage 2: the frozen predictor was modified");
  return r;
}

Tensor joint_loss(const Tensor& tp, const Tensor& sa, double lambda) { return tp + ops::scale(sa, lambda); }

TrainResult train_joint(const TrainConfig& cfg, const Corpus& corpus, const Logger& log) {
  cfg.validate();
  const Rng base = Rng(cfg.seed).fork("joint");
  Rng init = base.fork("init");
  ParameterSet w = init_predictor(cfg.predictor, init);
  w.merge("", init_selfaware(cfg.selfaware, init));
  const auto& pc = cfg.predictor;
  const auto& sa = cfg.selfaware;
  auto loss_of = [&](const SceneBatch& b, Mode mode) {
    const PredictorOutput out = predictor_forward(b, w, pc, mode);
    const Tensor labels = error_labels(b.future, out.positions, b.anchor, sa.label_form, sa.rate_hz);
    const Tensor z = sa_forward(out.feature, out.increments, w, sa, false);
    return joint_loss(tp_loss(out.positions, b.future), sa_loss(labels, z), cfg.lambda);
  };
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t, std::size_t) {
    return loss_of(corpus.train.batch(idx), Mode::Train);
  };
  auto val = [&] {
    return mean_loss(validation_set(corpus), [&](const SceneBatch& b) { return loss_of(b, Mode::Eval).item(); });
  };
  return run_loop({"joint", cfg.joint, corpus.train.size(), cfg.batch_size, base.fork("shuffle")}, w, step, val,
                  blank(kStageJoint, cfg, selfaware_digest(cfg)), log);
}

PredictorConfig mu_predictor_config(const TrainConfig& cfg) {
  PredictorConfig p = cfg.predictor;
  p.maneuvers = kManeuvers;
  return p;
}

TrainResult train_mu(const TrainConfig& cfg, const Corpus& corpus, const Logger& log) {
  cfg.validate();
  const Rng base = Rng(cfg.seed).fork("mu");
  Rng init = base.fork("init");
  const PredictorConfig pc = mu_predictor_config(cfg);
  ParameterSet w = init_predictor(pc, init);
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t, std::size_t) {
    return mu_loss(corpus.train.batch(idx), w, pc, Mode::Train, cfg.mu_ce_weight).total;
  };
  auto val = [&] {
    return mean_loss(validation_set(corpus), [&](const SceneBatch& b) {
      return mu_loss(b, w, pc, Mode::Eval, cfg.mu_ce_weight).total.item();
    });
  };
  return run_loop({"mu", cfg.baseline, corpus.train.size(), cfg.batch_size, base.fork("shuffle")}, w, step, val,
                  blank(kStageMu, cfg, predictor_digest(cfg)), log);
}

TrainResult train_dropout(const TrainConfig& cfg, const Corpus& corpus, const Logger& log) {
  cfg.validate();
  const Rng base = Rng(cfg.seed).fork("dropout");
  Rng init = base.fork("init");
  ParameterSet w = init_predictor(cfg.predictor, init);
  const auto& pc = cfg.predictor;
  const Rng masks = base.fork("masks");
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t e, std::size_t b) {
    Rng r = masks.fork(static_cast<std::uint64_t>(e)).fork(static_cast<std::uint64_t>(b));
    const SceneBatch batch = corpus.train.batch(idx);
    return tp_loss(predictor_forward(batch, w, pc, Mode::Train, {&r, cfg.dropout_rate}).positions, batch.future);
  };
  auto val = [&] {
    return mean_loss(validation_set(corpus), [&](const SceneBatch& b) {
      return tp_loss(predictor_forward(b, w, pc, Mode::Eval).positions, b.future).item();
    });
  };
  return run_loop({"dropout", cfg.baseline, corpus.train.size(), cfg.batch_size, base.fork("shuffle")}, w, step,
                  val, blank(kStageDropout, cfg, predictor_digest(cfg)), log);
}

TrainResult train_ensemble_member(const TrainConfig& cfg, const Corpus& corpus, std::size_t member,
                                  const Logger& log) {
  cfg.validate();
  // own initialization and shuffle order per member
  const Rng base = Rng(cfg.seed).fork("ensemble").fork(static_cast<std::uint64_t>(member));
  Rng init = base.fork("init");
  ParameterSet w = init_predictor(cfg.predictor, init);
  const auto& pc = cfg.predictor;
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t, std::size_t) {
    const SceneBatch b = corpus.train.batch(idx);
    return tp_loss(predictor_forward(b, w, pc, Mode::Train).positions, b.future);
  };
  auto val = [&] {
    return mean_loss(validation_set(corpus), [&](const SceneBatch& b) {
      return tp_loss(predictor_forward(b, w, pc, Mode::Eval).positions, b.future).item();
    });
  };
  Checkpoint ckpt = blank(kStageEnsemble, cfg, predictor_digest(cfg));
  ckpt.metadata["member"] = std::to_string(member);
  return run_loop({"ensemble member " + std::to_string(member), cfg.baseline, corpus.train.size(), cfg.batch_size,
                   base.fork("shuffle")},
                  w, step, val, std::move(ckpt), log);
}

TrainResult train_ae(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                     const Logger& log) {
  cfg.validate();
  ParameterSet frozen = load_predictor(predictor, cfg, "autoencoder");
  frozen.freeze();
  const std::uint64_t before = frozen.digest();
  const SceneSet& vset = validation_set(corpus);
  const FrozenOutputs train = run_frozen(corpus.train, frozen, cfg.predictor);
  const FrozenOutputs val = run_frozen(vset, frozen, cfg.predictor);
  const double scale = cfg.predictor.position_scale;
  auto targets = [&](const SceneSet& set) {
    std::vector<Tensor> t;
    for (std::size_t i = 0; i < set.size(); ++i) t.push_back(history_offsets(set.batch({i}), scale));
    return t;
  };
  const auto train_t = targets(corpus.train);
  const auto val_t = targets(vset);

  const AeConfig ac = cfg.ae();
  const Rng base = Rng(cfg.seed).fork("ae");
  Rng init = base.fork("init");
  ParameterSet w = init_ae(ac, init);
  auto step = [&](const std::vector<std::size_t>& idx, std::size_t, std::size_t) {
    return tp_loss(ae_reconstruct(gather(train.feature, idx), w, ac), gather(train_t, idx));
  };
  auto vfn = [&] {
    NoGradGuard guard;
    double sum = 0;
    std::size_t n = 0;
    for (const auto& c : chunks(val.size())) {
      const Tensor truth = gather(val_t, c);
      sum += tp_loss(ae_reconstruct(gather(val.feature, c), w, ac), truth).item() * static_cast<double>(truth.dim(1));
      n += truth.dim(1);
    }
    return sum / static_cast<double>(n);
  };
  TrainResult r = run_loop({"autoencoder", cfg.baseline, corpus.train.size(), cfg.batch_size, base.fork("shuffle")},
                           w, step, vfn, blank(kStageAe, cfg, predictor_digest(cfg)), log);
  if (frozen.digest() != before) throw Error("autoencoder: the frozen predictor was modified");
  return r;
}

BaselineSet train_baselines(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                            const Logger& log) {
  BaselineSet s;
  s.mu = train_mu(cfg, corpus, log).checkpoint;
  s.dropout = train_dropout(cfg, corpus, log).checkpoint;
  for (std::size_t m = 0; m < cfg.ensemble_members; ++m) {
    s.ensemble.push_back(train_ensemble_member(cfg, corpus, m, log).checkpoint);
  }
  s.ae = train_ae(cfg, corpus, predictor, log).checkpoint;
  return s;
}

}  // namespace satp
