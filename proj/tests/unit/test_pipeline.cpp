#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "satp/error.hpp"
#include "satp/pipeline/pipeline.hpp"

using namespace satp;

namespace {

// Tiny synthetic setup shared by the structural tests.
TrainConfig tiny_config() {
  TrainConfig c;
  c.seed = 3;
  c.generator.seed = 3;
  c.generator.records = 4;
  c.generator.duration_s = 16;
  c.generator.agents_per_record = 10;
  c.data.stride = 3;
  c.data.train_fraction = 0.5;
  c.predictor.feature_channels = 6;
  c.predictor.hidden = 6;
  c.predictor.blocks = 1;
  c.predictor.n_max = 8;
  c.selfaware.hidden = 6;
  c.stage1.epochs = 2;
  c.stage2.epochs = 2;
  c.joint.epochs = 1;
  c.baseline.epochs = 1;
  c.ensemble_members = 2;
  c.mc_samples = 2;
  c.batch_size = 8;
  c.sync();
  return c;
}

// Noiseless constant-velocity agents moving straight in varied directions.
std::vector<Record> cv_records(std::size_t records, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Record> out;
  for (std::size_t r = 0; r < records; ++r) {
    Record rec;
    char id[16];
    std::snprintf(id, sizeof id, "cv%03zu", r);
    rec.record_id = id;
    for (std::int64_t a = 0; a < 6; ++a) {
      Track t;
      t.track_id = a + 1;
      t.type = kAgentTypes[static_cast<std::size_t>(a) % 4];
      const double th = rng.uniform(0, 2 * M_PI);
      const double speed = rng.uniform(0.5, 6.0);  // metres per 0.5 s step
      const double x0 = rng.uniform(-40, 40), y0 = rng.uniform(-40, 40);
      for (std::int64_t f = 0; f < 30; ++f) {
        t.points.push_back({f, 0.5 * static_cast<double>(f), x0 + std::cos(th) * speed * static_cast<double>(f),
                            y0 + std::sin(th) * speed * static_cast<double>(f)});
      }
      rec.tracks.push_back(std::move(t));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("satp_test_" + name);
}

}  // namespace

TEST_CASE("config: print round-trip and unknown keys") {
  TrainConfig c = tiny_config();
  c.eval.grid = {0, 0.1, 0.5};
  c.selfaware.fusion = Fusion::Add;
  const std::string text = to_toml(c);
  const TrainConfig back = parse_config(text);
  CHECK(to_toml(back) == text);
  CHECK(config_digest(back) == config_digest(c));
  CHECK(to_toml(parse_config(to_toml(TrainConfig{}))) == to_toml(TrainConfig{}));

  CHECK_THROWS_AS(parse_config("seed = 1\nbogus = 2\n"), UsageError);
  CHECK_THROWS_AS(parse_config("[model]\nwidth = 3\n"), UsageError);
  CHECK_THROWS_AS(parse_config("[train.stage1]\nepochs = \"ten\"\n"), UsageError);
  CHECK_THROWS_AS(parse_config("[selfaware]\nfusion = \"sum\"\n"), UsageError);
  CHECK_THROWS_AS(parse_config("seed = [\n"), UsageError);
  CHECK(parse_config("[model]\nhidden = 12\n").predictor.hidden == 12);
}

TEST_CASE("config digests separate model sections") {
  TrainConfig a = tiny_config();
  TrainConfig b = a;
  b.stage2.epochs = 9;
  CHECK(predictor_digest(a) == predictor_digest(b));
  CHECK(selfaware_digest(a) == selfaware_digest(b));
  CHECK(config_digest(a) != config_digest(b));
  b.selfaware.estimator = Estimator::Mlp;
  CHECK(predictor_digest(a) == predictor_digest(b));
  CHECK(selfaware_digest(a) != selfaware_digest(b));
  b.out = "elsewhere";
  TrainConfig c = b;
  c.out = "x";
  CHECK(config_digest(b) == config_digest(c));
}

TEST_CASE("checkpoint: bit-exact round-trip and corruption") {
  Checkpoint c;
  c.stage = "predictor";
  c.seed = 42;
  c.epoch = 7;
  c.config_digest = 0xdeadbeefcafef00dull;
  c.set_metric("val_loss", 0.1);
  c.params.add("a.weight", Tensor::from({2, 3}, {1e-300, -0.0, 3.14159, 1.0 / 3.0, -2e10, 5}));
  c.params.add("b", Tensor::from({1}, {std::nextafter(1.0, 2.0)}));
  c.params.add_buffer("bn.mean", Tensor::from({2}, {0.25, -7}));
  const auto path = temp_file("ckpt.bin").string();
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path, c.config_digest);
  CHECK(back.stage == "predictor");
  CHECK(back.seed == 42);
  CHECK(back.epoch == 7);
  CHECK(*back.metric("val_loss") == 0.1);
  CHECK(back.params.digest() == c.params.digest());
  CHECK(serialize(back) == serialize(c));
  CHECK(std::signbit(back.params.get("a.weight").data()[1]));

  CHECK_THROWS_AS(load_checkpoint(path, 1), DataError);
  CHECK_NOTHROW(load_checkpoint(path, 1, true));
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.bin").string()), DataError);
  auto bytes = serialize(c);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize(truncated), DataError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize(bad), DataError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize(trailing), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("corpus: record-level split and validation carve-out") {
  const TrainConfig c = tiny_config();
  const Corpus corpus = prepare_corpus(c);
  CHECK(corpus.train_records.size() == 2);
  CHECK(corpus.test_records.size() == 2);
  for (const auto& r : corpus.train_records)
    for (const auto& t : corpus.test_records) CHECK(r != t);
  const std::size_t n = corpus.train.size() + corpus.val.size();
  CHECK(corpus.val.size() == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  CHECK(corpus.test.size() > 0);
}

TEST_CASE("stage 1: zero epochs keeps the initialization, runs are deterministic") {
  TrainConfig c = tiny_config();
  const Corpus corpus = prepare_corpus(c);
  c.stage1.epochs = 0;
  const auto init = train_stage1(c, corpus).checkpoint;
  Rng rng = Rng(c.seed).fork("stage1").fork("init");
  CHECK(init.params.digest() == init_predictor(c.predictor, rng).digest());
  CHECK(init.epoch == 0);

  c.stage1.epochs = 2;
  const auto a = train_stage1(c, corpus);
  const auto b = train_stage1(c, corpus);
  CHECK(serialize(a.checkpoint) == serialize(b.checkpoint));
  CHECK(a.log.size() == 2);
  CHECK(a.checkpoint.params.digest() != init.params.digest());
}

TEST_CASE("stage 1 learns constant velocity") {
  TrainConfig c = tiny_config();
  c.predictor.feature_channels = 16;
  c.predictor.hidden = 16;
  c.predictor.blocks = 2;
  c.selfaware.hidden = 8;
  c.data.stride = 1;
  c.data.train_fraction = 0.75;
  c.stage1.epochs = 50;
  c.stage1.lr = 2e-2;
  c.stage1.step_size = 7;
  c.batch_size = 4;
  c.sync();
  const Corpus corpus = build_corpus(cv_records(8, 5), c, "cv");
  const auto r = train_stage1(c, corpus);
  CHECK(*r.checkpoint.metric("val_loss") < 0.1);
}

TEST_CASE("stage 2 leaves the predictor bit-identical and supports transfer") {
  TrainConfig c = tiny_config();
  const Corpus corpus = prepare_corpus(c);
  const Checkpoint p = train_stage1(c, corpus).checkpoint;
  const auto before = p.params.digest();
  ParameterSet w = p.params;
  const double tp_before = tp_loss(predictor_forward(corpus.test.all(), w, c.predictor, Mode::Eval).positions,
                                   corpus.test.all().future)
                               .item();
  const Checkpoint s = train_stage2(c, corpus, p).checkpoint;
  CHECK(s.config_digest == selfaware_digest(c));
  CHECK(p.params.digest() == before);
  ParameterSet w2 = p.params;
  const double tp_after = tp_loss(predictor_forward(corpus.test.all(), w2, c.predictor, Mode::Eval).positions,
                                  corpus.test.all().future)
                              .item();
  CHECK(tp_after == tp_before);

  // another predictor of identical dims
  TrainConfig c2 = c;
  c2.seed = 99;
  const Checkpoint other = train_stage1(c2, corpus).checkpoint;
  CHECK_NOTHROW(train_stage2(c, corpus, other));

  TrainConfig wider = c;
  wider.predictor.hidden = 7;
  wider.sync();
  CHECK_THROWS_AS(train_stage2(wider, corpus, p), DataError);
}

TEST_CASE("stage 2 learns a zero error label") {
  TrainConfig c = tiny_config();
  c.stage2.epochs = 40;
  c.stage2.lr = 1e-2;
  c.stage2.step_size = 10;
  c.batch_size = 4;
  const Corpus corpus = prepare_corpus(c);
  // predictor outputs that coincide with the truth make every label zero
  auto perfect = [&](const SceneSet& set) {
    FrozenOutputs f;
    Rng rng(17);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const SceneBatch b = set.batch({i});
      const std::size_t n = b.agents();
      std::vector<double> feat(c.predictor.history_len * n * c.predictor.feature_channels);
      for (auto& x : feat) x = rng.normal();
      std::vector<double> inc(c.predictor.future_len * n * 2);
      for (auto& x : inc) x = rng.normal();
      f.feature.push_back(Tensor::from({c.predictor.history_len, n, c.predictor.feature_channels}, feat));
      f.increments.push_back(Tensor::from({c.predictor.future_len, n, 2}, inc));
      f.positions.push_back(b.future);
    }
    return f;
  };
  const auto r = train_selfaware_cached(c, corpus, perfect(corpus.train), perfect(corpus.val));
  const auto scored = score_selfaware_cached(corpus.test, perfect(corpus.test), r.checkpoint.params, c);
  double mean = 0;
  for (double v : scored.sa_values) mean += v / static_cast<double>(scored.sa_values.size());
  CHECK(mean < 0.05);
  for (double v : scored.sa_values) CHECK(v >= 0.0);
}

TEST_CASE("joint loss weighting and decoupling") {
  CHECK(joint_loss(Tensor::scalar(1.0), Tensor::scalar(2.0), 0.1).item() == doctest::Approx(1.2));

  TrainConfig c = tiny_config();
  const Corpus corpus = prepare_corpus(c);
  Rng rng(1);
  ParameterSet w = init_predictor(c.predictor, rng);
  w.merge("", init_selfaware(c.selfaware, rng));
  const SceneBatch b = corpus.train.batch({0, 1});
  const PredictorOutput out = predictor_forward(b, w, c.predictor, Mode::Train);
  const Tensor labels = error_labels(b.future, out.positions, b.anchor, c.selfaware.label_form);
  const Tensor z = sa_forward(out.feature, out.increments, w, c.selfaware, false);
  joint_loss(tp_loss(out.positions, b.future), sa_loss(labels, z), 0.0).backward();
  for (const auto& [name, t] : w.parameters()) {
    if (name.rfind("sa.", 0) != 0) continue;
    for (double g : t.grad()) CHECK(g == 0.0);
  }

  const auto j = train_joint(c, corpus);
  CHECK(j.checkpoint.params.contains("tp.embed.weight"));
  CHECK(j.checkpoint.params.contains("sa.readout.weight"));
}

TEST_CASE("baselines: ensemble members differ, autoencoder keeps the predictor") {
  TrainConfig c = tiny_config();
  const Corpus corpus = prepare_corpus(c);
  const Checkpoint p = train_stage1(c, corpus).checkpoint;
  const auto before = p.params.digest();
  const BaselineSet s = train_baselines(c, corpus, p);
  REQUIRE(s.ensemble.size() == 2);
  CHECK(s.ensemble[0].params.digest() != s.ensemble[1].params.digest());
  CHECK(p.params.digest() == before);
  CHECK(s.mu.params.contains("tp.mhead.l1.weight"));
  CHECK(s.ae.params.contains("ae.out.weight"));
}

TEST_CASE("MU classifier separates a straight-only corpus") {
  TrainConfig c = tiny_config();
  c.data.stride = 1;
  c.data.train_fraction = 0.75;
  c.baseline.epochs = 15;
  c.baseline.lr = 5e-3;
  const Corpus corpus = build_corpus(cv_records(8, 9), c, "cv");
  const Checkpoint mu = train_mu(c, corpus).checkpoint;
  ParameterSet w = mu.params;
  const SceneBatch b = corpus.train.all();
  const auto labels = maneuver_labels(b);
  const auto out = mu_forward(b, w, mu_predictor_config(c));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += out.argmax[i] == labels[i];
  CHECK(static_cast<double>(hit) / static_cast<double>(labels.size()) >= 0.99);
}

TEST_CASE("evaluation reports and determinism") {
  TrainConfig c = tiny_config();
  const Corpus corpus = prepare_corpus(c);
  const Checkpoint p = train_stage1(c, corpus).checkpoint;
  const Checkpoint s = train_stage2(c, corpus, p).checkpoint;
  const BaselineSet bl = train_baselines(c, corpus, p);
  ModelBundle m;
  m.predictor = p;
  m.selfaware = s;
  m.mu = bl.mu;
  m.dropout = bl.dropout;
  m.ensemble = bl.ensemble;
  m.ae = bl.ae;
  for (const auto& method : kMethods) {
    INFO(method);
    const EvalReport a = evaluate_method(method, corpus, m, c);
    const EvalReport b = evaluate_method(method, corpus, m, c);
    CHECK(report_json(a) == report_json(b));
    CHECK(curve_csv(a.curve_ade) == curve_csv(b.curve_ade));
    CHECK(a.samples == corpus.test.agents());
    CHECK_FALSE(a.avg_ms_per_frame.has_value());
    const auto parsed = read_reports({report_json(a)});
    CHECK(parsed[0].method == method);
    CHECK(parsed[0].total_parameters == a.total_parameters);
  }
  const EvalReport ours = evaluate_method("ours", corpus, m, c);
  CHECK(ours.per_moment.size() == 6);
  CHECK(ours.total_parameters == p.params.count() + s.params.count());
  const EvalReport ens = evaluate_method("ensemble", corpus, m, c);
  CHECK(ens.total_parameters == 2 * p.params.count());
  CHECK(curve_csv(ours.curve_ade).rfind("fraction,remaining_mean_error_m\n", 0) == 0);
  CHECK(comparison_table({ours, ens}).find("| ours |") != std::string::npos);

  ModelBundle missing;
  CHECK_THROWS_AS(evaluate_method("ours", corpus, missing, c), DataError);
  CHECK_THROWS_AS(evaluate_method("magic", corpus, m, c), UsageError);
}

TEST_CASE("ablation tables have the expected shapes") {
  TrainConfig c = tiny_config();
  c.stage2.epochs = 1;
  const Corpus corpus = prepare_corpus(c);
  const Checkpoint p = train_stage1(c, corpus).checkpoint;
  const AblationReport a = run_ablations(c, corpus, p);
  CHECK(a.structure.size() == 10);
  CHECK(a.labels.size() == 3);
  CHECK(a.training.size() == 2);
  CHECK(a.per_moment.size() == 6);
  CHECK(a.per_type.size() == 4);
  CHECK(a.structure[0].fusion == Fusion::GF);
  CHECK(a.structure[0].estimator == Estimator::None);
  CHECK(a.training[0].name == "weighting");
  for (const auto& r : a.structure) CHECK(r.error.empty());
  CHECK(ablation_json(a) == ablation_json(run_ablations(c, corpus, p)));
}
