#include <doctest.h>

#include <cmath>

#include "satp/error.hpp"
#include "satp/predictor/predictor.hpp"
#include "support/gradcheck.hpp"

using namespace satp;

namespace {

// Agents moving with constant velocity from the given t=0 positions.
Sample make_sample(const std::vector<Vec2>& at_zero, const std::vector<Vec2>& velocity) {
  Sample s;
  s.record_id = "t";
  for (std::size_t a = 0; a < at_zero.size(); ++a) {
    s.track_ids.push_back(static_cast<std::int64_t>(a + 1));
    s.types.push_back(kAgentTypes[a % 4]);
    s.hard.push_back(false);
    std::vector<Vec2> h, f;
    for (int t = -5; t <= 0; ++t) h.push_back({at_zero[a].x + t * velocity[a].x, at_zero[a].y + t * velocity[a].y});
    for (int t = 1; t <= 6; ++t) f.push_back({at_zero[a].x + t * velocity[a].x, at_zero[a].y + t * velocity[a].y});
    s.history.push_back(h);
    s.future.push_back(f);
    s.history_mask.emplace_back(6, true);
    s.future_mask.emplace_back(6, true);
  }
  return s;
}

PredictorConfig small_cfg() {
  PredictorConfig cfg;
  cfg.n_max = 4;
  cfg.feature_channels = 16;
  cfg.hidden = 16;
  cfg.type_channels = false;
  return cfg;
}

}  // namespace

TEST_CASE("build_scene: adjacency examples") {
  auto cfg = small_cfg();
  auto [scene, graph] = build_scene(make_sample({{3, 4}}, {{1, 0}}), cfg);
  CHECK(graph.at(0, 0) == 1.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != 0 || j != 0) CHECK(graph.at(i, j) == 0.0);
  CHECK(scene.valid == std::vector<bool>{true, false, false, false});

  cfg.n_max = 2;
  auto [s2, g2] = build_scene(make_sample({{0, 0}, {3, 4}}, {{1, 0}, {0, 1}}), cfg);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(g2.at(i, j) == 0.5);

  auto [s3, g3] = build_scene(make_sample({{0, 0}, {30, 0}}, {{1, 0}, {0, 1}}), cfg);
  CHECK(g3.at(0, 1) == 0.0);
  CHECK(g3.at(1, 1) == 1.0);
}

TEST_CASE("build_scene: stationary agent has zero offsets and masked entries are zero") {
  auto cfg = small_cfg();
  auto [scene, graph] = build_scene(make_sample({{5, 5}}, {{0, 0}}), cfg);
  const std::size_t c = cfg.channels();
  CHECK(c == 3);
  CHECK(scene.values.shape() == Shape{6, 4, 3});
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(scene.values.at({t, 0, 0}) == 0.0);
    CHECK(scene.values.at({t, 0, 1}) == 0.0);
    CHECK(scene.values.at({t, 0, 2}) == 1.0);
    for (std::size_t i = 1; i < 4; ++i)
      for (std::size_t k = 0; k < c; ++k) CHECK(scene.values.at({t, i, k}) == 0.0);
  }
}

TEST_CASE("build_scene: centroid order and truncation") {
  auto cfg = small_cfg();
  cfg.n_max = 2;
  auto [scene, graph] = build_scene(make_sample({{100, 0}, {1, 0}, {-1, 0}}, {{0, 0}, {0, 0}, {0, 0}}), cfg);
  // centroid (100/3, 0); distances 66.7, 32.3, 34.3
  CHECK(scene.agent_ids[0] == 2);
  CHECK(scene.agent_ids[1] == 3);
  CHECK_THROWS_AS(build_scene(Sample{}, cfg), DataError);
}

TEST_CASE("predictor_forward: shapes") {
  auto cfg = small_cfg();
  Rng rng(1);
  auto w = init_predictor(cfg, rng);
  auto [scene, graph] = build_scene(make_sample({{0, 0}, {3, 0}, {0, 30}}, {{1, 0}, {1, 1}, {0, -1}}), cfg);
  auto out = predictor_forward(scene, graph, w, cfg, Mode::Eval);
  CHECK(out.feature.shape() == Shape{16, 6, 4});
  CHECK(out.positions.shape() == Shape{4, 6, 2});
  for (std::size_t t = 0; t < 6; ++t) CHECK(out.positions.at({3, t, 0}) == 0.0);
}

TEST_CASE("predictor_forward: isolated agents do not influence each other") {
  auto cfg = small_cfg();
  Rng rng(2);
  auto w = init_predictor(cfg, rng);
  auto sample = make_sample({{0, 0}, {50, 0}, {0, 50}}, {{1, 0}, {1, 1}, {0, -1}});
  auto [scene, graph] = build_scene(sample, cfg);
  auto base = predictor_forward(scene, graph, w, cfg, Mode::Eval);
  // perturb the history of the agent in slot 2 (far from the others)
  const auto victim = scene.source[2];
  for (auto& p : sample.history[victim]) p.x += 0.37;
  auto [scene2, graph2] = build_scene(sample, cfg);
  REQUIRE(scene2.source == scene.source);
  auto moved = predictor_forward(scene2, graph2, w, cfg, Mode::Eval);
  bool victim_changed = false;
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK(moved.positions.at({0, t, d}) == base.positions.at({0, t, d}));
      CHECK(moved.positions.at({1, t, d}) == base.positions.at({1, t, d}));
      victim_changed |= moved.positions.at({2, t, d}) != base.positions.at({2, t, d});
    }
  }
  CHECK(victim_changed);
}

TEST_CASE("predictor_forward: padding slots never influence valid agents") {
  auto cfg = small_cfg();
  Rng rng(3);
  auto w = init_predictor(cfg, rng);
  auto [scene, graph] = build_scene(make_sample({{0, 0}, {3, 0}}, {{1, 0}, {1, 1}}), cfg);
  auto base = predictor_forward(scene, graph, w, cfg, Mode::Eval);
  auto garbage = scene;
  garbage.values = scene.values.clone();
  auto v = garbage.values.mutable_data();
  for (std::size_t t = 0; t < 6; ++t) v[(t * 4 + 3) * 3] = 9.0;
  auto out = predictor_forward(garbage, graph, w, cfg, Mode::Eval);
  CHECK(out.positions.values() == base.positions.values());
}

TEST_CASE("predictor_forward: zero output layer gives the anchor at every step") {
  auto cfg = small_cfg();
  Rng rng(4);
  auto w = init_predictor(cfg, rng);
  for (auto& [name, t] : w.mutable_parameters())
    if (name.rfind("tp.out.", 0) == 0)
      for (auto& x : t.mutable_data()) x = 0.0;
  auto [scene, graph] = build_scene(make_sample({{1.5, -2}, {4, 1}}, {{1, 0}, {1, 1}}), cfg);
  auto out = predictor_forward(scene, graph, w, cfg, Mode::Eval);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(out.positions.at({i, t, 0}) == scene.anchor[i].x);
      CHECK(out.positions.at({i, t, 1}) == scene.anchor[i].y);
    }
}

TEST_CASE("predictor_forward: translation equivariance") {
  auto cfg = small_cfg();
  cfg.type_channels = true;
  Rng rng(5);
  auto w = init_predictor(cfg, rng);
  // dyadic coordinates keep offsets exact under the shift
  auto s1 = make_sample({{0.5, 0.25}, {4, 1.5}, {-2, 5}}, {{1.25, 0}, {0.5, 0.5}, {0, -0.75}});
  auto s2 = s1;
  const Vec2 shift{64.0, -32.0};
  for (auto* part : {&s2.history, &s2.future})
    for (auto& track : *part)
      for (auto& p : track) p = {p.x + shift.x, p.y + shift.y};
  auto [a, ga] = build_scene(s1, cfg);
  auto [b, gb] = build_scene(s2, cfg);
  CHECK(a.values.values() == b.values.values());
  auto pa = predictor_forward(a, ga, w, cfg, Mode::Eval);
  auto pb = predictor_forward(b, gb, w, cfg, Mode::Eval);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(pb.positions.at({i, t, 0}) == doctest::Approx(pa.positions.at({i, t, 0}) + shift.x).epsilon(1e-14));
      CHECK(pb.positions.at({i, t, 1}) == doctest::Approx(pa.positions.at({i, t, 1}) + shift.y).epsilon(1e-14));
    }
}

TEST_CASE("tp_loss examples") {
  auto truth = Tensor::zeros({6, 2, 2});
  CHECK(tp_loss(truth, truth).item() == 0.0);
  std::vector<double> off(6 * 1 * 2);
  for (std::size_t t = 0; t < 6; ++t) {
    off[2 * t] = 3;
    off[2 * t + 1] = 4;
  }
  CHECK(tp_loss(Tensor::from({6, 1, 2}, off), Tensor::zeros({6, 1, 2})).item() == doctest::Approx(5.0));
  std::vector<double> two(6 * 2 * 2, 0.0);
  for (std::size_t t = 0; t < 6; ++t) {
    two[(t * 2 + 0) * 2] = 1;
    two[(t * 2 + 1) * 2] = 3;
  }
  CHECK(tp_loss(Tensor::from({6, 2, 2}, two), Tensor::zeros({6, 2, 2})).item() == doctest::Approx(2.0));
  CHECK(tp_loss(Tensor::from({6, 2, 2}, two), Tensor::zeros({6, 2, 2}), {true, false}).item() ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(tp_loss(truth, truth, {false, false}), DataError);
}

TEST_CASE("predictor training loss gradient matches central differences") {
  PredictorConfig cfg = small_cfg();
  cfg.feature_channels = 4;
  cfg.hidden = 3;
  cfg.blocks = 1;
  Rng rng(6);
  auto w = init_predictor(cfg, rng);
  auto [scene, graph] = build_scene(make_sample({{0, 0}, {3, 0}, {1, 2}}, {{1, 0}, {1, 1}, {0.5, -1}}), cfg);
  SceneBatch batch = make_batch(scene, graph);
  std::vector<std::string> names;
  std::vector<Tensor> leaves;
  for (auto& [name, t] : w.mutable_parameters()) {
    names.push_back(name);
    leaves.push_back(t);
  }
  auto fn = [&](const std::vector<Tensor>&) {
    auto out = predictor_forward(batch, w, cfg, Mode::Eval);
    return tp_loss(out.positions, batch.future);
  };
  CHECK(testing::max_relative_error(fn, leaves) < 1e-5);
}
