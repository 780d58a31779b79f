#include <doctest.h>

#include <cmath>

#include "satp/error.hpp"
#include "satp/selfaware/selfaware.hpp"
#include "support/gradcheck.hpp"

using namespace satp;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal() * scale;
  return Tensor::from(std::move(shape), std::move(v));
}

SaConfig small(Fusion f, Estimator e, LabelForm l) {
  SaConfig cfg;
  cfg.fusion = f;
  cfg.estimator = e;
  cfg.label_form = l;
  cfg.hidden = 8;
  cfg.feature_channels = 5;
  return cfg;
}

}  // namespace

TEST_CASE("sa_forward: shapes and non-negativity of the distance form across every config") {
  Rng rng(1);
  for (auto f : {Fusion::GF, Fusion::Add, Fusion::Concat})
    for (auto e : {Estimator::None, Estimator::Mlp, Estimator::Conv, Estimator::Lstm})
      for (auto l : {LabelForm::Velocity, LabelForm::PositionXY, LabelForm::Distance}) {
        auto cfg = small(f, e, l);
        auto w = init_selfaware(cfg, rng);
        auto z = sa_forward(random_tensor({6, 4, 5}, rng, 3.0), random_tensor({6, 4, 2}, rng, 5.0), w, cfg);
        CHECK(z.shape() == Shape{6, 4, cfg.label_dim()});
        if (l == LabelForm::Distance) {
          // push the readout negative so the ReLU has work to do
          auto w2 = w;
          for (auto& b : w2.mutable_parameters().at("sa.readout.bias").mutable_data()) b = -0.5;
          auto z2 = sa_forward(random_tensor({6, 4, 5}, rng, 3.0), random_tensor({6, 4, 2}, rng), w2, cfg);
          for (double v : z2.data()) CHECK(v >= 0.0);
          for (double v : z.data()) CHECK(v >= 0.0);
        }
      }
}

TEST_CASE("sa_forward: GF fusion ignores the predicted trajectory") {
  Rng rng(2);
  auto cfg = small(Fusion::GF, Estimator::Lstm, LabelForm::Distance);
  auto w = init_selfaware(cfg, rng);
  auto gf = random_tensor({6, 3, 5}, rng);
  auto a = sa_forward(gf, random_tensor({6, 3, 2}, rng), w, cfg);
  auto b = sa_forward(gf, random_tensor({6, 3, 2}, rng, 10.0), w, cfg);
  CHECK(a.values() == b.values());
}

TEST_CASE("sa_forward: concat with a zeroed trajectory branch equals GF") {
  Rng rng(3);
  auto cc = small(Fusion::Concat, Estimator::Mlp, LabelForm::Distance);
  auto gcfg = small(Fusion::GF, Estimator::Mlp, LabelForm::Distance);
  auto wc = init_selfaware(cc, rng);
  auto wg = wc;
  auto& win = wc.mutable_parameters().at("sa.mlp_in.weight");
  auto data = win.mutable_data();
  const std::size_t H = cc.hidden;
  for (std::size_t r = H; r < H + 2; ++r)
    for (std::size_t c = 0; c < H; ++c) data[r * H + c] = 0.0;
  wg.mutable_parameters().at("sa.mlp_in.weight") =
      Tensor::from({H, H}, std::vector<double>(data.begin(), data.begin() + static_cast<long>(H * H)));
  auto gf = random_tensor({6, 3, 5}, rng);
  auto inc = random_tensor({6, 3, 2}, rng);
  auto a = sa_forward(gf, inc, wc, cc);
  auto b = sa_forward(gf, inc, wg, gcfg);
  for (std::size_t k = 0; k < a.numel(); ++k) CHECK(a.data()[k] == doctest::Approx(b.data()[k]).epsilon(1e-12));
}

TEST_CASE("sa_forward: detached inputs receive no gradient, joint mode does") {
  Rng rng(4);
  auto cfg = small(Fusion::Concat, Estimator::Lstm, LabelForm::Distance);
  auto w = init_selfaware(cfg, rng);
  Tensor gf = random_tensor({6, 2, 5}, rng);
  gf.set_requires_grad(true);
  Tensor inc = random_tensor({6, 2, 2}, rng);
  inc.set_requires_grad(true);
  ops::sum(sa_forward(gf, inc, w, cfg)).backward();
  for (double g : gf.grad()) CHECK(g == 0.0);
  gf.zero_grad();
  ops::sum(sa_forward(gf, inc, w, cfg, false)).backward();
  double mag = 0;
  for (double g : gf.grad()) mag += std::fabs(g);
  CHECK(mag > 0);
}

TEST_CASE("sa_forward: rejects mismatched shapes") {
  Rng rng(5);
  auto cfg = small(Fusion::Concat, Estimator::Lstm, LabelForm::Distance);
  auto w = init_selfaware(cfg, rng);
  CHECK_THROWS_AS(sa_forward(Tensor::zeros({6, 2, 4}), Tensor::zeros({6, 2, 2}), w, cfg), ShapeError);
  CHECK_THROWS_AS(sa_forward(Tensor::zeros({6, 2, 5}), Tensor::zeros({6, 3, 2}), w, cfg), ShapeError);
}

TEST_CASE("sa gradients match central differences") {
  Rng rng(6);
  for (auto e : {Estimator::Mlp, Estimator::Conv, Estimator::Lstm}) {
    auto cfg = small(Fusion::Add, e, LabelForm::PositionXY);
    cfg.hidden = 3;
    cfg.feature_channels = 2;
    auto w = init_selfaware(cfg, rng);
    auto gf = random_tensor({6, 2, 2}, rng);
    auto inc = random_tensor({6, 2, 2}, rng);
    auto labels = random_tensor({6, 2, 2}, rng);
    // nonzero biases keep every ReLU away from its kink
    for (auto& [name, t] : w.mutable_parameters())
      for (auto& x : t.mutable_data()) x += 0.3 * rng.normal();
    auto fn = [&](const std::vector<Tensor>&) { return sa_loss(labels, sa_forward(gf, inc, w, cfg)); };
    for (auto& [name, t] : w.mutable_parameters()) {
      INFO(name);
      CHECK(testing::max_relative_error(fn, {t}) < 1e-5);
    }
  }
}

TEST_CASE("error_labels examples") {
  auto truth = Tensor::from({1, 1, 2}, {3, 4});
  auto zero = Tensor::zeros({1, 1, 2});
  CHECK(error_labels(truth, zero, Tensor::zeros({1, 2}), LabelForm::Distance).item() == 5.0);
  auto xy = error_labels(zero, truth, Tensor::zeros({1, 2}), LabelForm::PositionXY);
  CHECK(xy.values() == std::vector<double>{3, 4});
  for (auto f : {LabelForm::Velocity, LabelForm::PositionXY, LabelForm::Distance}) {
    const auto labels = error_labels(truth, truth, Tensor::zeros({1, 2}), f);
    for (double v : labels.data()) CHECK(v == 0.0);
  }

  // anchor (0,0); truth offsets (1,0),(2,0); prediction stays at the anchor
  auto t2 = Tensor::from({2, 1, 2}, {1, 0, 2, 0});
  auto vel = error_labels(t2, Tensor::zeros({2, 1, 2}), Tensor::zeros({1, 2}), LabelForm::Velocity, 2.0);
  CHECK(vel.at({0, 0, 0}) == 2.0);
  CHECK(vel.at({1, 0, 0}) == 2.0);
  CHECK(vel.at({0, 0, 1}) == 0.0);
}

TEST_CASE("sa_loss examples") {
  std::vector<double> z{1, 2, 3, 4, 5, 6};
  auto zt = Tensor::from({6, 1, 1}, z);
  CHECK(sa_loss(zt, zt).item() == 0.0);
  CHECK(sa_loss(Tensor::from({2, 1, 1}, {1, 2}), Tensor::zeros({2, 1, 1})).item() == doctest::Approx(1.5));
  CHECK(sa_loss(Tensor::from({1, 1, 2}, {3, 4}), Tensor::zeros({1, 1, 2})).item() == doctest::Approx(5.0));
  CHECK_THROWS_AS(sa_loss(zt, zt, {false}), DataError);
}

TEST_CASE("integrate_diagnostics examples") {
  auto [ade, fde] = integrate_diagnostics(Tensor::from({6, 1, 1}, {1, 2, 3, 4, 5, 6}));
  CHECK(ade[0] == 3.5);
  CHECK(fde[0] == 6.0);
  auto [a0, f0] = integrate_diagnostics(Tensor::zeros({6, 2, 1}));
  CHECK(a0 == std::vector<double>{0, 0});
  CHECK(f0 == std::vector<double>{0, 0});
  std::vector<double> xy;
  for (int t = 0; t < 6; ++t) xy.insert(xy.end(), {3, 4});
  auto [a2, f2] = integrate_diagnostics(Tensor::from({6, 1, 2}, xy));
  CHECK(a2[0] == doctest::Approx(5.0));
  CHECK(f2[0] == 5.0);
}

TEST_CASE("enum names round-trip") {
  for (auto f : {Fusion::GF, Fusion::Add, Fusion::Concat}) CHECK(parse_fusion(to_string(f)) == f);
  for (auto e : {Estimator::None, Estimator::Mlp, Estimator::Conv, Estimator::Lstm})
    CHECK(parse_estimator(to_string(e)) == e);
  for (auto l : {LabelForm::Velocity, LabelForm::PositionXY, LabelForm::Distance})
    CHECK(parse_label_form(to_string(l)) == l);
  CHECK_THROWS_AS(parse_fusion("sum"), UsageError);
}
