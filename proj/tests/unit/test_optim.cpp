#include <doctest.h>

#include <cmath>

#include "satp/error.hpp"
#include "satp/numerics/layers.hpp"
#include "satp/numerics/optim.hpp"

using namespace satp;

namespace {
ParameterSet one_param(double value, double grad) {
  ParameterSet p;
  p.add("w", Tensor::scalar(value));
  Tensor w = p.get("w");
  w.mutable_grad()[0] = grad;
  return p;
}
}  // namespace

TEST_CASE("first Adam step moves by about lr against the gradient sign") {
  // t=1: m = 0.1 g, v = 0.001 g^2, mhat = g, vhat = g^2 -> step lr * g / (|g| + eps).
  ParameterSet p = one_param(0.5, 1.0);
  Adam adam;
  adam.step(p, 1e-3);
  const double expected = 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8);
  CHECK(p.get("w").item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParameterSet p = one_param(0.25, 0.0);
  Adam adam;
  adam.step(p, 1e-3);
  CHECK(p.get("w").item() == 0.25);
}

TEST_CASE("Adam is deterministic on clones") {
  ParameterSet a = one_param(1.0, 0.3);
  ParameterSet b = a;
  Tensor wb = b.get("w");
  wb.mutable_grad()[0] = 0.3;
  Adam oa, ob;
  for (int i = 0; i < 2; ++i) {
    oa.step(a, 1e-3);
    ob.step(b, 1e-3);
  }
  CHECK(a.get("w").item() == b.get("w").item());
}

TEST_CASE("frozen parameter sets refuse updates and stay bit-identical") {
  ParameterSet p = one_param(1.0, 0.5);
  p.freeze();
  const auto before = p.digest();
  Adam adam;
  CHECK_THROWS_AS(adam.step(p, 1e-3), UsageError);
  CHECK(p.digest() == before);
  CHECK(p.count() == 1);
}

TEST_CASE("steplr schedule") {
  CHECK(steplr(0, 1e-3, 10, 0.5) == 1e-3);
  CHECK(steplr(10, 1e-3, 10, 0.5) == doctest::Approx(5e-4).epsilon(1e-15));
  CHECK(steplr(25, 1e-3, 10, 0.5) == doctest::Approx(2.5e-4).epsilon(1e-15));
  CHECK_THROWS_AS(steplr(1, 1e-3, 0, 0.5), UsageError);
}

TEST_CASE("parameter counting of a two-layer MLP") {
  ParameterSet p;
  Rng rng(1);
  nn::add_linear(p, "fc1", 4, 8, rng);
  nn::add_linear(p, "fc2", 8, 2, rng);
  CHECK(p.count() == 58);
  ParameterSet frozen = p;
  frozen.freeze();
  CHECK(frozen.count() == 58);
}

TEST_CASE("parameter sets iterate lexicographically and copy deeply") {
  ParameterSet p;
  p.add("b", Tensor::scalar(1));
  p.add("a", Tensor::scalar(2));
  CHECK(p.parameters().begin()->first == "a");
  ParameterSet q = p;
  q.get("a").node().value[0] = 7;
  CHECK(p.get("a").item() == 2);
  CHECK_THROWS_AS(p.add("a", Tensor::scalar(0)), UsageError);
}
