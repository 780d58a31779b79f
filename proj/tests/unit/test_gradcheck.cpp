#include <doctest.h>

#include "support/op_catalog.hpp"

using namespace satp;
using namespace satp::testing;

TEST_CASE("every op's analytic gradient matches central differences") {
  Rng rng(20240611);
  for (const auto& entry : op_catalog()) {
    SUBCASE(entry.name.c_str()) {
      for (int trial = 0; trial < 20; ++trial) {
        GradCase gc = entry.make(rng);
        const double err = max_relative_error(gc.fn, gc.inputs);
        INFO(entry.name << " trial " << trial);
        CHECK(err < 1e-5);
      }
    }
  }
}

TEST_CASE("stacked GRU and LSTM gradients match central differences") {
  Rng rng(99);
  for (auto kind : {nn::CellKind::Gru, nn::CellKind::Lstm}) {
    for (int trial = 0; trial < 5; ++trial) {
      GradCase gc = recurrent_case(kind, rng);
      CHECK(max_relative_error(gc.fn, gc.inputs) < 1e-5);
    }
  }
}
