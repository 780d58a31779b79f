#pragma once

// Layer helpers over a ParameterSet. Each layer owns a name prefix; the
// parameters live in the set under "<prefix>.<field>". Initialisation is
// Glorot-uniform for weight matrices, zeros for biases, and unit scale /
// zero shift with unit running variance for batch normalisation.

#include <cstddef>
#include <string>
#include <vector>

#include "satp/numerics/ops.hpp"
#include "satp/numerics/parameters.hpp"
#include "satp/numerics/rng.hpp"

namespace satp::nn {

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

void add_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng);
Tensor linear(const ParameterSet& params, const std::string& name, const Tensor& x);

void add_conv_time(ParameterSet& params, const std::string& name, std::size_t kernel,
                   std::size_t in, std::size_t out, Rng& rng);
Tensor conv_time(const ParameterSet& params, const std::string& name, const Tensor& x);

void add_batch_norm(ParameterSet& params, const std::string& name, std::size_t channels);
Tensor batch_norm(ParameterSet& params, const std::string& name, const Tensor& x, bool training);

// Inverted dropout: survivors are scaled by 1 / (1 - rate). Inactive when
// rng is null or rate is 0.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rng != nullptr && rate > 0.0; }
};
Tensor dropout(const Tensor& x, const Dropout& spec);

enum class CellKind { Gru, Lstm };

// Per-layer hidden (and, for LSTM, cell) states, each (N, H).
struct RecurrentState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
};

struct RecurrentSpec {
  CellKind kind = CellKind::Gru;
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t layers = 1;
};

void add_recurrent(ParameterSet& params, const std::string& name, const RecurrentSpec& spec,
                   Rng& rng);
RecurrentState zero_state(const RecurrentSpec& spec, std::size_t batch);

// Runs the stack over a (T, N, input) sequence, updating `state`; returns
// the top-layer outputs (T, N, hidden). Dropout applies between layers.
Tensor run_recurrent(const ParameterSet& params, const std::string& name,
                     const RecurrentSpec& spec, const Tensor& sequence, RecurrentState& state,
                     const Dropout& between = {});

// One time step for an (N, input) input; returns the top-layer output.
Tensor step_recurrent(const ParameterSet& params, const std::string& name,
                      const RecurrentSpec& spec, const Tensor& input, RecurrentState& state,
                      const Dropout& between = {});

}  // namespace satp::nn
