#include "satp/numerics/layers.hpp"

#include <cmath>

#include "satp/error.hpp"

namespace satp::nn {

namespace {

std::size_t gate_count(CellKind kind) { return kind == CellKind::Gru ? 3 : 4; }

std::string layer_name(const std::string& name, std::size_t layer) {
  return name + ".l" + std::to_string(layer);
}

// gx: input projection incl. bias, (N, G*H).
void cell_step(const ParameterSet& params, const std::string& lname, CellKind kind,
               std::size_t hidden, const Tensor& gx, Tensor& h, Tensor& c) {
  const std::size_t H = hidden;
  if (kind == CellKind::Gru) {
    Tensor gh = ops::linear(h, params.get(lname + ".w_h"), params.get(lname + ".b_h"));
    Tensor r = ops::sigmoid(ops::slice(gx, 1, 0, H) + ops::slice(gh, 1, 0, H));
    Tensor z = ops::sigmoid(ops::slice(gx, 1, H, H) + ops::slice(gh, 1, H, H));
    Tensor n = ops::tanh(ops::slice(gx, 1, 2 * H, H) + r * ops::slice(gh, 1, 2 * H, H));
    h = n + z * (h - n);
  } else {
    Tensor g = gx + ops::matmul(h, params.get(lname + ".w_h"));
    Tensor i = ops::sigmoid(ops::slice(g, 1, 0, H));
    Tensor f = ops::sigmoid(ops::slice(g, 1, H, H));
    Tensor cand = ops::tanh(ops::slice(g, 1, 2 * H, H));
    Tensor o = ops::sigmoid(ops::slice(g, 1, 3 * H, H));
    c = f * c + i * cand;
    h = o * ops::tanh(c);
  }
}

void check_state(const RecurrentSpec& spec, const RecurrentState& state) {
  if (state.h.size() != spec.layers ||
      (spec.kind == CellKind::Lstm && state.c.size() != spec.layers)) {
    throw ShapeError("recurrent: state does not match the number of layers");
  }
}

}  // namespace

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v));
}

void add_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng) {
  params.add(name + ".weight", xavier_uniform({in, out}, in, out, rng));
  params.add(name + ".bias", Tensor::zeros({out}));
}

Tensor linear(const ParameterSet& params, const std::string& name, const Tensor& x) {
  return ops::linear(x, params.get(name + ".weight"), params.get(name + ".bias"));
}

void add_conv_time(ParameterSet& params, const std::string& name, std::size_t kernel,
                   std::size_t in, std::size_t out, Rng& rng) {
  params.add(name + ".weight", xavier_uniform({kernel, in, out}, kernel * in, kernel * out, rng));
  params.add(name + ".bias", Tensor::zeros({out}));
}

Tensor conv_time(const ParameterSet& params, const std::string& name, const Tensor& x) {
  return ops::conv1d_time(x, params.get(name + ".weight"), params.get(name + ".bias"));
}

void add_batch_norm(ParameterSet& params, const std::string& name, std::size_t channels) {
  params.add(name + ".gamma", Tensor::full({channels}, 1.0));
  params.add(name + ".beta", Tensor::zeros({channels}));
  params.add_buffer(name + ".running_mean", Tensor::zeros({channels}));
  params.add_buffer(name + ".running_var", Tensor::full({channels}, 1.0));
}

Tensor batch_norm(ParameterSet& params, const std::string& name, const Tensor& x, bool training) {
  return ops::batch_norm(x, params.get(name + ".gamma"), params.get(name + ".beta"),
                         params.buffer(name + ".running_mean"),
                         params.buffer(name + ".running_var"), training);
}

Tensor dropout(const Tensor& x, const Dropout& spec) {
  if (!spec.active()) return x;
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw UsageError("dropout: rate must lie in [0, 1)");
  }
  const double keep = 1.0 / (1.0 - spec.rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = spec.rng->uniform() < spec.rate ? 0.0 : keep;
  return x * Tensor::from(x.shape(), std::move(mask));
}

void add_recurrent(ParameterSet& params, const std::string& name, const RecurrentSpec& spec,
                   Rng& rng) {
  const std::size_t G = gate_count(spec.kind);
  const std::size_t H = spec.hidden;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const std::string ln = layer_name(name, l);
    const std::size_t in = l == 0 ? spec.input : H;
    params.add(ln + ".w_x", xavier_uniform({in, G * H}, in, G * H, rng));
    params.add(ln + ".w_h", xavier_uniform({H, G * H}, H, G * H, rng));
    params.add(ln + ".b_x", Tensor::zeros({G * H}));
    if (spec.kind == CellKind::Gru) params.add(ln + ".b_h", Tensor::zeros({G * H}));
  }
}

RecurrentState zero_state(const RecurrentSpec& spec, std::size_t batch) {
  RecurrentState s;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    s.h.push_back(Tensor::zeros({batch, spec.hidden}));
    if (spec.kind == CellKind::Lstm) s.c.push_back(Tensor::zeros({batch, spec.hidden}));
  }
  return s;
}

Tensor run_recurrent(const ParameterSet& params, const std::string& name,
                     const RecurrentSpec& spec, const Tensor& sequence, RecurrentState& state,
                     const Dropout& between) {
  check_state(spec, state);
  if (sequence.ndim() != 3) throw ShapeError("run_recurrent: expected a (T, N, C) sequence");
  const std::size_t T = sequence.dim(0);
  const std::size_t N = sequence.dim(1);
  const std::size_t GH = gate_count(spec.kind) * spec.hidden;
  Tensor layer_input = sequence;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const std::string ln = layer_name(name, l);
    if (l > 0) layer_input = dropout(layer_input, between);
    Tensor proj = ops::linear(layer_input, params.get(ln + ".w_x"), params.get(ln + ".b_x"));
    std::vector<Tensor> outputs;
    outputs.reserve(T);
    Tensor c = spec.kind == CellKind::Lstm ? state.c[l] : Tensor();
    for (std::size_t t = 0; t < T; ++t) {
      Tensor gx = ops::reshape(ops::slice(proj, 0, t, 1), {N, GH});
      cell_step(params, ln, spec.kind, spec.hidden, gx, state.h[l], c);
      outputs.push_back(state.h[l]);
    }
    if (spec.kind == CellKind::Lstm) state.c[l] = c;
    layer_input = ops::stack(outputs);
  }
  return layer_input;
}

Tensor step_recurrent(const ParameterSet& params, const std::string& name,
                      const RecurrentSpec& spec, const Tensor& input, RecurrentState& state,
                      const Dropout& between) {
  check_state(spec, state);
  Tensor x = input;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const std::string ln = layer_name(name, l);
    if (l > 0) x = dropout(x, between);
    Tensor gx = ops::linear(x, params.get(ln + ".w_x"), params.get(ln + ".b_x"));
    Tensor c = spec.kind == CellKind::Lstm ? state.c[l] : Tensor();
    cell_step(params, ln, spec.kind, spec.hidden, gx, state.h[l], c);
    if (spec.kind == CellKind::Lstm) state.c[l] = c;
    x = state.h[l];
  }
  return x;
}

}  // namespace satp::nn
