#pragma once

// Differentiable tensor operations.
//
// Sequence tensors are time-major throughout the library: (time, agent,
// feature). Reductions and "named axis" ops take the axis index explicitly.

#include <cstddef>
#include <vector>

#include "satp/numerics/tensor.hpp"

namespace satp {

// Sparse row-normalised mixing matrix over the agent axis, used by
// graph_mix. Stored in CSR form; rows of absent agents are empty.
struct AgentGraph {
  std::size_t agents = 0;
  std::vector<std::size_t> row_begin;  // size agents + 1
  std::vector<std::size_t> cols;
  std::vector<double> weights;

  static AgentGraph identity(std::size_t agents);
  // From a dense row-major (agents x agents) matrix, dropping zeros.
  static AgentGraph from_dense(std::size_t agents, const std::vector<double>& dense);
  // Block-diagonal union; agent indices of later graphs are shifted.
  static AgentGraph block_diagonal(const std::vector<AgentGraph>& parts);
};

namespace ops {

// (..., k) x (k, m) -> (..., m)
Tensor matmul(const Tensor& a, const Tensor& b);
// matmul followed by a bias broadcast over the last axis.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// 1-D convolution along axis 0 of a (T, N, Cin) tensor with kernel
// (K, Cin, Cout), K odd, zero padding (K-1)/2 on both ends.
Tensor conv1d_time(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Per-channel batch normalisation over the last axis. In training mode
// normalises with batch statistics and updates the running buffers
// (momentum on the new value, unbiased variance); otherwise uses the
// running buffers.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum = 0.1, double eps = 1e-5);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
// Euclidean norm over the last axis; the subgradient at 0 is taken as 0.
Tensor l2norm(const Tensor& x);
Tensor cumsum(const Tensor& x, std::size_t axis);

// out[t, i, :] = sum_j graph(i, j) * x[t, j, :] for a (T, N, C) tensor.
Tensor graph_mix(const Tensor& x, const AgentGraph& graph);

}  // namespace ops

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }

}  // namespace satp
