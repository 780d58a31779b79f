#include "satp/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "satp/error.hpp"

namespace satp {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

using detail::Node;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

// Shared implementation of unary elementwise ops whose derivative can be
// written in terms of the input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return Tensor::make_result(x.shape(), std::move(out), name, {x}, [deriv](Node& self) {
    Node& a = in(self, 0);
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      a.grad[i] += self.grad[i] * deriv(a.value[i], self.value[i]);
    }
  });
}

}  // namespace

AgentGraph AgentGraph::identity(std::size_t agents) {
  AgentGraph g;
  g.agents = agents;
  g.row_begin.resize(agents + 1);
  for (std::size_t i = 0; i <= agents; ++i) g.row_begin[i] = i;
  g.cols.resize(agents);
  for (std::size_t i = 0; i < agents; ++i) g.cols[i] = i;
  g.weights.assign(agents, 1.0);
  return g;
}

AgentGraph AgentGraph::from_dense(std::size_t agents, const std::vector<double>& dense) {
  if (dense.size() != agents * agents) {
    throw ShapeError("AgentGraph::from_dense: expected " + std::to_string(agents * agents) +
                     " entries, got " + std::to_string(dense.size()));
  }
  AgentGraph g;
  g.agents = agents;
  g.row_begin.push_back(0);
  for (std::size_t i = 0; i < agents; ++i) {
    for (std::size_t j = 0; j < agents; ++j) {
      double w = dense[i * agents + j];
      if (w != 0.0) {
        g.cols.push_back(j);
        g.weights.push_back(w);
      }
    }
    g.row_begin.push_back(g.cols.size());
  }
  return g;
}

AgentGraph AgentGraph::block_diagonal(const std::vector<AgentGraph>& parts) {
  AgentGraph g;
  g.row_begin.push_back(0);
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.agents; ++i) {
      for (std::size_t e = p.row_begin[i]; e < p.row_begin[i + 1]; ++e) {
        g.cols.push_back(p.cols[e] + g.agents);
        g.weights.push_back(p.weights[e]);
      }
      g.row_begin.push_back(g.cols.size());
    }
    g.agents += p.agents;
  }
  return g;
}

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 1 || b.ndim() != 2 || a.shape().back() != b.dim(0)) {
    shape_fail("matmul", a.shape(), b.shape());
  }
  const std::size_t k = b.dim(0);
  const std::size_t m = b.dim(1);
  const std::size_t rows = k == 0 ? 0 : a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = m;
  std::vector<double> out(rows * m);
  {
    ConstMapMat A(a.values().data(), rows, k);
    ConstMapMat B(b.values().data(), k, m);
    MapMat C(out.data(), rows, m);
    C.noalias() = A * B;
  }
  return Tensor::make_result(out_shape, std::move(out), "matmul", {a, b},
                             [rows, k, m](Node& self) {
                               Node& na = in(self, 0);
                               Node& nb = in(self, 1);
                               ConstMapMat G(self.grad.data(), rows, m);
                               if (na.requires_grad) {
                                 ConstMapMat B(nb.value.data(), k, m);
                                 MapMat GA(na.grad.data(), rows, k);
                                 GA.noalias() += G * B.transpose();
                               }
                               if (nb.requires_grad) {
                                 ConstMapMat A(na.value.data(), rows, k);
                                 MapMat GB(nb.grad.data(), k, m);
                                 GB.noalias() += A.transpose() * G;
                               }
                             });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul(x, weight), bias);
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t j = 0; j < 2; ++j) {
      Node& n = in(self, j);
      if (!n.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) n.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    Node& na = in(self, 0);
    Node& nb = in(self, 1);
    if (na.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
    if (nb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    Node& na = in(self, 0);
    Node& nb = in(self, 1);
    if (na.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] * nb.value[i];
    if (nb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] += self.grad[i] * na.value[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.ndim() < 1 || bias.ndim() != 1 || x.shape().back() != bias.dim(0)) {
    shape_fail("add_bias", x.shape(), bias.shape());
  }
  const std::size_t c = bias.dim(0);
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias.values()[i % c];
  return Tensor::make_result(x.shape(), std::move(out), "add_bias", {x, bias}, [c](Node& self) {
    Node& nx = in(self, 0);
    Node& nb = in(self, 1);
    if (nx.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
    if (nb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i % c] += self.grad[i];
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values());
  for (auto& v : out) v *= factor;
  return Tensor::make_result(x.shape(), std::move(out), "scale", {x}, [factor](Node& self) {
    Node& nx = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += factor * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  std::vector<double> out(x.values());
  for (auto& v : out) v += offset;
  return Tensor::make_result(x.shape(), std::move(out), "add_scalar", {x}, [](Node& self) {
    Node& nx = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  AxisSplit base = split_axis(first, axis, "concat");
  std::size_t total = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) shape_fail("concat", first, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) shape_fail("concat", first, s);
    }
    lens.push_back(s[axis]);
    total += s[axis];
  }
  out_shape[axis] = total;
  const std::size_t outer = base.outer;
  const std::size_t inner = base.inner;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].values();
    const std::size_t block = lens[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * block, block, out.data() + (o * total + offset) * inner);
    }
    offset += lens[p];
  }
  return Tensor::make_result(out_shape, std::move(out), "concat", parts,
                             [lens, outer, inner, total](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < lens.size(); ++p) {
                                 Node& n = in(self, p);
                                 const std::size_t block = lens[p] * inner;
                                 if (n.requires_grad) {
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     const double* src = self.grad.data() + (o * total + off) * inner;
                                     double* dst = n.grad.data() + o * block;
                                     for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                   }
                                 }
                                 off += lens[p];
                               }
                             });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (start + length > s.len) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") exceeds axis " + std::to_string(axis) +
                     " of shape " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  const auto& v = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(v.data() + (o * s.len + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  }
  return Tensor::make_result(out_shape, std::move(out), "slice", {x},
                             [s, start, length](Node& self) {
                               Node& n = in(self, 0);
                               for (std::size_t o = 0; o < s.outer; ++o) {
                                 const double* src = self.grad.data() + o * length * s.inner;
                                 double* dst = n.grad.data() + (o * s.len + start) * s.inner;
                                 for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_fail("reshape", x.shape(), shape);
  return Tensor::make_result(std::move(shape), x.values(), "reshape", {x}, [](Node& self) {
    Node& n = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) n.grad[i] += self.grad[i];
  });
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.shape() != parts.front().shape()) shape_fail("stack", parts.front().shape(), p.shape());
    Shape s = p.shape();
    s.insert(s.begin(), 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, 0);
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive input");
  }
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  AxisSplit s = split_axis(x.shape(), axis, "softmax");
  std::vector<double> out(x.numel());
  const auto& v = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = v[base];
      for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, v[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        out[base + k * s.inner] = std::exp(v[base + k * s.inner] - mx);
        z += out[base + k * s.inner];
      }
      for (std::size_t k = 0; k < s.len; ++k) out[base + k * s.inner] /= z;
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), "softmax", {x}, [s](Node& self) {
    Node& n = in(self, 0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.len; ++k) {
          dot += self.grad[base + k * s.inner] * self.value[base + k * s.inner];
        }
        for (std::size_t k = 0; k < s.len; ++k) {
          const std::size_t j = base + k * s.inner;
          n.grad[j] += self.value[j] * (self.grad[j] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  std::vector<double> out(x.numel());
  const auto& v = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = v[base];
      for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, v[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) z += std::exp(v[base + k * s.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t k = 0; k < s.len; ++k) out[base + k * s.inner] = v[base + k * s.inner] - lz;
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), "log_softmax", {x}, [s](Node& self) {
    Node& n = in(self, 0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double gsum = 0.0;
        for (std::size_t k = 0; k < s.len; ++k) gsum += self.grad[base + k * s.inner];
        for (std::size_t k = 0; k < s.len; ++k) {
          const std::size_t j = base + k * s.inner;
          n.grad[j] += self.grad[j] - std::exp(self.value[j]) * gsum;
        }
      }
    }
  });
}

Tensor conv1d_time(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.ndim() != 3 || weight.ndim() != 3 || bias.ndim() != 1 || weight.dim(1) != x.dim(2) ||
      weight.dim(2) != bias.dim(0) || weight.dim(0) % 2 == 0) {
    shape_fail("conv1d_time", x.shape(), weight.shape());
  }
  const std::size_t T = x.dim(0);
  const std::size_t N = x.dim(1);
  const std::size_t cin = x.dim(2);
  const std::size_t K = weight.dim(0);
  const std::size_t cout = weight.dim(2);
  const long pad = static_cast<long>(K / 2);
  std::vector<double> out(T * N * cout);
  {
    MapMat Y(out.data(), T * N, cout);
    Eigen::Map<const Eigen::RowVectorXd> b(bias.values().data(), cout);
    Y.rowwise() = b;
    for (std::size_t k = 0; k < K; ++k) {
      const long shift = static_cast<long>(k) - pad;
      const long t0 = std::max(0L, -shift);
      const long t1 = std::min(static_cast<long>(T), static_cast<long>(T) - shift);
      if (t1 <= t0) continue;
      const std::size_t rows = static_cast<std::size_t>(t1 - t0) * N;
      ConstMapMat X(x.values().data() + static_cast<std::size_t>(t0 + shift) * N * cin, rows, cin);
      ConstMapMat W(weight.values().data() + k * cin * cout, cin, cout);
      MapMat Yb(out.data() + static_cast<std::size_t>(t0) * N * cout, rows, cout);
      Yb.noalias() += X * W;
    }
  }
  return Tensor::make_result(
      {T, N, cout}, std::move(out), "conv1d_time", {x, weight, bias},
      [T, N, cin, K, cout, pad](Node& self) {
        Node& nx = in(self, 0);
        Node& nw = in(self, 1);
        Node& nb = in(self, 2);
        for (std::size_t k = 0; k < K; ++k) {
          const long shift = static_cast<long>(k) - pad;
          const long t0 = std::max(0L, -shift);
          const long t1 = std::min(static_cast<long>(T), static_cast<long>(T) - shift);
          if (t1 <= t0) continue;
          const std::size_t rows = static_cast<std::size_t>(t1 - t0) * N;
          const std::size_t xoff = static_cast<std::size_t>(t0 + shift) * N * cin;
          ConstMapMat G(self.grad.data() + static_cast<std::size_t>(t0) * N * cout, rows, cout);
          if (nx.requires_grad) {
            ConstMapMat W(nw.value.data() + k * cin * cout, cin, cout);
            MapMat GX(nx.grad.data() + xoff, rows, cin);
            GX.noalias() += G * W.transpose();
          }
          if (nw.requires_grad) {
            ConstMapMat X(nx.value.data() + xoff, rows, cin);
            MapMat GW(nw.grad.data() + k * cin * cout, cin, cout);
            GW.noalias() += X.transpose() * G;
          }
        }
        if (nb.requires_grad) {
          ConstMapMat G(self.grad.data(), T * N, cout);
          Eigen::Map<Eigen::RowVectorXd> gb(nb.grad.data(), cout);
          gb += G.colwise().sum();
        }
      });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum, double eps) {
  if (x.ndim() < 1) throw ShapeError("batch_norm: scalar input");
  const std::size_t C = x.shape().back();
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C} || running_mean.shape() != Shape{C} ||
      running_var.shape() != Shape{C}) {
    shape_fail("batch_norm", x.shape(), gamma.shape());
  }
  const std::size_t R = x.numel() / C;
  const auto& xv = x.values();
  std::vector<double> mu(C, 0.0), inv_std(C, 0.0);
  if (training) {
    if (R < 2) throw ShapeError("batch_norm: training mode needs at least 2 rows");
    std::vector<double> var(C, 0.0);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) mu[c] += xv[r * C + c];
    for (auto& m : mu) m /= static_cast<double>(R);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const double d = xv[r * C + c] - mu[c];
        var[c] += d * d;
      }
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    for (std::size_t c = 0; c < C; ++c) {
      const double biased = var[c] / static_cast<double>(R);
      const double unbiased = var[c] / static_cast<double>(R - 1);
      inv_std[c] = 1.0 / std::sqrt(biased + eps);
      rm[c] = (1.0 - momentum) * rm[c] + momentum * mu[c];
      rv[c] = (1.0 - momentum) * rv[c] + momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = running_mean.values()[c];
      inv_std[c] = 1.0 / std::sqrt(running_var.values()[c] + eps);
    }
  }
  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t i = r * C + c;
      xhat[i] = (xv[i] - mu[c]) * inv_std[c];
      out[i] = gamma.values()[c] * xhat[i] + beta.values()[c];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), "batch_norm", {x, gamma, beta},
      [R, C, training, xhat = std::move(xhat), inv_std](Node& self) {
        Node& nx = in(self, 0);
        Node& ng = in(self, 1);
        Node& nb = in(self, 2);
        std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = r * C + c;
            sum_dy[c] += self.grad[i];
            sum_dy_xhat[c] += self.grad[i] * xhat[i];
          }
        if (ng.requires_grad)
          for (std::size_t c = 0; c < C; ++c) ng.grad[c] += sum_dy_xhat[c];
        if (nb.requires_grad)
          for (std::size_t c = 0; c < C; ++c) nb.grad[c] += sum_dy[c];
        if (!nx.requires_grad) return;
        const double n = static_cast<double>(R);
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = r * C + c;
            const double g = ng.value[c];
            if (training) {
              nx.grad[i] += g * inv_std[c] / n *
                            (n * self.grad[i] - sum_dy[c] - xhat[i] * sum_dy_xhat[c]);
            } else {
              nx.grad[i] += g * inv_std[c] * self.grad[i];
            }
          }
      });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({}, {s}, "sum", {x}, [](Node& self) {
    Node& n = in(self, 0);
    for (auto& g : n.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({}, {s * inv}, "mean", {x}, [inv](Node& self) {
    Node& n = in(self, 0);
    for (auto& g : n.grad) g += self.grad[0] * inv;
  });
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  AxisSplit s = split_axis(x.shape(), axis, "sum_axis");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto& v = x.values();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.len; ++k)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += v[(o * s.len + k) * s.inner + i];
  return Tensor::make_result(out_shape, std::move(out), "sum_axis", {x}, [s](Node& self) {
    Node& n = in(self, 0);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < s.len; ++k)
        for (std::size_t i = 0; i < s.inner; ++i)
          n.grad[(o * s.len + k) * s.inner + i] += self.grad[o * s.inner + i];
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const std::size_t len = x.dim(axis);
  if (len == 0) throw ShapeError("mean_axis: empty axis");
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(len));
}

Tensor l2norm(const Tensor& x) {
  if (x.ndim() < 1) throw ShapeError("l2norm: scalar input");
  const std::size_t d = x.shape().back();
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  const std::size_t rows = d == 0 ? 0 : x.numel() / d;
  std::vector<double> out(rows);
  const auto& v = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += v[r * d + j] * v[r * d + j];
    out[r] = std::sqrt(s);
  }
  return Tensor::make_result(out_shape, std::move(out), "l2norm", {x}, [rows, d](Node& self) {
    Node& n = in(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double norm = self.value[r];
      if (norm == 0.0) continue;
      const double f = self.grad[r] / norm;
      for (std::size_t j = 0; j < d; ++j) n.grad[r * d + j] += f * n.value[r * d + j];
    }
  });
}

Tensor cumsum(const Tensor& x, std::size_t axis) {
  AxisSplit s = split_axis(x.shape(), axis, "cumsum");
  std::vector<double> out(x.values());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 1; k < s.len; ++k)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[(o * s.len + k) * s.inner + i] += out[(o * s.len + k - 1) * s.inner + i];
  return Tensor::make_result(x.shape(), std::move(out), "cumsum", {x}, [s](Node& self) {
    Node& n = in(self, 0);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double acc = 0.0;
        for (std::size_t k = s.len; k-- > 0;) {
          acc += self.grad[(o * s.len + k) * s.inner + i];
          n.grad[(o * s.len + k) * s.inner + i] += acc;
        }
      }
  });
}

Tensor graph_mix(const Tensor& x, const AgentGraph& graph) {
  if (x.ndim() != 3 || x.dim(1) != graph.agents) {
    throw ShapeError("graph_mix: input " + shape_str(x.shape()) + " does not match graph over " +
                     std::to_string(graph.agents) + " agents");
  }
  const std::size_t T = x.dim(0);
  const std::size_t N = x.dim(1);
  const std::size_t C = x.dim(2);
  std::vector<double> out(x.numel(), 0.0);
  const auto& v = x.values();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      double* dst = out.data() + (t * N + i) * C;
      for (std::size_t e = graph.row_begin[i]; e < graph.row_begin[i + 1]; ++e) {
        const double w = graph.weights[e];
        const double* src = v.data() + (t * N + graph.cols[e]) * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += w * src[c];
      }
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), "graph_mix", {x},
                             [graph, T, N, C](Node& self) {
                               Node& n = in(self, 0);
                               for (std::size_t t = 0; t < T; ++t)
                                 for (std::size_t i = 0; i < N; ++i) {
                                   const double* g = self.grad.data() + (t * N + i) * C;
                                   for (std::size_t e = graph.row_begin[i]; e < graph.row_begin[i + 1]; ++e) {
                                     const double w = graph.weights[e];
                                     double* dst = n.grad.data() + (t * N + graph.cols[e]) * C;
                                     for (std::size_t c = 0; c < C; ++c) dst[c] += w * g[c];
                                   }
                                 }
                             });
}

}  // namespace ops
}  // namespace satp
