#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "satp/numerics/tensor.hpp"

namespace satp {

// Named learnable tensors plus non-learnable state buffers (e.g. batch-norm
// running statistics). Iteration is lexicographic by name. Copies are deep.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Tensor& add(const std::string& name, Tensor value);
  Tensor& add_buffer(const std::string& name, Tensor value);

  const Tensor& get(const std::string& name) const;
  Tensor& buffer(const std::string& name);
  const Tensor& buffer(const std::string& name) const;
  bool contains(const std::string& name) const;
  bool contains_buffer(const std::string& name) const;

  const std::map<std::string, Tensor>& parameters() const { return params_; }
  const std::map<std::string, Tensor>& buffers() const { return buffers_; }
  std::map<std::string, Tensor>& mutable_parameters() { return params_; }
  std::map<std::string, Tensor>& mutable_buffers() { return buffers_; }

  void zero_grad();
  // Number of learnable scalars; buffers are not counted.
  std::size_t count() const;

  // Frozen sets stop tracking gradients and refuse optimizer updates.
  void freeze();
  void unfreeze();
  bool frozen() const { return frozen_; }

  // Bit-level digest over names, shapes and raw values of parameters and
  // buffers.
  std::uint64_t digest() const;

  // Copies every tensor of `other` under `prefix + name`.
  void merge(const std::string& prefix, const ParameterSet& other);
  // Extracts the tensors whose names start with `prefix`, stripping it.
  ParameterSet extract(const std::string& prefix) const;

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> buffers_;
  bool frozen_ = false;
};

}  // namespace satp
