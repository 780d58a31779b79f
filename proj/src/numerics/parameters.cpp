#include "satp/numerics/parameters.hpp"

#include <cstring>

#include "satp/error.hpp"
#include "satp/numerics/rng.hpp"

namespace satp {

ParameterSet::ParameterSet(const ParameterSet& other) : frozen_(other.frozen_) {
  for (const auto& [name, t] : other.params_) params_.emplace(name, t.clone());
  for (const auto& [name, t] : other.buffers_) buffers_.emplace(name, t.clone());
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this != &other) {
    ParameterSet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (params_.count(name) || buffers_.count(name)) {
    throw UsageError("ParameterSet: duplicate name '" + name + "'");
  }
  Tensor leaf = Tensor::from(value.shape(), value.values(), !frozen_);
  return params_.emplace(name, std::move(leaf)).first->second;
}

Tensor& ParameterSet::add_buffer(const std::string& name, Tensor value) {
  if (params_.count(name) || buffers_.count(name)) {
    throw UsageError("ParameterSet: duplicate name '" + name + "'");
  }
  return buffers_.emplace(name, value.detach()).first->second;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("ParameterSet: no parameter named '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw UsageError("ParameterSet: no buffer named '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw UsageError("ParameterSet: no buffer named '" + name + "'");
  return it->second;
}

bool ParameterSet::contains(const std::string& name) const { return params_.count(name) != 0; }

bool ParameterSet::contains_buffer(const std::string& name) const {
  return buffers_.count(name) != 0;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParameterSet::freeze() {
  frozen_ = true;
  for (auto& [name, t] : params_) t.set_requires_grad(false);
}

void ParameterSet::unfreeze() {
  frozen_ = false;
  for (auto& [name, t] : params_) t.set_requires_grad(true);
}

std::uint64_t ParameterSet::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::map<std::string, Tensor>& tensors) {
    for (const auto& [name, t] : tensors) {
      h = fnv1a64(name, h);
      for (auto d : t.shape()) {
        std::uint64_t dim = d;
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&dim), sizeof dim), h);
      }
      const auto& v = t.values();
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)),
                  h);
    }
  };
  feed(params_);
  h = fnv1a64("|buffers|", h);
  feed(buffers_);
  return h;
}

void ParameterSet::merge(const std::string& prefix, const ParameterSet& other) {
  for (const auto& [name, t] : other.params_) add(prefix + name, t);
  for (const auto& [name, t] : other.buffers_) add_buffer(prefix + name, t);
}

ParameterSet ParameterSet::extract(const std::string& prefix) const {
  ParameterSet out;
  for (const auto& [name, t] : params_) {
    if (name.rfind(prefix, 0) == 0) out.add(name.substr(prefix.size()), t);
  }
  for (const auto& [name, t] : buffers_) {
    if (name.rfind(prefix, 0) == 0) out.add_buffer(name.substr(prefix.size()), t);
  }
  return out;
}

}  // namespace satp
