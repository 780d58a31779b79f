#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "satp/numerics/parameters.hpp"

namespace satp {

// Binary layout, all integers and floats little-endian:
//   "SATP" | u32 version | u32 n_meta | n_meta * (str key, str value)
//   | u32 n_tensors | n_tensors * (u8 kind, str name, u32 ndim, ndim * u64, numel * f64)
// where str is u32 length followed by bytes and kind is 0 for learnable
// tensors and 1 for buffers.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string stage;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t config_digest = 0;
  std::map<std::string, std::string> metadata;  // free-form extras
  ParameterSet params;

  void set_metric(const std::string& key, double value);
  std::optional<double> metric(const std::string& key) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// A set `expected_digest` that differs from the stored one raises DataError
// unless allow_mismatch.
Checkpoint load_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_digest = std::nullopt,
                           bool allow_mismatch = false);

std::string hex64(std::uint64_t v);

}  // namespace satp
