#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "satp/data/types.hpp"

namespace satp {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t records = 23;
  double duration_s = 68.0;
  std::size_t agents_per_record = 30;
  // Relative weights in AgentType order.
  std::array<double, 4> type_mix{0.55, 0.10, 0.20, 0.15};
  double hard_fraction = 0.3;
  double noise_sigma = 0.05;
  double arm_length = 80.0;
  double lane_offset = 1.75;
  double signal_cycle_s = 40.0;

  void validate() const;
};

// 4-arm signalized intersection simulated at 10 Hz and emitted at 2 Hz.
// Exactly round(hard_fraction * records * agents_per_record) agents are
// flagged hard; those agents repeatedly perform abrupt maneuvers.
std::vector<Record> generate(const GeneratorConfig& config);

}  // namespace satp
