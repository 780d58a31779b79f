#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace satp {

enum class AgentType { SmallVehicle, BigVehicle, Pedestrian, TwoWheeler };

inline constexpr std::array<AgentType, 4> kAgentTypes{
    AgentType::SmallVehicle, AgentType::BigVehicle, AgentType::Pedestrian, AgentType::TwoWheeler};

// CSV spelling: small_vehicle, big_vehicle, pedestrian, two_wheeler.
std::string_view to_string(AgentType type);
// Throws DataError on unknown names.
AgentType parse_agent_type(std::string_view name);
std::size_t type_index(AgentType type);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct TrackPoint {
  std::int64_t frame = 0;
  double time_s = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct Track {
  std::int64_t track_id = 0;
  AgentType type = AgentType::SmallVehicle;
  std::vector<TrackPoint> points;  // strictly increasing frames
  bool hard = false;               // generator metadata; false for loaded logs
};

struct Record {
  std::string record_id;
  double rate_hz = 2.0;
  std::vector<Track> tracks;
};

// One prediction task: every listed agent is present over the whole
// history + future window. Index 0 of `history` is the oldest frame and the
// last history entry is the current moment t = 0.
struct Sample {
  std::string record_id;
  std::int64_t start_frame = 0;
  std::size_t history_len = 6;
  std::size_t future_len = 6;
  std::vector<std::int64_t> track_ids;
  std::vector<AgentType> types;
  std::vector<bool> hard;
  std::vector<std::vector<Vec2>> history;  // [agent][t_h]
  std::vector<std::vector<Vec2>> future;   // [agent][t_f]
  std::vector<std::vector<bool>> history_mask;
  std::vector<std::vector<bool>> future_mask;

  std::size_t agents() const { return track_ids.size(); }
};

}  // namespace satp
