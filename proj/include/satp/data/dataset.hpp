#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "satp/data/types.hpp"

namespace satp {

// Reads a trajectory log with the header
//   record_id,track_id,frame,timestamp_ms,agent_type,x,y
// Rows are grouped by record then track; frames must strictly increase
// within a track in file order. Errors carry the offending line number.
std::vector<Record> load_csv(const std::filesystem::path& path);
std::vector<Record> parse_csv(std::istream& in);

// Writes records in the same schema, ordered by record, track, frame.
void write_csv(std::ostream& out, const std::vector<Record>& records);
void save_csv(const std::filesystem::path& path, const std::vector<Record>& records);

// For every 0.5 s grid tick, keeps the sample of each track nearest to the
// tick (ties go to the earlier sample) if it lies within half a native
// period. Frames are renumbered to tick indices.
Record resample_2hz(const Record& record, double native_rate_hz);

// Sliding windows of history_len + future_len frames. An agent enters a
// Sample only when present in every frame of the window; windows without
// eligible agents are dropped.
std::vector<Sample> window_samples(const Record& record, std::size_t history_len = 6,
                                   std::size_t future_len = 6, std::size_t stride = 1);

// Record-granular split; n_train = round(fraction * N) clamped to
// [1, N - 1], chosen by a seeded shuffle. Both halves keep input order.
std::pair<std::vector<Record>, std::vector<Record>> split_by_record(
    const std::vector<Record>& records, double train_fraction, std::uint64_t seed);

}  // namespace satp
