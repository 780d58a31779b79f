#include "satp/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "satp/error.hpp"
#include "satp/numerics/rng.hpp"

namespace satp {

namespace {

constexpr std::array<std::string_view, 7> kColumns{"record_id", "track_id",   "frame", "timestamp_ms",
                                                   "agent_type", "x", "y"};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void row_error(std::size_t line, const std::string& what) {
  throw DataError("csv line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* column) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    row_error(line, std::string("cannot parse ") + column + " from '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(AgentType type) {
  switch (type) {
    case AgentType::SmallVehicle: return "small_vehicle";
    case AgentType::BigVehicle: return "big_vehicle";
    case AgentType::Pedestrian: return "pedestrian";
    case AgentType::TwoWheeler: return "two_wheeler";
  }
  return "unknown";
}

AgentType parse_agent_type(std::string_view name) {
  for (auto t : kAgentTypes) {
    if (to_string(t) == name) return t;
  }
  throw DataError("unknown agent_type '" + std::string(name) + "'");
}

std::size_t type_index(AgentType type) { return static_cast<std::size_t>(type); }

std::vector<Record> parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return {};
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    auto header = split_commas(line);
    for (auto col : kColumns) {
      if (std::find(header.begin(), header.end(), col) == header.end()) {
        throw DataError("csv header: missing column '" + std::string(col) + "'");
      }
    }
    if (header.size() != kColumns.size()) {
      throw DataError("csv header: expected " + std::to_string(kColumns.size()) + " columns");
    }
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
      if (header[i] != kColumns[i]) {
        throw DataError("csv header: column " + std::to_string(i + 1) + " must be '" +
                        std::string(kColumns[i]) + "'");
      }
    }
  }

  std::map<std::string, std::map<std::int64_t, Track>> grouped;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_commas(line);
    if (cells.size() != kColumns.size()) {
      row_error(line_no, "expected " + std::to_string(kColumns.size()) + " fields, got " +
                             std::to_string(cells.size()));
    }
    if (cells[0].empty()) row_error(line_no, "empty record_id");
    const auto track_id = parse_number<std::int64_t>(cells[1], line_no, "track_id");
    const auto frame = parse_number<std::int64_t>(cells[2], line_no, "frame");
    const auto ts_ms = parse_number<std::int64_t>(cells[3], line_no, "timestamp_ms");
    AgentType type;
    try {
      type = parse_agent_type(cells[4]);
    } catch (const DataError& e) {
      row_error(line_no, e.what());
    }
    const double x = parse_number<double>(cells[5], line_no, "x");
    const double y = parse_number<double>(cells[6], line_no, "y");
    if (!std::isfinite(x) || !std::isfinite(y)) row_error(line_no, "non-finite coordinate");

    auto& tracks = grouped[std::string(cells[0])];
    auto [it, inserted] = tracks.try_emplace(track_id);
    Track& track = it->second;
    if (inserted) {
      track.track_id = track_id;
      track.type = type;
    } else if (track.type != type) {
      row_error(line_no, "agent_type changes within track " + std::to_string(track_id));
    }
    if (!track.points.empty() && frame <= track.points.back().frame) {
      row_error(line_no, frame == track.points.back().frame
                             ? "duplicated frame " + std::to_string(frame) + " in track " +
                                   std::to_string(track_id)
                             : "non-monotone frame " + std::to_string(frame) + " in track " +
                                   std::to_string(track_id));
    }
    track.points.push_back({frame, static_cast<double>(ts_ms) / 1000.0, x, y});
  }

  std::vector<Record> records;
  for (auto& [id, tracks] : grouped) {
    Record r;
    r.record_id = id;
    r.rate_hz = 0.0;
    for (auto& [tid, track] : tracks) r.tracks.push_back(std::move(track));
    // Infer the sampling rate from the median frame spacing in time.
    std::vector<double> dts;
    for (const auto& t : r.tracks)
      for (std::size_t i = 1; i < t.points.size(); ++i) {
        const double dt = (t.points[i].time_s - t.points[i - 1].time_s) /
                          static_cast<double>(t.points[i].frame - t.points[i - 1].frame);
        if (dt > 0) dts.push_back(dt);
      }
    if (!dts.empty()) {
      std::nth_element(dts.begin(), dts.begin() + static_cast<long>(dts.size() / 2), dts.end());
      r.rate_hz = 1.0 / dts[dts.size() / 2];
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<Record> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file '" + path.string() + "'");
  try {
    return parse_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const std::vector<Record>& records) {
  out << "record_id,track_id,frame,timestamp_ms,agent_type,x,y\n";
  for (const auto& r : records) {
    for (const auto& t : r.tracks) {
      for (const auto& p : t.points) {
        out << r.record_id << ',' << t.track_id << ',' << p.frame << ','
            << static_cast<std::int64_t>(std::llround(p.time_s * 1000.0)) << ',' << to_string(t.type)
            << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
      }
    }
  }
}

void save_csv(const std::filesystem::path& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write csv file '" + path.string() + "'");
  write_csv(out, records);
}

Record resample_2hz(const Record& record, double native_rate_hz) {
  if (!(native_rate_hz >= 2.0)) {
    throw DataError("resample_2hz: native rate " + std::to_string(native_rate_hz) +
                    " Hz is below 2 Hz");
  }
  constexpr double kTick = 0.5;
  const double tolerance = 0.5 / native_rate_hz + 1e-9;
  Record out;
  out.record_id = record.record_id;
  out.rate_hz = 2.0;
  for (const auto& track : record.tracks) {
    Track t;
    t.track_id = track.track_id;
    t.type = track.type;
    t.hard = track.hard;
    const auto& pts = track.points;
    if (!pts.empty()) {
      const auto first = static_cast<std::int64_t>(std::ceil(pts.front().time_s / kTick - 1e-9));
      const auto last = static_cast<std::int64_t>(std::floor(pts.back().time_s / kTick + 1e-9));
      std::size_t j = 0;
      for (std::int64_t k = first; k <= last; ++k) {
        const double tick = static_cast<double>(k) * kTick;
        while (j + 1 < pts.size() && pts[j + 1].time_s <= tick) ++j;
        std::size_t best = j;
        if (j + 1 < pts.size() &&
            std::fabs(pts[j + 1].time_s - tick) < std::fabs(pts[j].time_s - tick)) {
          best = j + 1;
        }
        if (std::fabs(pts[best].time_s - tick) > tolerance) continue;
        t.points.push_back({k, tick, pts[best].x, pts[best].y});
      }
    }
    out.tracks.push_back(std::move(t));
  }
  return out;
}

std::vector<Sample> window_samples(const Record& record, std::size_t history_len,
                                   std::size_t future_len, std::size_t stride) {
  if (stride == 0) throw UsageError("window_samples: stride must be >= 1");
  const auto span = static_cast<std::int64_t>(history_len + future_len);
  std::vector<Sample> samples;
  std::int64_t lo = 0, hi = -1;
  bool any = false;
  for (const auto& t : record.tracks) {
    if (t.points.empty()) continue;
    lo = any ? std::min(lo, t.points.front().frame) : t.points.front().frame;
    hi = any ? std::max(hi, t.points.back().frame) : t.points.back().frame;
    any = true;
  }
  if (!any || hi - lo + 1 < span) return samples;

  for (std::int64_t start = lo; start + span - 1 <= hi; start += static_cast<std::int64_t>(stride)) {
    Sample s;
    s.record_id = record.record_id;
    s.start_frame = start;
    s.history_len = history_len;
    s.future_len = future_len;
    for (const auto& t : record.tracks) {
      const auto& pts = t.points;
      auto it = std::lower_bound(pts.begin(), pts.end(), start,
                                 [](const TrackPoint& p, std::int64_t f) { return p.frame < f; });
      if (it == pts.end() || it->frame != start) continue;
      const auto first = static_cast<std::size_t>(it - pts.begin());
      const auto last = first + static_cast<std::size_t>(span) - 1;
      if (last >= pts.size() || pts[last].frame != start + span - 1) continue;
      s.track_ids.push_back(t.track_id);
      s.types.push_back(t.type);
      s.hard.push_back(t.hard);
      std::vector<Vec2> hist, fut;
      for (std::size_t i = 0; i < history_len; ++i) hist.push_back({pts[first + i].x, pts[first + i].y});
      for (std::size_t i = 0; i < future_len; ++i) {
        const auto& p = pts[first + history_len + i];
        fut.push_back({p.x, p.y});
      }
      s.history.push_back(std::move(hist));
      s.future.push_back(std::move(fut));
      s.history_mask.emplace_back(history_len, true);
      s.future_mask.emplace_back(future_len, true);
    }
    if (s.agents() > 0) samples.push_back(std::move(s));
  }
  return samples;
}

std::pair<std::vector<Record>, std::vector<Record>> split_by_record(
    const std::vector<Record>& records, double train_fraction, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 2) throw DataError("split_by_record: need at least 2 records, got " + std::to_string(n));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("split_by_record: train_fraction must lie in (0, 1)");
  }
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> is_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
  std::pair<std::vector<Record>, std::vector<Record>> out;
  for (std::size_t i = 0; i < n; ++i) (is_train[i] ? out.first : out.second).push_back(records[i]);
  return out;
}

}  // namespace satp
