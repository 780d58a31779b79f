#include "satp/data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>

#include "satp/error.hpp"
#include "satp/numerics/rng.hpp"

namespace satp {

namespace {

constexpr double kDt = 0.1;
constexpr int kEmitEvery = 5;  // 10 Hz sim, 2 Hz output
constexpr double kStopLine = 12.0;
constexpr double kCrosswalk = 9.0;
constexpr double kPi = 3.14159265358979323846;

// Arms: 0 = east (+x), 1 = north (+y), 2 = west, 3 = south.
Vec2 arm_dir(int arm) {
  switch (arm & 3) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
  }
}
// Left normal of a direction.
Vec2 left_of(Vec2 d) { return {-d.y, d.x}; }
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct Segment {
  Vec2 p0, c, p1;
  bool curved = false;
  double start = 0, length = 0;
  std::vector<double> table;  // cumulative arc length at uniform parameter steps
};

class Path {
 public:
  void line(Vec2 a, Vec2 b) {
    Segment s{a, a, b, false, total_, norm(b - a), {}};
    total_ += s.length;
    segs_.push_back(std::move(s));
  }
  void bezier(Vec2 a, Vec2 c, Vec2 b) {
    Segment s{a, c, b, true, total_, 0, {}};
    constexpr int kSteps = 64;
    s.table.push_back(0);
    Vec2 prev = a;
    for (int i = 1; i <= kSteps; ++i) {
      Vec2 p = eval(s, static_cast<double>(i) / kSteps);
      s.length += norm(p - prev);
      s.table.push_back(s.length);
      prev = p;
    }
    total_ += s.length;
    segs_.push_back(std::move(s));
  }
  double length() const { return total_; }

  // Position and unit tangent; s outside [0, length] extrapolates linearly.
  std::pair<Vec2, Vec2> at(double s) const {
    const Segment* seg = &segs_.front();
    for (const auto& g : segs_) {
      if (s >= g.start) seg = &g;
    }
    double local = s - seg->start;
    if (!seg->curved) {
      Vec2 d = (1.0 / seg->length) * (seg->p1 - seg->p0);
      return {seg->p0 + local * d, d};
    }
    if (local > seg->length) {
      Vec2 d = tangent(*seg, 1.0);
      return {seg->p1 + (local - seg->length) * d, d};
    }
    const auto& tb = seg->table;
    auto it = std::upper_bound(tb.begin(), tb.end(), local);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - tb.begin()), tb.size() - 1);
    i = std::max<std::size_t>(i, 1);
    const double frac = (local - tb[i - 1]) / (tb[i] - tb[i - 1]);
    const double u = (static_cast<double>(i - 1) + frac) / static_cast<double>(tb.size() - 1);
    return {eval(*seg, u), tangent(*seg, u)};
  }

  bool curved_near(double s, double lookahead) const {
    for (const auto& g : segs_) {
      if (g.curved && s + lookahead >= g.start && s <= g.start + g.length) return true;
    }
    return false;
  }

 private:
  static Vec2 eval(const Segment& s, double u) {
    const double a = (1 - u) * (1 - u), b = 2 * u * (1 - u), c = u * u;
    return {a * s.p0.x + b * s.c.x + c * s.p1.x, a * s.p0.y + b * s.c.y + c * s.p1.y};
  }
  static Vec2 tangent(const Segment& s, double u) {
    Vec2 d = 2 * (1 - u) * (s.c - s.p0) + 2 * u * (s.p1 - s.c);
    return (1.0 / norm(d)) * d;
  }

  std::vector<Segment> segs_;
  double total_ = 0;
};

enum class Event { None, SuddenStop, RedLightRun, Swerve, Reversal, Run, Jaywalk };

struct Idm {
  double v0, a, b, T, s0, len;
};

struct Agent {
  AgentType type;
  bool hard = false;
  int entry = 0;
  int lane_group = 0;  // agents sharing a group interact car-following style
  Path path;
  double stop_s = 0;  // waiting position before the conflict zone
  bool ns_phase = true;
  Idm idm{};
  double turn_speed = 1e9;
  double spawn_t = 0;
  // Lateral weave.
  double weave_amp = 0, weave_omega = 0, weave_phase = 0;

  // Dynamic state.
  bool spawned = false, done = false;
  double s = 0, v = 0;
  double v0_scale = 1.0;
  Event mode = Event::None;
  double mode_until = 0;
  double next_event_t = 0;
  // Swerve: lateral offset moves smoothly from lat_from to lat_to over [t0, t1].
  double lat_from = 0, lat_to = 0, lat_t0 = 0, lat_t1 = 0;

  Track track;
};

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3 - 2 * u);
}

bool green(bool ns_phase, double t, double cycle) {
  const double phase = std::fmod(t, cycle);
  const double half = cycle / 2;
  const double amber = std::min(3.0, half / 4);
  if (ns_phase) return phase < half - amber;
  return phase >= half && phase < cycle - amber;
}

void build_vehicle_path(Agent& a, const GeneratorConfig& cfg, int manoeuvre, double extra_offset) {
  const Vec2 out_dir = arm_dir(a.entry);   // entry arm direction from center
  const Vec2 heading = -1.0 * out_dir;      // travel direction on approach
  const double off = cfg.lane_offset + extra_offset;
  // Right-hand traffic: approach lane is to the right of heading.
  const Vec2 right = -1.0 * left_of(heading);
  const Vec2 start = cfg.arm_length * out_dir + off * right;
  const Vec2 stop = kStopLine * out_dir + off * right;
  int exit_arm;
  if (manoeuvre == 0) exit_arm = (a.entry + 2) & 3;
  else if (manoeuvre == 1) exit_arm = (a.entry + 3) & 3;  // left turn
  else exit_arm = (a.entry + 1) & 3;                      // right turn
  const Vec2 ex_dir = arm_dir(exit_arm);
  const Vec2 ex_right = -1.0 * left_of(ex_dir);
  const Vec2 ex_start = kStopLine * ex_dir + off * ex_right;
  const Vec2 ex_end = cfg.arm_length * ex_dir + off * ex_right;
  a.path.line(start, stop);
  if (manoeuvre == 0) {
    a.path.line(stop, ex_start);
  } else {
    // Control point where the two lane center lines cross.
    const Vec2 d1 = heading, d2 = ex_dir;
    const double den = d1.x * d2.y - d1.y * d2.x;
    const Vec2 w = ex_start - stop;
    const double t = (w.x * d2.y - w.y * d2.x) / den;
    a.path.bezier(stop, stop + t * d1, ex_start);
  }
  a.path.line(ex_start, ex_end);
  a.stop_s = cfg.arm_length - kStopLine;
  a.ns_phase = (a.entry & 1) == 1;
  a.lane_group = a.entry * 4 + (extra_offset > 0 ? 1 : 0);
}

void build_pedestrian_path(Agent& a, const GeneratorConfig& cfg, int side, Rng& rng) {
  const Vec2 d = arm_dir(a.entry);
  const Vec2 n = left_of(d);
  const double half_road = 2 * cfg.lane_offset + 1.5;
  const double curb = half_road + 1.0;
  const double sign = side == 0 ? 1.0 : -1.0;
  const double far = rng.uniform(12.0, 25.0);
  const Vec2 p0 = far * d + (-sign * curb) * n;
  const Vec2 p1 = kCrosswalk * d + (-sign * curb) * n;
  const Vec2 p2 = kCrosswalk * d + (sign * curb) * n;
  const Vec2 p3 = rng.uniform(12.0, 25.0) * d + (sign * curb) * n;
  a.path.line(p0, p1);
  a.path.line(p1, p2);
  a.path.line(p2, p3);
  a.stop_s = far - kCrosswalk;
  // Crossing an east/west arm runs parallel to north/south traffic.
  a.ns_phase = (a.entry & 1) == 0;
  a.lane_group = 100 + a.entry * 2 + side;
}

Idm idm_for(AgentType type, Rng& rng) {
  switch (type) {
    case AgentType::SmallVehicle: return {rng.uniform(11.0, 14.0), 2.0, 3.0, 1.2, 2.0, 4.5};
    case AgentType::BigVehicle: return {rng.uniform(8.0, 11.0), 1.2, 2.5, 1.6, 3.0, 10.0};
    case AgentType::Pedestrian: return {rng.uniform(1.1, 1.6), 1.0, 2.0, 0.5, 0.5, 0.5};
    case AgentType::TwoWheeler: return {rng.uniform(5.0, 8.0), 1.5, 2.5, 1.0, 1.5, 1.8};
  }
  return {};
}

double pick_time(Rng& rng, double lo, double hi) { return rng.uniform(lo, hi); }

void schedule_event(Agent& a, double t, Rng& rng) {
  a.next_event_t = t + pick_time(rng, 1.0, 3.0);
}

void start_event(Agent& a, double t, Rng& rng) {
  std::vector<Event> kinds;
  if (a.type == AgentType::Pedestrian) {
    kinds = {Event::SuddenStop, Event::Reversal, Event::Run, Event::Jaywalk};
  } else {
    kinds = {Event::SuddenStop, Event::RedLightRun, Event::Swerve};
  }
  const Event e = kinds[rng.below(kinds.size())];
  switch (e) {
    case Event::SuddenStop:
      a.mode = e;
      a.mode_until = t + rng.uniform(1.5, 3.0);
      break;
    case Event::RedLightRun:
      a.mode = e;
      a.v0_scale = rng.uniform(1.5, 1.9);
      a.mode_until = t + rng.uniform(2.0, 4.0);
      break;
    case Event::Run:
      a.mode = e;
      a.v0_scale = rng.uniform(2.0, 2.8);
      a.mode_until = t + rng.uniform(2.0, 4.0);
      break;
    case Event::Reversal:
      a.mode = e;
      a.mode_until = t + rng.uniform(2.0, 3.5);
      break;
    case Event::Swerve:
    case Event::Jaywalk: {
      const double amp = (e == Event::Swerve ? rng.uniform(3.0, 5.0) : rng.uniform(3.0, 5.0)) *
                         (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const double cur = a.lat_to;
      a.lat_from = cur;
      a.lat_to = std::abs(cur) > 0.5 ? 0.0 : amp;
      a.lat_t0 = t;
      a.lat_t1 = t + (e == Event::Swerve ? rng.uniform(0.8, 1.4) : rng.uniform(1.5, 2.5));
      a.mode_until = a.lat_t1;
      break;
    }
    case Event::None: break;
  }
}

double lateral(const Agent& a, double t) {
  double lat = a.weave_amp * std::sin(a.weave_omega * t + a.weave_phase);
  if (a.lat_t1 > a.lat_t0) {
    lat += a.lat_from + (a.lat_to - a.lat_from) * smoothstep((t - a.lat_t0) / (a.lat_t1 - a.lat_t0));
  }
  return lat;
}

double idm_accel(const Idm& p, double v, double v0, double gap, double dv) {
  double acc = p.a * (1.0 - std::pow(std::max(v, 0.0) / v0, 4));
  if (gap < 1e8) {
    const double star = p.s0 + std::max(0.0, v * p.T + v * dv / (2 * std::sqrt(p.a * p.b)));
    const double g = std::max(gap, 0.1);
    acc -= p.a * (star / g) * (star / g);
  }
  return acc;
}

void simulate_record(const GeneratorConfig& cfg, std::size_t record_index,
                     const std::vector<bool>& hard_flags, std::size_t first_agent, Record& out) {
  Rng rng = Rng(cfg.seed).fork("record").fork(record_index);
  std::vector<double> cum(4);
  std::partial_sum(cfg.type_mix.begin(), cfg.type_mix.end(), cum.begin());

  std::vector<Agent> agents(cfg.agents_per_record);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    Agent& a = agents[i];
    const double u = rng.uniform() * cum.back();
    std::size_t ti = 0;
    while (ti + 1 < 4 && u >= cum[ti]) ++ti;
    a.type = kAgentTypes[ti];
    a.hard = hard_flags[first_agent + i];
    a.entry = static_cast<int>(rng.below(4));
    a.idm = idm_for(a.type, rng);
    a.spawn_t = rng.uniform(0.0, cfg.duration_s * 0.8);
    if (a.type == AgentType::Pedestrian) {
      build_pedestrian_path(a, cfg, static_cast<int>(rng.below(2)), rng);
      a.weave_amp = rng.uniform(0.05, 0.2);
      a.weave_omega = rng.uniform(0.8, 1.6);
      a.weave_phase = rng.uniform(0.0, 2 * kPi);
    } else {
      const double r = rng.uniform();
      const int manoeuvre = r < 0.5 ? 0 : (r < 0.75 ? 1 : 2);
      const double extra = a.type == AgentType::TwoWheeler ? 1.4 : 0.0;
      build_vehicle_path(a, cfg, manoeuvre, extra);
      a.turn_speed = a.type == AgentType::TwoWheeler ? 4.5 : (manoeuvre == 2 ? 5.0 : 7.0);
      if (a.type == AgentType::TwoWheeler) {
        a.weave_amp = rng.uniform(0.05, 0.25);
        a.weave_omega = rng.uniform(0.4, 0.9);
        a.weave_phase = rng.uniform(0.0, 2 * kPi);
      }
    }
    a.track.track_id = static_cast<std::int64_t>(i + 1);
    a.track.type = a.type;
    a.track.hard = a.hard;
    if (a.hard) a.next_event_t = a.spawn_t + rng.uniform(1.0, 4.0);
  }

  const auto steps = static_cast<std::int64_t>(std::llround(cfg.duration_s / kDt));
  for (std::int64_t step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * kDt;

    for (auto& a : agents) {
      if (a.spawned || a.done || t < a.spawn_t) continue;
      a.spawned = true;
      a.v = a.idm.v0;
      // Back off behind the last agent of the same lane group.
      double min_s = 0;
      for (const auto& o : agents) {
        if (&o == &a || !o.spawned || o.done || o.lane_group != a.lane_group) continue;
        min_s = std::min(min_s, o.s - (o.idm.len + a.idm.len) / 2 - a.idm.s0 - a.idm.T * a.v);
        a.v = std::min(a.v, std::max(o.v, 0.0));
      }
      a.s = min_s;
    }

    if (step % kEmitEvery == 0) {
      for (auto& a : agents) {
        if (!a.spawned || a.done) continue;
        auto [pos, tan] = a.path.at(a.s);
        const Vec2 p = pos + lateral(a, t) * left_of(tan);
        double x = p.x, y = p.y;
        if (cfg.noise_sigma > 0) {
          x += rng.normal(0.0, cfg.noise_sigma);
          y += rng.normal(0.0, cfg.noise_sigma);
        }
        a.track.points.push_back({step / kEmitEvery, t, x, y});
      }
    }
    if (step == steps) break;

    // Longitudinal update, computed from the state at t for every agent.
    std::vector<double> acc(agents.size(), 0.0);
    for (std::size_t i = 0; i < agents.size(); ++i) {
      Agent& a = agents[i];
      if (!a.spawned || a.done) continue;
      if (a.hard && t >= a.next_event_t && t >= a.mode_until) {
        start_event(a, t, rng);
        schedule_event(a, a.mode_until, rng);
      }
      if (a.mode != Event::None && t >= a.mode_until) {
        a.mode = Event::None;
        a.v0_scale = 1.0;
      }
      if (a.mode == Event::SuddenStop) {
        acc[i] = a.v > 0 ? -std::min(7.0, a.v / kDt) : 0.0;
        continue;
      }
      if (a.mode == Event::Reversal) {
        const double target = -a.idm.v0;
        acc[i] = std::clamp((target - a.v) / kDt, -3.0, 3.0);
        continue;
      }
      const bool boosted = a.mode == Event::RedLightRun || a.mode == Event::Run;
      Idm idm = a.idm;
      if (boosted) idm.a *= 2.0;
      double v0 = a.idm.v0 * a.v0_scale;
      if (a.path.curved_near(a.s, 15.0)) v0 = std::min(v0, a.turn_speed);
      double gap = 1e9, dv = 0;
      for (const auto& o : agents) {
        if (&o == &a || !o.spawned || o.done || o.lane_group != a.lane_group || o.s <= a.s) continue;
        const double g = o.s - a.s - (o.idm.len + a.idm.len) / 2;
        if (g < gap) {
          gap = g;
          dv = a.v - o.v;
        }
      }
      if (!boosted && a.s < a.stop_s && !green(a.ns_phase, t, cfg.signal_cycle_s)) {
        const double dist = a.stop_s - a.s - a.idm.len / 2;
        // Stop only if a comfortable stop is still possible.
        if (dist >= a.v * a.v / (2 * 4.0) - 0.5 && dist < gap) {
          gap = dist;
          dv = a.v;
        }
      }
      const double bmax = a.type == AgentType::Pedestrian ? 3.0 : 8.0;
      acc[i] = std::clamp(idm_accel(idm, a.v, v0, gap, dv), -bmax, 2.5 * idm.a);
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      Agent& a = agents[i];
      if (!a.spawned || a.done) continue;
      double v1 = a.v + acc[i] * kDt;
      if (a.mode != Event::Reversal && a.v >= 0 && v1 < 0) v1 = 0;
      a.s += 0.5 * (a.v + v1) * kDt;
      a.v = v1;
      if (a.s >= a.path.length()) a.done = true;
    }
  }

  char id[32];
  std::snprintf(id, sizeof id, "rec%03zu", record_index);
  out.record_id = id;
  out.rate_hz = 2.0;
  for (auto& a : agents) out.tracks.push_back(std::move(a.track));
}

}  // namespace

void GeneratorConfig::validate() const {
  if (records == 0 || agents_per_record == 0) throw UsageError("generator: zero agents requested");
  if (!(duration_s > 0)) throw UsageError("generator: duration_s must be positive");
  if (!(hard_fraction >= 0 && hard_fraction <= 1)) {
    throw UsageError("generator: hard_fraction must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0)) throw UsageError("generator: noise_sigma must be >= 0");
  double total = 0;
  for (double w : type_mix) {
    if (!(w >= 0)) throw UsageError("generator: type_mix weights must be >= 0");
    total += w;
  }
  if (!(total > 0)) throw UsageError("generator: type_mix has no positive weight");
  if (!(arm_length > kStopLine + 5)) throw UsageError("generator: arm_length too short");
  if (!(lane_offset > 0)) throw UsageError("generator: lane_offset must be positive");
  if (!(signal_cycle_s > 4)) throw UsageError("generator: signal_cycle_s must exceed 4 s");
}

std::vector<Record> generate(const GeneratorConfig& config) {
  config.validate();
  const std::size_t total = config.records * config.agents_per_record;
  const auto n_hard = static_cast<std::size_t>(
      std::llround(config.hard_fraction * static_cast<double>(total)));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  Rng hard_rng = Rng(config.seed).fork("hard");
  hard_rng.shuffle(order);
  std::vector<bool> hard(total, false);
  for (std::size_t i = 0; i < n_hard; ++i) hard[order[i]] = true;

  std::vector<Record> records(config.records);
  for (std::size_t r = 0; r < config.records; ++r) {
    simulate_record(config, r, hard, r * config.agents_per_record, records[r]);
  }
  return records;
}

}  // namespace satp
