#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "satp/data/dataset.hpp"
#include "satp/data/generator.hpp"
#include "satp/error.hpp"

using namespace satp;

namespace {

Record straight_track(std::size_t frames, double rate_hz) {
  Record r;
  r.record_id = "r";
  r.rate_hz = rate_hz;
  Track t;
  t.track_id = 1;
  for (std::size_t f = 0; f < frames; ++f) {
    const double time = static_cast<double>(f) / rate_hz;
    t.points.push_back({static_cast<std::int64_t>(f), time, 2.0 * time, -time});
  }
  r.tracks.push_back(t);
  return r;
}

std::string error_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    parse_csv(in);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

const char* kHeader = "record_id,track_id,frame,timestamp_ms,agent_type,x,y\n";

}  // namespace

TEST_CASE("csv: header only gives no records, one row gives one point") {
  std::istringstream empty(kHeader);
  CHECK(parse_csv(empty).empty());
  std::istringstream one(std::string(kHeader) + "a,3,0,0,pedestrian,1.5,-2\n");
  auto recs = parse_csv(one);
  REQUIRE(recs.size() == 1);
  REQUIRE(recs[0].tracks.size() == 1);
  CHECK(recs[0].tracks[0].type == AgentType::Pedestrian);
  REQUIRE(recs[0].tracks[0].points.size() == 1);
  CHECK(recs[0].tracks[0].points[0].x == 1.5);
}

TEST_CASE("csv: errors carry line numbers") {
  const std::string dup = std::string(kHeader) + "a,1,0,0,small_vehicle,0,0\na,1,0,0,small_vehicle,1,1\n";
  CHECK(error_of(dup).find("line 3") != std::string::npos);
  CHECK(error_of(dup).find("duplicated frame") != std::string::npos);
  const std::string back = std::string(kHeader) + "a,1,4,0,small_vehicle,0,0\na,1,2,0,small_vehicle,1,1\n";
  CHECK(error_of(back).find("line 3") != std::string::npos);
  const std::string bad = std::string(kHeader) + "a,1,0,0,small_vehicle,0,0\na,1,1,0,small_vehicle,abc,1\n";
  CHECK(error_of(bad).find("line 3") != std::string::npos);
  CHECK(error_of(std::string(kHeader) + "a,1,0,0,truck,0,0\n").find("line 2") != std::string::npos);
  CHECK(error_of("record_id,track_id,frame,agent_type,x,y\n").find("timestamp_ms") !=
        std::string::npos);
}

TEST_CASE("csv: write then parse round-trips exactly") {
  GeneratorConfig cfg;
  cfg.records = 2;
  cfg.agents_per_record = 5;
  cfg.duration_s = 20;
  auto recs = generate(cfg);
  std::stringstream buf;
  write_csv(buf, recs);
  auto back = parse_csv(buf);
  REQUIRE(back.size() == recs.size());
  for (std::size_t r = 0; r < recs.size(); ++r) {
    CHECK(back[r].rate_hz == doctest::Approx(2.0));
    REQUIRE(back[r].tracks.size() == recs[r].tracks.size());
    for (std::size_t k = 0; k < recs[r].tracks.size(); ++k) {
      const auto& a = recs[r].tracks[k].points;
      const auto& b = back[r].tracks[k].points;
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].frame == b[i].frame);
      }
    }
  }
}

TEST_CASE("resample: 10 Hz keeps every fifth frame, 2 Hz is identity") {
  auto r10 = straight_track(11, 10.0);
  auto out = resample_2hz(r10, 10.0);
  REQUIRE(out.tracks[0].points.size() == 3);
  CHECK(out.tracks[0].points[0].x == r10.tracks[0].points[0].x);
  CHECK(out.tracks[0].points[1].x == r10.tracks[0].points[5].x);
  CHECK(out.tracks[0].points[2].x == r10.tracks[0].points[10].x);
  CHECK(out.tracks[0].points[2].time_s == 1.0);

  auto r2 = straight_track(7, 2.0);
  auto same = resample_2hz(r2, 2.0);
  REQUIRE(same.tracks[0].points.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(same.tracks[0].points[i].frame == r2.tracks[0].points[i].frame);
    CHECK(same.tracks[0].points[i].x == r2.tracks[0].points[i].x);
  }
  Record empty;
  empty.tracks.push_back(Track{});
  CHECK(resample_2hz(empty, 10.0).tracks[0].points.empty());
  CHECK_THROWS_AS(resample_2hz(r10, 1.0), DataError);
}

TEST_CASE("window: counts and verbatim copies") {
  auto r = straight_track(20, 2.0);
  auto s1 = window_samples(r, 6, 6, 1);
  CHECK(s1.size() == 9);
  CHECK(window_samples(r, 6, 6, 2).size() == 5);
  CHECK(window_samples(straight_track(11, 2.0)).empty());
  for (const auto& s : s1) {
    const auto start = static_cast<std::size_t>(s.start_frame);
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(s.history[0][t].x == r.tracks[0].points[start + t].x);
      CHECK(s.future[0][t].y == r.tracks[0].points[start + 6 + t].y);
    }
  }
}

TEST_CASE("window: agents need full presence") {
  auto r = straight_track(20, 2.0);
  Track partial;
  partial.track_id = 2;
  for (std::int64_t f = 5; f < 20; ++f) partial.points.push_back({f, f * 0.5, 0, 0});
  r.tracks.push_back(partial);
  auto samples = window_samples(r);
  for (const auto& s : samples) {
    CHECK(s.agents() == (s.start_frame >= 5 ? 2u : 1u));
  }
}

TEST_CASE("split: 23 records at 16/23 gives 16/7, deterministic, no leakage") {
  std::vector<Record> recs(23);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].record_id = "r" + std::to_string(i);
  auto [tr, te] = split_by_record(recs, 16.0 / 23.0, 5);
  CHECK(tr.size() == 16);
  CHECK(te.size() == 7);
  auto [tr2, te2] = split_by_record(recs, 16.0 / 23.0, 5);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr[i].record_id == tr2[i].record_id);
    ids.insert(tr[i].record_id);
  }
  for (const auto& r : te) CHECK(ids.count(r.record_id) == 0);
  auto [a, b] = split_by_record(std::vector<Record>(2), 0.5, 1);
  CHECK(a.size() == 1);
  CHECK(b.size() == 1);
  CHECK_THROWS_AS(split_by_record(std::vector<Record>(1), 0.5, 1), DataError);
}

TEST_CASE("generator: deterministic and config validation") {
  GeneratorConfig cfg;
  cfg.records = 3;
  cfg.agents_per_record = 8;
  cfg.duration_s = 30;
  auto a = generate(cfg);
  auto b = generate(cfg);
  std::stringstream sa, sb;
  write_csv(sa, a);
  write_csv(sb, b);
  CHECK(sa.str() == sb.str());
  cfg.seed = 2;
  std::stringstream sc;
  write_csv(sc, generate(cfg));
  CHECK(sc.str() != sa.str());

  GeneratorConfig bad;
  bad.agents_per_record = 0;
  CHECK_THROWS(generate(bad));
  bad = GeneratorConfig{};
  bad.duration_s = 0;
  CHECK_THROWS(generate(bad));
}

TEST_CASE("generator: exact hard count") {
  GeneratorConfig cfg;
  cfg.records = 4;
  cfg.agents_per_record = 25;
  cfg.duration_s = 20;
  cfg.hard_fraction = 0.3;
  std::size_t hard = 0, total = 0;
  for (const auto& r : generate(cfg)) {
    for (const auto& t : r.tracks) {
      hard += t.hard;
      ++total;
    }
  }
  CHECK(total == 100);
  CHECK(hard == 30);
}

TEST_CASE("generator: noiseless easy traffic is kinematic, cruising agents keep constant steps") {
  GeneratorConfig cfg;
  cfg.records = 3;
  cfg.agents_per_record = 20;
  cfg.hard_fraction = 0.0;
  cfg.noise_sigma = 0.0;
  std::size_t constant_tracks = 0;
  for (const auto& r : generate(cfg)) {
    for (const auto& t : r.tracks) {
      if (t.type == AgentType::Pedestrian || t.type == AgentType::TwoWheeler) continue;
      const auto& p = t.points;
      bool constant = p.size() >= 4;
      for (std::size_t i = 2; i < p.size(); ++i) {
        const double ax = p[i].x - 2 * p[i - 1].x + p[i - 2].x;
        const double ay = p[i].y - 2 * p[i - 1].y + p[i - 2].y;
        // Bounded by the strongest braking plus turn curvature over 0.5 s steps.
        CHECK(std::hypot(ax, ay) < 3.0);
        if (std::hypot(ax, ay) > 1e-9) constant = false;
      }
      constant_tracks += constant;
    }
  }
  CHECK(constant_tracks > 0);
}

TEST_CASE("generator: hard agents are at least twice as hard for constant velocity") {
  GeneratorConfig cfg;
  cfg.seed = 11;
  cfg.records = 40;
  cfg.agents_per_record = 25;
  double err[2] = {0, 0};
  std::size_t cnt[2] = {0, 0};
  for (const auto& r : generate(cfg)) {
    for (const auto& s : window_samples(r)) {
      for (std::size_t i = 0; i < s.agents(); ++i) {
        const auto& h = s.history[i];
        const double vx = h[5].x - h[4].x, vy = h[5].y - h[4].y;
        double ade = 0;
        for (std::size_t k = 0; k < 6; ++k) {
          const double px = h[5].x + vx * static_cast<double>(k + 1);
          const double py = h[5].y + vy * static_cast<double>(k + 1);
          ade += std::hypot(px - s.future[i][k].x, py - s.future[i][k].y) / 6.0;
        }
        err[s.hard[i]] += ade;
        ++cnt[s.hard[i]];
      }
    }
  }
  REQUIRE(cnt[0] > 0);
  REQUIRE(cnt[1] > 0);
  const double ratio = (err[1] / cnt[1]) / (err[0] / cnt[0]);
  MESSAGE("hard/easy CV ADE ratio = " << ratio << " (easy " << err[0] / cnt[0] << ")");
  CHECK(ratio >= 2.0);
}
