#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "satp/cli/cli.hpp"

using namespace satp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

const char* kTiny = R"(seed = 3
[data]
stride = 3
train_fraction = 0.5
[generator]
records = 4
duration_s = 16.0
agents_per_record = 10
[model]
n_max = 8
feature_channels = 6
hidden = 6
blocks = 1
[selfaware]
hidden = 6
[train]
batch_size = 8
mc_samples = 2
ensemble_members = 2
[train.stage1]
epochs = 1
[train.stage2]
epochs = 1
[train.baseline]
epochs = 1
)";

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("satp_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
    std::ofstream(path / "tiny.toml") << kTiny;
  }
  ~TempDir() { fs::remove_all(path); }
  std::string cfg() const { return (path / "tiny.toml").string(); }
  std::string sub(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"print-config", "--seed", "abc"}).code == kExitUsage);
  TempDir t;
  std::ofstream(t.path / "bad.toml") << "nonsense_key = 1\n";
  const Result r = run({"print-config", "--config", t.sub("bad.toml")});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("print-config") != std::string::npos);
  CHECK(run({"evaluate", "--config", t.cfg(), "--out", t.sub("o"), "--method", "nope"}).code == kExitUsage);
}

TEST_CASE("print-config output parses back to the same configuration") {
  TempDir t;
  const Result a = run({"print-config", "--config", t.cfg(), "--seed", "9"});
  REQUIRE(a.code == 0);
  std::ofstream(t.path / "p.toml") << a.out;
  const Result b = run({"print-config", "--config", t.sub("p.toml")});
  CHECK(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("seed = 9") != std::string::npos);
  CHECK(run({"print-config"}).code == 0);
}

TEST_CASE("missing inputs exit 2 and name the file") {
  TempDir t;
  const Result r = run({"evaluate", "--config", t.cfg(), "--out", t.sub("o")});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("predictor.ckpt") != std::string::npos);
  CHECK(r.err.find("evaluate") != std::string::npos);
  CHECK(run({"train-selfaware", "--config", t.cfg(), "--out", t.sub("o")}).code == kExitData);
  CHECK(run({"print-config", "--config", t.sub("absent.toml")}).code == kExitData);
  CHECK(run({"report", "--out", t.sub("o")}).code == kExitData);
}

TEST_CASE("gen-data is byte-identical across runs") {
  TempDir t;
  REQUIRE(run({"gen-data", "--config", t.cfg(), "--seed", "7", "--out", t.sub("d1")}).code == 0);
  REQUIRE(run({"gen-data", "--config", t.cfg(), "--seed", "7", "--out", t.sub("d2")}).code == 0);
  REQUIRE(run({"gen-data", "--config", t.cfg(), "--seed", "8", "--out", t.sub("d3")}).code == 0);
  CHECK(slurp(t.path / "d1/data.csv") == slurp(t.path / "d2/data.csv"));
  CHECK(slurp(t.path / "d1/data.csv") != slurp(t.path / "d3/data.csv"));
}

TEST_CASE("train, evaluate and report write the documented artifacts") {
  TempDir t;
  const std::string out = t.sub("o");
  for (const char* cmd : {"train-predictor", "train-selfaware"}) {
    REQUIRE(run({cmd, "--config", t.cfg(), "--out", out, "--quiet"}).code == 0);
  }
  REQUIRE(run({"train-baseline", "--config", t.cfg(), "--out", out, "--method", "mu", "--quiet"}).code == 0);
  REQUIRE(run({"evaluate", "--config", t.cfg(), "--out", out, "--method", "ours", "--method", "mu", "--quiet"})
              .code == 0);
  for (const char* m : {"ours", "mu"}) {
    CHECK(fs::exists(t.path / "o" / metrics_filename(m)));
    CHECK(slurp(t.path / "o" / cutoff_filename(m, "ade")).rfind("fraction,remaining_mean_error_m\n", 0) == 0);
    CHECK(fs::exists(t.path / "o" / cutoff_filename(m, "fde")));
  }
  const Result r = run({"report", "--out", out});
  CHECK(r.code == 0);
  CHECK(r.out.find("| ours |") < r.out.find("| mu |"));
  CHECK(r.out == slurp(t.path / "o" / "report.md"));
}

TEST_CASE("SATP_THREADS must be a positive integer") {
  ::setenv("SATP_THREADS", "0", 1);
  CHECK(run({"print-config"}).code == kExitUsage);
  ::setenv("SATP_THREADS", "4", 1);
  CHECK(run({"print-config"}).code == 0);
  ::unsetenv("SATP_THREADS");
}
