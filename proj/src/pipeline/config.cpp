#include "satp/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "satp/error.hpp"
#include "satp/eval/eval.hpp"

namespace satp {

TrainConfig::TrainConfig() {
  predictor.feature_channels = 32;
  predictor.hidden = 32;
  selfaware.hidden = 32;
  sync();
}

void TrainConfig::sync() {
  selfaware.feature_channels = predictor.feature_channels;
  selfaware.future_len = predictor.future_len;
  selfaware.increment_scale = predictor.position_scale;
  selfaware.rate_hz = 2.0;
}

void TrainConfig::validate() const {
  generator.validate();
  predictor.validate();
  selfaware.validate();
  if (selfaware.feature_channels != predictor.feature_channels ||
      selfaware.future_len != predictor.future_len) {
    throw UsageError("config: selfaware dimensions do not match the predictor");
  }
  if (batch_size == 0) throw UsageError("config: batch_size must be positive");
  if (data.stride == 0) throw UsageError("config: data.stride must be positive");
  if (!(data.train_fraction > 0 && data.train_fraction < 1)) {
    throw UsageError("config: data.train_fraction must lie in (0, 1)");
  }
  if (!(data.val_fraction >= 0 && data.val_fraction < 1)) {
    throw UsageError("config: data.val_fraction must lie in [0, 1)");
  }
  for (const auto* s : {&stage1, &stage2, &joint, &baseline}) {
    if (!(s->lr > 0) || s->step_size == 0 || !(s->gamma > 0)) {
      throw UsageError("config: stage learning rate, step_size and gamma must be positive");
    }
  }
  if (!(lambda > 0)) throw UsageError("config: lambda must be positive");
  if (!(mu_ce_weight >= 0)) throw UsageError("config: mu_ce_weight must be non-negative");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw UsageError("config: dropout_rate must lie in [0, 1)");
  if (mc_samples == 0 || ensemble_members == 0) {
    throw UsageError("config: mc_samples and ensemble_members must be positive");
  }
  if (eval.timing_frames < kMinTimedFrames || eval.timing_warmup < kMinWarmupFrames) {
    throw UsageError("config: timing needs at least 100 frames after 10 warmup frames");
  }
  if (!eval.grid.empty()) {
    // reuses the grid checks of the metric code
    aucoc_random({1.0}, eval.grid);
  }
}

AeConfig TrainConfig::ae() const {
  AeConfig a;
  a.feature_channels = predictor.feature_channels;
  a.hidden = predictor.hidden;
  a.rnn_layers = predictor.rnn_layers;
  a.history_len = predictor.history_len;
  a.position_scale = predictor.position_scale;
  return a;
}

std::vector<double> TrainConfig::grid() const { return eval.grid.empty() ? default_grid() : eval.grid; }

namespace {

// Reads keys of one table and remembers which ones were consumed.
class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      dst = expect<bool>(*node, key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      dst = expect<std::string>(*node, key, "a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto i = node->value_exact<std::int64_t>()) {
        dst = static_cast<double>(*i);
      } else {
        dst = expect<double>(*node, key, "a number");
      }
    } else {
      const auto v = expect<std::int64_t>(*node, key, "an integer");
      if (v < 0) throw UsageError("config: " + name(key) + " must be non-negative");
      dst = static_cast<T>(v);
    }
  }

  void read_list(const char* key, std::vector<double>& dst) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) throw UsageError("config: " + name(key) + " must be an array of numbers");
    dst.clear();
    for (const auto& el : *arr) {
      if (auto i = el.value_exact<std::int64_t>()) {
        dst.push_back(static_cast<double>(*i));
      } else if (auto d = el.value_exact<double>()) {
        dst.push_back(*d);
      } else {
        throw UsageError("config: " + name(key) + " must be an array of numbers");
      }
    }
  }

  const toml::table* sub(const char* key) {
    seen_.insert(key);
    if (!table_) return nullptr;
    const toml::node* node = table_->get(key);
    if (!node) return nullptr;
    if (!node->is_table()) throw UsageError("config: " + name(key) + " must be a table");
    return node->as_table();
  }

  void reject_unknown() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.contains(std::string(k.str()))) {
        throw UsageError("config: unknown key '" + name(std::string(k.str())) + "'");
      }
    }
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  T expect(const toml::node& node, const char* key, const char* what) const {
    if (auto v = node.value_exact<T>()) return *v;
    throw UsageError("config: " + name(key) + " must be " + what);
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_stage(Section& parent, const char* key, const std::string& path, StageConfig& s) {
  Section sec(parent.sub(key), path);
  sec.read("epochs", s.epochs);
  sec.read("lr", s.lr);
  sec.read("step_size", s.step_size);
  sec.read("gamma", s.gamma);
  sec.reject_unknown();
}

std::string num(double v) {
  if (!std::isfinite(v)) throw UsageError("config: non-finite value cannot be written");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string stage_toml(const char* name, const StageConfig& s) {
  std::ostringstream o;
  o << "\n[train." << name << "]\n"
    << "epochs = " << s.epochs << "\n"
    << "lr = " << num(s.lr) << "\n"
    << "step_size = " << s.step_size << "\n"
    << "gamma = " << num(s.gamma) << "\n";
  return o.str();
}

std::string model_toml(const PredictorConfig& p) {
  std::ostringstream o;
  o << "\n[model]\n"
    << "history_len = " << p.history_len << "\n"
    << "future_len = " << p.future_len << "\n"
    << "n_max = " << p.n_max << "\n"
    << "d_close = " << num(p.d_close) << "\n"
    << "feature_channels = " << p.feature_channels << "\n"
    << "hidden = " << p.hidden << "\n"
    << "blocks = " << p.blocks << "\n"
    << "kernel = " << p.kernel << "\n"
    << "rnn_layers = " << p.rnn_layers << "\n"
    << "type_channels = " << (p.type_channels ? "true" : "false") << "\n"
    << "position_scale = " << num(p.position_scale) << "\n";
  return o.str();
}

std::string selfaware_toml(const SaConfig& s) {
  std::ostringstream o;
  o << "\n[selfaware]\n"
    << "fusion = " << quoted(std::string(to_string(s.fusion))) << "\n"
    << "estimator = " << quoted(std::string(to_string(s.estimator))) << "\n"
    << "label_form = " << quoted(std::string(to_string(s.label_form))) << "\n"
    << "hidden = " << s.hidden << "\n"
    << "rnn_layers = " << s.rnn_layers << "\n";
  return o.str();
}

}  // namespace

TrainConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream o;
    o << "config: " << e.description() << " at line " << e.source().begin.line;
    throw UsageError(o.str());
  }
  TrainConfig c;
  Section top(&root, "");
  std::int64_t seed = 1;
  top.read("seed", seed);
  c.seed = static_cast<std::uint64_t>(seed);
  top.read("out", c.out);
  {
    Section s(top.sub("data"), "data");
    s.read("csv", c.data.csv);
    s.read("stride", c.data.stride);
    s.read("train_fraction", c.data.train_fraction);
    s.read("val_fraction", c.data.val_fraction);
    s.reject_unknown();
  }
  {
    auto& g = c.generator;
    Section s(top.sub("generator"), "generator");
    std::int64_t gseed = static_cast<std::int64_t>(g.seed);
    s.read("seed", gseed);
    g.seed = static_cast<std::uint64_t>(gseed);
    s.read("records", g.records);
    s.read("duration_s", g.duration_s);
    s.read("agents_per_record", g.agents_per_record);
    std::vector<double> mix(g.type_mix.begin(), g.type_mix.end());
    s.read_list("type_mix", mix);
    if (mix.size() != 4) throw UsageError("config: generator.type_mix needs four weights");
    std::copy(mix.begin(), mix.end(), g.type_mix.begin());
    s.read("hard_fraction", g.hard_fraction);
    s.read("noise_sigma", g.noise_sigma);
    s.read("arm_length", g.arm_length);
    s.read("lane_offset", g.lane_offset);
    s.read("signal_cycle_s", g.signal_cycle_s);
    s.reject_unknown();
  }
  {
    auto& p = c.predictor;
    Section s(top.sub("model"), "model");
    s.read("history_len", p.history_len);
    s.read("future_len", p.future_len);
    s.read("n_max", p.n_max);
    s.read("d_close", p.d_close);
    s.read("feature_channels", p.feature_channels);
    s.read("hidden", p.hidden);
    s.read("blocks", p.blocks);
    s.read("kernel", p.kernel);
    s.read("rnn_layers", p.rnn_layers);
    s.read("type_channels", p.type_channels);
    s.read("position_scale", p.position_scale);
    s.reject_unknown();
  }
  {
    auto& a = c.selfaware;
    Section s(top.sub("selfaware"), "selfaware");
    std::string fusion(to_string(a.fusion)), est(to_string(a.estimator)), form(to_string(a.label_form));
    s.read("fusion", fusion);
    s.read("estimator", est);
    s.read("label_form", form);
    a.fusion = parse_fusion(fusion);
    a.estimator = parse_estimator(est);
    a.label_form = parse_label_form(form);
    s.read("hidden", a.hidden);
    s.read("rnn_layers", a.rnn_layers);
    s.reject_unknown();
  }
  {
    Section s(top.sub("train"), "train");
    s.read("batch_size", c.batch_size);
    s.read("lambda", c.lambda);
    s.read("mu_ce_weight", c.mu_ce_weight);
    s.read("dropout_rate", c.dropout_rate);
    s.read("mc_samples", c.mc_samples);
    s.read("ensemble_members", c.ensemble_members);
    read_stage(s, "stage1", "train.stage1", c.stage1);
    read_stage(s, "stage2", "train.stage2", c.stage2);
    read_stage(s, "joint", "train.joint", c.joint);
    read_stage(s, "baseline", "train.baseline", c.baseline);
    s.reject_unknown();
  }
  {
    Section s(top.sub("eval"), "eval");
    s.read_list("grid", c.eval.grid);
    s.read("measure_timing", c.eval.measure_timing);
    s.read("timing_frames", c.eval.timing_frames);
    s.read("timing_warmup", c.eval.timing_warmup);
    s.reject_unknown();
  }
  top.reject_unknown();
  c.sync();
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_toml(const TrainConfig& c) {
  if (c.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) ||
      c.generator.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw UsageError("config: seeds above 2^63 - 1 cannot be written as TOML integers");
  }
  std::ostringstream o;
  o << "seed = " << c.seed << "\n"
    << "out = " << quoted(c.out) << "\n"
    << "\n[data]\n"
    << "csv = " << quoted(c.data.csv) << "\n"
    << "stride = " << c.data.stride << "\n"
    << "train_fraction = " << num(c.data.train_fraction) << "\n"
    << "val_fraction = " << num(c.data.val_fraction) << "\n";
  const auto& g = c.generator;
  o << "\n[generator]\n"
    << "seed = " << g.seed << "\n"
    << "records = " << g.records << "\n"
    << "duration_s = " << num(g.duration_s) << "\n"
    << "agents_per_record = " << g.agents_per_record << "\n"
    << "type_mix = [" << num(g.type_mix[0]) << ", " << num(g.type_mix[1]) << ", "
    << num(g.type_mix[2]) << ", " << num(g.type_mix[3]) << "]\n"
    << "hard_fraction = " << num(g.hard_fraction) << "\n"
    << "noise_sigma = " << num(g.noise_sigma) << "\n"
    << "arm_length = " << num(g.arm_length) << "\n"
    << "lane_offset = " << num(g.lane_offset) << "\n"
    << "signal_cycle_s = " << num(g.signal_cycle_s) << "\n";
  o << model_toml(c.predictor) << selfaware_toml(c.selfaware);
  o << "\n[train]\n"
    << "batch_size = " << c.batch_size << "\n"
    << "lambda = " << num(c.lambda) << "\n"
    << "mu_ce_weight = " << num(c.mu_ce_weight) << "\n"
    << "dropout_rate = " << num(c.dropout_rate) << "\n"
    << "mc_samples = " << c.mc_samples << "\n"
    << "ensemble_members = " << c.ensemble_members << "\n";
  o << stage_toml("stage1", c.stage1) << stage_toml("stage2", c.stage2)
    << stage_toml("joint", c.joint) << stage_toml("baseline", c.baseline);
  o << "\n[eval]\n"
    << "grid = [";
  for (std::size_t k = 0; k < c.eval.grid.size(); ++k) o << (k ? ", " : "") << num(c.eval.grid[k]);
  o << "]\n"
    << "measure_timing = " << (c.eval.measure_timing ? "true" : "false") << "\n"
    << "timing_frames = " << c.eval.timing_frames << "\n"
    << "timing_warmup = " << c.eval.timing_warmup << "\n";
  return o.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t predictor_digest(const TrainConfig& c) { return fnv1a(model_toml(c.predictor)); }

std::uint64_t selfaware_digest(const TrainConfig& c) {
  return fnv1a(model_toml(c.predictor) + selfaware_toml(c.selfaware));
}

std::uint64_t config_digest(const TrainConfig& c) {
  TrainConfig copy = c;
  copy.out.clear();
  return fnv1a(to_toml(copy));
}

}  // namespace satp
