#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "satp/baselines/baselines.hpp"
#include "satp/data/generator.hpp"
#include "satp/predictor/predictor.hpp"
#include "satp/selfaware/selfaware.hpp"

namespace satp {

// Adam learning rate with a StepLR schedule.
struct StageConfig {
  std::size_t epochs = 60;
  double lr = 1e-3;
  std::size_t step_size = 10;
  double gamma = 0.5;
};

struct DataConfig {
  std::string csv;  // empty: synthetic corpus from the generator
  std::size_t stride = 2;
  double train_fraction = 16.0 / 23.0;
  double val_fraction = 0.1;
};

struct EvalConfig {
  std::vector<double> grid;  // empty: default grid
  bool measure_timing = false;
  std::size_t timing_frames = 100;
  std::size_t timing_warmup = 10;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  DataConfig data;
  GeneratorConfig generator;
  PredictorConfig predictor;
  SaConfig selfaware;
  StageConfig stage1;
  StageConfig stage2{40, 1e-3, 10, 0.5};
  StageConfig joint;
  StageConfig baseline;
  std::size_t batch_size = 32;
  double lambda = 0.1;
  double mu_ce_weight = 0.5;
  double dropout_rate = kMcDropoutRate;
  std::size_t mc_samples = kMcSamples;
  std::size_t ensemble_members = kEnsembleMembers;
  EvalConfig eval;

  TrainConfig();
  // Copies the shared dimensions from the predictor into the SA config.
  void sync();
  void validate() const;
  AeConfig ae() const;
  std::vector<double> grid() const;
};

// Throws UsageError on unknown keys or wrong value types.
TrainConfig parse_config(std::string_view toml_text);
TrainConfig load_config(const std::string& path);
// Every key with its effective value; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const TrainConfig& config);

// FNV-1a digests of the canonical TOML of the relevant sections.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t predictor_digest(const TrainConfig& config);
std::uint64_t selfaware_digest(const TrainConfig& config);
std::uint64_t config_digest(const TrainConfig& config);

}  // namespace satp
