#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "satp/eval/eval.hpp"
#include "satp/pipeline/checkpoint.hpp"
#include "satp/pipeline/config.hpp"

namespace satp {

using Logger = std::function<void(const std::string&)>;

// ---- data --------------------------------------------------------------------

struct SceneSet {
  std::vector<SceneTensor> scenes;
  std::vector<FixedGraph> graphs;

  std::size_t size() const { return scenes.size(); }
  std::size_t agents() const;
  SceneBatch batch(const std::vector<std::size_t>& indices) const;
  SceneBatch all() const;
};

struct Corpus {
  std::string name;
  std::vector<std::string> train_records;
  std::vector<std::string> test_records;
  SceneSet train;  // after the validation carve-out
  SceneSet val;
  SceneSet test;
};

// Synthetic records from cfg.generator, or the CSV in cfg.data.csv resampled
// to 2 Hz.
std::vector<Record> load_records(const TrainConfig& cfg);
Corpus build_corpus(const std::vector<Record>& records, const TrainConfig& cfg,
                    const std::string& name);
Corpus prepare_corpus(const TrainConfig& cfg);

// ---- training ----------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best validation epoch, or the initialization for zero epochs
  std::vector<EpochLog> log;
};

// Stage names stored in checkpoints.
inline constexpr const char* kStagePredictor = "predictor";
inline constexpr const char* kStageSelfaware = "selfaware";
inline constexpr const char* kStageJoint = "joint";
inline constexpr const char* kStageMu = "mu";
inline constexpr const char* kStageDropout = "dropout";
inline constexpr const char* kStageEnsemble = "ensemble";
inline constexpr const char* kStageAe = "ae";

TrainResult train_stage1(const TrainConfig& cfg, const Corpus& corpus, const Logger& log = {});

// Predictor outputs of a frozen network per scene (present agents only),
// computed once in eval mode.
struct FrozenOutputs {
  std::vector<Tensor> feature;     // (t_h, n_i, C)
  std::vector<Tensor> increments;  // (t_f, n_i, 2)
  std::vector<Tensor> positions;   // (t_f, n_i, 2)
  std::size_t size() const { return feature.size(); }
};
FrozenOutputs run_frozen(const SceneSet& set, ParameterSet& predictor, const PredictorConfig& cfg);

// SA training on precomputed predictor outputs of corpus.train and the
// validation set (corpus.train when the carve-out is empty).
TrainResult train_selfaware_cached(const TrainConfig& cfg, const Corpus& corpus, const FrozenOutputs& train,
                                   const FrozenOutputs& val, const Logger& log = {});

// Trains the SA module against a frozen predictor. Throws Error if any
// predictor tensor changes during the run.
TrainResult train_stage2(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                         const Logger& log = {});

// L_tp + lambda * L_sa
Tensor joint_loss(const Tensor& tp, const Tensor& sa, double lambda);
// Predictor and SA trained together; the checkpoint holds both ("tp." and
// "sa." names).
TrainResult train_joint(const TrainConfig& cfg, const Corpus& corpus, const Logger& log = {});

TrainResult train_mu(const TrainConfig& cfg, const Corpus& corpus, const Logger& log = {});
TrainResult train_dropout(const TrainConfig& cfg, const Corpus& corpus, const Logger& log = {});
TrainResult train_ensemble_member(const TrainConfig& cfg, const Corpus& corpus, std::size_t member,
                                  const Logger& log = {});
TrainResult train_ae(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                     const Logger& log = {});

struct BaselineSet {
  Checkpoint mu;
  Checkpoint dropout;
  std::vector<Checkpoint> ensemble;
  Checkpoint ae;
};
BaselineSet train_baselines(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                            const Logger& log = {});

PredictorConfig mu_predictor_config(const TrainConfig& cfg);

// ---- scoring and reports -----------------------------------------------------

// Per-agent results over a scene set, agents in scene then slot order.
struct ScoredSet {
  std::vector<ScoredSample> samples;
  std::vector<std::vector<double>> step_errors;  // [t][agent]
  std::vector<std::vector<double>> step_diag;    // [t][agent]; empty without per-step diagnostics
  std::vector<double> sa_values;                 // raw ẑ values, SA methods only
};

ScoredSet score_selfaware_cached(const SceneSet& set, const FrozenOutputs& frozen, const ParameterSet& sa,
                                 const TrainConfig& cfg);
ScoredSet score_selfaware(const SceneSet& set, ParameterSet& predictor, const ParameterSet& sa,
                          const TrainConfig& cfg);
ScoredSet score_mu(const SceneSet& set, ParameterSet& mu, const TrainConfig& cfg);
ScoredSet score_mc_dropout(const SceneSet& set, ParameterSet& dropout, const TrainConfig& cfg);
ScoredSet score_ensemble(const SceneSet& set, std::vector<ParameterSet>& members, const TrainConfig& cfg);
ScoredSet score_ae(const SceneSet& set, ParameterSet& predictor, const ParameterSet& ae,
                   const TrainConfig& cfg);

struct EvalReport {
  std::string method;
  std::string dataset;
  std::size_t samples = 0;
  double mean_ade = 0;
  double mean_fde = 0;
  SasResult ade;
  SasResult fde;
  std::vector<SasResult> per_moment;
  std::map<AgentType, TypeRow> per_type;
  std::size_t total_parameters = 0;
  std::optional<double> avg_ms_per_frame;
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  CutoffCurve curve_ade;
  CutoffCurve curve_fde;
};

EvalReport make_report(const std::string& method, const std::string& dataset, const ScoredSet& scored,
                       std::size_t total_parameters, std::optional<double> ms_per_frame,
                       const TrainConfig& cfg);

// Methods understood by evaluate_method and the CLI.
inline const std::vector<std::string> kMethods{"ours", "mu", "mc_dropout", "ensemble", "ae"};

// Checkpoints needed per method: ours {predictor, selfaware}, mu {mu},
// mc_dropout {dropout}, ensemble {ensemble members}, ae {predictor, ae}.
struct ModelBundle {
  std::optional<Checkpoint> predictor;
  std::optional<Checkpoint> selfaware;
  std::optional<Checkpoint> mu;
  std::optional<Checkpoint> dropout;
  std::vector<Checkpoint> ensemble;
  std::optional<Checkpoint> ae;
};

// Median ms per test scene when cfg.eval.measure_timing, otherwise unset.
EvalReport evaluate_method(const std::string& method, const Corpus& corpus, const ModelBundle& models,
                           const TrainConfig& cfg);
// Median ms per scene of the method's full forward (prediction plus
// diagnostic) over the test scenes.
double time_method(const std::string& method, const Corpus& corpus, const ModelBundle& models,
                   const TrainConfig& cfg);

// Fixed key order, floats as %.17g, undefined values as null.
std::string report_json(const EvalReport& report);
// "fraction,remaining_mean_error_m" rows.
std::string curve_csv(const CutoffCurve& curve);
// Table I shape: one row per report.
std::string comparison_table(const std::vector<EvalReport>& reports);
std::vector<EvalReport> read_reports(const std::vector<std::string>& json_texts);

// ---- ablations ---------------------------------------------------------------

struct AblationRow {
  std::string name;
  Fusion fusion = Fusion::Concat;
  Estimator estimator = Estimator::Lstm;
  LabelForm label_form = LabelForm::Distance;
  std::string training = "two-stage";
  std::optional<double> sas_ade;
  std::optional<double> sas_fde;
  std::string error;  // empty when the cell succeeded
};

struct AblationReport {
  std::vector<AblationRow> structure;  // fusion x estimator, 10 rows
  std::vector<AblationRow> labels;     // velocity, position, distance
  std::vector<AblationRow> training;   // weighting, two-stage
  std::vector<SasResult> per_moment;   // default SA config, one row per step
  std::map<AgentType, TypeRow> per_type;  // all four types, absent ones undefined
};

// Table II rows in paper order.
std::vector<std::pair<Fusion, Estimator>> structure_cells();

AblationReport run_ablations(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                             const Logger& log = {});
std::string ablation_json(const AblationReport& report);

}  // namespace satp
