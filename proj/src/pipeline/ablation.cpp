#include "satp/error.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace satp {

std::vector<std::pair<Fusion, Estimator>> structure_cells() {
  std::vector<std::pair<Fusion, Estimator>> cells{{Fusion::GF, Estimator::None}};
  for (auto f : {Fusion::GF, Fusion::Add, Fusion::Concat})
    for (auto e : {Estimator::Mlp, Estimator::Conv, Estimator::Lstm}) cells.emplace_back(f, e);
  return cells;
}

namespace {

struct CellResult {
  std::optional<double> sas_ade;
  std::optional<double> sas_fde;
  std::string error;
  std::optional<EvalReport> report;
};

std::string key(Fusion f, Estimator e, LabelForm l) {
  return std::string(to_string(f)) + "/" + std::string(to_string(e)) + "/" + std::string(to_string(l));
}

AblationRow row(const std::string& name, Fusion f, Estimator e, LabelForm l, const std::string& training,
                const CellResult& r) {
  AblationRow out;
  out.name = name;
  out.fusion = f;
  out.estimator = e;
  out.label_form = l;
  out.training = training;
  out.sas_ade = r.sas_ade;
  out.sas_fde = r.sas_fde;
  out.error = r.error;
  return out;
}

}  // namespace

AblationReport run_ablations(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint& predictor,
                             const Logger& log) {
  cfg.validate();
  if (predictor.stage != kStagePredictor || predictor.config_digest != predictor_digest(cfg)) {
    throw DataError("ablate: needs a stage-1 predictor checkpoint trained with the current model settings");
  }
  ParameterSet frozen = predictor.params;
  frozen.freeze();
  const FrozenOutputs train = run_frozen(corpus.train, frozen, cfg.predictor);
  const FrozenOutputs val = run_frozen(corpus.val.size() > 0 ? corpus.val : corpus.train, frozen, cfg.predictor);
  const FrozenOutputs test = run_frozen(corpus.test, frozen, cfg.predictor);

  std::map<std::string, CellResult> memo;
  auto cell = [&](Fusion f, Estimator e, LabelForm l) -> const CellResult& {
    const std::string k = key(f, e, l);
    if (auto it = memo.find(k); it != memo.end()) return it->second;
    CellResult r;
    try {
      TrainConfig c = cfg;
      c.selfaware.fusion = f;
      c.selfaware.estimator = e;
      c.selfaware.label_form = l;
      if (log) log("ablate: cell " + k);
      const TrainResult t = train_selfaware_cached(c, corpus, train, val, log);
      const ScoredSet s = score_selfaware_cached(corpus.test, test, t.checkpoint.params, c);
      EvalReport rep = make_report("ours", corpus.name, s, 0, std::nullopt, c);
      r.sas_ade = rep.ade.sas;
      r.sas_fde = rep.fde.sas;
      r.report = std::move(rep);
    } catch (const std::exception& ex) {
      r.error = ex.what();
      if (log) log("ablate: cell " + k + " failed: " + r.error);
    }
    return memo.emplace(k, std::move(r)).first->second;
  };

  const LabelForm form = cfg.selfaware.label_form;
  AblationReport out;
  for (auto [f, e] : structure_cells()) {
    out.structure.push_back(row(std::string(to_string(f)) + "/" + std::string(to_string(e)), f, e, form,
                                "two-stage", cell(f, e, form)));
  }
  const Fusion df = cfg.selfaware.fusion;
  const Estimator de = cfg.selfaware.estimator;
  for (auto l : {LabelForm::Velocity, LabelForm::PositionXY, LabelForm::Distance}) {
    out.labels.push_back(row(std::string(to_string(l)), df, de, l, "two-stage", cell(df, de, l)));
  }

  CellResult joint;
  try {
    if (log) log("ablate: joint weighting");
    const TrainResult t = train_joint(cfg, corpus, log);
    ParameterSet w = t.checkpoint.params;
    const ScoredSet s = score_selfaware(corpus.test, w, w, cfg);
    const EvalReport rep = make_report("ours", corpus.name, s, 0, std::nullopt, cfg);
    joint.sas_ade = rep.ade.sas;
    joint.sas_fde = rep.fde.sas;
  } catch (const std::exception& ex) {
    joint.error = ex.what();
    if (log) log("ablate: joint weighting failed: " + joint.error);
  }
  out.training.push_back(row("weighting", df, de, form, "weighting", joint));
  const CellResult& base = cell(df, de, form);
  out.training.push_back(row("two-stage", df, de, form, "two-stage", base));

  if (base.report) {
    out.per_moment = base.report->per_moment;
    out.per_type = base.report->per_type;
  }
  for (AgentType t : kAgentTypes) out.per_type.try_emplace(t);
  return out;
}

}  // namespace satp
