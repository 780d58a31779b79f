#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "satp/data/types.hpp"
#include "satp/numerics/parameters.hpp"

namespace satp {

// {0, 0.05, ..., 0.95}
std::vector<double> default_grid();

struct CutoffCurve {
  std::vector<double> fractions;
  std::vector<double> remaining_mean;
};

// Stable descending sort by diagnostic (ties keep input order); at fraction f
// the first round(f * N) samples are removed.
CutoffCurve cutoff_curve(const std::vector<double>& errors, const std::vector<double>& diagnostics,
                         const std::vector<double>& grid = default_grid());

// True when every grid fraction leaves at least one of n samples.
bool grid_fits(std::size_t n, const std::vector<double>& grid);

// Trapezoidal area under the curve.
double aucoc(const CutoffCurve& curve);
// Flat curve at the mean error.
CutoffCurve random_curve(const std::vector<double>& errors,
                         const std::vector<double>& grid = default_grid());
double aucoc_random(const std::vector<double>& errors,
                    const std::vector<double>& grid = default_grid());
double aucoc_optimal(const std::vector<double>& errors,
                     const std::vector<double>& grid = default_grid());

struct SasResult {
  double aucoc_random = 0;
  double aucoc_diag = 0;
  double aucoc_optimal = 0;
  std::optional<double> sas;  // empty when random and optimal areas coincide
};

SasResult sas_detail(const std::vector<double>& errors, const std::vector<double>& diagnostics,
                     const std::vector<double>& grid = default_grid());
std::optional<double> sas(const std::vector<double>& errors, const std::vector<double>& diagnostics,
                          const std::vector<double>& grid = default_grid());

// errors[t][i] and diagnostics[t][i]; one row per step in ascending order.
std::vector<SasResult> per_moment_report(const std::vector<std::vector<double>>& errors,
                                         const std::vector<std::vector<double>>& diagnostics,
                                         const std::vector<double>& grid = default_grid());

struct ScoredSample {
  std::vector<double> step_errors;  // z^(1..t_f), metres
  double ade = 0;
  double fde = 0;
  double diag_ade = 0;
  double diag_fde = 0;
  AgentType type = AgentType::SmallVehicle;
  bool hard = false;
};

// Fills ade/fde from the per-step errors.
ScoredSample make_scored(std::vector<double> step_errors, double diag_ade, double diag_fde,
                         AgentType type, bool hard = false);

struct TypeRow {
  std::size_t count = 0;
  std::optional<double> sas_ade;
  std::optional<double> sas_fde;
};

// Only types present in `samples` appear as keys; strata too small for the
// grid (see grid_fits) or with degenerate areas report no SAS.
std::map<AgentType, TypeRow> per_type_report(const std::vector<ScoredSample>& samples,
                                             const std::vector<double>& grid = default_grid());

std::size_t count_parameters(const std::vector<const ParameterSet*>& parts);

inline constexpr std::size_t kMinTimedFrames = 100;
inline constexpr std::size_t kMinWarmupFrames = 10;

// Median wall-clock milliseconds of frame(k) over `frames` calls after
// `warmup` untimed calls.
double time_per_frame(const std::function<void(std::size_t)>& frame, std::size_t frames = kMinTimedFrames,
                      std::size_t warmup = kMinWarmupFrames);

}  // namespace satp
