#include "satp/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "satp/error.hpp"

namespace satp {

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw UsageError("cutoff grid needs at least two fractions");
  if (grid.front() != 0.0) throw UsageError("cutoff grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw UsageError("cutoff grid must be strictly increasing");
  }
  if (!(grid.back() < 1.0)) throw UsageError("cutoff grid must stay below 1");
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> default_grid() {
  std::vector<double> g(20);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = static_cast<double>(k) / 20.0;
  return g;
}

CutoffCurve cutoff_curve(const std::vector<double>& errors, const std::vector<double>& diagnostics,
                         const std::vector<double>& grid) {
  if (errors.empty()) throw UsageError("cutoff_curve: empty input");
  if (errors.size() != diagnostics.size()) {
    throw ShapeError("cutoff_curve: " + std::to_string(errors.size()) + " errors but " +
                     std::to_string(diagnostics.size()) + " diagnostics");
  }
  check_grid(grid);
  const std::size_t N = errors.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return diagnostics[a] > diagnostics[b]; });
  // suffix sums over the sorted errors
  std::vector<double> suffix(N + 1, 0.0);
  for (std::size_t k = N; k-- > 0;) suffix[k] = suffix[k + 1] + errors[order[k]];
  CutoffCurve c;
  c.fractions = grid;
  for (double f : grid) {
    const auto removed = static_cast<std::size_t>(std::llround(f * static_cast<double>(N)));
    if (removed >= N) throw UsageError("cutoff_curve: fraction " + std::to_string(f) + " removes every sample");
    c.remaining_mean.push_back(suffix[removed] / static_cast<double>(N - removed));
  }
  return c;
}

bool grid_fits(std::size_t n, const std::vector<double>& grid) {
  if (n == 0 || grid.empty()) return false;
  return static_cast<std::size_t>(std::llround(grid.back() * static_cast<double>(n))) < n;
}

double aucoc(const CutoffCurve& curve) {
  if (curve.fractions.size() < 2 || curve.fractions.size() != curve.remaining_mean.size()) {
    throw UsageError("aucoc: need at least two curve points");
  }
  double area = 0;
  for (std::size_t k = 1; k < curve.fractions.size(); ++k) {
    area += 0.5 * (curve.remaining_mean[k] + curve.remaining_mean[k - 1]) *
            (curve.fractions[k] - curve.fractions[k - 1]);
  }
  return area;
}

CutoffCurve random_curve(const std::vector<double>& errors, const std::vector<double>& grid) {
  if (errors.empty()) throw UsageError("aucoc_random: empty errors");
  check_grid(grid);
  return {grid, std::vector<double>(grid.size(), mean(errors))};
}

double aucoc_random(const std::vector<double>& errors, const std::vector<double>& grid) {
  if (errors.empty()) throw UsageError("aucoc_random: empty errors");
  check_grid(grid);
  return mean(errors) * (grid.back() - grid.front());
}

double aucoc_optimal(const std::vector<double>& errors, const std::vector<double>& grid) {
  return aucoc(cutoff_curve(errors, errors, grid));
}

SasResult sas_detail(const std::vector<double>& errors, const std::vector<double>& diagnostics,
                     const std::vector<double>& grid) {
  SasResult r;
  r.aucoc_diag = aucoc(cutoff_curve(errors, diagnostics, grid));
  r.aucoc_random = aucoc_random(errors, grid);
  r.aucoc_optimal = aucoc_optimal(errors, grid);
  const double denom = r.aucoc_random - r.aucoc_optimal;
  // relative tolerance: equal errors leave only rounding noise in the gap
  if (denom > 1e-12 * std::max(1.0, std::fabs(r.aucoc_random))) {
    r.sas = (r.aucoc_random - r.aucoc_diag) / denom;
  }
  return r;
}

std::optional<double> sas(const std::vector<double>& errors, const std::vector<double>& diagnostics,
                          const std::vector<double>& grid) {
  return sas_detail(errors, diagnostics, grid).sas;
}

std::vector<SasResult> per_moment_report(const std::vector<std::vector<double>>& errors,
                                         const std::vector<std::vector<double>>& diagnostics,
                                         const std::vector<double>& grid) {
  if (errors.size() != diagnostics.size()) throw ShapeError("per_moment_report: step count mismatch");
  std::vector<SasResult> rows;
  for (std::size_t t = 0; t < errors.size(); ++t) rows.push_back(sas_detail(errors[t], diagnostics[t], grid));
  return rows;
}

ScoredSample make_scored(std::vector<double> step_errors, double diag_ade, double diag_fde,
                         AgentType type, bool hard) {
  if (step_errors.empty()) throw UsageError("make_scored: no step errors");
  ScoredSample s;
  s.ade = mean(step_errors);
  s.fde = step_errors.back();
  s.step_errors = std::move(step_errors);
  s.diag_ade = diag_ade;
  s.diag_fde = diag_fde;
  s.type = type;
  s.hard = hard;
  return s;
}

std::map<AgentType, TypeRow> per_type_report(const std::vector<ScoredSample>& samples,
                                             const std::vector<double>& grid) {
  std::map<AgentType, TypeRow> out;
  for (AgentType type : kAgentTypes) {
    std::vector<double> ade, fde, dade, dfde;
    for (const auto& s : samples) {
      if (s.type != type) continue;
      ade.push_back(s.ade);
      fde.push_back(s.fde);
      dade.push_back(s.diag_ade);
      dfde.push_back(s.diag_fde);
    }
    if (ade.empty()) continue;
    TypeRow row;
    row.count = ade.size();
    if (ade.size() >= 2 && grid_fits(ade.size(), grid)) {
      row.sas_ade = sas(ade, dade, grid);
      row.sas_fde = sas(fde, dfde, grid);
    }
    out[type] = row;
  }
  return out;
}

std::size_t count_parameters(const std::vector<const ParameterSet*>& parts) {
  std::size_t n = 0;
  for (const auto* p : parts) n += p->count();
  return n;
}

double time_per_frame(const std::function<void(std::size_t)>& frame, std::size_t frames,
                      std::size_t warmup) {
  if (frames < kMinTimedFrames || warmup < kMinWarmupFrames) {
    throw UsageError("time_per_frame: need at least " + std::to_string(kMinTimedFrames) +
                     " timed frames after " + std::to_string(kMinWarmupFrames) + " warmup frames");
  }
  for (std::size_t k = 0; k < warmup; ++k) frame(k);
  std::vector<double> ms(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    frame(warmup + k);
    ms[k] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  return frames % 2 ? ms[frames / 2] : 0.5 * (ms[frames / 2 - 1] + ms[frames / 2]);
}

}  // namespace satp
