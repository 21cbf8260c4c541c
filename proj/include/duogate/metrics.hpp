#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "duogate/core.hpp"
#include "duogate/engine.hpp"

namespace duogate {

// Stream-level scoring. An intent is intercepted when at least one of its
// malicious fragments is blocked; first_intercept is the 1-based position of
// that fragment within the intent's own fragment order.
struct ScoreReport {
  int n_malicious_intents = 0;
  int n_intercepted = 0;
  double recall = 0.0;
  int n_benign = 0;
  int n_benign_blocked = 0;
  double fpr = 0.0;
  std::map<std::int64_t, std::optional<int>> first_intercept;
  double mean_first_intercept = 0.0;  // over intercepted intents; 0 when none
};

ScoreReport score(const std::vector<Request>& stream, const std::vector<Verdict>& verdicts);

struct GridSpec {
  double lo = 0.50;
  double hi = 0.99;
  double step = 0.01;
  std::vector<double> values() const;
};

struct CalibrationPoint {
  double tau_sem = 0.0;
  double tau_int = 0.0;
  double recall = 0.0;
  double fpr = 0.0;
};

struct CalibrationResult {
  CalibrationPoint best;      // feasible optimum, or the closest-to-budget point
  bool feasible = false;
  std::size_t n_evaluated = 0;
};

// Exhaustive grid search maximizing recall subject to fpr <= budget; ties
// prefer higher tau_int, then higher tau_sem. When no point meets the budget
// the result carries the minimum-FPR point with feasible=false. Uses an
// exact replay shortcut when the factory's stores are unbounded and writes
// are immediate; otherwise adjudicates the stream per grid point.
CalibrationResult calibrate(const EngineFactory& factory, const std::vector<Request>& stream,
                            const GridSpec& sem_grid, const GridSpec& int_grid, double fpr_budget);

// (fpr, recall) operating points swept over tau_int at a fixed tau_sem.
std::vector<CalibrationPoint> recall_fpr_curve(const EngineFactory& factory,
                                               const std::vector<Request>& stream, double tau_sem,
                                               const std::vector<double>& tau_ints);

// Mean recall over the curve's observed FPR span (trapezoid); collapses to
// the plain mean recall when all points share one FPR.
double curve_auc(const std::vector<CalibrationPoint>& curve, bool* degenerate = nullptr);

// curve_auc(curve) / curve_auc(reference); throws when the reference area is zero.
double relative_auc(const std::vector<CalibrationPoint>& curve,
                    const std::vector<CalibrationPoint>& reference);

}  // namespace duogate
