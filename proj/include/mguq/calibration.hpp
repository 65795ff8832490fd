#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mguq/dataset.hpp"
#include "mguq/grid.hpp"
#include "mguq/solvers.hpp"

namespace mguq {

enum class ScorerKind { histogram, patched_histogram, linear_logistic };

// One accepted correction: claims whose rounded score sits in `bin` (and, when
// `group` is set, whose entity belongs to that group) are moved to
// grid.value(bin) + delta.
struct ScorePatch {
  int bin = 0;
  std::string group;  // empty = unconditioned
  double delta = 0.0;
};

// Fitted claim-score transformation. Histogram kind applies its per-bin
// correction table in one pass; the patched kind replays `patches` in order,
// re-rounding between patches; the linear kind is sigmoid of an affine model.
struct CalibratedScorer {
  ScorerKind kind = ScorerKind::histogram;
  LevelSetGrid grid;
  std::vector<double> bin_corrections;       // histogram
  std::vector<ScorePatch> patches;           // patched_histogram
  LinearModel model;                         // linear_logistic
  std::vector<std::string> group_features;   // linear_logistic group feature names
  bool converged = true;
};

struct CalibrationOptions {
  int min_cell_count = 10;  // cells thinner than this are left uncorrected
  int max_iter = 100;
};

// Per-iteration record of the grouped-patching loop, for oracle verification.
struct PatchTrace {
  struct Step {
    int bin = 0;
    size_t group = 0;
    double objective = 0.0;  // mass-weighted squared bias of the selected cell
    double delta = 0.0;
  };
  std::vector<Step> accepted;
};

// Histogram binning: per level set, the correction is the mean residual
// between labels and the rounded score.
CalibratedScorer histogram_binning(const ClaimFrame& claims, const LevelSetGrid& grid,
                                   const CalibrationOptions& options = {});

// Iterative grouped histogram binning: repeatedly corrects the
// (level set x group) cell with the largest mass-weighted squared bias,
// stopping when the selected objective no longer strictly decreases.
CalibratedScorer ighb(const ClaimFrame& claims, const LevelSetGrid& grid,
                      const CalibrationOptions& options = {}, PatchTrace* trace = nullptr);

// Platt scaling: logistic fit on the base score alone.
CalibratedScorer platt_scaling(const ClaimFrame& claims);

// Group-conditional logistic fit: base score plus one binary feature per group.
CalibratedScorer gculr(const ClaimFrame& claims);

std::vector<double> apply_scorer(const CalibratedScorer& scorer, const ClaimFrame& claims);

nlohmann::json scorer_to_json(const CalibratedScorer& scorer);
CalibratedScorer scorer_from_json(const nlohmann::json& j);

}  // namespace mguq
