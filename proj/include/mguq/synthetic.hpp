#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mguq/dataset.hpp"
#include "mguq/grid.hpp"

namespace mguq {

struct AttributeSpec {
  std::string name;
  std::vector<std::string> values;
  std::vector<double> weights;  // empty = uniform
};

// Additive effect scoped to a group ("attr=value", "a=x & b=y", or "*").
struct GroupEffect {
  std::string group;
  double offset = 0.0;
};

// Population with known per-claim correctness probability. Labels are drawn
// Bernoulli(q) where q = clamp(base + probability offsets); reported scores
// are clamp(q + score distortions). Zero distortion means scores equal q.
struct SyntheticSpec {
  size_t n_entities = 100;
  int claims_min = 1;
  int claims_max = 10;
  double base_prob_min = 0.05;
  double base_prob_max = 0.95;
  std::vector<AttributeSpec> attributes;
  std::vector<GroupEffect> probability_offsets;
  std::vector<GroupEffect> score_distortions;
  int grid_m = 4;  // grid for the emitted truth table
};

// Exact E[Y - f'(X)] for one (level set, group) cell of the generated
// population, computed from the true probabilities. group = -1 is marginal.
struct CellTruth {
  int bin = 0;
  int group = -1;
  size_t count = 0;
  double bias = 0.0;
};

struct SyntheticResult {
  std::vector<EntityRecord> entities;
  std::vector<double> true_probabilities;  // aligned with claims in entity order
  std::vector<CellTruth> truth;
  std::vector<std::string> truth_groups;   // arity-1 groups referenced by `truth`
  std::vector<std::string> warnings;
  nlohmann::json echo;                     // normalized spec, for provenance
};

SyntheticResult generate_synthetic(const SyntheticSpec& spec, uint64_t seed);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec load_synthetic_spec(const std::string& path);

}  // namespace mguq
