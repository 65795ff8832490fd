#include "mguq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mguq/rng.hpp"

namespace mguq {

using nlohmann::json;

namespace {

std::vector<std::pair<std::string, std::string>> parse_conditions(
    const std::string& group) {
  std::vector<std::pair<std::string, std::string>> conds;
  if (group == "*") return conds;
  size_t pos = 0;
  while (pos < group.size()) {
    size_t amp = group.find(" & ", pos);
    std::string term =
        amp == std::string::npos ? group.substr(pos) : group.substr(pos, amp - pos);
    size_t eq = term.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("malformed group \"" + group + "\"");
    }
    conds.emplace_back(term.substr(0, eq), term.substr(eq + 1));
    pos = amp == std::string::npos ? group.size() : amp + 3;
  }
  return conds;
}

struct CompiledEffect {
  std::vector<std::pair<std::string, std::string>> conditions;  // empty = everywhere
  double offset = 0.0;
};

std::vector<CompiledEffect> compile_effects(const std::vector<GroupEffect>& effects) {
  std::vector<CompiledEffect> out;
  for (const auto& e : effects) {
    out.push_back({parse_conditions(e.group), e.offset});
  }
  return out;
}

double total_offset(const std::vector<CompiledEffect>& effects,
                    const std::map<std::string, std::string>& attributes) {
  double sum = 0.0;
  for (const auto& e : effects) {
    bool match = true;
    for (const auto& [key, value] : e.conditions) {
      auto it = attributes.find(key);
      if (it == attributes.end() || it->second != value) {
        match = false;
        break;
      }
    }
    if (match) sum += e.offset;
  }
  return sum;
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.n_entities == 0) throw ValidationError("n_entities must be positive");
  if (spec.claims_min < 0 || spec.claims_max < spec.claims_min) {
    throw ValidationError("claims_per_entity range is invalid");
  }
  if (!(spec.base_prob_min >= 0.0 && spec.base_prob_max <= 1.0 &&
        spec.base_prob_min <= spec.base_prob_max)) {
    throw ValidationError("base_probability range must lie in [0, 1]");
  }
  if (spec.grid_m < 1) throw ValidationError("grid_m must be >= 1");
  for (const auto& a : spec.attributes) {
    if (a.name.empty() || a.values.empty()) {
      throw ValidationError("attribute needs a name and at least one value");
    }
    if (!a.weights.empty()) {
      if (a.weights.size() != a.values.size()) {
        throw ValidationError("attribute \"" + a.name +
                              "\": weights must match values");
      }
      double sum = 0.0;
      for (double w : a.weights) {
        if (!(w >= 0.0)) throw ValidationError("negative weight for \"" + a.name + "\"");
        sum += w;
      }
      if (sum <= 0.0) throw ValidationError("weights for \"" + a.name + "\" sum to 0");
    }
  }
}

size_t pick_weighted(Rng& rng, const std::vector<double>& weights, size_t n) {
  if (weights.empty()) return static_cast<size_t>(rng.below(n));
  double total = 0.0;
  for (double w : weights) total += w;
  double x = rng.uniform() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (x < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace

SyntheticResult generate_synthetic(const SyntheticSpec& spec, uint64_t seed) {
  validate_spec(spec);
  auto prob_effects = compile_effects(spec.probability_offsets);
  auto score_effects = compile_effects(spec.score_distortions);

  SyntheticResult result;
  result.echo = synthetic_spec_to_json(spec);
  result.echo["seed"] = seed;

  Rng rng(seed);
  size_t clamped_probs = 0;
  size_t clamped_scores = 0;
  for (size_t i = 0; i < spec.n_entities; ++i) {
    EntityRecord e;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "e%06zu", i);
    e.entity_id = buf;
    for (const auto& a : spec.attributes) {
      e.attributes[a.name] = a.values[pick_weighted(rng, a.weights, a.values.size())];
    }
    const double prob_shift = total_offset(prob_effects, e.attributes);
    const double score_shift = total_offset(score_effects, e.attributes);
    const int n_claims = rng.uniform_int(spec.claims_min, spec.claims_max);
    for (int c = 0; c < n_claims; ++c) {
      double base = rng.uniform(spec.base_prob_min, spec.base_prob_max);
      double q = base + prob_shift;
      if (q < 0.0 || q > 1.0) {
        ++clamped_probs;
        q = clamp01(q);
      }
      double s = q + score_shift;
      if (s < 0.0 || s > 1.0) {
        ++clamped_scores;
        s = clamp01(s);
      }
      ClaimRecord claim;
      claim.entity_id = e.entity_id;
      std::snprintf(buf, sizeof(buf), "c%04d", c);
      claim.claim_id = buf;
      claim.score = s;
      claim.label = rng.bernoulli(q) ? 1 : 0;
      e.claims.push_back(std::move(claim));
      result.true_probabilities.push_back(q);
    }
    result.entities.push_back(std::move(e));
  }
  if (clamped_probs > 0) {
    result.warnings.push_back(std::to_string(clamped_probs) +
                              " correctness probabilities clamped to [0, 1]");
  }
  if (clamped_scores > 0) {
    result.warnings.push_back(std::to_string(clamped_scores) +
                              " scores clamped to [0, 1]");
  }
  result.echo["warnings"] = result.warnings;

  // Exact per-cell biases against the rounded score, from the known q values.
  const LevelSetGrid grid{spec.grid_m};
  GroupAtlas atlas = derive_groups(result.entities, 1, 0.0);
  for (const auto& g : atlas.groups()) result.truth_groups.push_back(g.name);
  const size_t n_groups = atlas.size();
  const size_t n_cells = static_cast<size_t>(grid.bin_count()) * (n_groups + 1);
  std::vector<StableSum> bias(n_cells);
  std::vector<size_t> count(n_cells, 0);
  size_t claim_idx = 0;
  for (const auto& e : result.entities) {
    const auto row = atlas.membership_row(e);
    for (const auto& c : e.claims) {
      const int bin = grid.index_of(c.score);
      const double q = result.true_probabilities[claim_idx++];
      const double residual = q - grid.value(bin);
      const size_t base_cell = static_cast<size_t>(bin) * (n_groups + 1);
      bias[base_cell].add(residual);
      ++count[base_cell];
      for (size_t g = 0; g < n_groups; ++g) {
        if (row[g]) {
          bias[base_cell + 1 + g].add(residual);
          ++count[base_cell + 1 + g];
        }
      }
    }
  }
  for (int bin = 0; bin < grid.bin_count(); ++bin) {
    const size_t base_cell = static_cast<size_t>(bin) * (n_groups + 1);
    for (size_t g = 0; g <= n_groups; ++g) {
      if (count[base_cell + g] == 0) continue;
      CellTruth cell;
      cell.bin = bin;
      cell.group = static_cast<int>(g) - 1;
      cell.count = count[base_cell + g];
      cell.bias = bias[base_cell + g].value() / static_cast<double>(cell.count);
      result.truth.push_back(cell);
    }
  }
  return result;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("synthetic spec must be an object");
  static const std::set<std::string> known = {
      "n_entities",      "claims_per_entity",   "base_probability", "attributes",
      "probability_offsets", "score_distortions", "grid_m"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ValidationError("synthetic spec: unknown key \"" + key + "\"");
    }
  }
  SyntheticSpec spec;
  if (j.contains("n_entities")) spec.n_entities = j["n_entities"].get<size_t>();
  if (j.contains("claims_per_entity")) {
    const auto& c = j["claims_per_entity"];
    spec.claims_min = c.at("min").get<int>();
    spec.claims_max = c.at("max").get<int>();
  }
  if (j.contains("base_probability")) {
    const auto& b = j["base_probability"];
    spec.base_prob_min = b.at("min").get<double>();
    spec.base_prob_max = b.at("max").get<double>();
  }
  if (j.contains("attributes")) {
    for (const auto& a : j["attributes"]) {
      AttributeSpec attr;
      attr.name = a.at("name").get<std::string>();
      for (const auto& v : a.at("values")) attr.values.push_back(v.get<std::string>());
      if (a.contains("weights")) {
        for (const auto& w : a["weights"]) attr.weights.push_back(w.get<double>());
      }
      spec.attributes.push_back(std::move(attr));
    }
  }
  auto read_effects = [&](const char* key, std::vector<GroupEffect>& out) {
    if (!j.contains(key)) return;
    for (const auto& e : j[key]) {
      out.push_back({e.at("group").get<std::string>(), e.at("offset").get<double>()});
    }
  };
  read_effects("probability_offsets", spec.probability_offsets);
  read_effects("score_distortions", spec.score_distortions);
  if (j.contains("grid_m")) spec.grid_m = j["grid_m"].get<int>();
  validate_spec(spec);
  return spec;
}

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["n_entities"] = spec.n_entities;
  j["claims_per_entity"] = {{"min", spec.claims_min}, {"max", spec.claims_max}};
  j["base_probability"] = {{"min", spec.base_prob_min}, {"max", spec.base_prob_max}};
  j["attributes"] = json::array();
  for (const auto& a : spec.attributes) {
    json aj;
    aj["name"] = a.name;
    aj["values"] = a.values;
    if (!a.weights.empty()) aj["weights"] = a.weights;
    j["attributes"].push_back(std::move(aj));
  }
  auto write_effects = [&](const char* key, const std::vector<GroupEffect>& effects) {
    j[key] = json::array();
    for (const auto& e : effects) {
      j[key].push_back({{"group", e.group}, {"offset", e.offset}});
    }
  };
  write_effects("probability_offsets", spec.probability_offsets);
  write_effects("score_distortions", spec.score_distortions);
  j["grid_m"] = spec.grid_m;
  return j;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synthetic spec: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& err) {
    throw ValidationError(path + ": parse error: " + err.what());
  }
  return synthetic_spec_from_json(j);
}

}  // namespace mguq
