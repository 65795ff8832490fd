#include "mguq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mguq/rng.hpp"

namespace mguq {

using nlohmann::json;

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t index) {
  uint64_t z = seed ^ fnv1a64(tag) ^ (index * 0x9e3779b97f4a7c15ull);
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

bool GroupSpec::matches(const std::map<std::string, std::string>& attributes) const {
  for (const auto& [key, value] : conditions) {
    auto it = attributes.find(key);
    if (it == attributes.end() || it->second != value) return false;
  }
  return true;
}

std::string group_name(std::span<const std::pair<std::string, std::string>> conditions) {
  std::string name;
  for (const auto& [key, value] : conditions) {
    if (!name.empty()) name += " & ";
    name += key;
    name += "=";
    name += value;
  }
  return name;
}

GroupAtlas::GroupAtlas(std::vector<GroupSpec> groups, double min_frac)
    : groups_(std::move(groups)), min_frac_(min_frac) {
  for (size_t i = 0; i < groups_.size(); ++i) {
    auto [it, inserted] = by_name_.emplace(groups_[i].name, i);
    if (!inserted) {
      throw ValidationError("duplicate group name: " + groups_[i].name);
    }
  }
}

std::optional<size_t> GroupAtlas::index_of(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

bool GroupAtlas::member(size_t group_index, const EntityRecord& entity) const {
  return groups_[group_index].matches(entity.attributes);
}

std::vector<uint8_t> GroupAtlas::membership_row(const EntityRecord& entity) const {
  std::vector<uint8_t> row(groups_.size(), 0);
  for (size_t i = 0; i < groups_.size(); ++i) {
    row[i] = groups_[i].matches(entity.attributes) ? 1 : 0;
  }
  return row;
}

std::vector<size_t> GroupAtlas::retained_groups(
    std::span<const EntityRecord> entities) const {
  std::vector<size_t> counts(groups_.size(), 0);
  for (const auto& e : entities) {
    for (size_t i = 0; i < groups_.size(); ++i) {
      if (groups_[i].matches(e.attributes)) ++counts[i];
    }
  }
  const double floor = min_frac_ * static_cast<double>(entities.size());
  std::vector<size_t> retained;
  for (size_t i = 0; i < groups_.size(); ++i) {
    if (static_cast<double>(counts[i]) >= floor - 1e-9) retained.push_back(i);
  }
  return retained;
}

std::vector<size_t> GroupAtlas::arity1_groups() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].arity() == 1) out.push_back(i);
  }
  return out;
}

namespace {

EntityRecord entity_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": entity must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "entity_id" && key != "attributes" && key != "claims") {
      throw ValidationError(where + ": unknown key \"" + key + "\"");
    }
  }
  EntityRecord e;
  if (!j.contains("entity_id") || !j["entity_id"].is_string()) {
    throw ValidationError(where + ": missing string \"entity_id\"");
  }
  e.entity_id = j["entity_id"].get<std::string>();
  if (j.contains("attributes")) {
    if (!j["attributes"].is_object()) {
      throw ValidationError(where + ": \"attributes\" must be an object");
    }
    for (const auto& [key, value] : j["attributes"].items()) {
      if (!value.is_string()) {
        throw ValidationError(where + ": attribute \"" + key + "\" must be a string");
      }
      e.attributes[key] = value.get<std::string>();
    }
  }
  if (j.contains("claims")) {
    if (!j["claims"].is_array()) {
      throw ValidationError(where + ": \"claims\" must be an array");
    }
    std::set<std::string> seen;
    for (const auto& c : j["claims"]) {
      if (!c.is_object()) throw ValidationError(where + ": claim must be an object");
      for (const auto& [key, _] : c.items()) {
        if (key != "claim_id" && key != "score" && key != "label" && key != "text") {
          throw ValidationError(where + ": unknown claim key \"" + key + "\"");
        }
      }
      ClaimRecord claim;
      claim.entity_id = e.entity_id;
      if (!c.contains("claim_id") || !c["claim_id"].is_string()) {
        throw ValidationError(where + ": claim missing string \"claim_id\"");
      }
      claim.claim_id = c["claim_id"].get<std::string>();
      const std::string claim_where =
          where + ": claim " + e.entity_id + "/" + claim.claim_id;
      if (!seen.insert(claim.claim_id).second) {
        throw ValidationError(claim_where + ": duplicate claim_id");
      }
      if (!c.contains("score") || !c["score"].is_number()) {
        throw ValidationError(claim_where + ": missing numeric \"score\"");
      }
      claim.score = c["score"].get<double>();
      if (!std::isfinite(claim.score) || claim.score < 0.0 || claim.score > 1.0) {
        throw ValidationError(claim_where + ": score " +
                              std::to_string(claim.score) + " outside [0, 1]");
      }
      if (!c.contains("label") || !c["label"].is_number_integer()) {
        throw ValidationError(claim_where + ": missing integer \"label\"");
      }
      claim.label = c["label"].get<int>();
      if (claim.label != 0 && claim.label != 1) {
        throw ValidationError(claim_where + ": label must be 0 or 1");
      }
      if (c.contains("text")) {
        if (!c["text"].is_string()) {
          throw ValidationError(claim_where + ": \"text\" must be a string");
        }
        claim.text = c["text"].get<std::string>();
      }
      e.claims.push_back(std::move(claim));
    }
  }
  return e;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::vector<EntityRecord> parse_dataset_jsonl(std::istream& in, const std::string& origin) {
  std::vector<EntityRecord> entities;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& err) {
      throw ValidationError(where + ": parse error: " + err.what());
    }
    EntityRecord e = entity_from_json(j, where);
    if (!ids.insert(e.entity_id).second) {
      throw ValidationError(where + ": duplicate entity_id \"" + e.entity_id + "\"");
    }
    entities.push_back(std::move(e));
  }
  return entities;
}

std::vector<EntityRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return parse_dataset_jsonl(in, path);
}

void save_dataset(const std::string& path, std::span<const EntityRecord> entities) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (const auto& e : entities) {
    json j;
    j["entity_id"] = e.entity_id;
    j["attributes"] = json::object();
    for (const auto& [key, value] : e.attributes) j["attributes"][key] = value;
    j["claims"] = json::array();
    for (const auto& c : e.claims) {
      json cj;
      cj["claim_id"] = c.claim_id;
      cj["score"] = c.score;
      cj["label"] = c.label;
      if (!c.text.empty()) cj["text"] = c.text;
      j["claims"].push_back(std::move(cj));
    }
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

GroupAtlas derive_groups(std::span<const EntityRecord> entities, int max_arity,
                         double min_frac) {
  if (max_arity < 1 || max_arity > 2) {
    throw ValidationError("max_arity must be 1 or 2");
  }
  if (!(min_frac >= 0.0 && min_frac < 1.0)) {
    throw ValidationError("min_frac must lie in [0, 1)");
  }
  using Cond = std::pair<std::string, std::string>;
  std::set<Cond> singles;
  std::set<std::pair<Cond, Cond>> pairs;
  for (const auto& e : entities) {
    for (const auto& kv : e.attributes) singles.insert(kv);
    if (max_arity >= 2) {
      for (auto it = e.attributes.begin(); it != e.attributes.end(); ++it) {
        for (auto jt = std::next(it); jt != e.attributes.end(); ++jt) {
          pairs.emplace(*it, *jt);  // map order keeps attribute names sorted
        }
      }
    }
  }
  std::vector<GroupSpec> groups;
  for (const auto& cond : singles) {
    GroupSpec g;
    g.conditions = {cond};
    g.name = group_name(g.conditions);
    groups.push_back(std::move(g));
  }
  std::vector<GroupSpec> pair_groups;
  for (const auto& [a, b] : pairs) {
    GroupSpec g;
    g.conditions = {a, b};
    g.name = group_name(g.conditions);
    pair_groups.push_back(std::move(g));
  }
  auto by_name = [](const GroupSpec& x, const GroupSpec& y) { return x.name < y.name; };
  std::sort(groups.begin(), groups.end(), by_name);
  std::sort(pair_groups.begin(), pair_groups.end(), by_name);
  groups.insert(groups.end(), std::make_move_iterator(pair_groups.begin()),
                std::make_move_iterator(pair_groups.end()));
  return GroupAtlas(std::move(groups), min_frac);
}

std::vector<SplitPlan> make_splits(std::span<const EntityRecord> entities, int n_splits,
                                   double fraction, uint64_t seed) {
  const size_t n = entities.size();
  if (n < 2) throw ValidationError("make_splits requires at least 2 entities");
  if (n_splits < 1) throw ValidationError("n_splits must be >= 1");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("fraction must lie in (0, 1)");
  }
  size_t n_cal = static_cast<size_t>(std::floor(static_cast<double>(n) * fraction));
  n_cal = std::clamp<size_t>(n_cal, 1, n - 1);

  std::vector<SplitPlan> plans;
  plans.reserve(static_cast<size_t>(n_splits));
  for (int s = 0; s < n_splits; ++s) {
    Rng rng(mix_seed(seed, "split", static_cast<uint64_t>(s)));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    SplitPlan plan;
    plan.seed = seed;
    plan.fraction = fraction;
    for (size_t i = 0; i < n; ++i) {
      auto& side = i < n_cal ? plan.calibration_ids : plan.test_ids;
      side.push_back(entities[order[i]].entity_id);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::vector<EntityRecord> select_entities(std::span<const EntityRecord> entities,
                                          std::span<const std::string> ids) {
  std::map<std::string_view, size_t> by_id;
  for (size_t i = 0; i < entities.size(); ++i) by_id[entities[i].entity_id] = i;
  std::vector<EntityRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("unknown entity_id \"" + id + "\"");
    out.push_back(entities[it->second]);
  }
  return out;
}

std::optional<size_t> ClaimFrame::group_index(std::string_view name) const {
  for (size_t i = 0; i < group_names.size(); ++i) {
    if (group_names[i] == name) return i;
  }
  return std::nullopt;
}

ClaimFrame ClaimFrame::from_entities(std::span<const EntityRecord> entities,
                                     const GroupAtlas& atlas) {
  ClaimFrame f;
  f.n_entities = entities.size();
  f.n_groups = atlas.size();
  for (const auto& g : atlas.groups()) f.group_names.push_back(g.name);
  f.entity_membership.reserve(f.n_entities * f.n_groups);
  for (size_t e = 0; e < entities.size(); ++e) {
    auto row = atlas.membership_row(entities[e]);
    f.entity_membership.insert(f.entity_membership.end(), row.begin(), row.end());
    for (const auto& c : entities[e].claims) {
      f.scores.push_back(c.score);
      f.labels.push_back(static_cast<uint8_t>(c.label));
      f.entity_index.push_back(e);
    }
  }
  return f;
}

}  // namespace mguq
