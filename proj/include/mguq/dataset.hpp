#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mguq/common.hpp"

namespace mguq {

// One atomic claim with its base uncertainty score and correctness label.
struct ClaimRecord {
  std::string entity_id;
  std::string claim_id;
  double score = 0.0;  // in [0, 1]
  int label = 0;       // 1 = correct
  std::string text;    // optional, documentation only
};

// One long-form generation: its claims plus the attribute map groups are
// derived from. Entities with no claims are legal but degenerate.
struct EntityRecord {
  std::string entity_id;
  std::vector<ClaimRecord> claims;
  std::map<std::string, std::string> attributes;

  bool degenerate() const { return claims.empty(); }
};

// Conjunction of attribute=value conditions (arity 1 or 2). An entity missing
// one of the attributes is a non-member.
struct GroupSpec {
  std::string name;
  std::vector<std::pair<std::string, std::string>> conditions;

  int arity() const { return static_cast<int>(conditions.size()); }
  bool matches(const std::map<std::string, std::string>& attributes) const;
};

std::string group_name(std::span<const std::pair<std::string, std::string>> conditions);

// Ordered family of named group functions. Holds every derived group; the
// size floor is applied as a view against a concrete (test) entity set.
class GroupAtlas {
 public:
  GroupAtlas() = default;
  explicit GroupAtlas(std::vector<GroupSpec> groups, double min_frac = 0.0);

  size_t size() const { return groups_.size(); }
  const GroupSpec& group(size_t i) const { return groups_[i]; }
  const std::vector<GroupSpec>& groups() const { return groups_; }
  double min_frac() const { return min_frac_; }

  std::optional<size_t> index_of(std::string_view name) const;
  bool member(size_t group_index, const EntityRecord& entity) const;
  std::vector<uint8_t> membership_row(const EntityRecord& entity) const;

  // Indices of groups whose member share among `entities` is >= min_frac.
  std::vector<size_t> retained_groups(std::span<const EntityRecord> entities) const;

  // Indices of arity-1 groups, in atlas order.
  std::vector<size_t> arity1_groups() const;

 private:
  std::vector<GroupSpec> groups_;
  std::map<std::string, size_t, std::less<>> by_name_;
  double min_frac_ = 0.0;
};

// One calibration/test partition of the entity ids.
struct SplitPlan {
  uint64_t seed = 0;
  double fraction = 0.8;
  std::vector<std::string> calibration_ids;
  std::vector<std::string> test_ids;
};

// JSONL, one entity object per line. Malformed lines and invariant violations
// raise ValidationError naming the offending line or claim.
std::vector<EntityRecord> load_dataset(const std::string& path);
std::vector<EntityRecord> parse_dataset_jsonl(std::istream& in, const std::string& origin);
void save_dataset(const std::string& path, std::span<const EntityRecord> entities);

// Groups from all observed 1-way (and, with max_arity=2, co-occurring 2-way)
// attribute=value combinations, ordered by (arity, name).
GroupAtlas derive_groups(std::span<const EntityRecord> entities, int max_arity,
                         double min_frac);

// Independent uniform shuffles keyed by (seed, split index); reproducible
// bit-for-bit. Requires at least 2 entities.
std::vector<SplitPlan> make_splits(std::span<const EntityRecord> entities, int n_splits,
                                   double fraction, uint64_t seed);

// Entities selected in id-list order. Unknown ids raise.
std::vector<EntityRecord> select_entities(std::span<const EntityRecord> entities,
                                          std::span<const std::string> ids);

// Flattened claim view with entity-level group membership, shared by the
// calibration methods and the metric suite.
struct ClaimFrame {
  std::vector<double> scores;
  std::vector<uint8_t> labels;
  std::vector<size_t> entity_index;        // claim -> entity
  size_t n_entities = 0;
  size_t n_groups = 0;
  std::vector<uint8_t> entity_membership;  // n_entities x n_groups
  std::vector<std::string> group_names;

  size_t size() const { return scores.size(); }
  bool entity_in_group(size_t entity, size_t group) const {
    return entity_membership[entity * n_groups + group] != 0;
  }
  bool in_group(size_t claim, size_t group) const {
    return entity_in_group(entity_index[claim], group);
  }
  std::optional<size_t> group_index(std::string_view name) const;

  static ClaimFrame from_entities(std::span<const EntityRecord> entities,
                                  const GroupAtlas& atlas);
};

}  // namespace mguq
