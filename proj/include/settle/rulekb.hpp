#pragma once

#include "settle/world.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace settle {

// The fourteen scoring features. The first nine test the center-tile
// terrain; the other five test specials and water in the cluster.
enum class FamilyId : std::uint8_t {
  TerrainDesert,
  TerrainForest,
  TerrainGrassland,
  TerrainHills,
  TerrainJungle,
  TerrainMountains,
  TerrainPlains,
  TerrainSwamp,
  TerrainTundra,
  ResourceOnTile,
  ResourcesAround,
  OceanTileBonus,
  DeepOceanAccess,
  WhalePresence,
};

inline constexpr int kFamilyCount = 14;
inline constexpr int kRulesPerFamily = 4;
inline constexpr int kMaxRulePoints = 20;

constexpr int index_of(FamilyId f) { return static_cast<int>(f); }

std::string_view family_name(FamilyId f);
std::string_view family_condition(FamilyId f);
std::optional<FamilyId> family_from_name(std::string_view name);

// The center-terrain family for a buildable terrain.
FamilyId terrain_family(TerrainKind t);

bool condition_holds(FamilyId f, const GameMap& map, const MapCluster& cluster);

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScoringRule {
  int id = 0;
  FamilyId family = FamilyId::TerrainDesert;
  int points = 0;

  std::string name() const;
  friend bool operator==(const ScoringRule&, const ScoringRule&) = default;
};

// Rules sharing one condition with pairwise distinct points.
struct ConflictSet {
  FamilyId family = FamilyId::TerrainDesert;
  std::vector<ScoringRule> rules;

  // Position of `rule_id` in `rules`, or -1.
  int position_of(int rule_id) const;
  friend bool operator==(const ConflictSet&, const ConflictSet&) = default;
};

class KnowledgeBase {
 public:
  // Expects one conflict set per family, in family order. Throws RuleError
  // on any violation of the conflict-set rules or the point bound.
  explicit KnowledgeBase(std::vector<ConflictSet> families);

  const std::vector<ConflictSet>& families() const { return families_; }
  const ConflictSet& family(FamilyId f) const { return families_[index_of(f)]; }
  const ScoringRule& rule(int id) const;
  std::size_t rule_count() const;

  // Every point value multiplied by `factor` (> 0). The point bound is not
  // enforced on the result; meant for sensitivity checks.
  KnowledgeBase scaled(int factor) const;

  friend bool operator==(const KnowledgeBase&, const KnowledgeBase&) = default;

 private:
  struct Unchecked {};
  KnowledgeBase(std::vector<ConflictSet> families, Unchecked);
  void validate_shape() const;

  std::vector<ConflictSet> families_;
};

// Default point table. Rule ids are family * 4 + alternative.
//
//   family            alternatives        family            alternatives
//   TerrainDesert     -10  -5  -2   0     TerrainSwamp       -6  -3   0   2
//   TerrainForest       1   4   8  12     TerrainTundra      -5  -2   0   3
//   TerrainGrassland    2   6  10  15     ResourceOnTile      1   5  10  15
//   TerrainHills        2   5   9  12     ResourcesAround     1   3   6  10
//   TerrainJungle      -4   0   2   5     OceanTileBonus      2   5   8  12
//   TerrainMountains   -6  -2   0   3     DeepOceanAccess    -3   0   2   5
//   TerrainPlains       2   6  10  14     WhalePresence       2   5   8  12
//
// Only ResourceOnTile {1, 5, 10} and the non-positive desert values have an
// external basis; the rest is a judgement call in the same spirit.
KnowledgeBase default_kb();

// Text layout: one `family <Name>` line followed by its `rule <id> <points>`
// lines; '#' starts a comment.
std::string save_kb(const KnowledgeBase& kb);
KnowledgeBase load_kb(std::string_view text);

// Conflict sets whose condition holds on the cluster, in family order.
std::vector<const ConflictSet*> match_rules(const KnowledgeBase& kb, const GameMap& map,
                                            const MapCluster& cluster);

struct RuleChoice {
  int rule_id = 0;
  // Selection probability of each member of the set at decision time,
  // aligned with ConflictSet::rules.
  std::vector<double> probabilities;
};

using Chooser = std::function<RuleChoice(const ConflictSet&)>;

Chooser fixed_alternative_chooser(int alternative);
Chooser max_points_chooser();

struct Alternative {
  int rule_id = 0;
  int points = 0;
  double probability = 0.0;
  friend bool operator==(const Alternative&, const Alternative&) = default;
};

struct FiredFamily {
  FamilyId family = FamilyId::TerrainDesert;
  int rule_id = 0;
  int points = 0;
  std::vector<Alternative> alternatives;
  friend bool operator==(const FiredFamily&, const FiredFamily&) = default;
};

struct ScoreTrace {
  std::vector<FiredFamily> fired;
  int total = 0;
  friend bool operator==(const ScoreTrace&, const ScoreTrace&) = default;
};

struct ScoredCluster {
  int score = 0;
  ScoreTrace trace;
};

// Throws RuleError if the chooser returns a rule outside the offered set.
ScoredCluster score_cluster(const KnowledgeBase& kb, const GameMap& map, const MapCluster& cluster,
                            const Chooser& chooser);

// One line per fired family, ordered by family, then a `total` line.
// An empty trace yields the single line "no rules fired".
std::vector<std::string> explain(const ScoreTrace& trace);

}  // namespace settle
