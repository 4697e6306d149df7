#include "settle/rulekb.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace settle {

namespace {

struct FamilyInfo {
  std::string_view name;
  std::string_view condition;
};

constexpr std::array<FamilyInfo, kFamilyCount> kFamilyTable = {{
    {"TerrainDesert", "center tile is Desert"},
    {"TerrainForest", "center tile is Forest"},
    {"TerrainGrassland", "center tile is Grassland"},
    {"TerrainHills", "center tile is Hills"},
    {"TerrainJungle", "center tile is Jungle"},
    {"TerrainMountains", "center tile is Mountains"},
    {"TerrainPlains", "center tile is Plains"},
    {"TerrainSwamp", "center tile is Swamp"},
    {"TerrainTundra", "center tile is Tundra"},
    {"ResourceOnTile", "special resource on the center tile"},
    {"ResourcesAround", "special resource on a surrounding tile"},
    {"OceanTileBonus", "Ocean or DeepOcean tile in the cluster"},
    {"DeepOceanAccess", "DeepOcean tile in the cluster"},
    {"WhalePresence", "Whales in the cluster"},
}};

constexpr std::array<std::array<int, kRulesPerFamily>, kFamilyCount> kDefaultPoints = {{
    {-10, -5, -2, 0},  // TerrainDesert
    {1, 4, 8, 12},     // TerrainForest
    {2, 6, 10, 15},    // TerrainGrassland
    {2, 5, 9, 12},     // TerrainHills
    {-4, 0, 2, 5},     // TerrainJungle
    {-6, -2, 0, 3},    // TerrainMountains
    {2, 6, 10, 14},    // TerrainPlains
    {-6, -3, 0, 2},    // TerrainSwamp
    {-5, -2, 0, 3},    // TerrainTundra
    {1, 5, 10, 15},    // ResourceOnTile
    {1, 3, 6, 10},     // ResourcesAround
    {2, 5, 8, 12},     // OceanTileBonus
    {-3, 0, 2, 5},     // DeepOceanAccess
    {2, 5, 8, 12},     // WhalePresence
}};

}  // namespace

std::string_view family_name(FamilyId f) { return kFamilyTable[index_of(f)].name; }
std::string_view family_condition(FamilyId f) { return kFamilyTable[index_of(f)].condition; }

std::optional<FamilyId> family_from_name(std::string_view name) {
  for (int i = 0; i < kFamilyCount; ++i) {
    if (kFamilyTable[i].name == name) return static_cast<FamilyId>(i);
  }
  return std::nullopt;
}

FamilyId terrain_family(TerrainKind t) {
  if (!is_buildable(t)) throw RuleError(fmt::format("{} has no terrain family", terrain_name(t)));
  // Buildable terrains and terrain families share their ordering.
  return static_cast<FamilyId>(index_of(t));
}

bool condition_holds(FamilyId f, const GameMap& map, const MapCluster& cluster) {
  const Tile& center = map.at(cluster.center);
  switch (f) {
    case FamilyId::TerrainDesert:
    case FamilyId::TerrainForest:
    case FamilyId::TerrainGrassland:
    case FamilyId::TerrainHills:
    case FamilyId::TerrainJungle:
    case FamilyId::TerrainMountains:
    case FamilyId::TerrainPlains:
    case FamilyId::TerrainSwamp:
    case FamilyId::TerrainTundra:
      return is_buildable(center.terrain) && terrain_family(center.terrain) == f;
    case FamilyId::ResourceOnTile:
      return center.special.has_value();
    case FamilyId::ResourcesAround:
      return std::any_of(cluster.tiles.begin(), cluster.tiles.end(), [&](Coord c) {
        return c != cluster.center && map.at(c).special.has_value();
      });
    case FamilyId::OceanTileBonus:
      return std::any_of(cluster.tiles.begin(), cluster.tiles.end(),
                         [&](Coord c) { return is_water(map.at(c).terrain); });
    case FamilyId::DeepOceanAccess:
      return std::any_of(cluster.tiles.begin(), cluster.tiles.end(),
                         [&](Coord c) { return map.at(c).terrain == TerrainKind::DeepOcean; });
    case FamilyId::WhalePresence:
      return std::any_of(cluster.tiles.begin(), cluster.tiles.end(),
                         [&](Coord c) { return map.at(c).special == SpecialKind::Whales; });
  }
  return false;
}

std::string ScoringRule::name() const {
  return fmt::format("{}({:+d})", family_name(family), points);
}

int ConflictSet::position_of(int rule_id) const {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (rules[i].id == rule_id) return static_cast<int>(i);
  }
  return -1;
}

KnowledgeBase::KnowledgeBase(std::vector<ConflictSet> families, Unchecked)
    : families_(std::move(families)) {
  validate_shape();
}

KnowledgeBase::KnowledgeBase(std::vector<ConflictSet> families) : families_(std::move(families)) {
  validate_shape();
  for (const ConflictSet& set : families_) {
    for (const ScoringRule& r : set.rules) {
      if (r.points < -kMaxRulePoints || r.points > kMaxRulePoints) {
        throw RuleError(fmt::format("rule {} has {} points, outside [-{}, {}]", r.id, r.points,
                                    kMaxRulePoints, kMaxRulePoints));
      }
    }
  }
}

void KnowledgeBase::validate_shape() const {
  if (families_.size() != kFamilyCount) {
    throw RuleError(fmt::format("expected {} families, got {}", kFamilyCount, families_.size()));
  }
  std::set<int> ids;
  for (int f = 0; f < kFamilyCount; ++f) {
    const ConflictSet& set = families_[f];
    if (index_of(set.family) != f) {
      throw RuleError(fmt::format("family {} out of order", family_name(set.family)));
    }
    if (set.rules.size() < 2) {
      throw RuleError(fmt::format("family {} needs at least two alternatives", family_name(set.family)));
    }
    std::set<int> points;
    for (const ScoringRule& r : set.rules) {
      if (r.family != set.family) throw RuleError(fmt::format("rule {} filed under the wrong family", r.id));
      if (!ids.insert(r.id).second) throw RuleError(fmt::format("duplicate rule id {}", r.id));
      if (!points.insert(r.points).second) {
        throw RuleError(fmt::format("family {} repeats the point value {}", family_name(set.family), r.points));
      }
    }
  }
}

const ScoringRule& KnowledgeBase::rule(int id) const {
  for (const ConflictSet& set : families_) {
    const int pos = set.position_of(id);
    if (pos >= 0) return set.rules[pos];
  }
  throw RuleError(fmt::format("unknown rule id {}", id));
}

std::size_t KnowledgeBase::rule_count() const {
  std::size_t n = 0;
  for (const ConflictSet& set : families_) n += set.rules.size();
  return n;
}

KnowledgeBase KnowledgeBase::scaled(int factor) const {
  if (factor <= 0) throw RuleError("scale factor must be positive");
  std::vector<ConflictSet> copy = families_;
  for (ConflictSet& set : copy) {
    for (ScoringRule& r : set.rules) r.points *= factor;
  }
  return KnowledgeBase(std::move(copy), Unchecked{});
}

KnowledgeBase default_kb() {
  std::vector<ConflictSet> families;
  families.reserve(kFamilyCount);
  for (int f = 0; f < kFamilyCount; ++f) {
    ConflictSet set;
    set.family = static_cast<FamilyId>(f);
    for (int a = 0; a < kRulesPerFamily; ++a) {
      set.rules.push_back({f * kRulesPerFamily + a, set.family, kDefaultPoints[f][a]});
    }
    families.push_back(std::move(set));
  }
  return KnowledgeBase(std::move(families));
}

std::string save_kb(const KnowledgeBase& kb) {
  std::string out = "# settle knowledge base v1\n";
  for (const ConflictSet& set : kb.families()) {
    out += fmt::format("family {}\n", family_name(set.family));
    for (const ScoringRule& r : set.rules) out += fmt::format("rule {} {}\n", r.id, r.points);
  }
  return out;
}

KnowledgeBase load_kb(std::string_view text) {
  std::vector<ConflictSet> families;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string keyword;
    if (!(fields >> keyword)) continue;
    std::string extra;
    if (keyword == "family") {
      std::string name;
      if (!(fields >> name) || (fields >> extra)) throw RuleError(fmt::format("line {}: bad family line", line_no));
      const auto f = family_from_name(name);
      if (!f) throw RuleError(fmt::format("line {}: unknown family '{}'", line_no, name));
      families.push_back({*f, {}});
    } else if (keyword == "rule") {
      int id = 0;
      int points = 0;
      if (!(fields >> id >> points) || (fields >> extra)) {
        throw RuleError(fmt::format("line {}: bad rule line", line_no));
      }
      if (families.empty()) throw RuleError(fmt::format("line {}: rule before any family", line_no));
      families.back().rules.push_back({id, families.back().family, points});
    } else {
      throw RuleError(fmt::format("line {}: unknown keyword '{}'", line_no, keyword));
    }
  }
  return KnowledgeBase(std::move(families));
}

std::vector<const ConflictSet*> match_rules(const KnowledgeBase& kb, const GameMap& map,
                                            const MapCluster& cluster) {
  std::vector<const ConflictSet*> out;
  for (const ConflictSet& set : kb.families()) {
    if (condition_holds(set.family, map, cluster)) out.push_back(&set);
  }
  return out;
}

Chooser fixed_alternative_chooser(int alternative) {
  return [alternative](const ConflictSet& set) {
    const auto pos = static_cast<std::size_t>(std::clamp<int>(alternative, 0, static_cast<int>(set.rules.size()) - 1));
    RuleChoice choice{set.rules[pos].id, std::vector<double>(set.rules.size(), 0.0)};
    choice.probabilities[pos] = 1.0;
    return choice;
  };
}

Chooser max_points_chooser() {
  return [](const ConflictSet& set) {
    const auto best = std::max_element(set.rules.begin(), set.rules.end(),
                                       [](const ScoringRule& a, const ScoringRule& b) { return a.points < b.points; });
    const auto pos = static_cast<std::size_t>(best - set.rules.begin());
    RuleChoice choice{best->id, std::vector<double>(set.rules.size(), 0.0)};
    choice.probabilities[pos] = 1.0;
    return choice;
  };
}

ScoredCluster score_cluster(const KnowledgeBase& kb, const GameMap& map, const MapCluster& cluster,
                            const Chooser& chooser) {
  ScoredCluster result;
  for (const ConflictSet* set : match_rules(kb, map, cluster)) {
    const RuleChoice choice = chooser(*set);
    const int pos = set->position_of(choice.rule_id);
    if (pos < 0) {
      throw RuleError(fmt::format("chooser returned rule {} which is not in family {}", choice.rule_id,
                                  family_name(set->family)));
    }
    FiredFamily fired;
    fired.family = set->family;
    fired.rule_id = choice.rule_id;
    fired.points = set->rules[pos].points;
    for (std::size_t i = 0; i < set->rules.size(); ++i) {
      const double p = i < choice.probabilities.size() ? choice.probabilities[i] : 0.0;
      fired.alternatives.push_back({set->rules[i].id, set->rules[i].points, p});
    }
    result.score += fired.points;
    result.trace.fired.push_back(std::move(fired));
  }
  result.trace.total = result.score;
  return result;
}

std::vector<std::string> explain(const ScoreTrace& trace) {
  if (trace.fired.empty()) return {"no rules fired"};
  std::vector<const FiredFamily*> ordered;
  for (const FiredFamily& f : trace.fired) ordered.push_back(&f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const FiredFamily* a, const FiredFamily* b) { return a->family < b->family; });
  std::vector<std::string> lines;
  for (const FiredFamily* f : ordered) {
    std::string alts;
    for (const Alternative& a : f->alternatives) {
      if (!alts.empty()) alts += ", ";
      alts += fmt::format("#{} {:+d} p={:.3f}{}", a.rule_id, a.points, a.probability,
                          a.rule_id == f->rule_id ? "*" : "");
    }
    lines.push_back(fmt::format("{} [{}] rule #{} {:+d} | alternatives: {}", family_name(f->family),
                                family_condition(f->family), f->rule_id, f->points, alts));
  }
  lines.push_back(fmt::format("total {}", trace.total));
  return lines;
}

}  // namespace settle
