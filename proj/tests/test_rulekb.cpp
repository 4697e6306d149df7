#include "doctest.h"
#include "settle/rulekb.hpp"
#include "support.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace settle;

namespace {

// Bull on a Grassland center, two specials around it, two Ocean tiles.
GameMap figure_cluster_map() {
  GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  map.at({10, 10}).special = SpecialKind::Bull;
  map.at({9, 10}).special = SpecialKind::Resources;
  map.at({11, 9}).special = SpecialKind::Wheat;
  map.at({12, 10}).terrain = TerrainKind::Ocean;
  map.at({12, 11}).terrain = TerrainKind::Ocean;
  return map;
}

Chooser by_position(std::map<FamilyId, int> positions) {
  return [positions](const ConflictSet& set) {
    return fixed_alternative_chooser(positions.at(set.family))(set);
  };
}

std::set<FamilyId> matched(const KnowledgeBase& kb, const GameMap& map, Coord center) {
  std::set<FamilyId> out;
  for (const ConflictSet* s : match_rules(kb, map, cluster_at(map, center))) out.insert(s->family);
  return out;
}

}  // namespace

TEST_CASE("default knowledge base shape") {
  const KnowledgeBase kb = default_kb();
  CHECK(kb.rule_count() == 56);
  CHECK(kb.families().size() == 14);
  for (const ConflictSet& s : kb.families()) {
    CHECK(s.rules.size() == 4);
    std::set<int> points;
    for (const ScoringRule& r : s.rules) {
      points.insert(r.points);
      CHECK(std::abs(r.points) <= kMaxRulePoints);
      CHECK(kb.rule(r.id) == r);
    }
    CHECK(points.size() == 4);
  }
  for (const ScoringRule& r : kb.family(FamilyId::TerrainDesert).rules) CHECK(r.points <= 0);
  std::set<int> on_tile;
  for (const ScoringRule& r : kb.family(FamilyId::ResourceOnTile).rules) on_tile.insert(r.points);
  CHECK(on_tile.count(1) == 1);
  CHECK(on_tile.count(5) == 1);
  CHECK(on_tile.count(10) == 1);
}

TEST_CASE("knowledge base validation") {
  auto families = default_kb().families();
  families[0].rules[1].points = families[0].rules[0].points;
  CHECK_THROWS_AS(KnowledgeBase{families}, RuleError);

  families = default_kb().families();
  families[3].rules[0].points = kMaxRulePoints + 1;
  CHECK_THROWS_AS(KnowledgeBase{families}, RuleError);

  families = default_kb().families();
  families.pop_back();
  CHECK_THROWS_AS(KnowledgeBase{families}, RuleError);
}

TEST_CASE("knowledge base text round trip") {
  const KnowledgeBase kb = default_kb();
  CHECK(load_kb(save_kb(kb)) == kb);
  CHECK_THROWS_AS(load_kb("family Nope\nrule 0 1\n"), RuleError);
}

TEST_CASE("matching") {
  const KnowledgeBase kb = default_kb();
  const GameMap plain = test::uniform_map(20, 20, TerrainKind::Grassland);
  CHECK(matched(kb, plain, {10, 10}) == std::set<FamilyId>{FamilyId::TerrainGrassland});

  const GameMap fig = figure_cluster_map();
  CHECK(matched(kb, fig, {10, 10}) == std::set<FamilyId>{FamilyId::TerrainGrassland, FamilyId::ResourceOnTile,
                                                         FamilyId::ResourcesAround, FamilyId::OceanTileBonus});

  GameMap deep = plain;
  deep.at({8, 11}).terrain = TerrainKind::DeepOcean;
  CHECK(matched(kb, deep, {10, 10}).count(FamilyId::DeepOceanAccess) == 1);
  // The corner of the 5x5 block is outside the cluster.
  GameMap corner = plain;
  corner.at({8, 8}).terrain = TerrainKind::DeepOcean;
  CHECK(matched(kb, corner, {10, 10}).count(FamilyId::DeepOceanAccess) == 0);
}

TEST_CASE("scoring") {
  const KnowledgeBase kb = default_kb();
  const GameMap plain = test::uniform_map(20, 20, TerrainKind::Grassland);
  const ScoredCluster s = score_cluster(kb, plain, cluster_at(plain, {10, 10}), max_points_chooser());
  CHECK(s.score == 15);
  CHECK(s.trace.fired.size() == 1);

  const GameMap fig = figure_cluster_map();
  const ScoredCluster worked = score_cluster(kb, fig, cluster_at(fig, {10, 10}),
                                             by_position({{FamilyId::TerrainGrassland, 2},
                                                          {FamilyId::ResourceOnTile, 1},
                                                          {FamilyId::ResourcesAround, 3},
                                                          {FamilyId::OceanTileBonus, 0}}));
  CHECK(worked.score == 27);
  CHECK(worked.trace.total == 27);
  const auto lines = explain(worked.trace);
  REQUIRE(lines.size() == 5);
  CHECK(lines.back() == "total 27");
  CHECK(lines[0].rfind("TerrainGrassland", 0) == 0);

  int max_sum = 0;
  for (FamilyId f : matched(kb, fig, {10, 10})) {
    int best = -kMaxRulePoints;
    for (const ScoringRule& r : kb.family(f).rules) best = std::max(best, r.points);
    max_sum += best;
  }
  CHECK(score_cluster(kb, fig, cluster_at(fig, {10, 10}), max_points_chooser()).score == max_sum);

  const Chooser rogue = [](const ConflictSet&) { return RuleChoice{999, {}}; };
  CHECK_THROWS_AS(score_cluster(kb, fig, cluster_at(fig, {10, 10}), rogue), RuleError);
}

TEST_CASE("explaining an empty trace") {
  CHECK(explain(ScoreTrace{}) == std::vector<std::string>{"no rules fired"});
}
