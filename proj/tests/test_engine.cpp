#include "doctest.h"
#include "settle/engine.hpp"
#include "settle/harness.hpp"
#include "support.hpp"

#include <algorithm>

using namespace settle;

namespace {

Tile tile_of(TerrainKind t, std::optional<SpecialKind> s = std::nullopt, bool river = false) {
  Tile tile;
  tile.terrain = t;
  tile.special = s;
  tile.river = river;
  return tile;
}

int strictly_greater_components(YieldTriple a, YieldTriple b) {
  return (a.food > b.food) + (a.production > b.production) + (a.trade > b.trade);
}

class IdleAgent final : public SettlementAgent {
 public:
  SiteDecision choose_site(const GameState&, const Settler&) override { return {}; }
};

}  // namespace

TEST_CASE("tile yields from the default table") {
  const Ruleset r = Ruleset::defaults();
  CHECK(tile_yield(tile_of(TerrainKind::Grassland), r) == YieldTriple{2, 0, 0});
  CHECK(tile_yield(tile_of(TerrainKind::Grassland, std::nullopt, true), r) == YieldTriple{2, 0, 1});
  CHECK(strictly_greater_components(tile_yield(tile_of(TerrainKind::Ocean, SpecialKind::Whales), r),
                                    tile_yield(tile_of(TerrainKind::Ocean), r)) >= 2);
  for (TerrainKind t : kAllTerrains) {
    for (int s = 0; s < kSpecialCount; ++s) {
      const YieldTriple with = tile_yield(tile_of(t, static_cast<SpecialKind>(s)), r);
      const YieldTriple without = tile_yield(tile_of(t), r);
      CHECK(with.food >= without.food);
      CHECK(with.production >= without.production);
      CHECK(with.trade >= without.trade);
    }
  }
}

TEST_CASE("trade conversion floors gold and luxury") {
  CHECK(convert_trade(0, {50, 0, 50}) == TradeSplit{0, 0, 0});
  CHECK(convert_trade(10, {50, 0, 50}) == TradeSplit{5, 0, 5});
  CHECK(convert_trade(7, {50, 0, 50}) == TradeSplit{3, 0, 4});
  for (int trade = 0; trade < 60; ++trade) {
    const TradeSplit s = convert_trade(trade, {33, 33, 34});
    CHECK(s.gold + s.luxury + s.science == trade);
  }
}

TEST_CASE("city output sums weighted points") {
  City c;
  c.founded_turn = 1;
  c.history = {OutputPoints{}, OutputPoints{}};
  CHECK(city_output(c, 2) == 0);
  c.history = {OutputPoints{1, 0, 1, 2, 3, 2}};
  CHECK(city_output(c, 1) == 12);
  c.founded_turn = 50;
  CHECK(city_output(c, 49) == 0);
  CHECK(city_output(c, 50) == 12);
}

TEST_CASE("founding preconditions") {
  GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  map.at({5, 5}).terrain = TerrainKind::Ocean;
  GameState state(test::config_on(map), 1);
  CHECK(total_game_output(state, 0, 10) == 0);

  state.add_settler(0, {5, 5});
  CHECK_THROWS_AS(found_city(state, 0, {5, 5}), EngineError);

  state.add_settler(0, {10, 10});
  const City& city = found_city(state, 0, {10, 10});
  CHECK(city.citizens == 1);
  CHECK(city.worked == std::vector<Coord>{{10, 10}});

  state.add_settler(0, {11, 10});
  CHECK_THROWS_AS(found_city(state, 0, {11, 10}), EngineError);
  CHECK_THROWS_AS(found_city(state, 0, {12, 12}), EngineError);  // no settler there
}

TEST_CASE("citizen assignment") {
  GameMap map = test::uniform_map(20, 20, TerrainKind::Plains);
  map.at({11, 11}).special = SpecialKind::Bull;  // 1/3/0 beats every other Plains tile
  GameState state(test::config_on(map), 1);
  state.add_settler(0, {10, 10});
  City& city = found_city(state, 0, {10, 10});
  const GameConfig& cfg = state.config();
  CHECK(assign_citizens(city, state.map(), cfg) == std::vector<Coord>{{10, 10}});

  city.citizens = 2;
  const auto two = assign_citizens(city, state.map(), cfg);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == Coord{10, 10});
  CHECK(two[1] == Coord{11, 11});

  city.citizens = 21;
  auto all = assign_citizens(city, state.map(), cfg);
  std::sort(all.begin(), all.end(), row_major_less);
  const MapCluster cl = cluster_at(state.map(), {10, 10});
  CHECK(std::equal(all.begin(), all.end(), cl.tiles.begin(), cl.tiles.end()));
}

TEST_CASE("a turn without cities or settlers only advances the clock") {
  const GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  GameState state(test::config_on(map), 1);
  IdleAgent idle;
  step_turn(state, idle);  // the start settler asks and gets no site
  const auto settlers = state.settlers().size();
  step_turn(state, idle);
  CHECK(state.turn() == 2);
  CHECK(state.cities().empty());
  CHECK(state.settlers().size() == settlers);
}

TEST_CASE("size-1 city on all-Grassland produces one history entry per turn") {
  const GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  GameState state(test::config_on(map), 1);
  test::StayAgent stay;
  step_turn(state, stay);
  REQUIRE(state.cities().size() == 1);
  const City& city = state.cities()[0];
  REQUIRE(city.history.size() == 1);
  // Grassland center 2 food plus the center bonus (2 food, 1 production).
  CHECK(city.history[0] == OutputPoints{0, 0, 0, 4, 1, 0});
  CHECK(city.food_store == 2);
}

TEST_CASE("growth subtracts the threshold") {
  const GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  GameState state(test::config_on(map), 1);
  test::StayAgent stay;
  step_turn(state, stay);
  City& city = state.mutable_city(0);
  city.food_store = state.config().growth_threshold_base - 1;
  step_turn(state, stay);  // +2 surplus crosses the threshold of 8
  CHECK(city.citizens == 2);
  CHECK(city.food_store == 1);
}

TEST_CASE("episodes replay and log consistently") {
  GameConfig cfg;
  cfg.turn_limit = 40;
  RandomEvaluator random;
  random.begin_episode(42);
  EvaluatorAgent agent(random);
  const EpisodeLog log = run_episode(agent, cfg, 42, "random");
  CHECK(log.turns.size() == 40);
  if (!log.cities.empty()) CHECK(log.final_tgo[0] > 0);

  ReplayAgent replay(log.all_decisions());
  const EpisodeLog again = run_episode(replay, cfg, 42, "random");
  CHECK(again.final_tgo == log.final_tgo);
  CHECK(write_episode_log(again) == write_episode_log(log));

  const EpisodeLog parsed = read_episode_log(write_episode_log(log));
  CHECK(write_episode_log(parsed) == write_episode_log(log));
  CHECK(parsed.final_tgo == log.final_tgo);
}

TEST_CASE("one-turn horizon counts only turn-1 foundings") {
  const GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  GameConfig cfg = test::config_on(map, 1);
  test::StayAgent stay;
  const EpisodeLog log = run_episode(stay, cfg, 3);
  REQUIRE(log.cities.size() == 1);
  CHECK(log.final_tgo[0] == log.turns[0].cities[0].points.weighted());
}
