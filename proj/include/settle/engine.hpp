#pragma once

#include "settle/rng.hpp"
#include "settle/rulekb.hpp"
#include "settle/world.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace settle {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct YieldTriple {
  int food = 0;
  int production = 0;
  int trade = 0;

  YieldTriple& operator+=(const YieldTriple& o) {
    food += o.food;
    production += o.production;
    trade += o.trade;
    return *this;
  }
  friend bool operator==(const YieldTriple&, const YieldTriple&) = default;
};

// The six point kinds of the city output formula.
struct OutputPoints {
  std::int64_t gold = 0;
  std::int64_t luxury = 0;
  std::int64_t science = 0;
  std::int64_t food = 0;
  std::int64_t production = 0;
  std::int64_t trade = 0;

  // gold + luxury + science + food + 2*production + trade
  std::int64_t weighted() const { return gold + luxury + science + food + 2 * production + trade; }

  OutputPoints& operator+=(const OutputPoints& o) {
    gold += o.gold;
    luxury += o.luxury;
    science += o.science;
    food += o.food;
    production += o.production;
    trade += o.trade;
    return *this;
  }
  friend bool operator==(const OutputPoints&, const OutputPoints&) = default;
};

// Per-terrain base yields, per-special bonuses, river and city-center bonuses.
//
// Default table (food, production, trade):
//
//   Grassland  2 0 0   Mountains  0 2 0   Tundra     1 0 0
//   Plains     1 1 0   Desert     0 1 0   Ocean      1 0 2
//   Hills      1 2 0   Swamp      1 0 0   DeepOcean  1 0 1
//   Forest     1 2 0   Jungle     1 0 0
//
//   Bull       0 2 0   Wine       0 0 4   Peat       0 4 0
//   Resources  0 1 0   Fruit      3 0 1   Spices     2 0 4
//   Wheat      2 0 0   Gems       0 0 4   Furs       1 0 3
//   Oasis      3 0 0   Gold       0 0 6   Fish       2 0 0
//   Pheasant   2 0 0   Iron       0 3 0   Whales     1 1 0
//   Silk       0 0 3   Coal       0 2 0
//
// A river adds 1 trade. The tile a city stands on additionally gets
// `center_bonus` (2 food, 1 production by default), so a size-1 city on
// any food-bearing center has a surplus.
struct Ruleset {
  std::array<YieldTriple, kTerrainCount> terrain{};
  std::array<YieldTriple, kSpecialCount> special{};
  int river_trade = 1;
  YieldTriple center_bonus{2, 1, 0};

  static Ruleset defaults();
  friend bool operator==(const Ruleset&, const Ruleset&) = default;
};

YieldTriple tile_yield(const Tile& tile, const Ruleset& ruleset);

// Trade split in whole percent; the three shares sum to 100.
struct TradeRates {
  int gold = 30;
  int luxury = 0;
  int science = 70;

  bool valid() const { return gold >= 0 && luxury >= 0 && science >= 0 && gold + luxury + science == 100; }
  friend bool operator==(const TradeRates&, const TradeRates&) = default;
};

struct TradeSplit {
  std::int64_t gold = 0;
  std::int64_t luxury = 0;
  std::int64_t science = 0;
  friend bool operator==(const TradeSplit&, const TradeSplit&) = default;
};

// Gold and luxury are floored; science takes the remainder.
TradeSplit convert_trade(std::int64_t trade, const TradeRates& rates);

// Per-turn output weight of a yield once trade is converted:
// food + 2*production + trade + (gold + luxury + science).
std::int64_t yield_weight(const YieldTriple& y);

struct GameConfig {
  int turn_limit = 120;
  TradeRates trade_rates;
  int growth_threshold_base = 8;
  int food_per_citizen = 2;
  // Citizens are only placed on tiles that keep the surplus at or above this
  // value when some placement allows it.
  int min_food_surplus = 1;
  int settler_production_cost = 20;
  int settler_population_cost = 1;
  int settler_min_citizens = 3;
  int min_city_distance = 2;
  int max_cities = 8;
  int players = 1;
  Ruleset ruleset = Ruleset::defaults();
  MapGenConfig map_gen;
  // When set, every episode plays on this map instead of generating one.
  std::shared_ptr<const GameMap> fixed_map;
  // Explicit start tiles, one per player. Empty: chosen deterministically
  // (player 0 nearest the map center, later players farthest from earlier
  // starts), or drawn from the game rng when `random_start` is set.
  std::vector<Coord> start_positions;
  bool random_start = false;

  void validate() const;
};

struct City {
  CityId id = 0;
  PlayerId player = 0;
  Coord location;
  int founded_turn = 1;
  int citizens = 1;
  std::vector<Coord> worked;
  int food_store = 0;
  int settler_progress = 0;
  // history[i] holds the points of turn founded_turn + i.
  std::vector<OutputPoints> history;
};

// One evaluator decision: a settler picking its target.
struct SiteDecision {
  int turn = 0;
  PlayerId player = 0;
  int settler = 0;
  std::optional<Coord> center;  // none: no legal site existed
  double score = 0.0;
  int state_id = -1;
  std::optional<ScoreTrace> trace;
};

struct Settler {
  int id = 0;
  PlayerId player = 0;
  Coord position;
  std::optional<CityId> home;
  std::optional<Coord> target;
  // Index into GameState::decisions of the decision that set `target`.
  std::optional<std::size_t> decision;
};

struct FoundingEvent {
  int turn = 0;
  PlayerId player = 0;
  CityId city = 0;
  Coord center;
  // Index into GameState::decisions; none for cities founded directly.
  std::optional<std::size_t> decision;
};

struct CitySnapshot {
  CityId id = 0;
  PlayerId player = 0;
  int citizens = 0;
  int food_store = 0;
  std::vector<Coord> worked;
  OutputPoints points;
};

class GameState;

// Chooses founding sites. The only piece of behaviour that differs
// between the compared setups.
class SettlementAgent {
 public:
  virtual ~SettlementAgent() = default;
  virtual SiteDecision choose_site(const GameState& state, const Settler& settler) = 0;
};

class GameState {
 public:
  GameState(GameConfig config, std::uint64_t seed);

  const GameConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  // Last completed turn; 0 before the first turn is played.
  int turn() const { return turn_; }
  bool finished() const { return turn_ >= config_.turn_limit; }

  const GameMap& map() const { return map_; }
  const GameMap& initial_map() const { return initial_map_; }
  const std::vector<City>& cities() const { return cities_; }
  const std::vector<Settler>& settlers() const { return settlers_; }
  const std::vector<SiteDecision>& decisions() const { return decisions_; }
  const std::vector<FoundingEvent>& foundings() const { return foundings_; }
  const std::vector<Coord>& start_positions() const { return starts_; }
  // Working state of every city during the last played turn: citizens and
  // worked tiles as they produced, food store after banking.
  const std::vector<CitySnapshot>& last_turn() const { return last_turn_; }

  const City& city(CityId id) const { return cities_.at(static_cast<std::size_t>(id)); }
  std::vector<const City*> cities_of(PlayerId player) const;
  int settlers_of(PlayerId player) const;

  // Legal founding sites for `player` in row-major order: buildable
  // center, cluster in bounds, center not owned by another player, no city
  // and no other settler target closer than min_city_distance.
  std::vector<Coord> legal_sites(PlayerId player, std::optional<int> ignore_settler = std::nullopt) const;
  bool is_legal_site(PlayerId player, Coord c, std::optional<int> ignore_settler = std::nullopt) const;

  // Test and scenario hooks.
  Settler& add_settler(PlayerId player, Coord position);
  GameMap& mutable_map() { return map_; }
  City& mutable_city(CityId id) { return cities_.at(static_cast<std::size_t>(id)); }

 private:
  friend City& found_city(GameState& state, PlayerId player, Coord coord);
  friend void step_turn(GameState& state, SettlementAgent& agent);

  GameConfig config_;
  std::uint64_t seed_ = 0;
  int turn_ = 0;
  GameMap initial_map_;
  GameMap map_;
  Rng rng_;
  std::vector<Coord> starts_;
  std::vector<City> cities_;
  std::vector<Settler> settlers_;
  int next_settler_id_ = 0;
  std::vector<SiteDecision> decisions_;
  std::vector<FoundingEvent> foundings_;
  std::vector<CitySnapshot> last_turn_;
};

// Founds a size-1 city working its center on the turn being played
// (turn() + 1), consuming the player's settler on `coord` and claiming the
// cluster's unowned tiles. Throws EngineError on any failed precondition.
City& found_city(GameState& state, PlayerId player, Coord coord);

// Greedy placement: center first, then repeatedly the highest-weight free
// tile (ties row-major) among those that keep the food floor reachable.
std::vector<Coord> assign_citizens(const City& city, const GameMap& map, const GameConfig& config);

// Plays turn() + 1: settlers choose/move/found, then every city works its
// tiles, banks food, grows and builds settlers.
void step_turn(GameState& state, SettlementAgent& agent);

// Sum of weighted points over turns 1..T; turns before founding count 0.
std::int64_t city_output(const City& city, int T);
std::int64_t total_game_output(const GameState& state, PlayerId player, int T);

struct TurnRecord {
  int turn = 0;
  std::vector<SiteDecision> decisions;
  std::vector<FoundingEvent> foundings;
  std::vector<CitySnapshot> cities;
};

struct CityRecord {
  CityId id = 0;
  PlayerId player = 0;
  Coord location;
  int founded_turn = 0;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::string evaluator;
  GameConfig config;
  GameMap map;
  std::vector<Coord> start_positions;
  std::vector<TurnRecord> turns;
  std::vector<CityRecord> cities;
  std::vector<std::int64_t> final_tgo;  // per player

  // Per-turn points of one city over the logged turns, index 0 = founding turn.
  std::vector<OutputPoints> city_history(CityId id) const;
  // All decisions in the order they were made.
  std::vector<SiteDecision> all_decisions() const;
};

EpisodeLog run_episode(SettlementAgent& agent, const GameConfig& config, std::uint64_t seed,
                       std::string evaluator_name = "agent");

// Re-issues a logged decision sequence.
class ReplayAgent final : public SettlementAgent {
 public:
  explicit ReplayAgent(std::vector<SiteDecision> decisions) : decisions_(std::move(decisions)) {}
  SiteDecision choose_site(const GameState& state, const Settler& settler) override;

 private:
  std::vector<SiteDecision> decisions_;
  std::size_t next_ = 0;
};

// Line-delimited JSON: one header record, one record per turn, one footer.
//
//   {"type":"header","version":1,"seed":..,"evaluator":..,"config":{..},"map":"<map text>","starts":[[x,y],..]}
//   {"type":"turn","turn":t,"decisions":[..],"foundings":[..],
//    "cities":[{"id","player","citizens","food_store","worked":[[x,y],..],
//               "points":[gold,luxury,science,food,production,trade]}]}
//   {"type":"footer","cities":[{"id","player","x","y","founded"}],"tgo":[..]}
std::string write_episode_log(const EpisodeLog& log);
EpisodeLog read_episode_log(std::string_view text);

void save_episode_log(const EpisodeLog& log, const std::string& path);
EpisodeLog load_episode_log(const std::string& path);

}  // namespace settle
