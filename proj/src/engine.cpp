#include "settle/engine.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace settle {

Ruleset Ruleset::defaults() {
  Ruleset r;
  auto set_t = [&](TerrainKind t, int f, int p, int tr) { r.terrain[index_of(t)] = {f, p, tr}; };
  set_t(TerrainKind::Grassland, 2, 0, 0);
  set_t(TerrainKind::Plains, 1, 1, 0);
  set_t(TerrainKind::Hills, 1, 2, 0);
  set_t(TerrainKind::Forest, 1, 2, 0);
  set_t(TerrainKind::Mountains, 0, 2, 0);
  set_t(TerrainKind::Desert, 0, 1, 0);
  set_t(TerrainKind::Swamp, 1, 0, 0);
  set_t(TerrainKind::Jungle, 1, 0, 0);
  set_t(TerrainKind::Tundra, 1, 0, 0);
  set_t(TerrainKind::Ocean, 1, 0, 2);
  set_t(TerrainKind::DeepOcean, 1, 0, 1);

  auto set_s = [&](SpecialKind s, int f, int p, int tr) { r.special[index_of(s)] = {f, p, tr}; };
  set_s(SpecialKind::Bull, 0, 2, 0);
  set_s(SpecialKind::Resources, 0, 1, 0);
  set_s(SpecialKind::Wheat, 2, 0, 0);
  set_s(SpecialKind::Oasis, 3, 0, 0);
  set_s(SpecialKind::Pheasant, 2, 0, 0);
  set_s(SpecialKind::Silk, 0, 0, 3);
  set_s(SpecialKind::Coal, 0, 2, 0);
  set_s(SpecialKind::Wine, 0, 0, 4);
  set_s(SpecialKind::Fruit, 3, 0, 1);
  set_s(SpecialKind::Gems, 0, 0, 4);
  set_s(SpecialKind::Gold, 0, 0, 6);
  set_s(SpecialKind::Iron, 0, 3, 0);
  set_s(SpecialKind::Peat, 0, 4, 0);
  set_s(SpecialKind::Spices, 2, 0, 4);
  set_s(SpecialKind::Furs, 1, 0, 3);
  set_s(SpecialKind::Fish, 2, 0, 0);
  set_s(SpecialKind::Whales, 1, 1, 0);
  return r;
}

YieldTriple tile_yield(const Tile& tile, const Ruleset& ruleset) {
  YieldTriple y = ruleset.terrain[index_of(tile.terrain)];
  if (tile.special) y += ruleset.special[index_of(*tile.special)];
  if (tile.river) y.trade += ruleset.river_trade;
  return y;
}

TradeSplit convert_trade(std::int64_t trade, const TradeRates& rates) {
  if (!rates.valid()) {
    throw EngineError(fmt::format("trade rates {}/{}/{} do not sum to 100", rates.gold, rates.luxury,
                                  rates.science));
  }
  if (trade < 0) throw EngineError("trade must be non-negative");
  TradeSplit s;
  s.gold = trade * rates.gold / 100;
  s.luxury = trade * rates.luxury / 100;
  s.science = trade - s.gold - s.luxury;
  return s;
}

std::int64_t yield_weight(const YieldTriple& y) {
  return static_cast<std::int64_t>(y.food) + 2 * y.production + 2 * y.trade;
}

void GameConfig::validate() const {
  if (turn_limit < 1) throw EngineError("turn_limit must be >= 1");
  if (!trade_rates.valid()) throw EngineError("trade rates must be non-negative and sum to 100");
  if (growth_threshold_base < 1) throw EngineError("growth_threshold_base must be >= 1");
  if (food_per_citizen < 0) throw EngineError("food_per_citizen must be >= 0");
  if (settler_production_cost < 1) throw EngineError("settler_production_cost must be >= 1");
  if (settler_population_cost < 0) throw EngineError("settler_population_cost must be >= 0");
  if (settler_min_citizens <= settler_population_cost) {
    throw EngineError("settler_min_citizens must exceed settler_population_cost");
  }
  if (min_city_distance < 1) throw EngineError("min_city_distance must be >= 1");
  if (max_cities < 1) throw EngineError("max_cities must be >= 1");
  if (players < 1 || players > 36) throw EngineError("players must lie in [1, 36]");
  for (const YieldTriple& y : ruleset.terrain) {
    if (y.food < 0 || y.production < 0 || y.trade < 0) throw EngineError("ruleset yields must be >= 0");
  }
  for (const YieldTriple& y : ruleset.special) {
    if (y.food < 0 || y.production < 0 || y.trade < 0) throw EngineError("ruleset bonuses must be >= 0");
  }
  if (ruleset.river_trade < 0 || ruleset.center_bonus.food < 0 || ruleset.center_bonus.production < 0 ||
      ruleset.center_bonus.trade < 0) {
    throw EngineError("ruleset bonuses must be >= 0");
  }
  if (!start_positions.empty() && static_cast<int>(start_positions.size()) != players) {
    throw EngineError("start_positions must list one tile per player");
  }
}

namespace {

bool start_candidate(const GameMap& map, Coord c) {
  return cluster_fits(map, c) && is_buildable(map.at(c).terrain);
}

std::vector<Coord> choose_starts(const GameConfig& config, const GameMap& map, Rng& rng) {
  std::vector<Coord> starts;
  if (!config.start_positions.empty()) {
    for (Coord c : config.start_positions) {
      if (!map.in_bounds(c) || !start_candidate(map, c)) {
        throw EngineError(fmt::format("start position ({},{}) is not a legal city site", c.x, c.y));
      }
      starts.push_back(c);
    }
    return starts;
  }
  std::vector<Coord> candidates;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (start_candidate(map, {x, y})) candidates.push_back({x, y});
    }
  }
  for (int p = 0; p < config.players; ++p) {
    std::vector<Coord> open;
    for (Coord c : candidates) {
      const bool clear = std::all_of(starts.begin(), starts.end(),
                                     [&](Coord s) { return chebyshev(s, c) >= config.min_city_distance; });
      if (clear) open.push_back(c);
    }
    if (open.empty()) throw EngineError(fmt::format("no start position left for player {}", p));
    if (config.random_start) {
      starts.push_back(open[rng.below(open.size())]);
    } else if (p == 0) {
      // Doubled coordinates keep the map center integral.
      const int cx = map.width() - 1;
      const int cy = map.height() - 1;
      auto d2 = [&](Coord c) {
        const long dx = 2L * c.x - cx;
        const long dy = 2L * c.y - cy;
        return dx * dx + dy * dy;
      };
      starts.push_back(*std::min_element(open.begin(), open.end(), [&](Coord a, Coord b) {
        return d2(a) != d2(b) ? d2(a) < d2(b) : row_major_less(a, b);
      }));
    } else {
      auto spread = [&](Coord c) {
        int best = std::numeric_limits<int>::max();
        for (Coord s : starts) best = std::min(best, chebyshev(s, c));
        return best;
      };
      starts.push_back(*std::min_element(open.begin(), open.end(), [&](Coord a, Coord b) {
        return spread(a) != spread(b) ? spread(a) > spread(b) : row_major_less(a, b);
      }));
    }
  }
  return starts;
}

}  // namespace

GameState::GameState(GameConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed), rng_(mix_seed(seed, 0x5e77)) {
  config_.validate();
  map_ = config_.fixed_map ? *config_.fixed_map : generate_map(config_.map_gen, seed);
  initial_map_ = map_;
  starts_ = choose_starts(config_, map_, rng_);
  for (int p = 0; p < config_.players; ++p) add_settler(p, starts_[p]);
}

std::vector<const City*> GameState::cities_of(PlayerId player) const {
  std::vector<const City*> out;
  for (const City& c : cities_) {
    if (c.player == player) out.push_back(&c);
  }
  return out;
}

int GameState::settlers_of(PlayerId player) const {
  return static_cast<int>(std::count_if(settlers_.begin(), settlers_.end(),
                                        [&](const Settler& s) { return s.player == player; }));
}

bool GameState::is_legal_site(PlayerId player, Coord c, std::optional<int> ignore_settler) const {
  if (!map_.in_bounds(c) || !cluster_fits(map_, c)) return false;
  const Tile& tile = map_.at(c);
  if (!is_buildable(tile.terrain)) return false;
  if (tile.owner && *tile.owner != player) return false;
  const int d = config_.min_city_distance;
  for (const City& city : cities_) {
    if (chebyshev(city.location, c) < d) return false;
  }
  for (const Settler& s : settlers_) {
    if (s.player != player || !s.target || (ignore_settler && s.id == *ignore_settler)) continue;
    if (chebyshev(*s.target, c) < d) return false;
  }
  return true;
}

std::vector<Coord> GameState::legal_sites(PlayerId player, std::optional<int> ignore_settler) const {
  std::vector<Coord> out;
  for (int y = kClusterRadius; y < map_.height() - kClusterRadius; ++y) {
    for (int x = kClusterRadius; x < map_.width() - kClusterRadius; ++x) {
      if (is_legal_site(player, {x, y}, ignore_settler)) out.push_back({x, y});
    }
  }
  return out;
}

Settler& GameState::add_settler(PlayerId player, Coord position) {
  if (player < 0 || player >= config_.players) throw EngineError(fmt::format("unknown player {}", player));
  if (!map_.in_bounds(position)) throw EngineError("settler placed off the map");
  Settler s;
  s.id = next_settler_id_++;
  s.player = player;
  s.position = position;
  settlers_.push_back(s);
  return settlers_.back();
}

City& found_city(GameState& state, PlayerId player, Coord coord) {
  GameMap& map = state.map_;
  const GameConfig& config = state.config_;
  if (!map.in_bounds(coord)) throw EngineError(fmt::format("({},{}) is off the map", coord.x, coord.y));
  const Tile& tile = map.at(coord);
  if (!is_buildable(tile.terrain)) {
    throw EngineError(fmt::format("cannot found a city on {} at ({},{})", terrain_name(tile.terrain), coord.x, coord.y));
  }
  if (!cluster_fits(map, coord)) {
    throw EngineError(fmt::format("cluster around ({},{}) leaves the map", coord.x, coord.y));
  }
  if (tile.owner && *tile.owner != player) {
    throw EngineError(fmt::format("({},{}) is owned by player {}", coord.x, coord.y, *tile.owner));
  }
  for (const City& c : state.cities_) {
    if (chebyshev(c.location, coord) < config.min_city_distance) {
      throw EngineError(fmt::format("({},{}) is within {} tiles of city {}", coord.x, coord.y,
                                    config.min_city_distance, c.id));
    }
  }
  const auto settler = std::find_if(state.settlers_.begin(), state.settlers_.end(), [&](const Settler& s) {
    return s.player == player && s.position == coord;
  });
  if (settler == state.settlers_.end()) {
    throw EngineError(fmt::format("player {} has no settler at ({},{})", player, coord.x, coord.y));
  }

  City city;
  city.id = static_cast<CityId>(state.cities_.size());
  city.player = player;
  city.location = coord;
  city.founded_turn = state.turn_ + 1;
  city.worked = {coord};
  state.foundings_.push_back({city.founded_turn, player, city.id, coord, settler->decision});
  state.settlers_.erase(settler);

  for (Coord c : cluster_at(map, coord).tiles) {
    Tile& t = map.at(c);
    if (!t.owner) t.owner = player;
  }
  // A center inside an older city's cluster is taken over from it.
  Tile& center = map.at(coord);
  if (center.worked_by) {
    City& previous = state.cities_.at(static_cast<std::size_t>(*center.worked_by));
    std::erase(previous.worked, coord);
  }
  center.worked_by = city.id;
  state.cities_.push_back(std::move(city));
  return state.cities_.back();
}

std::vector<Coord> assign_citizens(const City& city, const GameMap& map, const GameConfig& config) {
  struct Candidate {
    Coord coord;
    YieldTriple yield;
    std::int64_t weight;
  };
  const MapCluster cluster = cluster_at(map, city.location);
  std::vector<Candidate> free;
  for (Coord c : cluster.tiles) {
    if (c == city.location) continue;
    const Tile& t = map.at(c);
    if (t.owner != city.player) continue;
    if (t.worked_by && *t.worked_by != city.id) continue;
    const YieldTriple y = tile_yield(t, config.ruleset);
    free.push_back({c, y, yield_weight(y)});
  }
  std::sort(free.begin(), free.end(), [](const Candidate& a, const Candidate& b) {
    return a.weight != b.weight ? a.weight > b.weight : row_major_less(a.coord, b.coord);
  });

  std::vector<Coord> worked = {city.location};
  YieldTriple center = tile_yield(map.at(city.location), config.ruleset);
  center += config.ruleset.center_bonus;
  std::int64_t food = center.food;
  const std::int64_t floor =
      static_cast<std::int64_t>(config.food_per_citizen) * city.citizens + config.min_food_surplus;
  const int extra = std::min<int>(city.citizens - 1, static_cast<int>(free.size()));
  std::vector<bool> taken(free.size(), false);

  // Best food total reachable with `slots` more tiles, skipping index `skip`.
  auto best_food = [&](int slots, std::size_t skip) {
    std::vector<int> foods;
    for (std::size_t i = 0; i < free.size(); ++i) {
      if (!taken[i] && i != skip) foods.push_back(free[i].yield.food);
    }
    std::sort(foods.begin(), foods.end(), std::greater<>());
    std::int64_t sum = 0;
    for (int i = 0; i < slots && i < static_cast<int>(foods.size()); ++i) sum += foods[i];
    return sum;
  };

  for (int slot = 0; slot < extra; ++slot) {
    const int remaining = extra - slot - 1;
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < free.size() && !pick; ++i) {
      if (taken[i]) continue;
      if (food + free[i].yield.food + best_food(remaining, i) >= floor) pick = i;
    }
    if (!pick) {
      // Floor out of reach: feed the city as well as possible.
      for (std::size_t i = 0; i < free.size(); ++i) {
        if (taken[i]) continue;
        if (!pick || free[i].yield.food > free[*pick].yield.food) pick = i;
      }
    }
    taken[*pick] = true;
    food += free[*pick].yield.food;
    worked.push_back(free[*pick].coord);
  }
  std::sort(worked.begin() + 1, worked.end(), row_major_less);
  return worked;
}

namespace {

void place_workers(GameMap& map, City& city, const GameConfig& config) {
  for (Coord c : city.worked) {
    Tile& t = map.at(c);
    if (t.worked_by == city.id) t.worked_by.reset();
  }
  city.worked = assign_citizens(city, map, config);
  for (Coord c : city.worked) map.at(c).worked_by = city.id;
}

Coord step_toward(Coord from, Coord to) {
  auto sign = [](int v) { return (v > 0) - (v < 0); };
  return {from.x + sign(to.x - from.x), from.y + sign(to.y - from.y)};
}

}  // namespace

void step_turn(GameState& state, SettlementAgent& agent) {
  if (state.finished()) {
    throw EngineError(fmt::format("turn limit {} already reached", state.config_.turn_limit));
  }
  const GameConfig& config = state.config_;
  const int turn = state.turn_ + 1;

  std::vector<int> ids;
  for (const Settler& s : state.settlers_) ids.push_back(s.id);
  for (int id : ids) {
    auto find = [&] {
      return std::find_if(state.settlers_.begin(), state.settlers_.end(), [&](const Settler& s) { return s.id == id; });
    };
    auto it = find();
    if (it == state.settlers_.end()) continue;
    if (!it->target || !state.is_legal_site(it->player, *it->target, it->id)) {
      it->target.reset();
      SiteDecision d = agent.choose_site(state, *it);
      it = find();
      d.turn = turn;
      d.player = it->player;
      d.settler = it->id;
      if (d.center && !state.is_legal_site(it->player, *d.center, it->id)) {
        throw EngineError(fmt::format("agent chose illegal site ({},{})", d.center->x, d.center->y));
      }
      it->target = d.center;
      it->decision = state.decisions_.size();
      state.decisions_.push_back(std::move(d));
    }
    if (!it->target) continue;
    if (it->position != *it->target) it->position = step_toward(it->position, *it->target);
    if (it->position == *it->target) found_city(state, it->player, it->position);
  }

  state.last_turn_.clear();
  GameMap& map = state.map_;
  for (City& city : state.cities_) {
    place_workers(map, city, config);
    YieldTriple total = config.ruleset.center_bonus;
    for (Coord c : city.worked) total += tile_yield(map.at(c), config.ruleset);
    const TradeSplit split = convert_trade(total.trade, config.trade_rates);
    OutputPoints points{split.gold, split.luxury, split.science, total.food, total.production, total.trade};
    city.history.push_back(points);

    CitySnapshot snap;
    snap.id = city.id;
    snap.player = city.player;
    snap.citizens = city.citizens;
    snap.worked = city.worked;
    snap.points = points;

    city.food_store += total.food - config.food_per_citizen * city.citizens;
    if (city.food_store < 0) {
      city.food_store = 0;
      if (city.citizens > 1) --city.citizens;
    } else if (city.citizens < kClusterSize &&
               city.food_store >= config.growth_threshold_base * city.citizens) {
      city.food_store -= config.growth_threshold_base * city.citizens;
      ++city.citizens;
    }
    const int in_play = static_cast<int>(state.cities_of(city.player).size()) + state.settlers_of(city.player);
    if (city.citizens >= config.settler_min_citizens && in_play < config.max_cities) {
      city.settler_progress += total.production;
      if (city.settler_progress >= config.settler_production_cost) {
        city.settler_progress -= config.settler_production_cost;
        city.citizens -= config.settler_population_cost;
        Settler& s = state.add_settler(city.player, city.location);
        s.home = city.id;
      }
    }
    snap.food_store = city.food_store;
    state.last_turn_.push_back(std::move(snap));
  }
  // Keep |worked| == citizens between turns.
  for (City& city : state.cities_) place_workers(map, city, config);
  state.turn_ = turn;
}

std::int64_t city_output(const City& city, int T) {
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < city.history.size(); ++i) {
    if (city.founded_turn + static_cast<int>(i) > T) break;
    sum += city.history[i].weighted();
  }
  return sum;
}

std::int64_t total_game_output(const GameState& state, PlayerId player, int T) {
  std::int64_t sum = 0;
  for (const City* c : state.cities_of(player)) sum += city_output(*c, T);
  return sum;
}

std::vector<OutputPoints> EpisodeLog::city_history(CityId id) const {
  std::vector<OutputPoints> out;
  for (const TurnRecord& t : turns) {
    for (const CitySnapshot& c : t.cities) {
      if (c.id == id) out.push_back(c.points);
    }
  }
  return out;
}

std::vector<SiteDecision> EpisodeLog::all_decisions() const {
  std::vector<SiteDecision> out;
  for (const TurnRecord& t : turns) out.insert(out.end(), t.decisions.begin(), t.decisions.end());
  return out;
}

EpisodeLog run_episode(SettlementAgent& agent, const GameConfig& config, std::uint64_t seed,
                       std::string evaluator_name) {
  GameState state(config, seed);
  EpisodeLog log;
  log.seed = seed;
  log.evaluator = std::move(evaluator_name);
  log.config = config;
  log.map = state.initial_map();
  log.start_positions = state.start_positions();
  while (!state.finished()) {
    const std::size_t decisions_before = state.decisions().size();
    const std::size_t foundings_before = state.foundings().size();
    step_turn(state, agent);
    TurnRecord rec;
    rec.turn = state.turn();
    rec.decisions.assign(state.decisions().begin() + static_cast<std::ptrdiff_t>(decisions_before),
                         state.decisions().end());
    rec.foundings.assign(state.foundings().begin() + static_cast<std::ptrdiff_t>(foundings_before),
                         state.foundings().end());
    rec.cities = state.last_turn();
    log.turns.push_back(std::move(rec));
  }
  for (const City& c : state.cities()) log.cities.push_back({c.id, c.player, c.location, c.founded_turn});
  for (int p = 0; p < config.players; ++p) log.final_tgo.push_back(total_game_output(state, p, state.turn()));
  return log;
}

SiteDecision ReplayAgent::choose_site(const GameState& state, const Settler& settler) {
  if (next_ >= decisions_.size()) throw EngineError("replay ran out of logged decisions");
  const SiteDecision& d = decisions_[next_++];
  if (d.settler != settler.id || d.turn != state.turn() + 1) {
    throw EngineError(fmt::format("replay diverged: expected settler {} on turn {}, got settler {} on turn {}",
                                  d.settler, d.turn, settler.id, state.turn() + 1));
  }
  return d;
}

}  // namespace settle
