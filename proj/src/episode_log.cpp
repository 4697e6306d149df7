#include "settle/engine.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace settle {

using nlohmann::json;

namespace {

constexpr int kLogVersion = 1;

json coord_json(Coord c) { return json::array({c.x, c.y}); }

Coord coord_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json yield_json(const YieldTriple& y) { return json::array({y.food, y.production, y.trade}); }

YieldTriple yield_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

json config_json(const GameConfig& c) {
  json ruleset;
  ruleset["terrain"] = json::array();
  for (const auto& y : c.ruleset.terrain) ruleset["terrain"].push_back(yield_json(y));
  ruleset["special"] = json::array();
  for (const auto& y : c.ruleset.special) ruleset["special"].push_back(yield_json(y));
  ruleset["river_trade"] = c.ruleset.river_trade;
  ruleset["center_bonus"] = yield_json(c.ruleset.center_bonus);

  const MapGenConfig& m = c.map_gen;
  json map_gen = {
      {"width", m.width},
      {"height", m.height},
      {"terrain_weights", m.terrain_weights},
      {"special_weights", m.special_weights},
      {"land_fraction", m.land_fraction},
      {"min_buildable_fraction", m.min_buildable_fraction},
      {"special_frequency", m.special_frequency},
      {"river_frequency", m.river_frequency},
      {"continents", m.continents},
      {"smoothing_passes", m.smoothing_passes},
  };
  json starts = json::array();
  for (Coord s : c.start_positions) starts.push_back(coord_json(s));
  return {
      {"turn_limit", c.turn_limit},
      {"trade_rates", json::array({c.trade_rates.gold, c.trade_rates.luxury, c.trade_rates.science})},
      {"growth_threshold_base", c.growth_threshold_base},
      {"food_per_citizen", c.food_per_citizen},
      {"min_food_surplus", c.min_food_surplus},
      {"settler_production_cost", c.settler_production_cost},
      {"settler_population_cost", c.settler_population_cost},
      {"settler_min_citizens", c.settler_min_citizens},
      {"min_city_distance", c.min_city_distance},
      {"max_cities", c.max_cities},
      {"players", c.players},
      {"ruleset", ruleset},
      {"map_gen", map_gen},
      {"fixed_map", static_cast<bool>(c.fixed_map)},
      {"start_positions", starts},
      {"random_start", c.random_start},
  };
}

GameConfig config_from(const json& j) {
  GameConfig c;
  c.turn_limit = j.at("turn_limit").get<int>();
  const json& rates = j.at("trade_rates");
  c.trade_rates = {rates.at(0).get<int>(), rates.at(1).get<int>(), rates.at(2).get<int>()};
  c.growth_threshold_base = j.at("growth_threshold_base").get<int>();
  c.food_per_citizen = j.at("food_per_citizen").get<int>();
  c.min_food_surplus = j.at("min_food_surplus").get<int>();
  c.settler_production_cost = j.at("settler_production_cost").get<int>();
  c.settler_population_cost = j.at("settler_population_cost").get<int>();
  c.settler_min_citizens = j.at("settler_min_citizens").get<int>();
  c.min_city_distance = j.at("min_city_distance").get<int>();
  c.max_cities = j.at("max_cities").get<int>();
  c.players = j.at("players").get<int>();
  const json& r = j.at("ruleset");
  for (std::size_t i = 0; i < c.ruleset.terrain.size(); ++i) c.ruleset.terrain[i] = yield_from(r.at("terrain").at(i));
  for (std::size_t i = 0; i < c.ruleset.special.size(); ++i) c.ruleset.special[i] = yield_from(r.at("special").at(i));
  c.ruleset.river_trade = r.at("river_trade").get<int>();
  c.ruleset.center_bonus = yield_from(r.at("center_bonus"));
  const json& m = j.at("map_gen");
  c.map_gen.width = m.at("width").get<int>();
  c.map_gen.height = m.at("height").get<int>();
  c.map_gen.terrain_weights = m.at("terrain_weights").get<std::array<double, kBuildableTerrainCount>>();
  c.map_gen.special_weights = m.at("special_weights").get<std::array<double, kSpecialCount>>();
  c.map_gen.land_fraction = m.at("land_fraction").get<double>();
  c.map_gen.min_buildable_fraction = m.at("min_buildable_fraction").get<double>();
  c.map_gen.special_frequency = m.at("special_frequency").get<double>();
  c.map_gen.river_frequency = m.at("river_frequency").get<double>();
  c.map_gen.continents = m.at("continents").get<int>();
  c.map_gen.smoothing_passes = m.at("smoothing_passes").get<int>();
  for (const json& s : j.at("start_positions")) c.start_positions.push_back(coord_from(s));
  c.random_start = j.at("random_start").get<bool>();
  return c;
}

json trace_json(const ScoreTrace& t) {
  json fired = json::array();
  for (const FiredFamily& f : t.fired) {
    json alts = json::array();
    for (const Alternative& a : f.alternatives) alts.push_back(json::array({a.rule_id, a.points, a.probability}));
    fired.push_back({{"family", family_name(f.family)}, {"rule", f.rule_id}, {"points", f.points}, {"alternatives", alts}});
  }
  return {{"total", t.total}, {"fired", fired}};
}

ScoreTrace trace_from(const json& j) {
  ScoreTrace t;
  t.total = j.at("total").get<int>();
  for (const json& f : j.at("fired")) {
    FiredFamily ff;
    const auto name = f.at("family").get<std::string>();
    const auto family = family_from_name(name);
    if (!family) throw EngineError(fmt::format("unknown rule family '{}' in log", name));
    ff.family = *family;
    ff.rule_id = f.at("rule").get<int>();
    ff.points = f.at("points").get<int>();
    for (const json& a : f.at("alternatives")) {
      ff.alternatives.push_back({a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<double>()});
    }
    t.fired.push_back(std::move(ff));
  }
  return t;
}

json decision_json(const SiteDecision& d) {
  return {
      {"turn", d.turn},
      {"player", d.player},
      {"settler", d.settler},
      {"center", d.center ? coord_json(*d.center) : json(nullptr)},
      {"score", d.score},
      {"state", d.state_id},
      {"trace", d.trace ? trace_json(*d.trace) : json(nullptr)},
  };
}

SiteDecision decision_from(const json& j) {
  SiteDecision d;
  d.turn = j.at("turn").get<int>();
  d.player = j.at("player").get<int>();
  d.settler = j.at("settler").get<int>();
  if (!j.at("center").is_null()) d.center = coord_from(j.at("center"));
  d.score = j.at("score").get<double>();
  d.state_id = j.at("state").get<int>();
  if (!j.at("trace").is_null()) d.trace = trace_from(j.at("trace"));
  return d;
}

}  // namespace

std::string write_episode_log(const EpisodeLog& log) {
  std::string out;
  json starts = json::array();
  for (Coord s : log.start_positions) starts.push_back(coord_json(s));
  json header = {
      {"type", "header"},     {"version", kLogVersion},         {"seed", log.seed},
      {"evaluator", log.evaluator}, {"config", config_json(log.config)}, {"map", encode_map(log.map)},
      {"starts", starts},
  };
  out += header.dump();
  out += '\n';
  for (const TurnRecord& t : log.turns) {
    json decisions = json::array();
    for (const SiteDecision& d : t.decisions) decisions.push_back(decision_json(d));
    json foundings = json::array();
    for (const FoundingEvent& f : t.foundings) {
      foundings.push_back({{"turn", f.turn},
                           {"player", f.player},
                           {"city", f.city},
                           {"center", coord_json(f.center)},
                           {"decision", f.decision ? json(*f.decision) : json(nullptr)}});
    }
    json cities = json::array();
    for (const CitySnapshot& c : t.cities) {
      json worked = json::array();
      for (Coord w : c.worked) worked.push_back(coord_json(w));
      const OutputPoints& p = c.points;
      cities.push_back({{"id", c.id},
                        {"player", c.player},
                        {"citizens", c.citizens},
                        {"food_store", c.food_store},
                        {"worked", worked},
                        {"points", json::array({p.gold, p.luxury, p.science, p.food, p.production, p.trade})}});
    }
    json rec = {{"type", "turn"}, {"turn", t.turn}, {"decisions", decisions}, {"foundings", foundings}, {"cities", cities}};
    out += rec.dump();
    out += '\n';
  }
  json cities = json::array();
  for (const CityRecord& c : log.cities) {
    cities.push_back({{"id", c.id}, {"player", c.player}, {"x", c.location.x}, {"y", c.location.y}, {"founded", c.founded_turn}});
  }
  json footer = {{"type", "footer"}, {"turns", log.turns.size()}, {"cities", cities}, {"tgo", log.final_tgo}};
  out += footer.dump();
  out += '\n';
  return out;
}

EpisodeLog read_episode_log(std::string_view text) {
  EpisodeLog log;
  std::istringstream in{std::string(text)};
  std::string line;
  bool have_header = false;
  bool have_footer = false;
  int line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (have_footer) throw EngineError("records after footer");
      const json rec = json::parse(line);
      const auto type = rec.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw EngineError("duplicate header");
        if (rec.at("version").get<int>() != kLogVersion) throw EngineError("unsupported log version");
        have_header = true;
        log.seed = rec.at("seed").get<std::uint64_t>();
        log.evaluator = rec.at("evaluator").get<std::string>();
        log.config = config_from(rec.at("config"));
        log.map = decode_map(rec.at("map").get<std::string>());
        if (rec.at("config").at("fixed_map").get<bool>()) log.config.fixed_map = std::make_shared<GameMap>(log.map);
        for (const json& s : rec.at("starts")) log.start_positions.push_back(coord_from(s));
      } else if (type == "turn") {
        if (!have_header) throw EngineError("turn record before header");
        TurnRecord t;
        t.turn = rec.at("turn").get<int>();
        for (const json& d : rec.at("decisions")) t.decisions.push_back(decision_from(d));
        for (const json& f : rec.at("foundings")) {
          FoundingEvent e;
          e.turn = f.at("turn").get<int>();
          e.player = f.at("player").get<int>();
          e.city = f.at("city").get<int>();
          e.center = coord_from(f.at("center"));
          if (!f.at("decision").is_null()) e.decision = f.at("decision").get<std::size_t>();
          t.foundings.push_back(e);
        }
        for (const json& c : rec.at("cities")) {
          CitySnapshot s;
          s.id = c.at("id").get<int>();
          s.player = c.at("player").get<int>();
          s.citizens = c.at("citizens").get<int>();
          s.food_store = c.at("food_store").get<int>();
          for (const json& w : c.at("worked")) s.worked.push_back(coord_from(w));
          const json& p = c.at("points");
          s.points = {p.at(0).get<std::int64_t>(), p.at(1).get<std::int64_t>(), p.at(2).get<std::int64_t>(),
                      p.at(3).get<std::int64_t>(), p.at(4).get<std::int64_t>(), p.at(5).get<std::int64_t>()};
          t.cities.push_back(std::move(s));
        }
        log.turns.push_back(std::move(t));
      } else if (type == "footer") {
        if (!have_header) throw EngineError("footer before header");
        have_footer = true;
        for (const json& c : rec.at("cities")) {
          log.cities.push_back({c.at("id").get<int>(), c.at("player").get<int>(),
                                {c.at("x").get<int>(), c.at("y").get<int>()}, c.at("founded").get<int>()});
        }
        log.final_tgo = rec.at("tgo").get<std::vector<std::int64_t>>();
      } else {
        throw EngineError(fmt::format("unknown record type '{}'", type));
      }
    }
  } catch (const json::exception& e) {
    throw EngineError(fmt::format("malformed episode log at line {}: {}", line_no, e.what()));
  } catch (const MapError& e) {
    throw EngineError(fmt::format("malformed map in episode log: {}", e.what()));
  }
  if (!have_header) throw EngineError("episode log has no header");
  if (!have_footer) throw EngineError("episode log has no footer (truncated?)");
  return log;
}

void save_episode_log(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EngineError(fmt::format("cannot write {}", path));
  out << write_episode_log(log);
  if (!out) throw EngineError(fmt::format("failed writing {}", path));
}

EpisodeLog load_episode_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EngineError(fmt::format("cannot read {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_episode_log(buf.str());
}

}  // namespace settle
