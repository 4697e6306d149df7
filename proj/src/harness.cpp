#include "settle/harness.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace settle {

// -------------------------------------------------------------- evaluators

RuleEvaluator::RuleEvaluator(KnowledgeBase kb, ValueTable& table, Policy& policy, const ClusterModel* states,
                             ChoiceScope scope)
    : kb_(std::move(kb)), table_(table), policy_(policy), states_(states), scope_(scope) {}

int RuleEvaluator::begin_decision(const GameState& state, PlayerId player) {
  drawn_.clear();
  state_id_ = states_ ? assign_state(*states_, state_features(state, player)) : 0;
  return state_id_;
}

SiteScore RuleEvaluator::score_site(const GameState& state, Coord center, PlayerId /*player*/) {
  const int turn = state.turn() + 1;
  const Chooser chooser = [&](const ConflictSet& set) {
    if (scope_ == ChoiceScope::PerDecision) {
      const auto it = drawn_.find(set.family);
      if (it != drawn_.end()) return it->second;
    }
    PolicyChoice c = choose(table_, policy_, state_id_, set, turn);
    records_.push_back(c.record);
    RuleChoice out{c.rule.id, std::move(c.probabilities)};
    if (scope_ == ChoiceScope::PerDecision) drawn_.emplace(set.family, out);
    return out;
  };
  ScoredCluster scored = score_cluster(kb_, state.map(), cluster_at(state.map(), center), chooser);
  return {center, static_cast<double>(scored.score), std::move(scored.trace)};
}

std::vector<DecisionRecord> RuleEvaluator::take_records() {
  std::vector<DecisionRecord> out;
  out.swap(records_);
  return out;
}

NnEvaluator::NnEvaluator(MlpModel model, Normalization norm) : model_(std::move(model)), norm_(std::move(norm)) {
  if (model_.config.input_dim != FeatureLayout::kDimension || norm_.min.size() != static_cast<std::size_t>(FeatureLayout::kDimension)) {
    throw HarnessError("NN model does not match the feature layout");
  }
}

SiteScore NnEvaluator::score_site(const GameState& state, Coord center, PlayerId player) {
  const auto sites = city_sites(state);
  return {center, predict_site(model_, norm_, state.map(), center, player, sites), {}};
}

SiteScore RandomEvaluator::score_site(const GameState&, Coord center, PlayerId) {
  return {center, rng_.uniform(), {}};
}

// -------------------------------------------------------------- placement

namespace {

std::vector<SiteScore> rank(Evaluator& evaluator, const GameState& state, PlayerId player,
                            std::optional<Coord> origin, int radius) {
  std::vector<SiteScore> out;
  for (Coord c : state.legal_sites(player)) {
    if (origin && chebyshev(*origin, c) > radius) continue;
    out.push_back(evaluator.score_site(state, c, player));
  }
  std::stable_sort(out.begin(), out.end(), [&](const SiteScore& a, const SiteScore& b) {
    if (a.score != b.score) return a.score > b.score;
    if (origin) {
      const int da = chebyshev(*origin, a.center);
      const int db = chebyshev(*origin, b.center);
      if (da != db) return da < db;
    }
    return row_major_less(a.center, b.center);
  });
  return out;
}

}  // namespace

std::vector<SiteScore> evaluate_placements(Evaluator& evaluator, const GameState& state, PlayerId player) {
  return rank(evaluator, state, player, std::nullopt, 0);
}

std::vector<SiteScore> evaluate_placements(Evaluator& evaluator, const GameState& state, PlayerId player,
                                           Coord origin, int radius) {
  return rank(evaluator, state, player, origin, radius);
}

void AgentConfig::validate() const {
  if (start_radius < 0 || search_radius < 0) throw HarnessError("agent search radii must be non-negative");
}

SiteDecision EvaluatorAgent::choose_site(const GameState& state, const Settler& settler) {
  if (hook_) hook_(state, settler.player);
  SiteDecision d;
  d.state_id = evaluator_.begin_decision(state, settler.player);
  const int radius = settler.home ? config_.search_radius : config_.start_radius;
  auto ranked = evaluate_placements(evaluator_, state, settler.player, settler.position, radius);
  if (ranked.empty()) ranked = evaluate_placements(evaluator_, state, settler.player, settler.position, 1 << 20);
  if (ranked.empty()) return d;
  d.center = ranked.front().center;
  d.score = ranked.front().score;
  d.trace = std::move(ranked.front().trace);
  return d;
}

// ------------------------------------------------------------- experiments

std::string_view evaluator_kind_name(EvaluatorKind k) {
  switch (k) {
    case EvaluatorKind::Rule: return "kb";
    case EvaluatorKind::Nn: return "nn";
    case EvaluatorKind::Random: return "random";
    case EvaluatorKind::Constant: return "constant";
  }
  return "?";
}

std::optional<EvaluatorKind> evaluator_kind_from_name(std::string_view name) {
  for (EvaluatorKind k : {EvaluatorKind::Rule, EvaluatorKind::Nn, EvaluatorKind::Random, EvaluatorKind::Constant}) {
    if (evaluator_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

void RlConfig::validate() const {
  if (k < 1) throw HarnessError("k must be at least 1");
  if (warmup_episodes < 0) throw HarnessError("warmup episodes must be non-negative");
  if (kmeans_max_iter < 1) throw HarnessError("k-means iteration bound must be at least 1");
  epsilon.validate();
}

void ExperimentConfig::validate() const {
  if (episodes < 1) throw HarnessError("an experiment needs at least one episode");
  if (window_percent < 1 || window_percent > 50) throw HarnessError("window percent must lie in [1, 50]");
  game.validate();
  rl.validate();
  agent.validate();
}

std::uint64_t episode_seed(std::uint64_t base, int episode) {
  return mix_seed(base, static_cast<std::uint64_t>(episode));
}

GameConfig resolve_game_config(const ExperimentConfig& config) {
  GameConfig game = config.game;
  if (config.fixed_map && !game.fixed_map) {
    MapGenConfig gen = game.map_gen;
    game.fixed_map = std::make_shared<const GameMap>(generate_map(gen, mix_seed(config.seed, 0xf12ed)));
  }
  return game;
}

void RunMetrics::push(double value) {
  const double prev = running_avg.empty() ? 0.0 : running_avg.back() * static_cast<double>(tgo.size());
  tgo.push_back(value);
  running_avg.push_back((prev + value) / static_cast<double>(tgo.size()));
}

std::size_t RunMetrics::window() const {
  return std::max<std::size_t>(1, tgo.size() * static_cast<std::size_t>(window_percent) / 100);
}

double RunMetrics::first_window_mean() const {
  if (tgo.empty()) return 0.0;
  const std::size_t w = window();
  double s = 0.0;
  for (std::size_t i = 0; i < w; ++i) s += tgo[i];
  return s / static_cast<double>(w);
}

double RunMetrics::last_window_mean() const {
  if (tgo.empty()) return 0.0;
  const std::size_t w = window();
  double s = 0.0;
  for (std::size_t i = tgo.size() - w; i < tgo.size(); ++i) s += tgo[i];
  return s / static_cast<double>(w);
}

double RunMetrics::improvement() const {
  const double first = first_window_mean();
  return first != 0.0 ? (last_window_mean() - first) / first : 0.0;
}

RunMetrics RunMetrics::from_logs(std::span<const EpisodeLog> logs, int window_percent) {
  RunMetrics m;
  m.window_percent = window_percent;
  for (const EpisodeLog& log : logs) {
    // Recomputed from the per-turn city points rather than trusting final_tgo.
    std::int64_t tgo = 0;
    for (const TurnRecord& t : log.turns) {
      for (const CitySnapshot& c : t.cities) {
        if (c.player == 0) tgo += c.points.weighted();
      }
    }
    m.push(static_cast<double>(tgo));
  }
  return m;
}

namespace {

std::vector<EpisodeLog> play_random(const GameConfig& game, const AgentConfig& agent_config, std::uint64_t base,
                                    int episodes, const EvaluatorAgent::DecisionHook& hook = {}) {
  RandomEvaluator evaluator;
  EvaluatorAgent agent(evaluator, agent_config);
  if (hook) agent.on_decision(hook);
  std::vector<EpisodeLog> logs;
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t seed = episode_seed(base, i);
    evaluator.begin_episode(seed);
    logs.push_back(run_episode(agent, game, seed, evaluator.name()));
  }
  return logs;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const NnModel* model, const ProgressFn& progress) {
  config.validate();
  const GameConfig game = resolve_game_config(config);
  ExperimentResult result;
  result.metrics.window_percent = config.window_percent;
  result.table_meta.epsilon = config.rl.epsilon.start;

  std::unique_ptr<Evaluator> evaluator;
  Policy policy(config.rl.epsilon.at(0), mix_seed(config.seed, 0xe951));
  RuleEvaluator* rule = nullptr;
  switch (config.evaluator) {
    case EvaluatorKind::Rule: {
      if (config.rl.warmup_episodes > 0) {
        std::vector<Point> points;
        play_random(game, config.agent, mix_seed(config.seed, 0x3a12), config.rl.warmup_episodes,
                    [&](const GameState& s, PlayerId p) { points.push_back(state_features(s, p)); });
        if (points.empty()) throw HarnessError("warmup produced no decisions to cluster");
        const int k = std::min<int>(config.rl.k, static_cast<int>(points.size()));
        result.states = kmeans_fit(points, k, mix_seed(config.seed, 0x63e4), config.rl.kmeans_max_iter);
        result.table_meta.k = k;
      } else {
        result.table_meta.k = 1;
      }
      auto r = std::make_unique<RuleEvaluator>(config.kb, result.table, policy,
                                               result.states ? &*result.states : nullptr, config.rl.scope);
      rule = r.get();
      evaluator = std::move(r);
      break;
    }
    case EvaluatorKind::Nn:
      if (!model) throw HarnessError("the nn evaluator needs a trained model");
      evaluator = std::make_unique<NnEvaluator>(model->model, model->norm);
      break;
    case EvaluatorKind::Random: evaluator = std::make_unique<RandomEvaluator>(); break;
    case EvaluatorKind::Constant: evaluator = std::make_unique<ConstantEvaluator>(); break;
  }

  EvaluatorAgent agent(*evaluator, config.agent);
  for (int i = 0; i < config.episodes; ++i) {
    const std::uint64_t seed = episode_seed(config.seed, i);
    policy.set_epsilon(config.rl.epsilon.at(i));
    evaluator->begin_episode(seed);
    EpisodeLog log = run_episode(agent, game, seed, evaluator->name());
    const double reward = static_cast<double>(log.final_tgo.at(0));
    if (rule) update_from_episode(result.table, rule->take_records(), reward);
    result.metrics.push(reward);
    if (progress) progress(i, log);
    result.logs.push_back(std::move(log));
  }
  return result;
}

std::vector<EpisodeLog> bootstrap_logs(const ExperimentConfig& config, int episodes) {
  return play_random(resolve_game_config(config), config.agent, mix_seed(config.seed, 0xb0075), episodes);
}

NnModel train_bootstrap_model(const ExperimentConfig& config, int episodes, const MlpConfig& mlp) {
  const auto logs = bootstrap_logs(config, episodes);
  const Dataset raw = build_dataset(logs);
  const Normalization norm = minmax_fit(raw);
  const TrainResult trained = train(normalize(raw.entries, norm), mlp);
  return {trained.model, norm};
}

// ------------------------------------------------------------- comparison

namespace {

Distribution terrain_distribution(const std::vector<std::int64_t>& counts) {
  Distribution d;
  std::int64_t total = 0;
  for (std::int64_t c : counts) total += c;
  for (TerrainKind t : kAllTerrains) {
    d.categories.emplace_back(terrain_name(t));
    const std::int64_t c = counts[static_cast<std::size_t>(index_of(t))];
    d.counts.push_back(c);
    d.shares.push_back(total > 0 ? static_cast<double>(c) / static_cast<double>(total) : 0.0);
  }
  return d;
}

}  // namespace

Distribution center_terrain_distribution(std::span<const EpisodeLog> logs) {
  std::vector<std::int64_t> counts(kTerrainCount, 0);
  for (const EpisodeLog& log : logs) {
    for (const CityRecord& c : log.cities) ++counts[static_cast<std::size_t>(index_of(log.map.at(c.location).terrain))];
  }
  return terrain_distribution(counts);
}

Distribution worked_terrain_distribution(std::span<const EpisodeLog> logs) {
  std::vector<std::int64_t> counts(kTerrainCount, 0);
  for (const EpisodeLog& log : logs) {
    if (log.turns.empty()) continue;
    for (const CitySnapshot& c : log.turns.back().cities) {
      for (Coord at : c.worked) ++counts[static_cast<std::size_t>(index_of(log.map.at(at).terrain))];
    }
  }
  return terrain_distribution(counts);
}

ComparisonReport compare(const RunMetrics& a, const RunMetrics& b, std::span<const EpisodeLog> logs_a,
                         std::span<const EpisodeLog> logs_b) {
  auto turn_limit = [](std::span<const EpisodeLog> logs) -> std::optional<int> {
    std::optional<int> limit;
    for (const EpisodeLog& l : logs) {
      if (limit && *limit != l.config.turn_limit) throw HarnessError("a run mixes different turn limits");
      limit = l.config.turn_limit;
    }
    return limit;
  };
  const auto la = turn_limit(logs_a);
  const auto lb = turn_limit(logs_b);
  if (la && lb && *la != *lb) throw HarnessError(fmt::format("turn limits differ: {} vs {}", *la, *lb));
  for (std::size_t i = 0; i < std::min(logs_a.size(), logs_b.size()); ++i) {
    if (!(logs_a[i].map == logs_b[i].map)) throw HarnessError(fmt::format("episode {} was played on different maps", i));
  }

  ComparisonReport r;
  r.a = a;
  r.b = b;
  r.name_a = logs_a.empty() ? "a" : logs_a.front().evaluator;
  r.name_b = logs_b.empty() ? "b" : logs_b.front().evaluator;
  r.improvement_a = a.improvement();
  r.improvement_b = b.improvement();
  r.center_a = center_terrain_distribution(logs_a);
  r.center_b = center_terrain_distribution(logs_b);
  r.worked_a = worked_terrain_distribution(logs_a);
  r.worked_b = worked_terrain_distribution(logs_b);
  return r;
}

std::string ComparisonReport::summary() const {
  std::string out;
  auto run = [&](const char* tag, const std::string& name, const RunMetrics& m, double imp) {
    out += fmt::format("{} {} episodes {} first_window_mean {:.3f} last_window_mean {:.3f} improvement {:.2f}%\n", tag,
                       name, m.size(), m.first_window_mean(), m.last_window_mean(), 100.0 * imp);
  };
  run("run_a", name_a, a, improvement_a);
  run("run_b", name_b, b, improvement_b);
  out += fmt::format("improvement_delta {:.2f}%\n", 100.0 * (improvement_a - improvement_b));
  out += fmt::format("last_window_delta {:.3f}\n", a.last_window_mean() - b.last_window_mean());
  return out;
}

// -------------------------------------------------------------------- CSV

namespace {

std::vector<std::string> csv_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_number(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw HarnessError(fmt::format("bad CSV number '{}'", s));
  return v;
}

std::vector<std::string> cells_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::string metrics_csv(const RunMetrics& m) {
  std::string out = "episode,tgo,running_avg\n";
  for (std::size_t i = 0; i < m.tgo.size(); ++i) out += fmt::format("{},{:.17g},{:.17g}\n", i, m.tgo[i], m.running_avg[i]);
  return out;
}

RunMetrics parse_metrics_csv(std::string_view text, int window_percent) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines[0] != "episode,tgo,running_avg") throw HarnessError("metrics CSV: bad header");
  RunMetrics m;
  m.window_percent = window_percent;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = cells_of(lines[i]);
    if (cells.size() != 3 || parse_number(cells[0]) != static_cast<double>(i - 1)) {
      throw HarnessError(fmt::format("metrics CSV: malformed row {}", i));
    }
    m.tgo.push_back(parse_number(cells[1]));
    m.running_avg.push_back(parse_number(cells[2]));
  }
  return m;
}

std::string distribution_csv(const Distribution& d) {
  std::string out = "category,share\n";
  for (std::size_t i = 0; i < d.categories.size(); ++i) out += fmt::format("{},{:.17g}\n", d.categories[i], d.shares[i]);
  return out;
}

Distribution parse_distribution_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines[0] != "category,share") throw HarnessError("distribution CSV: bad header");
  Distribution d;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = cells_of(lines[i]);
    if (cells.size() != 2) throw HarnessError(fmt::format("distribution CSV: malformed row {}", i));
    d.categories.push_back(cells[0]);
    d.shares.push_back(parse_number(cells[1]));
  }
  return d;
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HarnessError(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw HarnessError(fmt::format("failed writing '{}'", path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError(fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace settle
