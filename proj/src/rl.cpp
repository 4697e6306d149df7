#include "settle/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace settle {

const std::vector<std::string>& state_feature_names() {
  static const std::vector<std::string> names = {"turn",     "cities",           "citizens",       "tgo",
                                                 "settlers", "mean_tile_weight", "specials_owned", "coast_cities"};
  return names;
}

std::vector<double> state_features(const GameState& state, PlayerId player) {
  const GameMap& map = state.map();
  const auto cities = state.cities_of(player);
  double citizens = 0;
  int coast = 0;
  for (const City* c : cities) {
    citizens += c->citizens;
    if (cluster_fits(map, c->location)) {
      const MapCluster cluster = cluster_at(map, c->location);
      const bool wet = std::any_of(cluster.tiles.begin(), cluster.tiles.end(),
                                   [&](Coord at) { return is_water(map.at(at).terrain); });
      if (wet) ++coast;
    }
  }
  std::int64_t weight = 0;
  int owned = 0;
  int specials = 0;
  for (const Tile& t : map.tiles()) {
    if (t.owner != player) continue;
    ++owned;
    weight += yield_weight(tile_yield(t, state.config().ruleset));
    if (t.special) ++specials;
  }
  return {static_cast<double>(state.turn()),
          static_cast<double>(cities.size()),
          citizens,
          static_cast<double>(total_game_output(state, player, state.turn())),
          static_cast<double>(state.settlers_of(player)),
          owned > 0 ? static_cast<double>(weight) / owned : 0.0,
          static_cast<double>(specials),
          static_cast<double>(coast)};
}

// ---------------------------------------------------------------- k-means

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

int nearest(std::span<const Point> centroids, std::span<const double> x, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace

Point ClusterModel::normalize(std::span<const double> raw) const {
  if (static_cast<int>(raw.size()) != dimension()) {
    throw RlError(fmt::format("state features have dimension {}, model expects {}", raw.size(), dimension()));
  }
  Point out(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double range = norm_max[j] - norm_min[j];
    out[j] = range > 0.0 ? (raw[j] - norm_min[j]) / range : 0.0;
  }
  return out;
}

Point ClusterModel::raw_centroid(int i) const {
  const Point& c = centroids.at(static_cast<std::size_t>(i));
  Point out(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) out[j] = norm_min[j] + c[j] * (norm_max[j] - norm_min[j]);
  return out;
}

ClusterModel kmeans_fit(std::span<const Point> points, int k, std::uint64_t seed, int max_iter) {
  if (k < 1) throw RlError("k must be at least 1");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw RlError(fmt::format("k-means needs at least k={} points, got {}", k, points.size()));
  }
  if (max_iter < 1) throw RlError("max_iter must be at least 1");
  const std::size_t dim = points.front().size();
  if (dim == 0) throw RlError("k-means points have dimension 0");

  ClusterModel model;
  model.norm_min = points.front();
  model.norm_max = points.front();
  for (const Point& p : points) {
    if (p.size() != dim) throw RlError("k-means points disagree on dimension");
    for (std::size_t j = 0; j < dim; ++j) {
      if (!std::isfinite(p[j])) throw RlError("k-means points must be finite");
      model.norm_min[j] = std::min(model.norm_min[j], p[j]);
      model.norm_max[j] = std::max(model.norm_max[j], p[j]);
    }
  }
  std::vector<Point> xs;
  xs.reserve(points.size());
  for (const Point& p : points) xs.push_back(model.normalize(p));

  // k-means++ seeding.
  Rng rng(seed);
  const std::size_t n = xs.size();
  auto& centroids = model.centroids;
  centroids.push_back(xs[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(xs[i], centroids[0]);
  while (static_cast<int>(centroids.size()) < k) {
    int pick = rng.weighted(d2);
    if (pick < 0) pick = static_cast<int>(rng.below(n));
    centroids.push_back(xs[static_cast<std::size_t>(pick)]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(xs[i], centroids.back()));
  }

  std::vector<int> assignment(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      const int c = nearest(centroids, xs[i], &d);
      inertia += d;
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    model.inertia = inertia;
    model.inertia_history.push_back(inertia);
    model.iterations = iter + 1;
    if (!changed) break;

    std::vector<Point> sums(static_cast<std::size_t>(k), Point(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(assignment[i])];
      for (std::size_t j = 0; j < dim; ++j) s[j] += xs[i][j];
      ++counts[static_cast<std::size_t>(assignment[i])];
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  return model;
}

int assign_state(const ClusterModel& model, std::span<const double> features) {
  if (model.centroids.empty()) throw RlError("cluster model has no centroids");
  return nearest(model.centroids, model.normalize(features));
}

// ------------------------------------------------------------ value table

ValueTable::ValueTable(const ValueTable& other) {
  std::shared_lock lock(other.mutex_);
  q_ = other.q_;
  v_ = other.v_;
}

ValueTable& ValueTable::operator=(const ValueTable& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_);
  std::shared_lock other_lock(other.mutex_);
  q_ = other.q_;
  v_ = other.v_;
  return *this;
}

ValueTable ValueTable::restore(std::map<ActionKey, RunningMean> actions, std::map<int, RunningMean> states) {
  ValueTable t;
  t.q_ = std::move(actions);
  t.v_ = std::move(states);
  return t;
}

std::optional<RunningMean> ValueTable::q(const ActionKey& key) const {
  std::shared_lock lock(mutex_);
  const auto it = q_.find(key);
  if (it == q_.end()) return std::nullopt;
  return it->second;
}

std::optional<RunningMean> ValueTable::v(int state) const {
  std::shared_lock lock(mutex_);
  const auto it = v_.find(state);
  if (it == v_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::optional<double>> ValueTable::q_row(int state, const ConflictSet& set) const {
  std::shared_lock lock(mutex_);
  std::vector<std::optional<double>> row;
  row.reserve(set.rules.size());
  for (const ScoringRule& r : set.rules) {
    const auto it = q_.find({state, set.family, r.id});
    row.push_back(it == q_.end() ? std::nullopt : std::optional<double>(it->second.mean));
  }
  return row;
}

void ValueTable::credit(const ActionKey& key, double reward) {
  std::unique_lock lock(mutex_);
  q_[key].add(reward);
}

void ValueTable::credit_state(int state, double reward) {
  std::unique_lock lock(mutex_);
  v_[state].add(reward);
}

std::map<ActionKey, RunningMean> ValueTable::actions() const {
  std::shared_lock lock(mutex_);
  return q_;
}

std::map<int, RunningMean> ValueTable::states() const {
  std::shared_lock lock(mutex_);
  return v_;
}

bool ValueTable::empty() const {
  std::shared_lock lock(mutex_);
  return q_.empty() && v_.empty();
}

bool operator==(const ValueTable& a, const ValueTable& b) {
  return a.actions() == b.actions() && a.states() == b.states();
}

// ----------------------------------------------------------------- policy

double EpsilonSchedule::at(int episode) const {
  if (decay_episodes <= 0 || episode >= decay_episodes) return decay_episodes <= 0 ? start : end;
  const double f = static_cast<double>(episode) / decay_episodes;
  return start + (end - start) * f;
}

void EpsilonSchedule::validate() const {
  if (!(start >= 0.0 && start <= 1.0 && end >= 0.0 && end <= 1.0)) throw RlError("epsilon must lie in [0, 1]");
  if (decay_episodes < 0) throw RlError("epsilon decay length must be non-negative");
}

Policy::Policy(double epsilon, std::uint64_t seed) : epsilon_(0.0), rng_(seed) { set_epsilon(epsilon); }

void Policy::set_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw RlError(fmt::format("epsilon {} outside [0, 1]", epsilon));
  epsilon_ = epsilon;
}

PolicyChoice choose(const ValueTable& table, Policy& policy, int state, const ConflictSet& set, int turn) {
  if (set.rules.empty()) throw RlError("cannot choose from an empty conflict set");
  const auto row = table.q_row(state, set);
  const std::size_t n = set.rules.size();

  std::size_t greedy = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const auto& best = row[greedy];
    const auto& cand = row[i];
    bool better = false;
    if (!cand) {
      better = best.has_value() || set.rules[i].id < set.rules[greedy].id;
    } else if (best) {
      better = *cand > *best || (*cand == *best && set.rules[i].id < set.rules[greedy].id);
    }
    if (better) greedy = i;
  }

  const double eps = policy.epsilon();
  std::vector<double> probabilities(n, eps / static_cast<double>(n));
  probabilities[greedy] += 1.0 - eps;

  std::size_t pick = greedy;
  if (policy.rng().uniform() < eps) pick = policy.rng().below(n);
  const ScoringRule& rule = set.rules[pick];
  return {rule, std::move(probabilities), {state, set.family, rule.id, turn}};
}

void update_from_episode(ValueTable& table, std::span<const DecisionRecord> records, double reward) {
  if (!(reward >= 0.0)) throw RlError("episode reward must be non-negative");
  std::set<int> seen;
  for (const DecisionRecord& r : records) {
    table.credit({r.state, r.family, r.rule}, reward);
    if (seen.insert(r.state).second) table.credit_state(r.state, reward);
  }
}

// ------------------------------------------------------------------- I/O

namespace {

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw RlError(fmt::format("bad number '{}' in value table", s));
  return v;
}

}  // namespace

std::string write_table(const ValueTable& table, const TableMeta& meta) {
  std::string out = "settle-value-table 1\n";
  out += fmt::format("k {}\n", meta.k);
  std::string features;
  for (std::size_t i = 0; i < meta.features.size(); ++i) features += (i ? "," : "") + meta.features[i];
  out += fmt::format("features {}\n", features);
  out += fmt::format("epsilon {:a}\n", meta.epsilon);
  for (const auto& [s, v] : table.states()) out += fmt::format("state {} {} {:a}\n", s, v.visits, v.mean);
  for (const auto& [key, q] : table.actions()) {
    out += fmt::format("action {} {} {} {} {:a}\n", key.state, family_name(key.family), key.rule, q.visits, q.mean);
  }
  out += "end\n";
  return out;
}

std::pair<ValueTable, TableMeta> read_table(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto expect_line = [&](const char* what) {
    if (!std::getline(in, line)) throw RlError(fmt::format("value table truncated before {}", what));
  };
  expect_line("header");
  if (line != "settle-value-table 1") throw RlError("not a value table (bad header)");

  TableMeta meta;
  std::string word;
  expect_line("k");
  {
    std::istringstream ls(line);
    if (!(ls >> word >> meta.k) || word != "k") throw RlError("value table: malformed k line");
  }
  expect_line("features");
  if (line.rfind("features ", 0) != 0) throw RlError("value table: malformed features line");
  meta.features.clear();
  {
    std::istringstream fs(line.substr(9));
    std::string name;
    while (std::getline(fs, name, ',')) meta.features.push_back(name);
  }
  expect_line("epsilon");
  {
    std::istringstream ls(line);
    std::string value;
    if (!(ls >> word >> value) || word != "epsilon") throw RlError("value table: malformed epsilon line");
    meta.epsilon = parse_hex(value);
  }

  std::map<ActionKey, RunningMean> actions;
  std::map<int, RunningMean> states;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    ls >> word;
    std::string mean;
    if (word == "state") {
      int s = 0;
      RunningMean v;
      if (!(ls >> s >> v.visits >> mean)) throw RlError(fmt::format("value table: malformed line '{}'", line));
      v.mean = parse_hex(mean);
      states[s] = v;
    } else if (word == "action") {
      ActionKey key;
      std::string family;
      RunningMean q;
      if (!(ls >> key.state >> family >> key.rule >> q.visits >> mean)) {
        throw RlError(fmt::format("value table: malformed line '{}'", line));
      }
      const auto f = family_from_name(family);
      if (!f) throw RlError(fmt::format("value table: unknown family '{}'", family));
      key.family = *f;
      q.mean = parse_hex(mean);
      actions[key] = q;
    } else {
      throw RlError(fmt::format("value table: unexpected line '{}'", line));
    }
  }
  if (!ended) throw RlError("value table truncated (no end marker)");
  return {ValueTable::restore(std::move(actions), std::move(states)), std::move(meta)};
}

void save_table(const ValueTable& table, const TableMeta& meta, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RlError(fmt::format("cannot write value table '{}'", path));
  out << write_table(table, meta);
  if (!out) throw RlError(fmt::format("failed writing value table '{}'", path));
}

std::pair<ValueTable, TableMeta> load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RlError(fmt::format("cannot read value table '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_table(ss.str());
}

}  // namespace settle
