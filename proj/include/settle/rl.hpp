#pragma once

#include "settle/engine.hpp"
#include "settle/rng.hpp"
#include "settle/rulekb.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace settle {

class RlError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// turn, cities, citizens, tgo, settlers, mean_tile_weight, specials_owned, coast_cities
inline constexpr int kStateFeatureCount = 8;
const std::vector<std::string>& state_feature_names();

// The player's view of the game, in state_feature_names() order.
std::vector<double> state_features(const GameState& state, PlayerId player);

using Point = std::vector<double>;

// Centroids live in the min-max normalized space of the fitted points.
struct ClusterModel {
  std::vector<Point> centroids;
  std::vector<double> norm_min;
  std::vector<double> norm_max;
  double inertia = 0.0;
  // Inertia after each assignment step; non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;

  int k() const { return static_cast<int>(centroids.size()); }
  int dimension() const { return static_cast<int>(norm_min.size()); }
  Point normalize(std::span<const double> raw) const;
  Point raw_centroid(int i) const;
};

inline constexpr int kDefaultKmeansIterations = 300;

// Lloyd's algorithm with k-means++ seeding. Empty clusters keep their
// previous centroid. Stops at an assignment fixpoint or after max_iter
// assignment steps.
ClusterModel kmeans_fit(std::span<const Point> points, int k, std::uint64_t seed,
                        int max_iter = kDefaultKmeansIterations);

// Nearest centroid after normalization; ties go to the lowest index.
int assign_state(const ClusterModel& model, std::span<const double> features);

struct ActionKey {
  int state = 0;
  FamilyId family = FamilyId::TerrainDesert;
  int rule = 0;
  friend auto operator<=>(const ActionKey&, const ActionKey&) = default;
};

struct RunningMean {
  std::int64_t visits = 0;
  double mean = 0.0;

  void add(double x) {
    ++visits;
    mean += (x - mean) / static_cast<double>(visits);
  }
  friend bool operator==(const RunningMean&, const RunningMean&) = default;
};

// q per (state, family, rule) and V per state. One writer at a time;
// readers take a shared lock and never observe a half-applied credit.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(const ValueTable& other);
  ValueTable& operator=(const ValueTable& other);

  // Rebuilds a table from stored counts and means.
  static ValueTable restore(std::map<ActionKey, RunningMean> actions, std::map<int, RunningMean> states);

  std::optional<RunningMean> q(const ActionKey& key) const;
  std::optional<RunningMean> v(int state) const;
  // q for every member of `set` in member order; none where unvisited.
  std::vector<std::optional<double>> q_row(int state, const ConflictSet& set) const;

  void credit(const ActionKey& key, double reward);
  void credit_state(int state, double reward);

  std::map<ActionKey, RunningMean> actions() const;
  std::map<int, RunningMean> states() const;
  bool empty() const;

  friend bool operator==(const ValueTable& a, const ValueTable& b);

 private:
  mutable std::shared_mutex mutex_;
  std::map<ActionKey, RunningMean> q_;
  std::map<int, RunningMean> v_;
};

// ε follows a linear ramp from `start` to `end` over `decay_episodes`
// episodes; constant when decay_episodes is 0.
struct EpsilonSchedule {
  double start = 0.1;
  double end = 0.1;
  int decay_episodes = 0;

  double at(int episode) const;
  void validate() const;
};

class Policy {
 public:
  Policy(double epsilon, std::uint64_t seed);

  double epsilon() const { return epsilon_; }
  void set_epsilon(double epsilon);
  Rng& rng() { return rng_; }

 private:
  double epsilon_;
  Rng rng_;
};

struct DecisionRecord {
  int state = 0;
  FamilyId family = FamilyId::TerrainDesert;
  int rule = 0;
  int turn = 0;
  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

struct PolicyChoice {
  ScoringRule rule;
  // Aligned with the set's members.
  std::vector<double> probabilities;
  DecisionRecord record;
};

// Greedy member: highest q with unvisited members ranked above all visited
// ones, ties to the lowest rule id. Taken with probability 1 - ε, else a
// uniform member.
PolicyChoice choose(const ValueTable& table, Policy& policy, int state, const ConflictSet& set, int turn);

// Every-visit credit of `reward` to each record; V once per distinct state.
void update_from_episode(ValueTable& table, std::span<const DecisionRecord> records, double reward);

struct TableMeta {
  int k = 0;
  std::vector<std::string> features = state_feature_names();
  double epsilon = 0.1;
  friend bool operator==(const TableMeta&, const TableMeta&) = default;
};

// Text layout, values in hexfloat:
//
//   settle-value-table 1
//   k <k>
//   features <name>,<name>,...
//   epsilon <ε>
//   state <s> <visits> <V>
//   action <s> <FamilyName> <rule> <visits> <q>
//   end
std::string write_table(const ValueTable& table, const TableMeta& meta);
std::pair<ValueTable, TableMeta> read_table(std::string_view text);
void save_table(const ValueTable& table, const TableMeta& meta, const std::string& path);
std::pair<ValueTable, TableMeta> load_table(const std::string& path);

}  // namespace settle
