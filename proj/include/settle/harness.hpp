#pragma once

#include "settle/engine.hpp"
#include "settle/features.hpp"
#include "settle/mlp.hpp"
#include "settle/rl.hpp"
#include "settle/rulekb.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace settle {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SiteScore {
  Coord center;
  double score = 0.0;
  std::optional<ScoreTrace> trace;
};

// Scores candidate city centers. Agents call begin_episode once per
// episode and begin_decision once per settler decision, then score_site
// for each candidate.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t /*episode_seed*/) {}
  // Returns the state id recorded with the decision, -1 if none.
  virtual int begin_decision(const GameState& /*state*/, PlayerId /*player*/) { return -1; }
  virtual SiteScore score_site(const GameState& state, Coord center, PlayerId player) = 0;
};

// When a rule is drawn for a conflict set.
enum class ChoiceScope {
  // One draw per family per settler decision, shared by every candidate.
  PerDecision,
  // A fresh draw at every conflict-set occurrence (every tile scored).
  PerOccurrence,
};

// Rule knowledge base with the RL policy as conflict resolver. Each draw
// produces one DecisionRecord.
class RuleEvaluator final : public Evaluator {
 public:
  RuleEvaluator(KnowledgeBase kb, ValueTable& table, Policy& policy, const ClusterModel* states = nullptr,
                ChoiceScope scope = ChoiceScope::PerOccurrence);

  std::string name() const override { return "kb"; }
  int begin_decision(const GameState& state, PlayerId player) override;
  SiteScore score_site(const GameState& state, Coord center, PlayerId player) override;

  const KnowledgeBase& kb() const { return kb_; }
  std::vector<DecisionRecord>& records() { return records_; }
  std::vector<DecisionRecord> take_records();

 private:
  KnowledgeBase kb_;
  ValueTable& table_;
  Policy& policy_;
  const ClusterModel* states_;
  ChoiceScope scope_;
  int state_id_ = 0;
  std::map<FamilyId, RuleChoice> drawn_;
  std::vector<DecisionRecord> records_;
};

// Frozen regressor; predictions are de-normalized labels.
class NnEvaluator final : public Evaluator {
 public:
  NnEvaluator(MlpModel model, Normalization norm);

  std::string name() const override { return "nn"; }
  SiteScore score_site(const GameState& state, Coord center, PlayerId player) override;

 private:
  MlpModel model_;
  Normalization norm_;
};

// Uniform scores from a generator reseeded every episode.
class RandomEvaluator final : public Evaluator {
 public:
  std::string name() const override { return "random"; }
  void begin_episode(std::uint64_t episode_seed) override { rng_ = Rng(mix_seed(episode_seed, 0x7a4d)); }
  SiteScore score_site(const GameState& state, Coord center, PlayerId player) override;

 private:
  Rng rng_{0};
};

class ConstantEvaluator final : public Evaluator {
 public:
  explicit ConstantEvaluator(double value = 0.0) : value_(value) {}
  std::string name() const override { return "constant"; }
  SiteScore score_site(const GameState&, Coord center, PlayerId) override { return {center, value_, {}}; }

 private:
  double value_;
};

// Every legal site for `player`, best first; ties row-major.
std::vector<SiteScore> evaluate_placements(Evaluator& evaluator, const GameState& state, PlayerId player);

// Legal sites within `radius` (Chebyshev) of `origin`, best first; ties go
// to the nearer site, then row-major.
std::vector<SiteScore> evaluate_placements(Evaluator& evaluator, const GameState& state, PlayerId player,
                                           Coord origin, int radius);

struct AgentConfig {
  // A settler without a home city looks this far; later settlers use
  // search_radius. A settler that finds nothing in range considers the
  // whole map.
  int start_radius = 1;
  int search_radius = 5;

  void validate() const;
};

// The single agent code path shared by every evaluator.
class EvaluatorAgent final : public SettlementAgent {
 public:
  using DecisionHook = std::function<void(const GameState&, PlayerId)>;

  EvaluatorAgent(Evaluator& evaluator, AgentConfig config = {}) : evaluator_(evaluator), config_(config) {}

  SiteDecision choose_site(const GameState& state, const Settler& settler) override;
  // Called before each decision; used to harvest state features.
  void on_decision(DecisionHook hook) { hook_ = std::move(hook); }

 private:
  Evaluator& evaluator_;
  AgentConfig config_;
  DecisionHook hook_;
};

enum class EvaluatorKind { Rule, Nn, Random, Constant };
std::string_view evaluator_kind_name(EvaluatorKind k);
std::optional<EvaluatorKind> evaluator_kind_from_name(std::string_view name);

struct RlConfig {
  int k = 32;
  int warmup_episodes = 50;
  EpsilonSchedule epsilon;
  ChoiceScope scope = ChoiceScope::PerOccurrence;
  int kmeans_max_iter = kDefaultKmeansIterations;

  void validate() const;
};

struct ExperimentConfig {
  int episodes = 1000;
  GameConfig game;
  EvaluatorKind evaluator = EvaluatorKind::Rule;
  RlConfig rl;
  AgentConfig agent;
  KnowledgeBase kb = default_kb();
  std::uint64_t seed = 1;
  // Every episode (and the warmup) plays the same map, generated from the
  // base seed unless game.fixed_map is already set.
  bool fixed_map = true;
  // First/last share of episodes compared by the improvement metric.
  int window_percent = 10;

  void validate() const;
};

// Seed of episode i; depends on nothing but (base, i).
std::uint64_t episode_seed(std::uint64_t base, int episode);

// The game config every episode of the experiment uses: fixed map
// resolved when fixed_map is set.
GameConfig resolve_game_config(const ExperimentConfig& config);

struct RunMetrics {
  std::vector<double> tgo;
  std::vector<double> running_avg;
  int window_percent = 10;

  void push(double value);
  std::size_t size() const { return tgo.size(); }
  std::size_t window() const;
  double first_window_mean() const;
  double last_window_mean() const;
  // (last window mean - first window mean) / first window mean.
  double improvement() const;

  static RunMetrics from_logs(std::span<const EpisodeLog> logs, int window_percent = 10);
  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct ExperimentResult {
  RunMetrics metrics;
  std::vector<EpisodeLog> logs;
  ValueTable table;
  TableMeta table_meta;
  std::optional<ClusterModel> states;
};

using ProgressFn = std::function<void(int episode, const EpisodeLog& log)>;

struct NnModel {
  MlpModel model;
  Normalization norm;
};

// Runs the episodes in order; RL credit is applied after each episode.
// The Nn arm needs `model`.
ExperimentResult run_experiment(const ExperimentConfig& config, const NnModel* model = nullptr,
                                const ProgressFn& progress = {});

// Random-agent corpus on the experiment's maps, seeds disjoint from the
// experiment's own episodes.
std::vector<EpisodeLog> bootstrap_logs(const ExperimentConfig& config, int episodes);
// Trains on the whole bootstrap dataset after min-max normalization.
NnModel train_bootstrap_model(const ExperimentConfig& config, int episodes, const MlpConfig& mlp);

struct Distribution {
  std::vector<std::string> categories;
  std::vector<double> shares;
  std::vector<std::int64_t> counts;
};

// Center-tile terrain of every founded city.
Distribution center_terrain_distribution(std::span<const EpisodeLog> logs);
// Terrain of every tile worked on the final turn of each episode.
Distribution worked_terrain_distribution(std::span<const EpisodeLog> logs);

struct ComparisonReport {
  RunMetrics a;
  RunMetrics b;
  std::string name_a;
  std::string name_b;
  double improvement_a = 0.0;
  double improvement_b = 0.0;
  Distribution center_a;
  Distribution center_b;
  Distribution worked_a;
  Distribution worked_b;

  std::string summary() const;
};

// Rejects runs whose logs disagree on turn limit or on any paired map.
ComparisonReport compare(const RunMetrics& a, const RunMetrics& b, std::span<const EpisodeLog> logs_a,
                         std::span<const EpisodeLog> logs_b);

// `episode,tgo,running_avg`
std::string metrics_csv(const RunMetrics& m);
RunMetrics parse_metrics_csv(std::string_view text, int window_percent = 10);
// `category,share`
std::string distribution_csv(const Distribution& d);
Distribution parse_distribution_csv(std::string_view text);

void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace settle
