#include "doctest.h"
#include "settle/rl.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

using namespace settle;

namespace {

double sq_dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Inertia of an assignment, measured in the model's normalized space.
double inertia_of(const ClusterModel& m, const std::vector<Point>& pts, const std::vector<int>& labels, int k) {
  std::vector<Point> sums(k, Point(pts[0].size(), 0.0));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point p = m.normalize(pts[i]);
    for (std::size_t j = 0; j < p.size(); ++j) sums[labels[i]][j] += p[j];
    ++counts[labels[i]];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Point c = sums[labels[i]];
    for (double& v : c) v /= counts[labels[i]];
    total += sq_dist(m.normalize(pts[i]), c);
  }
  return total;
}

ConflictSet four_rules() { return default_kb().family(FamilyId::TerrainGrassland); }

}  // namespace

TEST_CASE("k-means small cases") {
  const std::vector<Point> two = {{0.0}, {10.0}};
  const ClusterModel m = kmeans_fit(two, 2, 1);
  CHECK(m.inertia == 0.0);
  std::vector<double> c = {m.raw_centroid(0)[0], m.raw_centroid(1)[0]};
  std::sort(c.begin(), c.end());
  CHECK(c == std::vector<double>{0.0, 10.0});

  const std::vector<Point> pts = {{1.0, 2.0}, {3.0, 8.0}, {5.0, 5.0}, {9.0, 1.0}};
  const ClusterModel one = kmeans_fit(pts, 1, 3);
  CHECK(one.raw_centroid(0)[0] == doctest::Approx(4.5));
  CHECK(one.raw_centroid(0)[1] == doctest::Approx(4.0));

  CHECK_THROWS_AS(kmeans_fit(pts, 5, 1), RlError);
  CHECK_THROWS_AS(kmeans_fit(pts, 0, 1), RlError);
}

TEST_CASE("k-means beats random assignments") {
  Rng rng(11);
  std::vector<Point> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({rng.uniform() * 10, rng.uniform() * 10});
  const ClusterModel m = kmeans_fit(pts, 3, 5);
  for (std::size_t i = 1; i < m.inertia_history.size(); ++i) CHECK(m.inertia_history[i] <= m.inertia_history[i - 1]);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) labels[i] = static_cast<int>(i % 3);
    rng.shuffle(labels);
    CHECK(m.inertia <= inertia_of(m, pts, labels, 3) + 1e-12);
  }
}

TEST_CASE("state assignment") {
  ClusterModel m;
  m.norm_min = {0.0, 0.0};
  m.norm_max = {1.0, 1.0};
  m.centroids = {{0.9, 0.9}, {0.0, 0.0}, {0.5, 0.9}, {0.3, 0.7}, {1.0, 0.0}};
  CHECK(assign_state(m, std::vector<double>{0.3, 0.7}) == 3);
  CHECK(assign_state(m, std::vector<double>{0.5, 0.0}) == 1);  // equidistant from 1 and 4

  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x = {rng.uniform(), rng.uniform()};
    int best = 0;
    for (int c = 1; c < m.k(); ++c) {
      if (sq_dist(x, m.centroids[c]) < sq_dist(x, m.centroids[best])) best = c;
    }
    CHECK(assign_state(m, x) == best);
  }
}

TEST_CASE("greedy and exploring choice") {
  const ConflictSet set = four_rules();
  ValueTable table;
  Policy greedy(0.0, 1);
  CHECK(choose(table, greedy, 0, set, 1).rule.id == set.rules[0].id);  // all unvisited

  table.credit({0, set.family, set.rules[0].id}, 10.0);
  table.credit({0, set.family, set.rules[1].id}, 20.0);
  table.credit({0, set.family, set.rules[2].id}, 5.0);
  table.credit({0, set.family, set.rules[3].id}, 1.0);
  for (int i = 0; i < 100; ++i) CHECK(choose(table, greedy, 0, set, 1).rule.id == set.rules[1].id);

  Policy explore(1.0, 1234);
  std::map<int, int> counts;
  for (int i = 0; i < 10000; ++i) ++counts[choose(table, explore, 0, set, 1).rule.id];
  for (const ScoringRule& r : set.rules) {
    const double share = counts[r.id] / 10000.0;
    CHECK(share >= 0.23);
    CHECK(share <= 0.27);
  }

  Policy mixed(0.2, 5);
  const PolicyChoice pc = choose(table, mixed, 0, set, 3);
  CHECK(pc.probabilities[1] == doctest::Approx(0.8 + 0.05));
  CHECK(pc.probabilities[0] == doctest::Approx(0.05));
  CHECK(pc.record.turn == 3);
  CHECK_THROWS_AS(greedy.set_epsilon(1.5), RlError);
}

TEST_CASE("Monte Carlo credit") {
  const ConflictSet set = four_rules();
  const ActionKey key{2, set.family, set.rules[0].id};
  ValueTable table;
  update_from_episode(table, std::vector<DecisionRecord>{{2, set.family, set.rules[0].id, 1}}, 10.0);
  update_from_episode(table, std::vector<DecisionRecord>{{2, set.family, set.rules[0].id, 4}}, 20.0);
  CHECK(table.q(key)->mean == 15.0);
  CHECK(table.v(2)->mean == 15.0);

  const ValueTable before = table;
  update_from_episode(table, {}, 99.0);
  CHECK(table == before);

  // Replay oracle over stored credits.
  ValueTable t;
  const KnowledgeBase kb = default_kb();
  std::map<ActionKey, std::vector<double>> credited;
  Rng rng(9);
  for (int ep = 0; ep < 100; ++ep) {
    std::vector<DecisionRecord> recs;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      const ConflictSet& s = kb.families()[rng.below(kFamilyCount)];
      recs.push_back({static_cast<int>(rng.below(3)), s.family, s.rules[rng.below(4)].id, i});
    }
    const double reward = std::floor(rng.uniform() * 1000.0);
    update_from_episode(t, recs, reward);
    for (const DecisionRecord& r : recs) credited[{r.state, r.family, r.rule}].push_back(reward);
  }
  for (const auto& [k, rewards] : credited) {
    double sum = 0.0;
    for (double r : rewards) sum += r;
    CHECK(std::abs(t.q(k)->mean - sum / rewards.size()) < 1e-9);
    CHECK(t.q(k)->visits == static_cast<std::int64_t>(rewards.size()));
  }
  CHECK_THROWS_AS(update_from_episode(t, {}, -1.0), RlError);
}

TEST_CASE("value table persistence") {
  ValueTable table;
  const ConflictSet set = four_rules();
  update_from_episode(table, std::vector<DecisionRecord>{{0, set.family, set.rules[2].id, 1}}, 1.0 / 3.0);
  update_from_episode(table, std::vector<DecisionRecord>{{4, set.family, set.rules[1].id, 1}}, 12345.0);
  const TableMeta meta{5, state_feature_names(), 0.1};
  const auto [back, back_meta] = read_table(write_table(table, meta));
  CHECK(back == table);
  CHECK(back_meta == meta);

  const std::string text = write_table(table, meta);
  const std::string truncated = text.substr(0, text.rfind("end"));
  CHECK_THROWS_AS(read_table(truncated), RlError);
}

TEST_CASE("epsilon schedule") {
  const EpsilonSchedule s{0.5, 0.1, 4};
  CHECK(s.at(0) == doctest::Approx(0.5));
  CHECK(s.at(2) == doctest::Approx(0.3));
  CHECK(s.at(10) == doctest::Approx(0.1));
  CHECK(EpsilonSchedule{}.at(123) == doctest::Approx(0.1));
}
