#include "doctest.h"
#include "settle/features.hpp"
#include "support.hpp"

#include <algorithm>
#include <numeric>

using namespace settle;

namespace {

int col(std::string_view block, int i = 0) { return feature_layout().block(block).offset + i; }

double block_sum(const FeatureVector& f, std::string_view block) {
  const FeatureBlock& b = feature_layout().block(block);
  return std::accumulate(f.begin() + b.offset, f.begin() + b.offset + b.size, 0.0);
}

EpisodeLog log_with_points(int turns, std::vector<std::pair<int, OutputPoints>> per_turn_from) {
  EpisodeLog log;
  for (int t = 1; t <= turns; ++t) {
    TurnRecord rec;
    rec.turn = t;
    for (std::size_t id = 0; id < per_turn_from.size(); ++id) {
      if (t >= per_turn_from[id].first) {
        CitySnapshot snap;
        snap.id = static_cast<CityId>(id);
        snap.points = per_turn_from[id].second;
        rec.cities.push_back(snap);
      }
    }
    log.turns.push_back(rec);
  }
  for (std::size_t id = 0; id < per_turn_from.size(); ++id) {
    log.cities.push_back({static_cast<CityId>(id), 0, {}, per_turn_from[id].first});
  }
  return log;
}

}  // namespace

TEST_CASE("layout has the documented shape") {
  const FeatureLayout& l = feature_layout();
  CHECK(l.columns.size() == FeatureLayout::kDimension);
  int next = 0;
  for (const FeatureBlock& b : l.blocks) {
    CHECK(b.offset == next);
    next += b.size;
  }
  CHECK(next == FeatureLayout::kDimension);
}

TEST_CASE("all-Grassland cluster") {
  const GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  const FeatureVector f = extract_features(map, {10, 10}, 0, {});
  REQUIRE(f.size() == FeatureLayout::kDimension);
  FeatureVector expected(FeatureLayout::kDimension, 0.0);
  expected[col("center_terrain", index_of(TerrainKind::Grassland))] = 1.0;
  expected[col("around_terrain", index_of(TerrainKind::Grassland))] = 20.0;
  CHECK(f == expected);
  CHECK_THROWS_AS(extract_features(map, {1, 10}, 0, {}), FeatureError);
}

TEST_CASE("cluster with a special center, specials around and ocean") {
  GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  map.at({10, 10}).special = SpecialKind::Bull;
  map.at({9, 10}).special = SpecialKind::Resources;
  map.at({11, 9}).special = SpecialKind::Wheat;
  map.at({12, 10}).terrain = TerrainKind::Ocean;
  map.at({12, 11}).terrain = TerrainKind::Ocean;
  const FeatureVector f = extract_features(map, {10, 10}, 0, {});
  CHECK(f[col("center_special", index_of(SpecialKind::Bull))] == 1.0);
  CHECK(block_sum(f, "center_special") == 1.0);
  CHECK(block_sum(f, "around_special") == 2.0);
  CHECK(f[col("ocean_access")] == 1.0);
  CHECK(f[col("deep_access")] == 0.0);
  CHECK(block_sum(f, "around_terrain") == 20.0);
}

TEST_CASE("neighbour counts") {
  const GameMap map = test::uniform_map(20, 20, TerrainKind::Grassland);
  // Cluster edge is 2 tiles out; a city 2 tiles beyond it is 4 tiles away.
  // (14,10) and (6,6) lie in the band, (10,15) beyond it, (12,11) and
  // (10,10) inside the cluster, (8,8) on a cluster corner and so in the band.
  const std::vector<CitySite> cities = {{{14, 10}, 0}, {{10, 15}, 0}, {{6, 6}, 1},
                                        {{10, 10}, 0}, {{12, 11}, 1}, {{8, 8}, 0}};
  const FeatureVector f = extract_features(map, {10, 10}, 0, cities);
  CHECK(f[col("my_neighb")] == 2.0);
  CHECK(f[col("enemy_neighb")] == 1.0);
}

TEST_CASE("city labels") {
  const EpisodeLog constant = log_with_points(120, {{1, OutputPoints{1, 1, 1, 1, 1, 1}}});
  CHECK(city_label(constant, 0) == 700.0);

  const OutputPoints p{2, 0, 3, 4, 1, 5};
  const EpisodeLog late = log_with_points(120, {{1, {}}, {111, p}});
  CHECK(city_label(late, 1) == 10.0 * (2 + 0 + 3 + 4 + 2 * 1 + 5));
  CHECK(city_label(late, 0) == 0.0);
  CHECK_THROWS_AS(city_label(late, 7), FeatureError);
}

TEST_CASE("duplicate rows collapse to their mean label") {
  const FeatureVector a(FeatureLayout::kDimension, 0.0);
  FeatureVector b = a;
  b[0] = 1.0;
  const std::vector<DatasetEntry> rows = {{a, 100.0}, {b, 7.0}, {a, 200.0}};
  const Dataset d = deduplicate(rows);
  REQUIRE(d.entries.size() == 2);
  CHECK(d.entries[0].features == a);
  CHECK(d.entries[0].label == 150.0);
  CHECK(d.entries[1].label == 7.0);

  const std::vector<DatasetEntry> distinct = {{a, 1.0}, {b, 2.0}};
  CHECK(deduplicate(distinct).entries.size() == 2);
  CHECK(build_dataset(std::span<const EpisodeLog>{}).entries.empty());
}

TEST_CASE("dataset is invariant to log order") {
  GameConfig cfg;
  cfg.turn_limit = 40;
  std::vector<EpisodeLog> logs;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    test::StayAgent stay;
    logs.push_back(run_episode(stay, cfg, seed));
  }
  auto sorted_rows = [](Dataset d) {
    std::sort(d.entries.begin(), d.entries.end(), [](const DatasetEntry& x, const DatasetEntry& y) {
      return std::tie(x.features, x.label) < std::tie(y.features, y.label);
    });
    return d.entries;
  };
  const auto forward = sorted_rows(build_dataset(logs));
  std::reverse(logs.begin(), logs.end());
  const auto backward = sorted_rows(build_dataset(logs));
  REQUIRE(forward.size() == backward.size());
  for (std::size_t i = 0; i < forward.size(); ++i) {
    CHECK(forward[i].features == backward[i].features);
    CHECK(forward[i].label == backward[i].label);
  }
}

TEST_CASE("min-max normalization") {
  std::vector<DatasetEntry> rows;
  for (double v : {0.0, 5.0, 10.0}) rows.push_back({{v, 3.0}, v * 2});
  const Normalization n = minmax_fit(rows);
  CHECK(minmax_apply(n, std::vector<double>{0.0, 3.0}) == std::vector<double>{0.0, 0.0});
  CHECK(minmax_apply(n, std::vector<double>{5.0, 3.0}) == std::vector<double>{0.5, 0.0});
  CHECK(minmax_apply(n, std::vector<double>{10.0, 3.0}) == std::vector<double>{1.0, 0.0});
  CHECK(minmax_apply(n, std::vector<double>{20.0, 3.0})[0] == 2.0);
  CHECK(n.apply_label(10.0) == 0.5);
  CHECK(n.invert_label(0.5) == 10.0);
  CHECK_THROWS_AS(minmax_apply(n, std::vector<double>{1.0}), FeatureError);
  CHECK_THROWS_AS(minmax_apply(Normalization{}, std::vector<double>{1.0, 2.0}), FeatureError);
}

TEST_CASE("dataset and normalization CSV round trips") {
  FeatureVector a(FeatureLayout::kDimension, 0.0);
  a[3] = 0.1;
  FeatureVector b(FeatureLayout::kDimension, 2.0);
  Dataset d;
  d.entries = {{a, 1.0 / 3.0}, {b, 1e6}};
  const Dataset back = parse_dataset_csv(dataset_csv(d));
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].features == a);
  CHECK(back.entries[0].label == 1.0 / 3.0);
  CHECK(back.entries[1].label == 1e6);

  const Normalization n = minmax_fit(d.entries);
  const Normalization nb = parse_normalization_csv(normalization_csv(n));
  CHECK(nb.min == n.min);
  CHECK(nb.max == n.max);
  CHECK(nb.label_min == n.label_min);
  CHECK(nb.label_max == n.label_max);
}
