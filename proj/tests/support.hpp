#pragma once

#include "settle/engine.hpp"
#include "settle/features.hpp"
#include "settle/rng.hpp"
#include "settle/world.hpp"

#include <filesystem>
#include <string>

namespace settle::test {

inline GameMap uniform_map(int w, int h, TerrainKind t) {
  GameMap map(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) map.at({x, y}).terrain = t;
  }
  return map;
}

// Config playing on a fixed copy of `map`.
inline GameConfig config_on(const GameMap& map, int turns = 60) {
  GameConfig c;
  c.turn_limit = turns;
  c.fixed_map = std::make_shared<const GameMap>(map);
  return c;
}

// Fresh directory under the system temp dir, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("settle_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Plays nothing but founding: every settler stays put.
class StayAgent final : public SettlementAgent {
 public:
  SiteDecision choose_site(const GameState& state, const Settler& s) override {
    SiteDecision d;
    d.turn = state.turn() + 1;
    d.player = s.player;
    d.settler = s.id;
    if (state.is_legal_site(s.player, s.position, s.id)) d.center = s.position;
    return d;
  }
};

// y = 3 + sum_j (j+1) x_j with x uniform in [0, 10), no noise.
inline std::vector<DatasetEntry> synthetic_linear(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DatasetEntry> rows;
  for (int i = 0; i < n; ++i) {
    DatasetEntry e;
    e.label = 3.0;
    for (int j = 0; j < dim; ++j) {
      e.features.push_back(rng.uniform() * 10.0);
      e.label += (j + 1) * e.features.back();
    }
    rows.push_back(std::move(e));
  }
  return rows;
}

}  // namespace settle::test
