#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace settle {

using PlayerId = int;
using CityId = int;

struct Coord {
  int x = 0;
  int y = 0;

  friend bool operator==(const Coord&, const Coord&) = default;
};

// Row-major order: (y, x) ascending. Used for every deterministic tie-break.
inline bool row_major_less(Coord a, Coord b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

inline int chebyshev(Coord a, Coord b) {
  const int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  const int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx > dy ? dx : dy;
}

enum class TerrainKind : std::uint8_t {
  Desert,
  Forest,
  Grassland,
  Hills,
  Jungle,
  Mountains,
  Plains,
  Swamp,
  Tundra,
  Ocean,
  DeepOcean,
};

inline constexpr int kTerrainCount = 11;
inline constexpr int kBuildableTerrainCount = 9;

inline constexpr std::array<TerrainKind, kTerrainCount> kAllTerrains = {
    TerrainKind::Desert,   TerrainKind::Forest,    TerrainKind::Grassland, TerrainKind::Hills,
    TerrainKind::Jungle,   TerrainKind::Mountains, TerrainKind::Plains,    TerrainKind::Swamp,
    TerrainKind::Tundra,   TerrainKind::Ocean,     TerrainKind::DeepOcean,
};

constexpr bool is_buildable(TerrainKind t) {
  return t != TerrainKind::Ocean && t != TerrainKind::DeepOcean;
}
constexpr bool is_water(TerrainKind t) { return !is_buildable(t); }
constexpr int index_of(TerrainKind t) { return static_cast<int>(t); }

std::string_view terrain_name(TerrainKind t);
char terrain_char(TerrainKind t);
std::optional<TerrainKind> terrain_from_char(char c);
std::optional<TerrainKind> terrain_from_name(std::string_view name);

// The 17 special resources. Allowed terrains per kind:
//
//   Bull       Grassland, Plains     Coal    Hills
//   Resources  Grassland             Wine    Hills
//   Wheat      Plains                Fruit   Jungle
//   Oasis      Desert                Gems    Jungle
//   Pheasant   Forest                Gold    Mountains
//   Silk       Forest                Iron    Mountains
//   Peat       Swamp                 Furs    Tundra
//   Spices     Swamp                 Fish    Ocean, DeepOcean
//   Whales     Ocean
enum class SpecialKind : std::uint8_t {
  Bull,
  Resources,
  Wheat,
  Oasis,
  Pheasant,
  Silk,
  Coal,
  Wine,
  Fruit,
  Gems,
  Gold,
  Iron,
  Peat,
  Spices,
  Furs,
  Fish,
  Whales,
};

inline constexpr int kSpecialCount = 17;

constexpr int index_of(SpecialKind s) { return static_cast<int>(s); }

std::string_view special_name(SpecialKind s);
char special_char(SpecialKind s);
std::optional<SpecialKind> special_from_char(char c);
bool special_allowed_on(SpecialKind s, TerrainKind t);

struct Tile {
  Coord coord;
  TerrainKind terrain = TerrainKind::DeepOcean;
  std::optional<SpecialKind> special;
  bool river = false;
  std::optional<PlayerId> owner;
  std::optional<CityId> worked_by;

  friend bool operator==(const Tile&, const Tile&) = default;
};

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GameMap {
 public:
  GameMap() = default;
  // All tiles DeepOcean.
  GameMap(int width, int height, std::uint64_t seed);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint64_t seed() const { return seed_; }

  bool in_bounds(Coord c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  const Tile& at(Coord c) const;
  Tile& at(Coord c);

  const std::vector<Tile>& tiles() const { return tiles_; }

  double buildable_fraction() const;

  friend bool operator==(const GameMap&, const GameMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Tile> tiles_;
};

inline constexpr int kClusterRadius = 2;
inline constexpr int kClusterSize = 21;

// The 5x5 block around a center without its four corners. Tiles are listed
// in row-major order.
struct MapCluster {
  Coord center;
  std::array<Coord, kClusterSize> tiles{};

  bool contains(Coord c) const;
};

// Offsets of the 21 cluster tiles relative to the center, row-major.
const std::array<Coord, kClusterSize>& cluster_offsets();

bool cluster_fits(const GameMap& map, Coord center);

// Throws MapError if the 5x5 block around `center` leaves the map.
MapCluster cluster_at(const GameMap& map, Coord center);

struct MapGenConfig {
  int width = 20;
  int height = 20;
  // Weights for the nine buildable kinds, indexed by TerrainKind.
  std::array<double, kBuildableTerrainCount> terrain_weights = {
      0.6,  // Desert
      1.2,  // Forest
      2.0,  // Grassland
      1.0,  // Hills
      0.6,  // Jungle
      0.6,  // Mountains
      1.8,  // Plains
      0.6,  // Swamp
      0.6,  // Tundra
  };
  // Relative weight of each special kind once a tile is selected to carry one.
  std::array<double, kSpecialCount> special_weights = [] {
    std::array<double, kSpecialCount> w{};
    w.fill(1.0);
    return w;
  }();
  double land_fraction = 0.6;
  double min_buildable_fraction = 0.4;
  double special_frequency = 0.12;
  double river_frequency = 0.12;
  int continents = 2;
  int smoothing_passes = 1;
};

inline constexpr int kMinMapSide = 12;

// Seeded continent growth, then terrain smoothing, then independent
// special and river sampling.
GameMap generate_map(const MapGenConfig& config, std::uint64_t seed);

// Text layout:
//
//   W H SEED
//   <H terrain rows, one char per tile>
//   <blank>
//   <H special rows, '.' = none>
//   <blank>
//   <H river rows, 'r' or '.'>
//
// followed, only when some tile carries it, by
//
//   <blank>
//   owners
//   <H rows, '.' or a base-36 digit player id>
//
// and/or
//
//   <blank>
//   worked
//   <H rows of W space-separated tokens, '.' or decimal city id>
//
// Character tables: see terrain_char() and special_char().
std::string encode_map(const GameMap& map);
GameMap decode_map(std::string_view text);

}  // namespace settle
