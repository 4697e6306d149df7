#include "settle/world.hpp"

#include "settle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

namespace settle {

namespace {

struct TerrainInfo {
  std::string_view name;
  char symbol;
};

constexpr std::array<TerrainInfo, kTerrainCount> kTerrainTable = {{
    {"Desert", 'd'},
    {"Forest", 'f'},
    {"Grassland", 'g'},
    {"Hills", 'h'},
    {"Jungle", 'j'},
    {"Mountains", 'm'},
    {"Plains", 'p'},
    {"Swamp", 's'},
    {"Tundra", 't'},
    {"Ocean", '~'},
    {"DeepOcean", ':'},
}};

struct SpecialInfo {
  std::string_view name;
  char symbol;
  TerrainKind first;
  std::optional<TerrainKind> second;
};

const std::array<SpecialInfo, kSpecialCount> kSpecialTable = {{
    {"Bull", 'b', TerrainKind::Grassland, TerrainKind::Plains},
    {"Resources", 'r', TerrainKind::Grassland, std::nullopt},
    {"Wheat", 'h', TerrainKind::Plains, std::nullopt},
    {"Oasis", 'o', TerrainKind::Desert, std::nullopt},
    {"Pheasant", 'p', TerrainKind::Forest, std::nullopt},
    {"Silk", 's', TerrainKind::Forest, std::nullopt},
    {"Coal", 'c', TerrainKind::Hills, std::nullopt},
    {"Wine", 'v', TerrainKind::Hills, std::nullopt},
    {"Fruit", 'f', TerrainKind::Jungle, std::nullopt},
    {"Gems", 'g', TerrainKind::Jungle, std::nullopt},
    {"Gold", 'G', TerrainKind::Mountains, std::nullopt},
    {"Iron", 'i', TerrainKind::Mountains, std::nullopt},
    {"Peat", 't', TerrainKind::Swamp, std::nullopt},
    {"Spices", 'x', TerrainKind::Swamp, std::nullopt},
    {"Furs", 'u', TerrainKind::Tundra, std::nullopt},
    {"Fish", 'F', TerrainKind::Ocean, TerrainKind::DeepOcean},
    {"Whales", 'W', TerrainKind::Ocean, std::nullopt},
}};

constexpr std::string_view kDigits36 = "0123456789abcdefghijklmnopqrstuvwxyz";

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    pos = end + 1;
  }
  return lines;
}

}  // namespace

std::string_view terrain_name(TerrainKind t) { return kTerrainTable[index_of(t)].name; }
char terrain_char(TerrainKind t) { return kTerrainTable[index_of(t)].symbol; }

std::optional<TerrainKind> terrain_from_char(char c) {
  for (TerrainKind t : kAllTerrains) {
    if (terrain_char(t) == c) return t;
  }
  return std::nullopt;
}

std::optional<TerrainKind> terrain_from_name(std::string_view name) {
  for (TerrainKind t : kAllTerrains) {
    if (terrain_name(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view special_name(SpecialKind s) { return kSpecialTable[index_of(s)].name; }
char special_char(SpecialKind s) { return kSpecialTable[index_of(s)].symbol; }

std::optional<SpecialKind> special_from_char(char c) {
  for (int i = 0; i < kSpecialCount; ++i) {
    if (kSpecialTable[i].symbol == c) return static_cast<SpecialKind>(i);
  }
  return std::nullopt;
}

bool special_allowed_on(SpecialKind s, TerrainKind t) {
  const SpecialInfo& info = kSpecialTable[index_of(s)];
  return info.first == t || info.second == t;
}

GameMap::GameMap(int width, int height, std::uint64_t seed)
    : width_(width), height_(height), seed_(seed) {
  if (width <= 0 || height <= 0) {
    throw MapError(fmt::format("map dimensions must be positive, got {}x{}", width, height));
  }
  tiles_.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      tiles_[static_cast<std::size_t>(y) * width + x].coord = {x, y};
    }
  }
}

const Tile& GameMap::at(Coord c) const {
  if (!in_bounds(c)) throw MapError(fmt::format("coordinate ({},{}) out of bounds", c.x, c.y));
  return tiles_[static_cast<std::size_t>(c.y) * width_ + c.x];
}

Tile& GameMap::at(Coord c) {
  if (!in_bounds(c)) throw MapError(fmt::format("coordinate ({},{}) out of bounds", c.x, c.y));
  return tiles_[static_cast<std::size_t>(c.y) * width_ + c.x];
}

double GameMap::buildable_fraction() const {
  if (tiles_.empty()) return 0.0;
  const auto n = std::count_if(tiles_.begin(), tiles_.end(),
                               [](const Tile& t) { return is_buildable(t.terrain); });
  return static_cast<double>(n) / static_cast<double>(tiles_.size());
}

const std::array<Coord, kClusterSize>& cluster_offsets() {
  static const std::array<Coord, kClusterSize> offsets = [] {
    std::array<Coord, kClusterSize> out{};
    std::size_t i = 0;
    for (int dy = -kClusterRadius; dy <= kClusterRadius; ++dy) {
      for (int dx = -kClusterRadius; dx <= kClusterRadius; ++dx) {
        if (std::abs(dx) == kClusterRadius && std::abs(dy) == kClusterRadius) continue;
        out[i++] = {dx, dy};
      }
    }
    return out;
  }();
  return offsets;
}

bool MapCluster::contains(Coord c) const {
  return std::find(tiles.begin(), tiles.end(), c) != tiles.end();
}

bool cluster_fits(const GameMap& map, Coord center) {
  return center.x - kClusterRadius >= 0 && center.y - kClusterRadius >= 0 &&
         center.x + kClusterRadius < map.width() && center.y + kClusterRadius < map.height();
}

MapCluster cluster_at(const GameMap& map, Coord center) {
  if (!cluster_fits(map, center)) {
    throw MapError(fmt::format("cluster at ({},{}) leaves the {}x{} map", center.x, center.y,
                               map.width(), map.height()));
  }
  MapCluster cluster;
  cluster.center = center;
  const auto& offsets = cluster_offsets();
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    cluster.tiles[i] = {center.x + offsets[i].x, center.y + offsets[i].y};
  }
  return cluster;
}

namespace {

void validate(const MapGenConfig& c) {
  if (c.width < kMinMapSide || c.height < kMinMapSide) {
    throw MapError(fmt::format("map must be at least {}x{}, got {}x{}", kMinMapSide, kMinMapSide,
                               c.width, c.height));
  }
  double terrain_total = 0.0;
  for (double w : c.terrain_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw MapError("terrain weights must be finite and >= 0");
    terrain_total += w;
  }
  if (!(terrain_total > 0.0)) throw MapError("terrain weights must sum to a positive value");
  double special_total = 0.0;
  for (double w : c.special_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw MapError("special weights must be finite and >= 0");
    special_total += w;
  }
  if (!(c.special_frequency >= 0.0 && c.special_frequency <= 1.0)) {
    throw MapError("special_frequency must lie in [0, 1]");
  }
  if (c.special_frequency > 0.0 && !(special_total > 0.0)) {
    throw MapError("special weights must sum to a positive value when specials are enabled");
  }
  if (!(c.river_frequency >= 0.0 && c.river_frequency <= 1.0)) {
    throw MapError("river_frequency must lie in [0, 1]");
  }
  if (!(c.land_fraction > 0.0 && c.land_fraction <= 1.0)) {
    throw MapError("land_fraction must lie in (0, 1]");
  }
  if (!(c.min_buildable_fraction >= 0.0 && c.min_buildable_fraction <= 1.0)) {
    throw MapError("min_buildable_fraction must lie in [0, 1]");
  }
  if (c.continents < 1) throw MapError("at least one continent is required");
  if (c.smoothing_passes < 0) throw MapError("smoothing_passes must be >= 0");
}

}  // namespace

GameMap generate_map(const MapGenConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(seed);
  GameMap map(config.width, config.height, seed);
  const int w = config.width;
  const int h = config.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  const double fraction = std::max(config.land_fraction, config.min_buildable_fraction);
  const auto target = std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));

  // Continent growth: each continent extends from a random member tile to a
  // random 4-neighbour.
  std::vector<int> continent_of(n, -1);
  std::vector<std::vector<Coord>> members(config.continents);
  std::size_t land = 0;
  for (int c = 0; c < config.continents && land < target; ++c) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const int x = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w - 4)));
      const int y = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h - 4)));
      if (continent_of[idx(x, y)] >= 0) continue;
      continent_of[idx(x, y)] = c;
      members[c].push_back({x, y});
      ++land;
      break;
    }
  }
  constexpr std::array<Coord, 4> kSteps = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  std::size_t failures = 0;
  while (land < target && failures < 64 * n) {
    const auto c = static_cast<std::size_t>(rng.below(members.size()));
    if (members[c].empty()) {
      ++failures;
      continue;
    }
    const Coord from = members[c][rng.below(members[c].size())];
    const Coord step = kSteps[rng.below(kSteps.size())];
    const Coord to{from.x + step.x, from.y + step.y};
    if (!map.in_bounds(to) || continent_of[idx(to.x, to.y)] >= 0) {
      ++failures;
      continue;
    }
    continent_of[idx(to.x, to.y)] = static_cast<int>(c);
    members[c].push_back(to);
    ++land;
  }
  // Enclosed continents can stall random growth; finish deterministically.
  for (std::size_t i = 0; land < target && i < n; ++i) {
    if (continent_of[i] < 0) {
      continent_of[i] = 0;
      ++land;
    }
  }

  std::vector<TerrainKind> terrain(n, TerrainKind::DeepOcean);
  const std::span<const double> weights(config.terrain_weights);
  for (std::size_t i = 0; i < n; ++i) {
    if (continent_of[i] >= 0) terrain[i] = static_cast<TerrainKind>(rng.weighted(weights));
  }
  for (int pass = 0; pass < config.smoothing_passes; ++pass) {
    std::vector<TerrainKind> next = terrain;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!is_buildable(terrain[idx(x, y)])) continue;
        std::array<int, kTerrainCount> counts{};
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!map.in_bounds({x + dx, y + dy})) continue;
            const TerrainKind t = terrain[idx(x + dx, y + dy)];
            if (is_buildable(t)) ++counts[index_of(t)];
          }
        }
        const auto best = std::max_element(counts.begin(), counts.end());
        if (*best >= 5) next[idx(x, y)] = static_cast<TerrainKind>(best - counts.begin());
      }
    }
    terrain = std::move(next);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (is_buildable(terrain[idx(x, y)])) continue;
      bool coast = false;
      for (int dy = -1; dy <= 1 && !coast; ++dy) {
        for (int dx = -1; dx <= 1 && !coast; ++dx) {
          if (map.in_bounds({x + dx, y + dy}) && continent_of[idx(x + dx, y + dy)] >= 0) coast = true;
        }
      }
      terrain[idx(x, y)] = coast ? TerrainKind::Ocean : TerrainKind::DeepOcean;
    }
  }

  std::array<double, kSpecialCount> allowed{};
  for (std::size_t i = 0; i < n; ++i) {
    Tile& tile = map.at({static_cast<int>(i % w), static_cast<int>(i / w)});
    tile.terrain = terrain[i];
    if (is_buildable(tile.terrain) && rng.bernoulli(config.river_frequency)) tile.river = true;
    if (rng.bernoulli(config.special_frequency)) {
      for (int s = 0; s < kSpecialCount; ++s) {
        allowed[s] = special_allowed_on(static_cast<SpecialKind>(s), tile.terrain)
                         ? config.special_weights[s]
                         : 0.0;
      }
      const int pick = rng.weighted(allowed);
      if (pick >= 0) tile.special = static_cast<SpecialKind>(pick);
    }
  }
  return map;
}

std::string encode_map(const GameMap& map) {
  std::string out = fmt::format("{} {} {}\n", map.width(), map.height(), map.seed());
  const int w = map.width();
  const int h = map.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out += terrain_char(map.at({x, y}).terrain);
    out += '\n';
  }
  out += '\n';
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& s = map.at({x, y}).special;
      out += s ? special_char(*s) : '.';
    }
    out += '\n';
  }
  out += '\n';
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out += map.at({x, y}).river ? 'r' : '.';
    out += '\n';
  }
  const auto& tiles = map.tiles();
  if (std::any_of(tiles.begin(), tiles.end(), [](const Tile& t) { return t.owner.has_value(); })) {
    out += "\nowners\n";
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto& o = map.at({x, y}).owner;
        if (o && (*o < 0 || *o >= static_cast<int>(kDigits36.size()))) {
          throw MapError(fmt::format("player id {} cannot be encoded", *o));
        }
        out += o ? kDigits36[*o] : '.';
      }
      out += '\n';
    }
  }
  if (std::any_of(tiles.begin(), tiles.end(), [](const Tile& t) { return t.worked_by.has_value(); })) {
    out += "\nworked\n";
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x > 0) out += ' ';
        const auto& c = map.at({x, y}).worked_by;
        out += c ? std::to_string(*c) : std::string(".");
      }
      out += '\n';
    }
  }
  return out;
}

namespace {

std::size_t expect_rows(const std::vector<std::string>& lines, std::size_t pos, int h, int w,
                        std::string_view layer) {
  if (pos + static_cast<std::size_t>(h) > lines.size()) {
    throw MapError(fmt::format("{} layer truncated", layer));
  }
  for (int y = 0; y < h; ++y) {
    const std::string& row = lines[pos + y];
    if (static_cast<int>(row.size()) != w) {
      throw MapError(fmt::format("{} row {} has length {}, expected {}", layer, y, row.size(), w));
    }
  }
  return pos + h;
}

void expect_blank(const std::vector<std::string>& lines, std::size_t pos, std::string_view before) {
  if (pos >= lines.size() || !lines[pos].empty()) {
    throw MapError(fmt::format("expected blank line before {} layer", before));
  }
}

}  // namespace

GameMap decode_map(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw MapError("empty map text");
  std::istringstream header(lines[0]);
  long long w = 0;
  long long h = 0;
  std::uint64_t seed = 0;
  std::string extra;
  if (!(header >> w >> h >> seed) || (header >> extra)) {
    throw MapError("map header must be 'W H SEED'");
  }
  if (w <= 0 || h <= 0 || w > 100000 || h > 100000) throw MapError("map dimensions out of range");
  GameMap map(static_cast<int>(w), static_cast<int>(h), seed);
  const int width = static_cast<int>(w);
  const int height = static_cast<int>(h);

  std::size_t pos = expect_rows(lines, 1, height, width, "terrain");
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto t = terrain_from_char(lines[1 + y][x]);
      if (!t) throw MapError(fmt::format("unknown terrain symbol '{}' at ({},{})", lines[1 + y][x], x, y));
      map.at({x, y}).terrain = *t;
    }
  }
  expect_blank(lines, pos, "special");
  const std::size_t specials = pos + 1;
  pos = expect_rows(lines, specials, height, width, "special");
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const char c = lines[specials + y][x];
      if (c == '.') continue;
      const auto s = special_from_char(c);
      if (!s) throw MapError(fmt::format("unknown special symbol '{}' at ({},{})", c, x, y));
      Tile& tile = map.at({x, y});
      if (*s == SpecialKind::Whales && tile.terrain != TerrainKind::Ocean) {
        throw MapError(fmt::format("Whales on non-Ocean tile ({},{})", x, y));
      }
      tile.special = s;
    }
  }
  expect_blank(lines, pos, "river");
  const std::size_t rivers = pos + 1;
  pos = expect_rows(lines, rivers, height, width, "river");
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const char c = lines[rivers + y][x];
      if (c == '.') continue;
      if (c != 'r') throw MapError(fmt::format("unknown river symbol '{}' at ({},{})", c, x, y));
      Tile& tile = map.at({x, y});
      if (!is_buildable(tile.terrain)) throw MapError(fmt::format("river on water tile ({},{})", x, y));
      tile.river = true;
    }
  }

  bool seen_owners = false;
  bool seen_worked = false;
  while (pos < lines.size()) {
    if (lines[pos].empty() && pos + 1 == lines.size()) break;  // trailing newline
    expect_blank(lines, pos, "optional");
    if (pos + 1 >= lines.size()) throw MapError("dangling blank line at end of map");
    const std::string& tag = lines[pos + 1];
    const std::size_t start = pos + 2;
    if (tag == "owners" && !seen_owners) {
      seen_owners = true;
      pos = expect_rows(lines, start, height, width, "owners");
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const char c = lines[start + y][x];
          if (c == '.') continue;
          const auto digit = kDigits36.find(c);
          if (digit == std::string_view::npos) throw MapError(fmt::format("bad owner symbol '{}'", c));
          map.at({x, y}).owner = static_cast<PlayerId>(digit);
        }
      }
    } else if (tag == "worked" && !seen_worked) {
      seen_worked = true;
      if (start + static_cast<std::size_t>(height) > lines.size()) throw MapError("worked layer truncated");
      for (int y = 0; y < height; ++y) {
        std::istringstream row(lines[start + y]);
        std::string token;
        int x = 0;
        while (row >> token) {
          if (x >= width) throw MapError(fmt::format("worked row {} too long", y));
          if (token != ".") {
            std::size_t used = 0;
            int id = -1;
            try {
              id = std::stoi(token, &used);
            } catch (const std::exception&) {
              used = 0;
            }
            if (used != token.size() || id < 0) throw MapError(fmt::format("bad city id '{}'", token));
            map.at({x, y}).worked_by = id;
          }
          ++x;
        }
        if (x != width) throw MapError(fmt::format("worked row {} has {} entries, expected {}", y, x, width));
      }
      pos = start + height;
    } else {
      throw MapError(fmt::format("unexpected map section '{}'", tag));
    }
  }
  for (const Tile& t : map.tiles()) {
    if (t.worked_by && !t.owner) {
      throw MapError(fmt::format("tile ({},{}) is worked but unowned", t.coord.x, t.coord.y));
    }
  }
  return map;
}

}  // namespace settle
