#include "settle/features.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace settle {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

FeatureLayout make_layout() {
  FeatureLayout layout;
  int offset = 0;
  auto add = [&](std::string_view name, int size) {
    layout.blocks.push_back({name, offset, size});
    offset += size;
  };
  add("center_terrain", kBuildableTerrainCount);
  add("around_terrain", kTerrainCount);
  add("center_special", kSpecialCount);
  add("around_special", kSpecialCount);
  add("river_center", 1);
  add("ocean_access", 1);
  add("deep_access", 1);
  add("whales", 1);
  add("my_neighb", 1);
  add("enemy_neighb", 1);

  for (int t = 0; t < kBuildableTerrainCount; ++t) {
    layout.columns.push_back("center_" + lowercase(terrain_name(static_cast<TerrainKind>(t))));
  }
  for (TerrainKind t : kAllTerrains) layout.columns.push_back("around_" + lowercase(terrain_name(t)));
  for (int s = 0; s < kSpecialCount; ++s) {
    layout.columns.push_back("center_sp_" + lowercase(special_name(static_cast<SpecialKind>(s))));
  }
  for (int s = 0; s < kSpecialCount; ++s) {
    layout.columns.push_back("around_sp_" + lowercase(special_name(static_cast<SpecialKind>(s))));
  }
  for (const char* name : {"river_center", "ocean_access", "deep_access", "whales", "my_neighb", "enemy_neighb"}) {
    layout.columns.emplace_back(name);
  }
  return layout;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view s) {
  // std::from_chars for double is unavailable on older libstdc++; strtod
  // is exact for %.17g output.
  std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size()) throw FeatureError(fmt::format("bad number '{}'", s));
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

const FeatureBlock& FeatureLayout::block(std::string_view name) const {
  for (const FeatureBlock& b : blocks) {
    if (b.name == name) return b;
  }
  throw FeatureError(fmt::format("no feature block '{}'", name));
}

const FeatureLayout& feature_layout() {
  static const FeatureLayout layout = make_layout();
  return layout;
}

std::vector<CitySite> city_sites(const GameState& state) {
  std::vector<CitySite> out;
  for (const City& c : state.cities()) out.push_back({c.location, c.player});
  return out;
}

FeatureVector extract_features(const GameMap& map, Coord center, PlayerId player,
                               std::span<const CitySite> cities) {
  if (!map.in_bounds(center) || !cluster_fits(map, center)) {
    throw FeatureError(fmt::format("no valid cluster at ({},{})", center.x, center.y));
  }
  const FeatureLayout& layout = feature_layout();
  FeatureVector v(FeatureLayout::kDimension, 0.0);
  const int center_terrain = layout.block("center_terrain").offset;
  const int around_terrain = layout.block("around_terrain").offset;
  const int center_special = layout.block("center_special").offset;
  const int around_special = layout.block("around_special").offset;

  const MapCluster cluster = cluster_at(map, center);
  const Tile& c = map.at(center);
  if (is_buildable(c.terrain)) v[center_terrain + index_of(c.terrain)] = 1.0;
  if (c.special) v[center_special + index_of(*c.special)] = 1.0;
  if (c.river) v[layout.block("river_center").offset] = 1.0;

  bool ocean = false;
  bool deep = false;
  int whales = 0;
  for (Coord at : cluster.tiles) {
    const Tile& t = map.at(at);
    if (is_water(t.terrain)) ocean = true;
    if (t.terrain == TerrainKind::DeepOcean) deep = true;
    if (t.special == SpecialKind::Whales) ++whales;
    if (at == center) continue;
    v[around_terrain + index_of(t.terrain)] += 1.0;
    if (t.special) v[around_special + index_of(*t.special)] += 1.0;
  }
  v[layout.block("ocean_access").offset] = ocean ? 1.0 : 0.0;
  v[layout.block("deep_access").offset] = deep ? 1.0 : 0.0;
  v[layout.block("whales").offset] = whales;

  int mine = 0;
  int enemy = 0;
  for (const CitySite& site : cities) {
    const int d = chebyshev(site.location, center);
    if (d > kNeighbourRadius || cluster.contains(site.location)) continue;
    (site.player == player ? mine : enemy) += 1;
  }
  v[layout.block("my_neighb").offset] = mine;
  v[layout.block("enemy_neighb").offset] = enemy;
  return v;
}

double city_label(const EpisodeLog& log, CityId city, int horizon) {
  const bool known = std::any_of(log.cities.begin(), log.cities.end(), [&](const CityRecord& c) { return c.id == city; });
  if (!known) throw FeatureError(fmt::format("city {} is not in the log", city));
  const auto history = log.city_history(city);
  double sum = 0.0;
  for (std::size_t i = 0; i < history.size() && static_cast<int>(i) < horizon; ++i) {
    sum += static_cast<double>(history[i].weighted());
  }
  return sum;
}

double Normalization::apply_label(double label) const {
  const double range = label_max - label_min;
  return range > 0.0 ? (label - label_min) / range : 0.0;
}

double Normalization::invert_label(double scaled) const { return label_min + scaled * (label_max - label_min); }

Dataset deduplicate(std::span<const DatasetEntry> rows) {
  std::map<FeatureVector, std::size_t> index;
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  Dataset out;
  for (const DatasetEntry& row : rows) {
    const auto [it, inserted] = index.emplace(row.features, out.entries.size());
    if (inserted) {
      out.entries.push_back(row);
      sums.push_back(row.label);
      counts.push_back(1);
    } else {
      sums[it->second] += row.label;
      ++counts[it->second];
    }
  }
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    out.entries[i].label = sums[i] / static_cast<double>(counts[i]);
  }
  return out;
}

std::vector<DatasetEntry> dataset_rows(const EpisodeLog& log) {
  std::vector<DatasetEntry> rows;
  std::vector<CityRecord> cities = log.cities;
  std::sort(cities.begin(), cities.end(), [](const CityRecord& a, const CityRecord& b) { return a.id < b.id; });
  std::vector<CitySite> earlier;
  for (const CityRecord& c : cities) {
    rows.push_back({extract_features(log.map, c.location, c.player, earlier), city_label(log, c.id)});
    earlier.push_back({c.location, c.player});
  }
  return rows;
}

Dataset build_dataset(std::span<const EpisodeLog> logs) {
  std::vector<DatasetEntry> rows;
  for (const EpisodeLog& log : logs) {
    auto more = dataset_rows(log);
    rows.insert(rows.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return deduplicate(rows);
}

Normalization minmax_fit(std::span<const DatasetEntry> rows) {
  if (rows.empty()) throw FeatureError("cannot fit normalization on an empty dataset");
  const std::size_t dim = rows.front().features.size();
  Normalization n;
  n.min = rows.front().features;
  n.max = rows.front().features;
  n.label_min = n.label_max = rows.front().label;
  for (const DatasetEntry& row : rows) {
    if (row.features.size() != dim) throw FeatureError("rows disagree on feature dimension");
    for (std::size_t j = 0; j < dim; ++j) {
      n.min[j] = std::min(n.min[j], row.features[j]);
      n.max[j] = std::max(n.max[j], row.features[j]);
    }
    n.label_min = std::min(n.label_min, row.label);
    n.label_max = std::max(n.label_max, row.label);
  }
  return n;
}

FeatureVector minmax_apply(const Normalization& norm, std::span<const double> features) {
  if (!norm.fitted()) throw FeatureError("normalization applied before fitting");
  if (features.size() != norm.min.size()) {
    throw FeatureError(fmt::format("feature dimension {} does not match normalization ({})", features.size(),
                                   norm.min.size()));
  }
  FeatureVector out(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    const double range = norm.max[j] - norm.min[j];
    out[j] = range > 0.0 ? (features[j] - norm.min[j]) / range : 0.0;
  }
  return out;
}

Dataset normalize(std::span<const DatasetEntry> rows, const Normalization& norm) {
  Dataset out;
  out.entries.reserve(rows.size());
  for (const DatasetEntry& row : rows) out.entries.push_back({minmax_apply(norm, row.features), norm.apply_label(row.label)});
  out.normalization = norm;
  return out;
}

std::string dataset_csv(const Dataset& d) {
  const auto& columns = feature_layout().columns;
  std::string out;
  for (const std::string& c : columns) out += c + ",";
  out += "label\n";
  for (const DatasetEntry& e : d.entries) {
    if (e.features.size() != columns.size()) throw FeatureError("dataset row does not match the feature layout");
    for (double v : e.features) out += fmt_double(v) + ",";
    out += fmt_double(e.label) + "\n";
  }
  return out;
}

Dataset parse_dataset_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FeatureError("dataset CSV is empty");
  const auto& columns = feature_layout().columns;
  const auto header = split(lines[0], ',');
  if (header.size() != columns.size() + 1 || header.back() != "label") {
    throw FeatureError("dataset CSV header does not match feature layout v1");
  }
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (header[j] != columns[j]) throw FeatureError(fmt::format("unexpected column '{}'", header[j]));
  }
  Dataset d;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) throw FeatureError(fmt::format("row {} has {} cells", i, cells.size()));
    DatasetEntry e;
    for (std::size_t j = 0; j < columns.size(); ++j) e.features.push_back(parse_double(cells[j]));
    e.label = parse_double(cells.back());
    d.entries.push_back(std::move(e));
  }
  return d;
}

std::string normalization_csv(const Normalization& n) {
  const auto& columns = feature_layout().columns;
  if (n.min.size() != columns.size()) throw FeatureError("normalization does not match the feature layout");
  std::string out = "column,min,max\n";
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out += fmt::format("{},{},{}\n", columns[j], fmt_double(n.min[j]), fmt_double(n.max[j]));
  }
  out += fmt::format("label,{},{}\n", fmt_double(n.label_min), fmt_double(n.label_max));
  return out;
}

Normalization parse_normalization_csv(std::string_view text) {
  const auto lines = lines_of(text);
  const auto& columns = feature_layout().columns;
  if (lines.size() != columns.size() + 2 || lines[0] != "column,min,max") {
    throw FeatureError("normalization file does not match feature layout v1");
  }
  Normalization n;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != 3) throw FeatureError(fmt::format("bad normalization row {}", i));
    const bool label_row = i == lines.size() - 1;
    if (cells[0] != (label_row ? std::string_view("label") : std::string_view(columns[i - 1]))) {
      throw FeatureError(fmt::format("unexpected normalization column '{}'", cells[0]));
    }
    if (label_row) {
      n.label_min = parse_double(cells[1]);
      n.label_max = parse_double(cells[2]);
    } else {
      n.min.push_back(parse_double(cells[1]));
      n.max.push_back(parse_double(cells[2]));
    }
  }
  return n;
}

}  // namespace settle
