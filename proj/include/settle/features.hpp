#pragma once

#include "settle/engine.hpp"
#include "settle/world.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace settle {

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureBlock {
  std::string_view name;
  int offset = 0;
  int size = 0;
};

// Layout v1, 60 columns:
//
//   center_terrain   9   one-hot over the buildable kinds
//   around_terrain  11   counts over the 20 non-center tiles
//   center_special  17   one-hot, all zero without a special
//   around_special  17   counts over the 20 non-center tiles
//   river_center     1
//   ocean_access     1   any Ocean or DeepOcean tile in the cluster
//   deep_access      1   any DeepOcean tile in the cluster
//   whales           1   Whales count in the cluster
//   my_neighb        1   own cities outside the cluster, within 4 tiles
//                        (Chebyshev) of the center
//   enemy_neighb     1   other players' cities in the same band
struct FeatureLayout {
  static constexpr int kVersion = 1;
  static constexpr int kDimension = 60;

  std::vector<FeatureBlock> blocks;
  std::vector<std::string> columns;

  const FeatureBlock& block(std::string_view name) const;
};

const FeatureLayout& feature_layout();

inline constexpr int kNeighbourRadius = kClusterRadius + 2;

using FeatureVector = std::vector<double>;

struct CitySite {
  Coord location;
  PlayerId player = 0;
};

std::vector<CitySite> city_sites(const GameState& state);

// Throws FeatureError if the cluster leaves the map.
FeatureVector extract_features(const GameMap& map, Coord center, PlayerId player,
                               std::span<const CitySite> cities);

inline constexpr int kLabelHorizon = 100;

// Weighted points over the city's first `horizon` turns of existence; turns
// past the end of the log add nothing.
double city_label(const EpisodeLog& log, CityId city, int horizon = kLabelHorizon);

struct DatasetEntry {
  FeatureVector features;
  double label = 0.0;
};

// Per-column min/max of the features plus the label range. A column with
// max == min maps to 0.
struct Normalization {
  std::vector<double> min;
  std::vector<double> max;
  double label_min = 0.0;
  double label_max = 0.0;

  bool fitted() const { return !min.empty(); }
  double apply_label(double label) const;
  double invert_label(double scaled) const;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  std::optional<Normalization> normalization;
};

// Collapses duplicate feature rows into one row carrying their mean label;
// first-appearance order is kept.
Dataset deduplicate(std::span<const DatasetEntry> rows);

// One row per logged city: features at founding time, labelled with city_label.
std::vector<DatasetEntry> dataset_rows(const EpisodeLog& log);
Dataset build_dataset(std::span<const EpisodeLog> logs);

Normalization minmax_fit(std::span<const DatasetEntry> rows);
inline Normalization minmax_fit(const Dataset& d) { return minmax_fit(d.entries); }
FeatureVector minmax_apply(const Normalization& norm, std::span<const double> features);
// Features and labels scaled; `normalization` set.
Dataset normalize(std::span<const DatasetEntry> rows, const Normalization& norm);

// CSV: header of every layout column plus `label`.
std::string dataset_csv(const Dataset& d);
Dataset parse_dataset_csv(std::string_view text);
// Sidecar: `column,min,max` header, one row per feature column, final `label` row.
std::string normalization_csv(const Normalization& n);
Normalization parse_normalization_csv(std::string_view text);

}  // namespace settle
