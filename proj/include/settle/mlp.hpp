#pragma once

#include "settle/features.hpp"
#include "settle/rng.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace settle {

class MlpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MlpConfig {
  int input_dim = FeatureLayout::kDimension;
  std::vector<int> hidden = {95};
  double dropout = 0.5;
  double init_std = 0.0005;
  double learning_rate = 0.002;
  int batch_size = 30;
  int epochs = 200;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

// Dense layer; w is out x in, row-major.
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
  friend bool operator==(const Layer&, const Layer&) = default;
};

// ReLU + dropout after every hidden layer; the last layer is a single
// linear output.
struct MlpModel {
  MlpConfig config;
  std::vector<Layer> layers;
  // Bumped by every parameter update; caches from older versions are stale.
  std::uint64_t version = 0;

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    return a.config == b.config && a.layers == b.layers;
  }
};

// Weights ~ N(0, init_std), biases 0.
MlpModel init_model(const MlpConfig& config, std::uint64_t seed);

struct ForwardCache {
  std::uint64_t version = 0;
  bool training = false;
  // inputs[l] feeds layer l (post-dropout for l > 0); pre[l] is layer l's
  // affine output; mask[l] scales hidden layer l (0 or 1/(1-p)).
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> mask;
  double output = 0.0;
};

// Inverted dropout: in training mode dropped units are zeroed and
// survivors scaled by 1/(1-p); `rng` is required then. Inference mode
// applies neither.
ForwardCache forward(const MlpModel& model, std::span<const double> x, bool training, Rng* rng = nullptr);
double predict(const MlpModel& model, std::span<const double> x);

double mse(std::span<const double> predicted, std::span<const double> target);

using Gradients = std::vector<Layer>;

// Gradient of the batch MSE over the cached forward passes.
Gradients backward(const MlpModel& model, std::span<const ForwardCache> caches, std::span<const double> targets);

struct AdamState {
  Gradients m;
  Gradients v;

  static AdamState zeros_like(const MlpModel& model);
};

// Bias-corrected ADAM update for step t (1-based).
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, int t);

struct TrainReport {
  // Inference-mode MSE on the training rows before any update, then after
  // each epoch.
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;
  std::vector<double> fold_mse;
  double mean_cv_mse = 0.0;
  // Same folds, predicting the training-split mean label.
  std::vector<double> fold_baseline_mse;
  double mean_baseline_mse = 0.0;
  std::vector<std::vector<std::size_t>> folds;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

// Requires a normalized dataset of at least two batches.
TrainResult train(const Dataset& dataset, const MlpConfig& config);

// Shuffled partition of [0, n) into `folds` parts whose sizes differ by at
// most one.
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, int folds, std::uint64_t seed);

inline constexpr int kDefaultFolds = 10;

// Raw rows; normalization is fitted on each training split only and
// validation MSE is measured on the split's normalized label scale.
TrainReport kfold_cv(std::span<const DatasetEntry> rows, const MlpConfig& config, int folds = kDefaultFolds,
                     std::uint64_t shuffle_seed = 0);

struct GridResult {
  std::size_t best = 0;
  MlpConfig best_config;
  std::vector<TrainReport> reports;  // grid order
};

// Lowest mean CV MSE wins; ties go to the earlier entry.
GridResult grid_search(std::span<const DatasetEntry> rows, std::span<const MlpConfig> grid,
                       int folds = kDefaultFolds, std::uint64_t shuffle_seed = 0);

struct TileScore {
  Coord center;
  double score = 0.0;
  friend bool operator==(const TileScore&, const TileScore&) = default;
};

// De-normalized prediction for every center whose cluster fits, row-major.
std::vector<TileScore> predict_scores(const MlpModel& model, const Normalization& norm, const GameMap& map,
                                      PlayerId player, std::span<const CitySite> cities = {});
double predict_site(const MlpModel& model, const Normalization& norm, const GameMap& map, Coord center,
                    PlayerId player, std::span<const CitySite> cities);

// Text layout, every number in hexfloat:
//
//   settle-mlp 1
//   layout <feature layout version>
//   config <dropout> <init_std> <lr> <batch> <epochs> <seed> <beta1> <beta2> <eps>
//   layers <n>
//   layer <in> <out>
//   w <out*in values, row-major>
//   b <out values>
//   ... (per layer)
//   norm_min <D values>
//   norm_max <D values>
//   label <min> <max>
//   end
std::string write_model(const MlpModel& model, const Normalization& norm);
std::pair<MlpModel, Normalization> read_model(std::string_view text);
void save_model(const MlpModel& model, const Normalization& norm, const std::string& path);
std::pair<MlpModel, Normalization> load_model(const std::string& path);

}  // namespace settle
