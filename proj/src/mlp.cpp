#include "settle/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace settle {

void MlpConfig::validate() const {
  if (input_dim < 1) throw MlpError("input dimension must be at least 1");
  for (int h : hidden) {
    if (h < 1) throw MlpError("hidden layer sizes must be at least 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw MlpError("dropout must lie in [0, 1)");
  if (!(init_std >= 0.0)) throw MlpError("init std must be non-negative");
  if (!(learning_rate > 0.0)) throw MlpError("learning rate must be positive");
  if (batch_size < 1) throw MlpError("batch size must be at least 1");
  if (epochs < 0) throw MlpError("epochs must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw MlpError("ADAM betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw MlpError("ADAM epsilon must be positive");
}

MlpModel init_model(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  MlpModel model;
  model.config = config;
  Rng rng(seed);
  int in = config.input_dim;
  std::vector<int> sizes = config.hidden;
  sizes.push_back(1);
  for (int out : sizes) {
    Layer layer;
    layer.in = in;
    layer.out = out;
    layer.w.resize(static_cast<std::size_t>(in) * out);
    for (double& w : layer.w) w = config.init_std > 0.0 ? rng.normal(0.0, config.init_std) : 0.0;
    layer.b.assign(static_cast<std::size_t>(out), 0.0);
    model.layers.push_back(std::move(layer));
    in = out;
  }
  return model;
}

ForwardCache forward(const MlpModel& model, std::span<const double> x, bool training, Rng* rng) {
  if (static_cast<int>(x.size()) != model.config.input_dim) {
    throw MlpError(fmt::format("input has {} values, model expects {}", x.size(), model.config.input_dim));
  }
  const double p = model.config.dropout;
  const bool drop = training && p > 0.0;
  if (drop && !rng) throw MlpError("training-mode forward needs a generator for dropout");

  ForwardCache cache;
  cache.version = model.version;
  cache.training = training;
  const std::size_t n = model.layers.size();
  cache.inputs.resize(n);
  cache.pre.resize(n);
  cache.mask.resize(n - 1);
  cache.inputs[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n; ++l) {
    const Layer& layer = model.layers[l];
    const std::vector<double>& a = cache.inputs[l];
    std::vector<double>& z = cache.pre[l];
    z.resize(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      double s = layer.b[static_cast<std::size_t>(o)];
      for (int i = 0; i < layer.in; ++i) s += row[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = s;
    }
    if (l + 1 == n) break;
    std::vector<double>& mask = cache.mask[l];
    mask.assign(z.size(), 1.0);
    if (drop) {
      const double keep_scale = 1.0 / (1.0 - p);
      for (double& m : mask) m = rng->uniform() < p ? 0.0 : keep_scale;
    }
    std::vector<double>& next = cache.inputs[l + 1];
    next.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) next[j] = std::max(0.0, z[j]) * mask[j];
  }
  cache.output = cache.pre.back()[0];
  return cache;
}

double predict(const MlpModel& model, std::span<const double> x) { return forward(model, x, false).output; }

double mse(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw MlpError("mse: length mismatch");
  if (predicted.empty()) throw MlpError("mse: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(predicted.size());
}

namespace {

Gradients zeros_like(const MlpModel& model) {
  Gradients g;
  for (const Layer& l : model.layers) {
    Layer z;
    z.in = l.in;
    z.out = l.out;
    z.w.assign(l.w.size(), 0.0);
    z.b.assign(l.b.size(), 0.0);
    g.push_back(std::move(z));
  }
  return g;
}

}  // namespace

Gradients backward(const MlpModel& model, std::span<const ForwardCache> caches, std::span<const double> targets) {
  if (caches.size() != targets.size()) throw MlpError("backward: caches and targets differ in length");
  if (caches.empty()) throw MlpError("backward: empty batch");
  Gradients g = zeros_like(model);
  const double scale = 2.0 / static_cast<double>(caches.size());
  const std::size_t n = model.layers.size();
  std::vector<double> delta;
  std::vector<double> prev;
  for (std::size_t k = 0; k < caches.size(); ++k) {
    const ForwardCache& c = caches[k];
    if (c.version != model.version || c.inputs.size() != n) throw MlpError("backward: stale forward cache");
    delta.assign(1, scale * (c.output - targets[k]));
    for (std::size_t l = n; l-- > 0;) {
      const Layer& layer = model.layers[l];
      Layer& gl = g[l];
      const std::vector<double>& a = c.inputs[l];
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        gl.b[static_cast<std::size_t>(o)] += d;
        if (d == 0.0) continue;
        double* grow = gl.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) grow[i] += d * a[static_cast<std::size_t>(i)];
      }
      if (l == 0) break;
      // Into the previous hidden layer: through W, the dropout mask and ReLU.
      prev.assign(static_cast<std::size_t>(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) prev[static_cast<std::size_t>(i)] += d * row[i];
      }
      const std::vector<double>& z = c.pre[l - 1];
      const std::vector<double>& mask = c.mask[l - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] = z[i] > 0.0 ? prev[i] * mask[i] : 0.0;
      delta.swap(prev);
    }
  }
  return g;
}

AdamState AdamState::zeros_like(const MlpModel& model) {
  AdamState s;
  s.m = settle::zeros_like(model);
  s.v = settle::zeros_like(model);
  return s;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, int t) {
  if (t < 1) throw MlpError("ADAM step index must be at least 1");
  if (state.m.empty()) state = AdamState::zeros_like(model);
  const MlpConfig& c = model.config;
  const double c1 = 1.0 - std::pow(c.beta1, t);
  const double c2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.adam_epsilon);
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].w, grads[l].w, state.m[l].w, state.v[l].w);
    update(model.layers[l].b, grads[l].b, state.m[l].b, state.v[l].b);
  }
  ++model.version;
}

namespace {

double dataset_mse(const MlpModel& model, std::span<const DatasetEntry> rows) {
  double s = 0.0;
  for (const DatasetEntry& e : rows) {
    const double d = predict(model, e.features) - e.label;
    s += d * d;
  }
  return s / static_cast<double>(rows.size());
}

}  // namespace

TrainResult train(const Dataset& dataset, const MlpConfig& config) {
  config.validate();
  if (!dataset.normalization) throw MlpError("training requires a normalized dataset");
  const auto& rows = dataset.entries;
  if (rows.size() < static_cast<std::size_t>(2 * config.batch_size)) {
    throw MlpError(fmt::format("training needs at least {} rows, got {}", 2 * config.batch_size, rows.size()));
  }
  for (const DatasetEntry& e : rows) {
    if (static_cast<int>(e.features.size()) != config.input_dim) throw MlpError("row dimension does not match config");
  }

  TrainResult result{init_model(config, mix_seed(config.seed, 1)), {}};
  MlpModel& model = result.model;
  Rng rng(mix_seed(config.seed, 2));
  AdamState adam = AdamState::zeros_like(model);
  result.report.initial_loss = dataset_mse(model, rows);

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ForwardCache> caches;
  std::vector<double> targets;
  int t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      caches.clear();
      targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        const DatasetEntry& e = rows[order[i]];
        caches.push_back(forward(model, e.features, true, &rng));
        targets.push_back(e.label);
      }
      adam_step(model, backward(model, caches, targets), adam, ++t);
    }
    result.report.epoch_losses.push_back(dataset_mse(model, rows));
  }
  return result;
}

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw MlpError("k-fold needs at least 2 folds");
  if (static_cast<std::size_t>(folds) > n) throw MlpError(fmt::format("{} folds exceed {} rows", folds, n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const std::size_t base = n / static_cast<std::size_t>(folds);
  const std::size_t extra = n % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

TrainReport kfold_cv(std::span<const DatasetEntry> rows, const MlpConfig& config, int folds,
                     std::uint64_t shuffle_seed) {
  TrainReport report;
  report.folds = kfold_partition(rows.size(), folds, shuffle_seed);
  std::vector<char> in_fold(rows.size());
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (std::size_t i : report.folds[f]) in_fold[i] = 1;
    std::vector<DatasetEntry> train_rows;
    std::vector<DatasetEntry> val_rows;
    for (std::size_t i = 0; i < rows.size(); ++i) (in_fold[i] ? val_rows : train_rows).push_back(rows[i]);

    const Normalization norm = minmax_fit(train_rows);
    const Dataset train_set = normalize(train_rows, norm);
    const Dataset val_set = normalize(val_rows, norm);
    MlpConfig fold_config = config;
    fold_config.seed = mix_seed(config.seed, 100 + f);
    const TrainResult trained = train(train_set, fold_config);

    double label_mean = 0.0;
    for (const DatasetEntry& e : train_set.entries) label_mean += e.label;
    label_mean /= static_cast<double>(train_set.entries.size());
    double model_se = 0.0;
    double base_se = 0.0;
    for (const DatasetEntry& e : val_set.entries) {
      const double d = predict(trained.model, e.features) - e.label;
      const double b = label_mean - e.label;
      model_se += d * d;
      base_se += b * b;
    }
    const double nv = static_cast<double>(val_set.entries.size());
    report.fold_mse.push_back(model_se / nv);
    report.fold_baseline_mse.push_back(base_se / nv);
    if (f == 0) {
      report.initial_loss = trained.report.initial_loss;
      report.epoch_losses = trained.report.epoch_losses;
    }
  }
  const double nf = static_cast<double>(report.folds.size());
  report.mean_cv_mse = std::accumulate(report.fold_mse.begin(), report.fold_mse.end(), 0.0) / nf;
  report.mean_baseline_mse =
      std::accumulate(report.fold_baseline_mse.begin(), report.fold_baseline_mse.end(), 0.0) / nf;
  return report;
}

GridResult grid_search(std::span<const DatasetEntry> rows, std::span<const MlpConfig> grid, int folds,
                       std::uint64_t shuffle_seed) {
  if (grid.empty()) throw MlpError("grid search needs at least one configuration");
  GridResult result;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    result.reports.push_back(kfold_cv(rows, grid[i], folds, shuffle_seed));
    const double m = result.reports.back().mean_cv_mse;
    const double best = result.reports[result.best].mean_cv_mse;
    // NaN means never win.
    if (i > 0 && (m < best || (std::isnan(best) && !std::isnan(m)))) result.best = i;
  }
  result.best_config = grid[result.best];
  return result;
}

namespace {

void check_layout(const MlpModel& model, const Normalization& norm) {
  if (model.config.input_dim != FeatureLayout::kDimension ||
      norm.min.size() != static_cast<std::size_t>(FeatureLayout::kDimension)) {
    throw MlpError("model or normalization does not match the feature layout");
  }
}

}  // namespace

double predict_site(const MlpModel& model, const Normalization& norm, const GameMap& map, Coord center,
                    PlayerId player, std::span<const CitySite> cities) {
  check_layout(model, norm);
  const FeatureVector raw = extract_features(map, center, player, cities);
  return norm.invert_label(predict(model, minmax_apply(norm, raw)));
}

std::vector<TileScore> predict_scores(const MlpModel& model, const Normalization& norm, const GameMap& map,
                                      PlayerId player, std::span<const CitySite> cities) {
  check_layout(model, norm);
  std::vector<TileScore> out;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const Coord c{x, y};
      if (!cluster_fits(map, c)) continue;
      out.push_back({c, predict_site(model, norm, map, c, player, cities)});
    }
  }
  return out;
}

// ------------------------------------------------------------------- I/O

namespace {

std::string hex_list(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += fmt::format("{:a}", values[i]);
  }
  return out;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw MlpError(fmt::format("model file: bad number '{}'", s));
  return v;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : in_(std::string(text)) {}

  // Next line split into words; the first word must be `tag`.
  std::vector<std::string> expect(std::string_view tag) {
    std::string line;
    if (!std::getline(in_, line)) throw MlpError(fmt::format("model file truncated before '{}'", tag));
    std::istringstream ls(line);
    std::vector<std::string> words;
    std::string w;
    while (ls >> w) words.push_back(w);
    if (words.empty() || words[0] != tag) throw MlpError(fmt::format("model file: expected '{}'", tag));
    words.erase(words.begin());
    return words;
  }

 private:
  std::istringstream in_;
};

std::vector<double> parse_values(const std::vector<std::string>& words, std::size_t count, std::string_view what) {
  if (words.size() != count) {
    throw MlpError(fmt::format("model file: {} has {} values, expected {}", what, words.size(), count));
  }
  std::vector<double> out;
  out.reserve(count);
  for (const std::string& w : words) out.push_back(parse_hex(w));
  return out;
}

int parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw MlpError(fmt::format("model file: bad integer '{}'", s));
}

}  // namespace

std::string write_model(const MlpModel& model, const Normalization& norm) {
  const MlpConfig& c = model.config;
  std::string out = "settle-mlp 1\n";
  out += fmt::format("layout {}\n", FeatureLayout::kVersion);
  out += fmt::format("config {:a} {:a} {:a} {} {} {} {:a} {:a} {:a}\n", c.dropout, c.init_std, c.learning_rate,
                     c.batch_size, c.epochs, c.seed, c.beta1, c.beta2, c.adam_epsilon);
  out += fmt::format("layers {}\n", model.layers.size());
  for (const Layer& l : model.layers) {
    out += fmt::format("layer {} {}\n", l.in, l.out);
    out += "w " + hex_list(l.w) + "\n";
    out += "b " + hex_list(l.b) + "\n";
  }
  out += "norm_min " + hex_list(norm.min) + "\n";
  out += "norm_max " + hex_list(norm.max) + "\n";
  out += fmt::format("label {:a} {:a}\n", norm.label_min, norm.label_max);
  out += "end\n";
  return out;
}

std::pair<MlpModel, Normalization> read_model(std::string_view text) {
  LineReader r(text);
  if (r.expect("settle-mlp") != std::vector<std::string>{"1"}) throw MlpError("model file: unsupported version");
  const auto layout = r.expect("layout");
  if (layout.size() != 1 || parse_int(layout[0]) != FeatureLayout::kVersion) {
    throw MlpError("model file: feature layout version mismatch");
  }
  const auto cw = r.expect("config");
  if (cw.size() != 9) throw MlpError("model file: malformed config line");
  MlpModel model;
  MlpConfig& c = model.config;
  c.dropout = parse_hex(cw[0]);
  c.init_std = parse_hex(cw[1]);
  c.learning_rate = parse_hex(cw[2]);
  c.batch_size = parse_int(cw[3]);
  c.epochs = parse_int(cw[4]);
  try {
    c.seed = std::stoull(cw[5]);
  } catch (const std::exception&) {
    throw MlpError("model file: bad seed");
  }
  c.beta1 = parse_hex(cw[6]);
  c.beta2 = parse_hex(cw[7]);
  c.adam_epsilon = parse_hex(cw[8]);

  const auto lw = r.expect("layers");
  if (lw.size() != 1) throw MlpError("model file: malformed layers line");
  const int n = parse_int(lw[0]);
  if (n < 1) throw MlpError("model file: needs at least one layer");
  c.hidden.clear();
  for (int i = 0; i < n; ++i) {
    const auto dims = r.expect("layer");
    if (dims.size() != 2) throw MlpError("model file: malformed layer line");
    Layer l;
    l.in = parse_int(dims[0]);
    l.out = parse_int(dims[1]);
    if (l.in < 1 || l.out < 1) throw MlpError("model file: bad layer shape");
    if (i == 0) c.input_dim = l.in;
    else if (l.in != model.layers.back().out) throw MlpError("model file: layer shapes do not chain");
    if (i + 1 < n) c.hidden.push_back(l.out);
    else if (l.out != 1) throw MlpError("model file: output layer must have one unit");
    l.w = parse_values(r.expect("w"), static_cast<std::size_t>(l.in) * l.out, "w");
    l.b = parse_values(r.expect("b"), static_cast<std::size_t>(l.out), "b");
    model.layers.push_back(std::move(l));
  }
  c.validate();

  Normalization norm;
  const auto mins = r.expect("norm_min");
  norm.min = parse_values(mins, mins.size(), "norm_min");
  norm.max = parse_values(r.expect("norm_max"), norm.min.size(), "norm_max");
  const auto label = parse_values(r.expect("label"), 2, "label");
  norm.label_min = label[0];
  norm.label_max = label[1];
  r.expect("end");
  if (norm.min.size() != static_cast<std::size_t>(c.input_dim)) {
    throw MlpError("model file: normalization does not match input dimension");
  }
  return {std::move(model), std::move(norm)};
}

void save_model(const MlpModel& model, const Normalization& norm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MlpError(fmt::format("cannot write model '{}'", path));
  out << write_model(model, norm);
  if (!out) throw MlpError(fmt::format("failed writing model '{}'", path));
}

std::pair<MlpModel, Normalization> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MlpError(fmt::format("cannot read model '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_model(ss.str());
}

}  // namespace settle
