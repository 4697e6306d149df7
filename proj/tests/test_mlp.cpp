#include "doctest.h"
#include "settle/mlp.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace settle;

namespace {

MlpConfig small_config(int in, std::vector<int> hidden) {
  MlpConfig c;
  c.input_dim = in;
  c.hidden = std::move(hidden);
  c.dropout = 0.0;
  c.init_std = 0.5;
  return c;
}

double batch_loss(const MlpModel& m, const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
  std::vector<double> pred;
  for (const auto& x : xs) pred.push_back(predict(m, x));
  return mse(pred, ys);
}

MlpConfig synthetic_config() {
  MlpConfig c;
  c.input_dim = 5;
  c.hidden = {32};
  c.dropout = 0.0;
  c.init_std = 0.1;
  c.learning_rate = 0.01;
  c.batch_size = 20;
  c.epochs = 100;
  return c;
}

Dataset normalized_synthetic(int n) {
  const auto rows = test::synthetic_linear(n, 5, 3);
  return normalize(rows, minmax_fit(rows));
}

}  // namespace

TEST_CASE("initialization") {
  const MlpConfig c = small_config(3, {4});
  CHECK(init_model(c, 7) == init_model(c, 7));
  CHECK_FALSE(init_model(c, 7) == init_model(c, 8));
  MlpConfig zero = c;
  zero.init_std = 0.0;
  const MlpModel z = init_model(zero, 7);
  for (const Layer& l : z.layers) {
    CHECK(std::all_of(l.w.begin(), l.w.end(), [](double w) { return w == 0.0; }));
    CHECK(std::all_of(l.b.begin(), l.b.end(), [](double b) { return b == 0.0; }));
  }
  CHECK(predict(z, std::vector<double>{1.0, 2.0, 3.0}) == 0.0);
}

TEST_CASE("hand-computed 2-2-1 forward pass") {
  MlpModel m = init_model(small_config(2, {2}), 1);
  m.layers[0].w = {0.5, -1.0, 1.5, 0.25};
  m.layers[0].b = {0.1, -0.2};
  m.layers[1].w = {2.0, -0.5};
  m.layers[1].b = {0.3};
  // pre = (-1.4, 1.8), relu = (0, 1.8), out = -0.5 * 1.8 + 0.3
  CHECK(predict(m, std::vector<double>{1.0, 2.0}) == doctest::Approx(-0.6).epsilon(1e-12));

  Rng rng(1);
  const ForwardCache train = forward(m, std::vector<double>{1.0, 2.0}, true, &rng);
  CHECK(train.output == predict(m, std::vector<double>{1.0, 2.0}));  // p = 0
}

TEST_CASE("mean squared error") {
  CHECK(mse(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}) == 0.0);
  CHECK(mse(std::vector<double>{0.0}, std::vector<double>{2.0}) == 4.0);
  Rng rng(4);
  std::vector<double> a, b;
  for (int i = 0; i < 17; ++i) {
    a.push_back(rng.normal(0, 3));
    b.push_back(rng.normal(1, 2));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(a[i] - b[i], 2);
  CHECK(mse(a, b) == doctest::Approx(s / a.size()).epsilon(1e-14));
  CHECK_THROWS_AS(mse(std::vector<double>{}, std::vector<double>{}), MlpError);
  CHECK_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{}), MlpError);
}

TEST_CASE("gradients match central differences") {
  const MlpModel m = init_model(small_config(5, {4}), 21);
  Rng rng(5);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::vector<ForwardCache> caches;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal(0, 1);
    xs.push_back(x);
    ys.push_back(rng.normal(0, 1));
    caches.push_back(forward(m, x, false));
  }
  const Gradients g = backward(m, caches, ys);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      const std::size_t n = which == 0 ? m.layers[l].w.size() : m.layers[l].b.size();
      for (std::size_t i = 0; i < n; ++i) {
        MlpModel plus = m, minus = m;
        (which == 0 ? plus.layers[l].w : plus.layers[l].b)[i] += h;
        (which == 0 ? minus.layers[l].w : minus.layers[l].b)[i] -= h;
        const double numeric = (batch_loss(plus, xs, ys) - batch_loss(minus, xs, ys)) / (2 * h);
        const double analytic = (which == 0 ? g[l].w : g[l].b)[i];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("zero error gives zero gradient and stale caches are rejected") {
  MlpModel m = init_model(small_config(3, {4}), 2);
  const std::vector<double> x = {0.2, -0.4, 1.0};
  const std::vector<ForwardCache> caches = {forward(m, x, false)};
  const Gradients g = backward(m, caches, std::vector<double>{caches[0].output});
  for (const Layer& l : g) {
    CHECK(std::all_of(l.w.begin(), l.w.end(), [](double v) { return v == 0.0; }));
    CHECK(std::all_of(l.b.begin(), l.b.end(), [](double v) { return v == 0.0; }));
  }
  AdamState s = AdamState::zeros_like(m);
  adam_step(m, g, s, 1);
  CHECK_THROWS_AS(backward(m, caches, std::vector<double>{0.0}), MlpError);
}

TEST_CASE("ADAM steps") {
  const MlpConfig c = small_config(1, {1});
  MlpModel m = init_model(c, 3);
  const MlpModel start = m;
  AdamState s = AdamState::zeros_like(m);
  Gradients g = AdamState::zeros_like(m).m;

  adam_step(m, g, s, 1);  // zero gradient, zero moments
  CHECK(m == start);

  // Three steps on one weight, traced by hand with b1 = .9, b2 = .999.
  const double lr = c.learning_rate, eps = c.adam_epsilon;
  const double grads[3] = {1.0, -0.5, 2.0};
  double w = m.layers[0].w[0], mo = 0.0, ve = 0.0;
  AdamState fresh = AdamState::zeros_like(m);
  for (int t = 1; t <= 3; ++t) {
    g[0].w[0] = grads[t - 1];
    adam_step(m, g, fresh, t);
    mo = 0.9 * mo + 0.1 * grads[t - 1];
    ve = 0.999 * ve + 0.001 * grads[t - 1] * grads[t - 1];
    const double mhat = mo / (1 - std::pow(0.9, t));
    const double vhat = ve / (1 - std::pow(0.999, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(std::abs(m.layers[0].w[0] - w) < 1e-12);
    if (t == 1) CHECK(m.layers[0].w[0] - start.layers[0].w[0] == doctest::Approx(-lr).epsilon(1e-6));
  }
  CHECK(m.layers[1].w == start.layers[1].w);
  CHECK_THROWS_AS(adam_step(m, g, fresh, 0), MlpError);
}

TEST_CASE("inverted dropout keeps the expected output") {
  MlpConfig c = small_config(4, {16});
  c.dropout = 0.5;
  MlpModel m = init_model(c, 8);
  for (double& w : m.layers[1].w) w = std::abs(w);
  const std::vector<double> x = {1.0, -0.5, 0.25, 2.0};
  Rng rng(77);
  double sum = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) sum += forward(m, x, true, &rng).output;
  const double inference = predict(m, x);
  REQUIRE(inference > 0.0);
  CHECK(std::abs(sum / trials - inference) / inference < 0.02);
  CHECK_THROWS_AS(forward(m, x, true, nullptr), MlpError);
}

TEST_CASE("training on a linear dataset") {
  const Dataset d = normalized_synthetic(200);
  const MlpConfig c = synthetic_config();
  const TrainResult r = train(d, c);
  CHECK(r.report.epoch_losses.size() == 100);
  CHECK(r.report.epoch_losses.back() < 0.1 * r.report.initial_loss);
  CHECK(train(d, c).report == r.report);

  MlpConfig none = c;
  none.epochs = 0;
  CHECK(train(d, none).model == init_model(none, mix_seed(none.seed, 1)));

  Dataset raw = d;
  raw.normalization.reset();
  CHECK_THROWS_AS(train(raw, c), MlpError);
  CHECK_THROWS_AS(train(normalized_synthetic(30), c), MlpError);
}

TEST_CASE("k-fold partitions") {
  const auto loo = kfold_partition(10, 10, 1);
  REQUIRE(loo.size() == 10);
  for (const auto& f : loo) CHECK(f.size() == 1);

  for (std::size_t n : {10u, 23u, 101u}) {
    const auto folds = kfold_partition(n, 7, 4);
    std::set<std::size_t> seen;
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (std::size_t i : f) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == n);
    CHECK(*seen.rbegin() == n - 1);
    CHECK(hi - lo <= 1);
  }
  CHECK_THROWS_AS(kfold_partition(5, 6, 1), MlpError);
}

TEST_CASE("cross validation beats the mean predictor on linear data") {
  const auto rows = test::synthetic_linear(200, 5, 3);
  MlpConfig c = synthetic_config();
  c.epochs = 40;
  const TrainReport r = kfold_cv(rows, c, 5, 2);
  CHECK(r.fold_mse.size() == 5);
  CHECK(r.mean_cv_mse < r.mean_baseline_mse);
  CHECK(kfold_cv(rows, c, 5, 2) == r);
}

TEST_CASE("grid search picks the rigged winner") {
  const auto rows = test::synthetic_linear(120, 5, 6);
  MlpConfig good = synthetic_config();
  good.epochs = 30;
  MlpConfig bad = good;
  bad.learning_rate = 100.0;
  const std::vector<MlpConfig> grid = {bad, good, bad};
  const GridResult r = grid_search(rows, grid, 4, 1);
  CHECK(r.best == 1);
  CHECK(r.best_config == good);
  CHECK(r.reports.size() == 3);

  const std::vector<MlpConfig> single = {bad};
  CHECK(grid_search(rows, single, 4, 1).best == 0);
  CHECK_THROWS_AS(grid_search(rows, std::span<const MlpConfig>{}, 4, 1), MlpError);
}

TEST_CASE("score maps") {
  MlpConfig c;
  c.init_std = 0.3;
  c.hidden = {8};
  const MlpModel m = init_model(c, 5);
  Normalization norm;
  norm.min.assign(FeatureLayout::kDimension, 0.0);
  norm.max.assign(FeatureLayout::kDimension, 20.0);
  norm.label_min = 0.0;
  norm.label_max = 100.0;

  GameMap map = test::uniform_map(16, 14, TerrainKind::Plains);
  const auto uniform = predict_scores(m, norm, map, 0);
  CHECK(uniform.size() == static_cast<std::size_t>((16 - 4) * (14 - 4)));
  for (const TileScore& s : uniform) CHECK(s.score == uniform[0].score);

  map.at({7, 6}).special = SpecialKind::Wheat;
  const auto changed = predict_scores(m, norm, map, 0);
  REQUIRE(changed.size() == uniform.size());
  for (std::size_t i = 0; i < changed.size(); ++i) {
    const bool inside = cluster_at(map, changed[i].center).contains({7, 6});
    if (!inside) CHECK(changed[i].score == uniform[i].score);
    if (changed[i].center == Coord{7, 6}) CHECK(changed[i].score != uniform[i].score);
  }

  const MlpModel wrong = init_model(small_config(5, {3}), 1);
  CHECK_THROWS_AS(predict_scores(wrong, norm, map, 0), MlpError);
}

TEST_CASE("model text round trip") {
  const Dataset d = normalized_synthetic(60);
  MlpConfig c = synthetic_config();
  c.epochs = 3;
  const TrainResult r = train(d, c);
  const auto [model, norm] = read_model(write_model(r.model, *d.normalization));
  CHECK(model == r.model);
  CHECK(norm.min == d.normalization->min);
  CHECK(norm.label_max == d.normalization->label_max);
  const std::string text = write_model(r.model, *d.normalization);
  CHECK_THROWS_AS(read_model(text.substr(0, text.size() / 2)), MlpError);
}
