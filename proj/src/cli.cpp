#include "settle/cli.hpp"

#include "settle/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

namespace settle {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `key = value` lines; `#` starts a comment line.
std::vector<std::pair<std::string, std::string>> parse_overlay(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("config line {}: expected key=value", number));
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string overlay_text(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

Coord parse_coord(const std::string& s) {
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_x = 0;
    std::size_t used_y = 0;
    const std::string xs = s.substr(0, comma);
    const std::string ys = s.substr(comma + 1);
    const int x = std::stoi(xs, &used_x);
    const int y = std::stoi(ys, &used_y);
    if (used_x != xs.size() || used_y != ys.size()) throw std::invalid_argument(s);
    return {x, y};
  } catch (const std::exception&) {
    throw UsageError(fmt::format("--coord expects x,y, got '{}'", s));
  }
}

std::vector<fs::path> log_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<EpisodeLog> load_logs(const fs::path& dir) {
  std::vector<EpisodeLog> logs;
  for (const fs::path& p : log_files(dir)) logs.push_back(load_episode_log(p.string()));
  return logs;
}

// ------------------------------------------------------------- commands

struct GenMapArgs {
  int width = 20;
  int height = 20;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen_map(const GenMapArgs& a, std::ostream& out) {
  MapGenConfig gen;
  gen.width = a.width;
  gen.height = a.height;
  const GameMap map = generate_map(gen, a.seed);
  write_text_file(a.out, encode_map(map));
  out << fmt::format("wrote {} ({}x{}, seed {}), buildable fraction {:.4f}\n", a.out, map.width(), map.height(),
                     a.seed, map.buildable_fraction());
  return kExitOk;
}

struct RunArgs {
  std::string evaluator = "kb";
  int episodes = 1000;
  std::uint64_t seed = 1;
  std::string map;
  std::string out_dir;
  std::string model;
  int turns = 120;
  int width = 20;
  int height = 20;
  int players = 1;
  double epsilon = 0.1;
  double epsilon_end = -1.0;
  int epsilon_decay = 0;
  int k = 32;
  int warmup = 50;
  std::string scope = "occurrence";
  int window = 10;
  bool per_episode_maps = false;
};

ExperimentConfig experiment_from(const RunArgs& a) {
  ExperimentConfig c;
  const auto kind = evaluator_kind_from_name(a.evaluator);
  if (!kind) throw UsageError(fmt::format("unknown evaluator '{}'", a.evaluator));
  c.evaluator = *kind;
  c.episodes = a.episodes;
  c.seed = a.seed;
  c.game.turn_limit = a.turns;
  c.game.players = a.players;
  c.game.map_gen.width = a.width;
  c.game.map_gen.height = a.height;
  if (!a.map.empty()) c.game.fixed_map = std::make_shared<const GameMap>(decode_map(read_text_file(a.map)));
  c.fixed_map = !a.per_episode_maps;
  c.rl.k = a.k;
  c.rl.warmup_episodes = a.warmup;
  c.rl.epsilon.start = a.epsilon;
  c.rl.epsilon.end = a.epsilon_end < 0.0 ? a.epsilon : a.epsilon_end;
  c.rl.epsilon.decay_episodes = a.epsilon_decay;
  if (a.scope == "occurrence") c.rl.scope = ChoiceScope::PerOccurrence;
  else if (a.scope == "decision") c.rl.scope = ChoiceScope::PerDecision;
  else throw UsageError(fmt::format("unknown --scope '{}' (occurrence|decision)", a.scope));
  c.window_percent = a.window;
  return c;
}

int cmd_run(const RunArgs& a, const std::vector<std::pair<std::string, std::string>>& effective, std::ostream& out) {
  const ExperimentConfig config = experiment_from(a);
  std::optional<NnModel> model;
  if (config.evaluator == EvaluatorKind::Nn) {
    if (a.model.empty()) throw UsageError("--evaluator nn requires --model");
    auto [m, norm] = load_model(a.model);
    model = NnModel{std::move(m), std::move(norm)};
  }
  const fs::path dir(a.out_dir);
  fs::create_directories(dir / "logs");
  const ExperimentResult result = run_experiment(config, model ? &*model : nullptr, [&](int i, const EpisodeLog& log) {
    save_episode_log(log, (dir / "logs" / fmt::format("episode_{:05d}.jsonl", i)).string());
  });
  write_text_file((dir / "metrics.csv").string(), metrics_csv(result.metrics));
  write_text_file((dir / "run.txt").string(), overlay_text(effective));
  if (config.evaluator == EvaluatorKind::Rule) {
    save_table(result.table, result.table_meta, (dir / "value_table.txt").string());
  }
  const RunMetrics& m = result.metrics;
  out << fmt::format("{} episodes, evaluator {}, first-window mean TGO {:.1f}, last-window mean TGO {:.1f}, "
                     "improvement {:.2f}%\n",
                     m.size(), a.evaluator, m.first_window_mean(), m.last_window_mean(), 100.0 * m.improvement());
  return kExitOk;
}

struct DatasetArgs {
  std::string logs_dir;
  std::string out;
};

int cmd_build_dataset(const DatasetArgs& a, std::ostream& out) {
  const auto logs = load_logs(a.logs_dir);
  if (logs.empty()) throw std::runtime_error(fmt::format("no episode logs in '{}'", a.logs_dir));
  std::size_t rows = 0;
  for (const EpisodeLog& l : logs) rows += l.cities.size();
  Dataset d = build_dataset(logs);
  const Normalization norm = minmax_fit(d);
  write_text_file(a.out, dataset_csv(d));
  write_text_file(a.out + ".norm.csv", normalization_csv(norm));
  out << fmt::format("{} logs, {} cities, {} unique entries -> {} (normalization: {}.norm.csv)\n", logs.size(), rows,
                     d.entries.size(), a.out, a.out);
  return kExitOk;
}

struct TrainArgs {
  std::string dataset;
  std::string out_model;
  int folds = kDefaultFolds;
  bool grid = false;
  int epochs = 200;
  std::uint64_t seed = 1;
  int hidden = 95;
  double lr = 0.002;
  int batch = 30;
  double dropout = 0.5;
};

int cmd_train_nn(const TrainArgs& a, std::ostream& out) {
  const Dataset raw = parse_dataset_csv(read_text_file(a.dataset));
  MlpConfig config;
  config.hidden = {a.hidden};
  config.learning_rate = a.lr;
  config.batch_size = a.batch;
  config.epochs = a.epochs;
  config.dropout = a.dropout;
  config.seed = a.seed;

  TrainReport report;
  if (a.grid) {
    std::vector<MlpConfig> grid;
    for (int h : {48, 95}) {
      for (double lr : {0.001, 0.002}) {
        MlpConfig g = config;
        g.hidden = {h};
        g.learning_rate = lr;
        grid.push_back(g);
      }
    }
    const GridResult gr = grid_search(raw.entries, grid, a.folds, a.seed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << fmt::format("grid hidden={} lr={} mean_cv_mse={:.6f}{}\n", grid[i].hidden[0], grid[i].learning_rate,
                         gr.reports[i].mean_cv_mse, i == gr.best ? " *" : "");
    }
    config = gr.best_config;
    report = gr.reports[gr.best];
  } else {
    report = kfold_cv(raw.entries, config, a.folds, a.seed);
  }
  for (std::size_t f = 0; f < report.fold_mse.size(); ++f) {
    out << fmt::format("fold {} mse {:.6f} baseline {:.6f}\n", f, report.fold_mse[f], report.fold_baseline_mse[f]);
  }
  out << fmt::format("mean cv mse {:.6f}, mean-predictor baseline {:.6f}\n", report.mean_cv_mse,
                     report.mean_baseline_mse);

  const Normalization norm = minmax_fit(raw);
  const TrainResult final_model = train(normalize(raw.entries, norm), config);
  save_model(final_model.model, norm, a.out_model);
  out << fmt::format("model written to {}\n", a.out_model);
  return kExitOk;
}

struct CompareArgs {
  std::string run_a;
  std::string run_b;
  std::string out;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const fs::path ra(a.run_a);
  const fs::path rb(a.run_b);
  const RunMetrics ma = parse_metrics_csv(read_text_file((ra / "metrics.csv").string()));
  const RunMetrics mb = parse_metrics_csv(read_text_file((rb / "metrics.csv").string()));
  const auto la = load_logs(ra / "logs");
  const auto lb = load_logs(rb / "logs");
  const ComparisonReport report = compare(ma, mb, la, lb);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_text_file((dir / "summary.txt").string(), report.summary());
  write_text_file((dir / "center_terrain_a.csv").string(), distribution_csv(report.center_a));
  write_text_file((dir / "center_terrain_b.csv").string(), distribution_csv(report.center_b));
  write_text_file((dir / "worked_terrain_a.csv").string(), distribution_csv(report.worked_a));
  write_text_file((dir / "worked_terrain_b.csv").string(), distribution_csv(report.worked_b));
  out << report.summary();
  return kExitOk;
}

struct ExplainArgs {
  std::string log;
  int turn = 0;
  std::string coord;
};

int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  const Coord at = parse_coord(a.coord);
  const EpisodeLog log = load_episode_log(a.log);
  for (const TurnRecord& t : log.turns) {
    if (t.turn != a.turn) continue;
    for (const SiteDecision& d : t.decisions) {
      if (!d.center || *d.center != at) continue;
      if (!d.trace) throw std::runtime_error(fmt::format("the decision at ({},{}) has no rule trace", at.x, at.y));
      out << fmt::format("decision turn {} player {} settler {} state {} center ({},{}) score {}\n", d.turn, d.player,
                         d.settler, d.state_id, at.x, at.y, d.score);
      for (const std::string& line : explain(*d.trace)) out << line << "\n";
      return kExitOk;
    }
  }
  throw std::runtime_error(fmt::format("no decision at ({},{}) on turn {}", at.x, at.y, a.turn));
}

}  // namespace

int run_cli(const std::vector<std::string>& input, std::ostream& out, std::ostream& err) {
  CLI::App app{"Settlement-placement experiments: knowledge base with RL versus a neural evaluator", "settle"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_path;

  GenMapArgs gm;
  auto* gen = app.add_subcommand("gen-map", "Generate a map and write it in the text map format");
  gen->add_option("--width", gm.width, "Map width")->check(CLI::Range(kMinMapSide, 512))->capture_default_str();
  gen->add_option("--height", gm.height, "Map height")->check(CLI::Range(kMinMapSide, 512))->capture_default_str();
  gen->add_option("--seed", gm.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gm.out, "Output map file")->required();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a training experiment and persist logs and metrics");
  run->add_option("--evaluator", ra.evaluator, "kb | nn | random | constant")->capture_default_str();
  run->add_option("--episodes", ra.episodes, "Episode count")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--seed", ra.seed, "Base seed")->capture_default_str();
  run->add_option("--map", ra.map, "Fixed map file; default: generated from the seed");
  run->add_option("--out-dir", ra.out_dir, "Output directory")->required();
  run->add_option("--model", ra.model, "Model file (nn evaluator)");
  run->add_option("--turns", ra.turns, "Turns per episode")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--width", ra.width, "Generated map width")->check(CLI::Range(kMinMapSide, 512))->capture_default_str();
  run->add_option("--height", ra.height, "Generated map height")->check(CLI::Range(kMinMapSide, 512))->capture_default_str();
  run->add_option("--players", ra.players, "Players")->check(CLI::Range(1, 36))->capture_default_str();
  run->add_option("--epsilon", ra.epsilon, "Exploration rate")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  run->add_option("--epsilon-end", ra.epsilon_end, "Final exploration rate of the linear decay");
  run->add_option("--epsilon-decay", ra.epsilon_decay, "Episodes over which epsilon decays (0: constant)")
      ->capture_default_str();
  run->add_option("--k", ra.k, "State clusters")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--warmup", ra.warmup, "Random-agent warmup episodes for the state clusters")->capture_default_str();
  run->add_option("--scope", ra.scope, "Rule draw scope: occurrence | decision")->capture_default_str();
  run->add_option("--window", ra.window, "Improvement window, percent of episodes")->capture_default_str();
  run->add_flag("--per-episode-maps", ra.per_episode_maps, "Generate a new map for every episode");

  DatasetArgs da;
  auto* dataset = app.add_subcommand("build-dataset", "Build the placement dataset from episode logs");
  dataset->add_option("--logs-dir", da.logs_dir, "Directory of episode logs (*.jsonl)")->required();
  dataset->add_option("--out", da.out, "Dataset CSV")->required();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train-nn", "Cross-validate and train the placement regressor");
  train_cmd->add_option("--dataset", ta.dataset, "Dataset CSV")->required();
  train_cmd->add_option("--out-model", ta.out_model, "Model file")->required();
  train_cmd->add_option("--folds", ta.folds, "Cross-validation folds")->check(CLI::Range(2, 1000))->capture_default_str();
  train_cmd->add_flag("--grid", ta.grid, "Grid search over hidden size {48, 95} x learning rate {0.001, 0.002}");
  train_cmd->add_option("--epochs", ta.epochs, "Epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--seed", ta.seed, "Seed")->capture_default_str();
  train_cmd->add_option("--hidden", ta.hidden, "Hidden units")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr", ta.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--batch", ta.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--dropout", ta.dropout, "Dropout probability")->capture_default_str();

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "Compare two runs");
  cmp->add_option("--run-a", ca.run_a, "First run directory")->required();
  cmp->add_option("--run-b", ca.run_b, "Second run directory")->required();
  cmp->add_option("--out", ca.out, "Output directory")->required();

  ExplainArgs ea;
  auto* expl = app.add_subcommand("explain", "Explain a logged founding decision");
  expl->add_option("--log", ea.log, "Episode log")->required();
  expl->add_option("--turn", ea.turn, "Turn of the decision")->required();
  expl->add_option("--coord", ea.coord, "Chosen center as x,y")->required();

  for (CLI::App* sub : app.get_subcommands({})) {
    sub->add_option("--config", config_path, "key = value overlay file; command-line flags win");
  }

  try {
    // Overlay entries become flags placed before the user's own, so the
    // user's flags win under the take-last policy.
    std::vector<std::string> args = input;
    std::vector<std::pair<std::string, std::string>> overlay;
    for (std::size_t i = 1; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (path.empty()) continue;
      CLI::App* sub = app.get_subcommand_no_throw(args[0]);
      if (!sub) break;
      std::vector<std::string> tokens;
      for (const auto& [key, value] : parse_overlay(read_text_file(path))) {
        const CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
        if (!opt) throw UsageError(fmt::format("unknown config key '{}' for {}", key, args[0]));
        if (opt->get_type_size() == 0) {
          if (value == "true" || value == "1") tokens.push_back("--" + key);
          else if (value != "false" && value != "0") throw UsageError(fmt::format("config key '{}' is a flag", key));
        } else {
          tokens.push_back("--" + key);
          tokens.push_back(value);
        }
        overlay.emplace_back(key, value);
      }
      args.insert(args.begin() + 1, tokens.begin(), tokens.end());
      break;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (*gen) return cmd_gen_map(gm, out);
    if (*run) {
      std::vector<std::pair<std::string, std::string>> effective;
      for (const CLI::Option* opt : run->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || name == "out-dir") continue;
        if (opt->get_type_size() == 0) {
          effective.emplace_back(name, opt->count() > 0 ? "true" : "false");
        } else {
          const std::string value = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
          if (!value.empty()) effective.emplace_back(name, value);
        }
      }
      return cmd_run(ra, effective, out);
    }
    if (*dataset) return cmd_build_dataset(da, out);
    if (*train_cmd) return cmd_train_nn(ta, out);
    if (*cmp) return cmd_compare(ca, out);
    if (*expl) return cmd_explain(ea, out);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace settle
