#include "doctest.h"
#include "settle/cli.hpp"
#include "settle/harness.hpp"
#include "support.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace settle;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

int count_files(const fs::path& dir, const std::string& ext) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST_CASE("gen-map") {
  const fs::path dir = test::scratch_dir("cli_gen");
  const std::string a = (dir / "a.map").string(), b = (dir / "b.map").string();
  CHECK(cli({"gen-map", "--out", a}).code == kExitOk);
  CHECK(cli({"gen-map", "--out", b}).code == kExitOk);
  CHECK(read_text_file(a) == read_text_file(b));
  const GameMap map = decode_map(read_text_file(a));
  CHECK(map.width() == 20);
  CHECK(map.height() == 20);
  CHECK(cli({"gen-map", "--width", "5", "--out", a}).code == kExitUsage);
  CHECK(cli({"gen-map", "--out", (dir / "missing" / "x.map").string()}).code == kExitRuntime);
  CHECK(cli({"no-such-command"}).code == kExitUsage);
  CHECK(cli({"gen-map", "--help"}).code == kExitOk);
}

TEST_CASE("run, compare and explain") {
  const fs::path dir = test::scratch_dir("cli_run");
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  const std::vector<std::string> base = {"run", "--evaluator", "kb", "--episodes", "10", "--turns", "30",
                                         "--warmup", "5", "--k", "4", "--seed", "3"};
  auto with_out = [&](const std::string& out) {
    auto args = base;
    args.insert(args.end(), {"--out-dir", out});
    return args;
  };
  REQUIRE(cli(with_out(a)).code == kExitOk);
  CHECK(count_files(fs::path(a) / "logs", ".jsonl") == 10);
  CHECK(fs::exists(fs::path(a) / "metrics.csv"));
  CHECK(fs::exists(fs::path(a) / "value_table.txt"));
  REQUIRE(cli(with_out(b)).code == kExitOk);
  CHECK(read_text_file((fs::path(a) / "metrics.csv").string()) == read_text_file((fs::path(b) / "metrics.csv").string()));

  const CliResult cmp = cli({"compare", "--run-a", a, "--run-b", b, "--out", (dir / "cmp").string()});
  REQUIRE(cmp.code == kExitOk);
  CHECK(cmp.out.find("improvement_delta 0.00%") != std::string::npos);
  CHECK(cmp.out.find("last_window_delta 0.000") != std::string::npos);
  CHECK(fs::exists(dir / "cmp" / "center_terrain_a.csv"));

  const EpisodeLog log = load_episode_log((fs::path(a) / "logs" / "episode_00000.jsonl").string());
  const auto decisions = log.all_decisions();
  REQUIRE_FALSE(decisions.empty());
  const SiteDecision& d = decisions.front();
  REQUIRE(d.center);
  const std::string coord = std::to_string(d.center->x) + "," + std::to_string(d.center->y);
  const std::string log_path = (fs::path(a) / "logs" / "episode_00000.jsonl").string();
  const CliResult ex = cli({"explain", "--log", log_path, "--turn", std::to_string(d.turn), "--coord", coord});
  CHECK(ex.code == kExitOk);
  CHECK(ex.out.find("total ") != std::string::npos);

  const CliResult none = cli({"explain", "--log", log_path, "--turn", "9999", "--coord", coord});
  CHECK(none.code == kExitRuntime);
  CHECK(none.err.find("no decision") != std::string::npos);
}

TEST_CASE("nn run needs a model") {
  const fs::path dir = test::scratch_dir("cli_nn");
  CHECK(cli({"run", "--evaluator", "nn", "--episodes", "1", "--out-dir", dir.string()}).code == kExitUsage);
  CHECK(cli({"run", "--evaluator", "nn", "--episodes", "1", "--out-dir", dir.string(), "--model",
             (dir / "absent.model").string()})
            .code == kExitRuntime);
}

TEST_CASE("config overlay") {
  const fs::path dir = test::scratch_dir("cli_config");
  const std::string cfg = (dir / "gen.cfg").string();
  write_text_file(cfg, "# map settings\nwidth = 14\nheight = 16\n");
  const std::string out = (dir / "m.map").string();
  REQUIRE(cli({"gen-map", "--config", cfg, "--out", out, "--height", "13"}).code == kExitOk);
  const GameMap map = decode_map(read_text_file(out));
  CHECK(map.width() == 14);
  CHECK(map.height() == 13);

  write_text_file(cfg, "width = 14\nbogus_key = 1\n");
  const CliResult bad = cli({"gen-map", "--config", cfg, "--out", out});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("bogus_key") != std::string::npos);
}

TEST_CASE("dataset and training commands") {
  const fs::path dir = test::scratch_dir("cli_train");
  Dataset d;
  for (auto& row : test::synthetic_linear(150, FeatureLayout::kDimension, 2)) d.entries.push_back(row);
  const std::string csv = (dir / "data.csv").string();
  write_text_file(csv, dataset_csv(d));
  const CliResult r = cli({"train-nn", "--dataset", csv, "--out-model", (dir / "m.model").string(), "--folds", "5",
                           "--epochs", "40", "--dropout", "0", "--lr", "0.01", "--hidden", "16", "--batch", "20"});
  REQUIRE(r.code == kExitOk);
  double mean = 0, baseline = 0;
  const auto at = r.out.find("mean cv mse ");
  REQUIRE(at != std::string::npos);
  REQUIRE(std::sscanf(r.out.c_str() + at, "mean cv mse %lf, mean-predictor baseline %lf", &mean, &baseline) == 2);
  CHECK(mean < baseline);
  CHECK(fs::exists(dir / "m.model"));

  fs::create_directories(dir / "empty");
  CHECK(cli({"build-dataset", "--logs-dir", (dir / "empty").string(), "--out", (dir / "x.csv").string()}).code ==
        kExitRuntime);
}

TEST_CASE("the binary reports usage errors through its exit code") {
  const std::string cmd = std::string(SETTLE_CLI_PATH) + " gen-map --width 5 --out /dev/null >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == kExitUsage);
}
