// Runs the msrl binary end to end and checks exit codes and output files.

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::current_path() / "cli_test_work";

std::string slurp(const fs::path &path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path write_config(const std::string &name, const std::string &body) {
  fs::create_directories(kWork);
  const fs::path path = kWork / name;
  std::ofstream(path) << body;
  return path;
}

int run(const std::string &args) {
  const std::string cmd = std::string(MSRL_CLI_PATH) + " " + args + " > " + (kWork / "stdout.txt").string() +
                          " 2> " + (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string out_dir(const std::string &name) { return (kWork / name).string(); }

}  // namespace

TEST_CASE("usage and configuration errors exit with 2") {
  fs::create_directories(kWork);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("validate") == 2);
  CHECK(run("validate --config /no/such/file.json") == 2);

  const auto bad_key = write_config("bad_key.json", R"({"env": {"levle": 1}})");
  CHECK(run("validate --config " + bad_key.string()) == 2);
  CHECK(slurp(kWork / "stderr.txt").find("env.levle: unknown key") != std::string::npos);

  const auto broken = write_config("broken.json", "{\"env\": ");
  CHECK(run("solve --config " + broken.string()) == 2);

  const auto ok = write_config("ok.json", R"({"env": {"level": 1}})");
  CHECK(run("sweep --config " + ok.string() + " --workers 0") == 2);
}

TEST_CASE("validate exit codes") {
  const auto single_stage = write_config(
      "single.json", R"({"env": {"level": 2, "eval_set_size": 3}, "guidance": {"stages": [3]},
                         "schedule": {"transitions": [[1000]]}})");
  CHECK(run("validate --config " + single_stage.string() + " --out " + out_dir("v_single")) == 0);
  CHECK(slurp(kWork / "v_single" / "report.txt").find("failing: 0") != std::string::npos);

  const auto per_step = write_config(
      "per_step.json", R"({"env": {"level": 1, "grid_size": 5}, "guidance": {"semantics": "per_step",
                         "shaping_only": false}, "measurement": {"checks": "optimality"}})");
  CHECK(run("validate --config " + per_step.string() + " --out " + out_dir("v_per_step")) == 1);
  const auto violations = slurp(kWork / "v_per_step" / "violations.csv");
  CHECK(violations.rfind("# msrl violations v1\nlayout_seed,check,stage,state,action\n", 0) == 0);
  CHECK(violations.find(",optimality,") != std::string::npos);

  const auto level1 = write_config("level1.json", R"({"env": {"level": 1}, "measurement": {"checks": "support"}})");
  CHECK(run("validate --config " + level1.string() + " --out " + out_dir("v_level1")) == 0);

  const auto with_file = write_config(
      "with_file.json", std::string(R"({"env": {"mdp_file": ")") + MSRL_TEST_DATA_DIR + "/chain.mdp\"}}");
  CHECK(run("validate --config " + with_file.string() + " --out " + out_dir("v_file")) == 2);
}

TEST_CASE("solve on the chain matches the golden files") {
  const auto cfg = write_config(
      "chain.json", std::string(R"({"env": {"mdp_file": ")") + MSRL_TEST_DATA_DIR + "/chain.mdp\"}}");
  REQUIRE(run("solve --config " + cfg.string() + " --out " + out_dir("chain")) == 0);
  CHECK(slurp(kWork / "chain" / "values.csv") == slurp(fs::path(MSRL_TEST_DATA_DIR) / "chain_values.csv"));
  CHECK(slurp(kWork / "chain" / "policy_set.csv") == slurp(fs::path(MSRL_TEST_DATA_DIR) / "chain_policy_set.csv"));
  CHECK(fs::exists(kWork / "chain" / "resolved_config.json"));
}

TEST_CASE("solve on a layout writes one table per stage") {
  const auto cfg = write_config("solve_grid.json", R"({"env": {"level": 1, "grid_size": 5, "time_limit": 6}})");
  REQUIRE(run("solve --config " + cfg.string() + " --out " + out_dir("grid")) == 0);
  for (int k : {1, 2, 3}) {
    const auto values = slurp(kWork / "grid" / ("values_stage" + std::to_string(k) + ".csv"));
    CHECK(values.rfind("# msrl values v1\nstate,kind,row,col,steps_left,flags,value\n0,live,2,2,6,", 0) == 0);
    CHECK(fs::exists(kWork / "grid" / ("policy_set_stage" + std::to_string(k) + ".csv")));
  }
  CHECK(slurp(kWork / "grid" / "layout.txt") == "G...O\n.....\n..S..\n.....\nO...O\n");
}

TEST_CASE("train writes its artifacts and needs exactly one schedule") {
  const auto cfg = write_config(
      "train.json", R"({"env": {"level": 1, "grid_size": 5, "time_limit": 6, "observation": "state"},
                        "schedule": {"transitions": [[2000, 4000, 6000]]},
                        "trainer": {"total_steps": 20000, "epsilon_end": 1.0, "learning_rate": 0.5}})");
  REQUIRE(run("train --config " + cfg.string() + " --out " + out_dir("train") + " --seed-override 4") == 0);
  for (const char *f : {"trace.csv", "policy.txt", "snapshots.csv", "report.txt", "resolved_config.json"})
    CHECK(fs::exists(kWork / "train" / f));
  CHECK(slurp(kWork / "train" / "report.txt").find("seed 4") != std::string::npos);
  CHECK(slurp(kWork / "train" / "resolved_config.json").find("\"seed\": 4") != std::string::npos);

  const auto two = write_config("train_two.json", R"({"env": {"level": 1}})");
  CHECK(run("train --config " + two.string() + " --out " + out_dir("train_two")) == 2);
}

TEST_CASE("sweep is reproducible from its resolved config") {
  const auto cfg = write_config(
      "sweep.json", R"({"env": {"level": 1, "grid_size": 5, "time_limit": 6, "observation": "state"},
                        "schedule": {"transitions": [[2000, 4000, 6000], [4000, 8000, 12000]], "seeds": [1, 2],
                                     "workers": 2},
                        "trainer": {"total_steps": 30000, "epsilon_end": 1.0, "learning_rate": 0.5}})");
  REQUIRE(run("sweep --config " + cfg.string() + " --out " + out_dir("sweep_a")) == 0);
  // The resolved file still names sweep_a, so --out redirects the rerun.
  REQUIRE(run("sweep --config " + (kWork / "sweep_a" / "resolved_config.json").string() + " --out " +
              out_dir("sweep_b") + " --workers 1") == 0);
  for (const char *f : {"cells.csv", "summary.csv", "curves.dat", "report.txt"})
    CHECK(slurp(kWork / "sweep_a" / f) == slurp(kWork / "sweep_b" / f));
  CHECK(slurp(kWork / "sweep_a" / "report.txt").find("t* = ") != std::string::npos);
}

TEST_CASE("sweep reports ALL_DIVERGED with exit 3") {
  const auto cfg = write_config(
      "diverge.json", R"({"env": {"level": 1, "grid_size": 5},
                          "schedule": {"transitions": [[100, 200, 300]], "seeds": [1]},
                          "trainer": {"total_steps": 400}})");
  CHECK(run("sweep --config " + cfg.string() + " --out " + out_dir("diverge")) == 3);
  CHECK(slurp(kWork / "diverge" / "report.txt").find("ALL_DIVERGED") != std::string::npos);
  CHECK(slurp(kWork / "stdout.txt").find("ALL_DIVERGED") != std::string::npos);
}
