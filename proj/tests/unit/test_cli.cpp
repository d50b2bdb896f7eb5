#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "oracles.hpp"
#include "pod/destruction.hpp"
#include "pod/domain.hpp"
#include "pod/generation.hpp"
#include "pod/zelda.hpp"

namespace fs = std::filesystem;
using namespace pod;

namespace {

const fs::path kWork = fs::temp_directory_path() / "pod_test_cli";

struct Run {
  int code = -1;
  std::string output;
};

// Runs the pod binary through the shell; `env` is prepended verbatim.
Run pod_run(const std::string& args, const std::string& env = "") {
  const auto log = kWork / "last_output.txt";
  const std::string cmd = env + " '" + std::string(POD_BINARY) + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = oracle::slurp(log);
  return r;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

CellGrid level(const std::string& rows) { return parse_grid("dims: 11 7\n" + rows, zelda::char_table()); }

ArchiveEntry entry(int i, const CellGrid& g, std::vector<int> targets, std::vector<int> achieved) {
  ArchiveEntry e;
  e.id = "m" + std::to_string(i);
  e.run = "run0";
  e.agent = "agent";
  e.seed = static_cast<std::uint64_t>(i);
  e.targets = std::move(targets);
  e.achieved = std::move(achieved);
  e.steps = 0;
  e.verdict = zelda::is_playable(g) ? "playable" : "unplayable";
  e.grid = g;
  return e;
}

struct Fixture {
  Fixture() {
    static bool once = [] {
      fs::remove_all(kWork);
      fs::create_directories(kWork);
      return true;
    }();
    (void)once;
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "usage and exit codes") {
  CHECK(pod_run("--version").code == 0);
  CHECK(pod_run("").code == 2);
  CHECK(pod_run("gen-goals --domain zelda --bogus 1 --out x").code == 2);
  CHECK(pod_run("gen-goals --domain zelda").code == 2);

  const auto missing = pod_run("destroy --domain zelda --goals " + path("no_such_dir") + " --out " + path("x.pod"));
  CHECK(missing.code == 3);
  CHECK(missing.output.find("error (io)") != std::string::npos);

  CHECK(pod_run("gen-goals --domain mars --out " + path("mars")).code == 4);
  CHECK(pod_run("gen-goals --domain zelda --count many --out " + path("z")).code == 4);
}

TEST_CASE_FIXTURE(Fixture, "zelda pipeline") {
  const auto goals = path("zgoals");
  REQUIRE(pod_run("gen-goals --domain zelda --count 3 --seed 1 --out " + goals).code == 0);
  CHECK(read_goal_dir(zelda_domain(), goals).size() == 3);
  const auto run = nlohmann::json::parse(oracle::slurp(fs::path(goals) / "run.json"));
  CHECK(run["command"] == "gen-goals");
  CHECK(run["options"]["seed"] == "1");
  CHECK(run["config_digest"].get<std::string>().size() == 16);

  const auto ds = path("z.pod");
  const auto d = pod_run("destroy --domain zelda --goals " + goals + " --size 600 --seed 7 --out " + ds +
                         " --jsonl " + path("z.jsonl"));
  REQUIRE(d.code == 0);
  const auto manifest = read_manifest(manifest_path_for(ds));
  CHECK(manifest.record_count >= 600);
  CHECK(read_dataset(ds).size() == manifest.record_count);
  const auto jsonl = oracle::slurp(path("z.jsonl"));
  CHECK(static_cast<std::uint64_t>(std::count(jsonl.begin(), jsonl.end(), '\n')) == manifest.record_count);
  CHECK(fs::exists(ds + ".run.json"));

  const auto model = path("z.model");
  const std::string widths = " --conv1 4 --conv2 4 --conv3 4 --hidden 16 --batch-size 64";
  REQUIRE(pod_run("train --dataset " + ds + " --out " + model + " --epochs 2 --seed 3 --quiet" + widths).code == 0);
  const auto report = oracle::slurp(model + ".report.csv");
  CHECK(report.rfind("epoch,mean_loss,accuracy,wall_seconds\n", 0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 3);

  const auto out = path("zarchive");
  const auto g = pod_run("generate --model " + model +
                         " --target enemies=2,nearest_enemy=4 --target solution_length=15 --episodes 3 --seed 4 "
                         "--max-steps 20 --out " +
                         out);
  REQUIRE(g.code == 0);
  const auto archive = read_archive(out);
  REQUIRE(archive.entries.size() == 3);
  for (const auto& e : archive.entries) CHECK(e.targets == std::vector<int>{2, 4, 15});

  SUBCASE("domain mismatch against the model is a config error") {
    CHECK(pod_run("generate --model " + model + " --domain lego --target blocks=20 --out " + path("bad")).code == 4);
  }
  SUBCASE("out-of-range targets are clamped with a warning") {
    const auto r = pod_run("generate --agent random --domain zelda --goals " + goals +
                           " --target enemies=9,nearest_enemy=4,solution_length=15 --out " + path("clamped"));
    CHECK(r.code == 0);
    CHECK(r.output.find("warning") != std::string::npos);
    CHECK(read_archive(path("clamped")).entries[0].targets[0] == 5);
  }
  SUBCASE("missing target is a usage error") {
    CHECK(pod_run("generate --agent random --domain zelda --goals " + goals + " --target enemies=1 --out " +
                  path("partial"))
              .code == 2);
  }
  SUBCASE("render and export") {
    REQUIRE(pod_run("render --archive " + out + " --out " + path("png")).code == 0);
    for (const auto& e : archive.entries) CHECK(fs::exists(fs::path(path("png")) / (e.id + ".png")));
    REQUIRE(pod_run("export --dataset " + ds + " --format jsonl --out " + path("again.jsonl")).code == 0);
    CHECK(oracle::slurp(path("again.jsonl")) == jsonl);
  }
}

TEST_CASE_FIXTURE(Fixture, "lego generation with a block target") {
  const auto goals = path("lgoals");
  REQUIRE(pod_run("gen-goals --domain lego --count 3 --seed 2 --out " + goals).code == 0);
  const auto ds = path("l.pod");
  REQUIRE(pod_run("destroy --domain lego --goals " + goals + " --size 300 --seed 5 --out " + ds).code == 0);
  const auto model = path("l.model");
  REQUIRE(pod_run("train --dataset " + ds + " --out " + model +
                  " --epochs 1 --seed 6 --quiet --conv1 4 --conv2 4 --conv3 4 --hidden 16")
              .code == 0);
  const auto out = path("larchive");
  REQUIRE(pod_run("generate --domain lego --model " + model + " --target blocks=21 --episodes 10 --seed 8 --out " + out)
              .code == 0);
  const auto archive = read_archive(out);
  REQUIRE(archive.entries.size() == 10);
  for (const auto& e : archive.entries) {
    CHECK(e.targets == std::vector<int>{21});
    CHECK(e.steps == 54);
  }
  REQUIRE(pod_run("export --archive " + out + " --format ldraw-text --out " + path("ldr")).code == 0);
  CHECK(fs::exists(fs::path(path("ldr")) / (archive.entries[0].id + ".ldr")));
  CHECK(pod_run("export --archive " + out + " --format obj --out " + path("obj")).code == 4);
}

TEST_CASE_FIXTURE(Fixture, "evaluate matches the golden report on a fixed mini corpus") {
  const auto room = level(
      "...........\n"
      ".@.........\n"
      "...........\n"
      ".....K.....\n"
      "...........\n"
      ".........D.\n"
      "...........\n");
  const auto corridor = level(
      "###########\n"
      "###########\n"
      "###########\n"
      ".@...K...D.\n"
      "###########\n"
      "###########\n"
      "###########\n");
  // 8 enemies on the bottom row: 8/77 of the cells differ, just over the 10% bar.
  auto crowded = room;
  for (int x = 0; x < 8; ++x) crowded.set(Cursor{{x, 6, 0}}, zelda::kEnemy);
  // One edit away from a goal: a duplicate.
  auto near_corridor = corridor;
  near_corridor.set(Cursor{{0, 3, 0}}, zelda::kSolid);
  const CellGrid rock(zelda::level_extents(), zelda::kTileCount, Category{zelda::kSolid});

  const auto goals_dir = path("mini_goals");
  const std::vector<CellGrid> goals{room, corridor};
  write_goal_dir(zelda_domain(), goals_dir, goals);

  Archive a;
  a.domain = "zelda";
  a.metric_names = {"enemies", "nearest_enemy", "solution_length"};
  a.entries.push_back(entry(0, room, {0, 2, 10}, {0, 2, 10}));
  a.entries.push_back(entry(1, crowded, {1, 4, 12}, {2, 4, 12}));
  a.entries.push_back(entry(2, near_corridor, {2, 6, 14}, {2, 6, 14}));
  a.entries.push_back(entry(3, rock, {3, 8, 16}, {5, 8, 16}));
  const auto dir = path("mini_archive");
  write_archive(dir, a);

  const auto report = path("mini_report.csv");
  const auto r = pod_run("evaluate --archive " + dir + " --goals " + goals_dir + " --report " + report +
                         " --plot-data " + path("mini_plots"));
  REQUIRE(r.code == 0);
  CHECK(oracle::slurp(report) == oracle::slurp(fs::path(POD_GOLDEN_DIR) / "evaluate_mini.csv"));
  CHECK(r.output.find("intra-diversity scan order") != std::string::npos);
  CHECK(fs::exists(fs::path(path("mini_plots")) / "controllability_enemies.csv"));
  CHECK(fs::exists(report + ".run.json"));

  // The golden values, re-derived from the independent oracles.
  const std::vector<CellGrid> items{room, crowded, near_corridor, rock};
  CHECK(oracle::inter_survivors(items, goals, 0.1).size() == 2);
  CHECK(oracle::intra_survivors(items, {0, 1, 2, 3}, 0.1).size() == 4);
  int playable = 0;
  for (const auto& g : items) playable += oracle::playable(g);
  CHECK(playable == 3);
  CHECK(oracle::spearman_rho({0, 1, 2, 3}, {0, 2, 2, 5}) == doctest::Approx(0.948683).epsilon(1e-6));
}

TEST_CASE_FIXTURE(Fixture, "seeds, configs and manifests") {
  const auto a = path("seed_flag"), b = path("seed_env"), c = path("seed_other"), e = path("seed_none");
  REQUIRE(pod_run("gen-goals --domain zelda --count 2 --seed 5 --out " + a).code == 0);
  REQUIRE(pod_run("gen-goals --domain zelda --count 2 --out " + b, "POD_SEED=5").code == 0);
  REQUIRE(pod_run("gen-goals --domain zelda --count 2 --out " + c, "POD_SEED=6").code == 0);
  CHECK(oracle::slurp(fs::path(a) / "goal_000.txt") == oracle::slurp(fs::path(b) / "goal_000.txt"));
  CHECK(oracle::slurp(fs::path(a) / "goal_000.txt") != oracle::slurp(fs::path(c) / "goal_000.txt"));
  // The flag beats the environment.
  REQUIRE(pod_run("gen-goals --domain zelda --count 2 --seed 5 --out " + e, "POD_SEED=6").code == 0);
  CHECK(oracle::slurp(fs::path(a) / "goal_001.txt") == oracle::slurp(fs::path(e) / "goal_001.txt"));

  const auto cfg = path("pod.cfg");
  {
    std::ofstream out(cfg);
    out << "seed = 5\n[gen-goals]\ncount = 3\n";
  }
  const auto f = path("from_config"), g = path("flag_wins");
  REQUIRE(pod_run("--config " + cfg + " gen-goals --domain zelda --out " + f).code == 0);
  CHECK(read_goal_dir(zelda_domain(), f).size() == 3);
  const auto three = path("seed_three");
  REQUIRE(pod_run("gen-goals --domain zelda --count 3 --seed 5 --out " + three).code == 0);
  CHECK(oracle::slurp(fs::path(three) / "goal_002.txt") == oracle::slurp(fs::path(f) / "goal_002.txt"));
  REQUIRE(pod_run("--config " + cfg + " gen-goals --domain zelda --count 1 --out " + g).code == 0);
  CHECK(read_goal_dir(zelda_domain(), g).size() == 1);
  const auto manifest = nlohmann::json::parse(oracle::slurp(fs::path(f) / "run.json"));
  CHECK(manifest["options"]["count"] == "3");
  CHECK(manifest["config_digest"] != "0000000000000000");

  {
    std::ofstream out(path("broken.cfg"));
    out << "[gen-goals\n";
  }
  CHECK(pod_run("--config " + path("broken.cfg") + " gen-goals --domain zelda --out " + path("never")).code == 4);

  // Identical manifests, identical bytes.
  const auto r = path("repeat");
  REQUIRE(pod_run("gen-goals --domain zelda --count 2 --seed 9 --out " + r).code == 0);
  const auto first = oracle::tree_contents(r);
  fs::remove_all(r);
  REQUIRE(pod_run("gen-goals --domain zelda --count 2 --seed 9 --out " + r).code == 0);
  CHECK(oracle::tree_contents(r) == first);
  CHECK(first.size() == 3);
}
