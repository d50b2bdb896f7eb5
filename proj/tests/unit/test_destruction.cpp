#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "pod/binary_io.hpp"
#include "pod/destruction.hpp"
#include "pod/domain.hpp"
#include "pod/zelda.hpp"

using namespace pod;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pod_test_destruction_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<int> oracle_metrics(const CellGrid& g) {
  return {zelda::count_tiles(g, zelda::kEnemy), oracle::nearest_enemy(g), oracle::solution_length(g)};
}

}  // namespace

TEST_CASE("condition sign") {
  CHECK(condition_sign(5, 8) == -1);
  CHECK(condition_sign(20, 40) == -1);
  CHECK(condition_sign(7, 7) == 0);
  CHECK(condition_sign(9, 2) == 1);
}

TEST_CASE("destroy step") {
  std::mt19937_64 rng(1);
  SUBCASE("repair action restores the original") {
    const auto goals = generate_goals(zelda_domain(), 2, 3);
    for (const auto& goal : goals) {
      for (int i = 0; i < 50; ++i) {
        const auto step = destroy_step(goal, rng);
        CHECK(step.state.with_cell(step.cursor, step.repair_action) == goal);
        CHECK(step.repair_action == goal.at(step.cursor));
        CHECK(step.state.at(step.cursor) == step.written);
        CHECK(hamming_distance(goal, step.state).count <= 1);
      }
    }
  }
  SUBCASE("single cell grid") {
    CellGrid one(Extents::plane(1, 1), 4);
    for (int i = 0; i < 10; ++i) CHECK(destroy_step(one, rng).cursor == Cursor{});
  }
  SUBCASE("cursor positions are uniform") {
    CellGrid g(Extents::plane(5, 4), 3);
    std::vector<double> counts(20, 0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) ++counts[g.index_of(destroy_step(g, rng).cursor)];
    double chi2 = 0;
    const double expected = n / 20.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 19 degrees of freedom; 43.8 is the 0.999 quantile.
    CHECK(chi2 < 43.8);
  }
  SUBCASE("histogram destroyer only writes supported categories") {
    HistogramDestroyer d(TileHistogram{{0, 5, 0, 5}, 10});
    CellGrid g(Extents::plane(4, 4), 4);
    for (int i = 0; i < 200; ++i) {
      const auto s = d.destroy(g, rng);
      CHECK((s.written == 1 || s.written == 3));
    }
    CHECK(d.name() == "histogram");
    CHECK(UniformDestroyer().name() == "uniform");
  }
}

TEST_CASE("trajectories") {
  const auto metrics = zelda::metrics();
  const auto goals = generate_goals(zelda_domain(), 3, 11);
  const auto start = start_distribution(zelda_domain(), goals);
  std::mt19937_64 rng(2);

  SUBCASE("max_steps 1 gives one record") {
    TrajectoryConfig c;
    c.max_steps = 1;
    const auto t = make_trajectory(goals[0], metrics, start, c, rng);
    REQUIRE(t.size() == 1);
    const auto expect = oracle_metrics(goals[0]);
    const auto got = oracle_metrics(t[0].state);
    for (std::size_t i = 0; i < 3; ++i) CHECK(t[0].condition[i] == condition_sign(expect[i], got[i]));
  }
  SUBCASE("epsilon 2 stops immediately") {
    TrajectoryConfig c;
    c.epsilon = 2.0;
    CHECK(make_trajectory(goals[0], metrics, start, c, rng).size() == 1);
  }
  SUBCASE("default max steps is twice the cell count") {
    CHECK(resolved_max_steps(TrajectoryConfig{}, goals[0]) == 2 * 77);
  }
  SUBCASE("conditions match independent re-evaluation and the path replays") {
    TrajectoryConfig c;
    c.epsilon = 0.0;
    for (const auto& goal : goals) {
      const auto t = make_trajectory(goal, metrics, start, c, rng);
      CHECK(t.size() == 154);
      const auto target = oracle_metrics(goal);
      for (const auto& r : t) {
        const auto now = oracle_metrics(r.state);
        for (std::size_t i = 0; i < 3; ++i) CHECK(r.condition[i] == condition_sign(target[i], now[i]));
      }
      // Undo every step from the end: the goal comes back.
      CellGrid s = t.back().state;
      for (std::size_t k = t.size(); k-- > 0;) {
        CHECK(s == t[k].state);
        s = s.with_cell(t[k].cursor, t[k].repair_action);
      }
      CHECK(s == goal);
      for (std::size_t k = 0; k < t.size(); ++k) CHECK(t[k].provenance.step == k);
    }
  }
  SUBCASE("min_steps delays the stop test") {
    TrajectoryConfig c;
    c.epsilon = 2.0;
    c.min_steps = 9;
    CHECK(make_trajectory(goals[0], metrics, start, c, rng).size() == 9);
  }
}

TEST_CASE("dataset build, file format and determinism") {
  const auto dir = scratch("dataset");
  const auto metrics = zelda::metrics();
  const auto goals = generate_goals(zelda_domain(), 2, 5);
  const auto start = start_distribution(zelda_domain(), goals);
  DatasetConfig c;
  c.target_size = 100;
  c.seed = 7;
  c.domain = "zelda";
  c.trajectory.max_steps = 20;

  const auto one = (dir / "one.pod").string();
  const std::vector<CellGrid> single{goals[0]};
  const auto m = build_dataset(single, metrics, zelda::alphabet(), start, c, one);
  CHECK(m.record_count >= 100);
  const auto ds = read_dataset(one);
  CHECK(ds.size() == m.record_count);
  CHECK(read_manifest(manifest_path_for(one)).record_count == ds.size());

  const auto bytes = read_file_bytes(one);
  REQUIRE(bytes.size() >= kDatasetHeaderSize);
  CHECK(std::string(bytes.begin(), bytes.begin() + 6) == "PODDS1");
  CHECK(bytes.size() == kDatasetHeaderSize + ds.size() * dataset_record_width(ds.extents(), 3, true));

  SUBCASE("both goals appear in provenance") {
    const auto two = (dir / "two.pod").string();
    c.target_size = 400;
    build_dataset(goals, metrics, zelda::alphabet(), start, c, two);
    const auto d2 = read_dataset(two);
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < d2.size(); ++i) seen.insert(d2.provenance(i).goal_digest);
    CHECK(seen == std::set<std::uint64_t>{grid_digest(goals[0]), grid_digest(goals[1])});
  }
  SUBCASE("same seed, byte-identical files regardless of workers") {
    const auto a = (dir / "a.pod").string(), b = (dir / "b.pod").string();
    c.workers = 1;
    build_dataset(goals, metrics, zelda::alphabet(), start, c, a);
    c.workers = 3;
    build_dataset(goals, metrics, zelda::alphabet(), start, c, b);
    CHECK(read_file_bytes(a) == read_file_bytes(b));
    CHECK(read_text_file(manifest_path_for(a)) == read_text_file(manifest_path_for(b)));
  }
  SUBCASE("records round trip") {
    std::mt19937_64 rng(4);
    TrajectoryConfig tc;
    tc.max_steps = 12;
    Dataset d(zelda::level_extents(), zelda::kTileCount, 3);
    const auto recs = make_trajectory(goals[1], metrics, start, tc, rng);
    for (const auto& r : recs) d.push_back(r);
    const auto path = (dir / "rt.pod").string();
    write_dataset(path, d, 99);
    std::uint64_t seed = 0;
    const auto back = read_dataset(path, &seed);
    CHECK(seed == 99);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto r = back.record(i);
      CHECK(r.state == recs[i].state);
      CHECK(r.cursor == recs[i].cursor);
      CHECK(r.condition == recs[i].condition);
      CHECK(r.repair_action == recs[i].repair_action);
      CHECK(r.provenance.step == recs[i].provenance.step);
    }
    const auto jsonl = (dir / "rt.jsonl").string();
    export_dataset_jsonl(back, jsonl);
    const auto text = read_text_file(jsonl);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == recs.size());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(build_dataset(std::vector<CellGrid>{}, metrics, zelda::alphabet(), start, c,
                                  (dir / "x.pod").string()),
                    Error);
    CHECK_THROWS_AS(read_dataset((dir / "missing.pod").string()), Error);
    write_text_file((dir / "junk.pod").string(), "not a dataset");
    CHECK_THROWS_AS(read_dataset((dir / "junk.pod").string()), Error);
  }
}
