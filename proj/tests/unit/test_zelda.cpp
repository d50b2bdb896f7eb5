#include "doctest.h"

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "pod/binary_io.hpp"
#include "pod/zelda.hpp"

using namespace pod;
using namespace pod::zelda;

namespace {

CellGrid level_from(const std::string& rows) { return parse_grid("dims: 11 7\n" + rows, char_table()); }

const std::string kOpenRoom =
    "...........\n"
    ".@.........\n"
    "...........\n"
    ".....K.....\n"
    "...........\n"
    ".........D.\n"
    "...........\n";

CellGrid random_level(std::mt19937_64& rng) {
  // Mostly empty and solid with a few entities. Two thirds of the levels get
  // exactly one player, key and door so that both outcomes are common.
  static const std::uint64_t weights[] = {50, 30, 4, 4, 4, 8};
  static const std::uint64_t terrain[] = {55, 35, 0, 0, 0, 10};
  const bool placed = uniform_index(rng, 3) != 0;
  CategoricalSampler pick(placed ? terrain : weights);
  std::vector<Category> cells(77);
  for (auto& c : cells) c = static_cast<Category>(pick(rng));
  if (placed) {
    std::vector<std::size_t> idx(cells.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_in_place(idx, rng);
    cells[idx[0]] = kPlayer;
    cells[idx[1]] = kKey;
    cells[idx[2]] = kDoor;
  }
  return CellGrid(level_extents(), kTileCount, cells);
}

}  // namespace

TEST_CASE("alphabet and text format") {
  CHECK(alphabet().size() == 6);
  CHECK(alphabet().name(0) == "empty");
  const auto g = level_from(kOpenRoom);
  CHECK(g.at(1, 1) == kPlayer);
  CHECK(g.at(5, 3) == kKey);
  CHECK(g.at(9, 5) == kDoor);
  CHECK(parse_grid(render_ascii(g), char_table()) == g);
}

TEST_CASE("enemy count") {
  CHECK(count_enemies(CellGrid(level_extents(), kTileCount)) == 0);
  auto g = level_from(kOpenRoom);
  g.set(Cursor{{3, 0, 0}}, kEnemy);
  g.set(Cursor{{4, 4, 0}}, kEnemy);
  g.set(Cursor{{10, 6, 0}}, kEnemy);
  CHECK(count_enemies(g) == 3);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_level(rng);
    CHECK(static_cast<std::uint64_t>(count_enemies(r)) == tile_histogram(r).counts[kEnemy]);
  }
}

TEST_CASE("nearest enemy distance") {
  CellGrid g(level_extents(), kTileCount);
  g.set(Cursor{{2, 2, 0}}, kPlayer);
  g.set(Cursor{{5, 2, 0}}, kEnemy);
  g.set(Cursor{{2, 6, 0}}, kEnemy);
  CHECK(nearest_enemy_distance(g) == 3);
  g.set(Cursor{{2, 3, 0}}, kEnemy);
  CHECK(nearest_enemy_distance(g) == 1);

  CellGrid none(level_extents(), kTileCount);
  none.set(Cursor{{0, 0, 0}}, kPlayer);
  CHECK(try_nearest_enemy_distance(none) == 0);
  CHECK_FALSE(try_nearest_enemy_distance(CellGrid(level_extents(), kTileCount)).has_value());
  CHECK(nearest_enemy_distance(CellGrid(level_extents(), kTileCount)) == 0);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto r = random_level(rng);
    CHECK(nearest_enemy_distance(r) == oracle::nearest_enemy(r));
  }
}

TEST_CASE("solution length") {
  CellGrid g(level_extents(), kTileCount);
  g.set(Cursor{{1, 1, 0}}, kPlayer);
  g.set(Cursor{{4, 1, 0}}, kKey);
  g.set(Cursor{{4, 4, 0}}, kDoor);
  CHECK(solution_length(g) == 6);
  CHECK(try_solution_length(g) == 6);
  g.set(Cursor{{6, 6, 0}}, kKey);
  CHECK_FALSE(try_solution_length(g).has_value());
  CHECK(solution_length(g) == 0);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto r = random_level(rng);
    CHECK(solution_length(r) == oracle::solution_length(r));
  }
}

TEST_CASE("playability") {
  const auto room = level_from(kOpenRoom);
  CHECK(is_playable(room));

  auto walled = room;
  for (int y = 0; y < 7; ++y) walled.set(Cursor{{4, y, 0}}, kSolid);
  CHECK_FALSE(is_playable(walled));

  auto two_keys = room;
  two_keys.set(Cursor{{7, 1, 0}}, kKey);
  CHECK_FALSE(is_playable(two_keys));

  auto no_door = room;
  no_door.set(Cursor{{9, 5, 0}}, kEmpty);
  CHECK_FALSE(is_playable(no_door));

  // Player and key touch only diagonally, which is not 4-connected.
  CellGrid diagonal(level_extents(), kTileCount, Category{kSolid});
  diagonal.set(Cursor{{1, 1, 0}}, kPlayer);
  diagonal.set(Cursor{{2, 2, 0}}, kKey);
  diagonal.set(Cursor{{3, 2, 0}}, kDoor);
  CHECK_FALSE(is_playable(diagonal));
  diagonal.set(Cursor{{2, 1, 0}}, kEmpty);
  CHECK(is_playable(diagonal));

  std::mt19937_64 rng(4);
  int playable = 0;
  for (int i = 0; i < 3000; ++i) {
    const auto r = random_level(rng);
    const bool expect = oracle::playable(r);
    playable += expect;
    CHECK(is_playable(r) == expect);
  }
  CHECK(playable > 0);
}

TEST_CASE("metrics table") {
  const auto m = metrics();
  REQUIRE(m.size() == 3);
  CHECK(m[0].min == 0);
  CHECK(m[0].max == 5);
  CHECK(m[0].threshold == 4);
  CHECK(m[1].max == 12);
  CHECK(m[1].threshold == 5);
  CHECK(m[2].min == 10);
  CHECK(m[2].max == 31);
  CHECK(m[2].threshold == 6);
}

TEST_CASE("goal set generation") {
  std::mt19937_64 rng(5);
  CHECK(generate_goal_set(1, rng).size() == 1);
  const auto goals = generate_goal_set(50, rng);
  REQUIRE(goals.size() == 50);
  std::set<int> enemy_counts;
  for (const auto& g : goals) {
    CHECK(oracle::playable(g));
    const int e = count_enemies(g), n = nearest_enemy_distance(g), s = solution_length(g);
    CHECK(e >= 0);
    CHECK(e <= 5);
    CHECK(n <= 12);
    CHECK(s >= 10);
    CHECK(s <= 31);
    enemy_counts.insert(e);
  }
  CHECK(enemy_counts.size() >= 4);
  std::mt19937_64 a(9), b(9);
  CHECK(generate_goal_set(5, a) == generate_goal_set(5, b));
  GoalConstraints impossible;
  impossible.min_solution = 40;
  impossible.max_solution = 40;
  impossible.max_attempts = 50;
  CHECK_THROWS_AS(generate_goal_set(1, rng, impossible), Error);
}

TEST_CASE("png rendering") {
  const auto dir = std::filesystem::temp_directory_path() / "pod_test_zelda";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(6);
  const auto goals = generate_goal_set(2, rng);
  const auto a = (dir / "a.png").string(), b = (dir / "b.png").string(), c = (dir / "c.png").string();
  render_png(goals[0], a);
  render_png(goals[0], b);
  render_png(goals[1], c);
  const auto bytes = read_file_bytes(a);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes[1] == 'P');
  CHECK(bytes[2] == 'N');
  CHECK(bytes[3] == 'G');
  CHECK(bytes == read_file_bytes(b));
  CHECK(bytes != read_file_bytes(c));
}
