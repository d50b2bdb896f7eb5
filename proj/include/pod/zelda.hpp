#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pod/destruction.hpp"
#include "pod/grid.hpp"

namespace pod::zelda {

enum Tile : Category {
  kEmpty = 0,
  kSolid = 1,
  kPlayer = 2,
  kKey = 3,
  kDoor = 4,
  kEnemy = 5,
};

inline constexpr int kTileCount = 6;
inline constexpr int kWidth = 11;  // interior; the solid frame is implied by padding
inline constexpr int kHeight = 7;
inline constexpr int kObservationSize = 19;
inline constexpr int kGenerationSteps = 105;

const TileAlphabet& alphabet();
const CharTable& char_table();  // . # @ K D E

inline Extents level_extents() { return Extents::plane(kWidth, kHeight); }

int count_tiles(const CellGrid& level, Tile tile);
int count_enemies(const CellGrid& level);

/// Undefined (nullopt) unless the level has exactly one player. With a unique
/// player and no enemies the distance is 0.
std::optional<int> try_nearest_enemy_distance(const CellGrid& level);
/// Undefined unless exactly one player, key and door exist.
std::optional<int> try_solution_length(const CellGrid& level);

/// Sentinel forms used as control metrics: undefined evaluates to 0.
int nearest_enemy_distance(const CellGrid& level);
int solution_length(const CellGrid& level);

/// Exactly one player, key and door, and every non-solid cell in one
/// 4-connected component.
bool is_playable(const CellGrid& level);

/// Enemies [0,5] threshold 4; nearest enemy [0,12] threshold 5; solution
/// length [10,31] threshold 6.
std::vector<MetricSpec> metrics();

struct GoalConstraints {
  int min_enemies = 0;
  int max_enemies = 5;
  int min_nearest = 0;
  int max_nearest = 12;
  int min_solution = 10;
  int max_solution = 31;
  int max_wall_segments = 3;
  int max_attempts = 20000;
};

/// Constructive placement plus rejection. Targets for each level are drawn
/// from stratified sequences so the set covers the ranges evenly.
std::vector<CellGrid> generate_goal_set(int n, std::mt19937_64& rng, const GoalConstraints& constraints = {});

std::string render_ascii(const CellGrid& level);
/// 16-px tiles with a fixed palette; deterministic bytes.
void render_png(const CellGrid& level, const std::string& path);

}  // namespace pod::zelda
