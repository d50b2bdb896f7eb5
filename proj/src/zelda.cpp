#include "pod/zelda.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>

#include "pod/png.hpp"
#include "pod/random.hpp"

namespace pod::zelda {

const TileAlphabet& alphabet() {
  static const TileAlphabet a({"empty", "solid", "player", "key", "door", "enemy"});
  return a;
}

const CharTable& char_table() {
  static const CharTable t(".#@KDE");
  return t;
}

int count_tiles(const CellGrid& level, Tile tile) {
  return static_cast<int>(std::count(level.cells().begin(), level.cells().end(), static_cast<Category>(tile)));
}

int count_enemies(const CellGrid& level) { return count_tiles(level, kEnemy); }

namespace {

struct Pos {
  int x, y;
};

int manhattan(Pos a, Pos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

std::optional<Pos> unique_tile(const CellGrid& level, Tile tile) {
  std::optional<Pos> found;
  const int w = level.extents().x();
  for (std::size_t i = 0; i < level.size(); ++i) {
    if (level[i] != tile) continue;
    if (found) return std::nullopt;
    found = Pos{static_cast<int>(i) % w, static_cast<int>(i) / w};
  }
  return found;
}

}  // namespace

std::optional<int> try_nearest_enemy_distance(const CellGrid& level) {
  const auto player = unique_tile(level, kPlayer);
  if (!player) return std::nullopt;
  const int w = level.extents().x();
  int best = -1;
  for (std::size_t i = 0; i < level.size(); ++i) {
    if (level[i] != kEnemy) continue;
    const int d = manhattan(*player, Pos{static_cast<int>(i) % w, static_cast<int>(i) / w});
    if (best < 0 || d < best) best = d;
  }
  return best < 0 ? 0 : best;
}

std::optional<int> try_solution_length(const CellGrid& level) {
  const auto player = unique_tile(level, kPlayer);
  const auto key = unique_tile(level, kKey);
  const auto door = unique_tile(level, kDoor);
  if (!player || !key || !door) return std::nullopt;
  return manhattan(*player, *key) + manhattan(*key, *door);
}

int nearest_enemy_distance(const CellGrid& level) { return try_nearest_enemy_distance(level).value_or(0); }

int solution_length(const CellGrid& level) { return try_solution_length(level).value_or(0); }

bool is_playable(const CellGrid& level) {
  if (count_tiles(level, kPlayer) != 1 || count_tiles(level, kKey) != 1 || count_tiles(level, kDoor) != 1) {
    return false;
  }
  const int w = level.extents().x();
  const int h = level.extents().y();
  std::vector<std::uint8_t> seen(level.size(), 0);
  std::vector<int> stack;
  int open = 0;
  int start = -1;
  for (std::size_t i = 0; i < level.size(); ++i) {
    if (level[i] != kSolid) {
      ++open;
      if (start < 0) start = static_cast<int>(i);
    }
  }
  stack.push_back(start);
  seen[static_cast<std::size_t>(start)] = 1;
  int reached = 0;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    ++reached;
    const int x = i % w, y = i / w;
    const std::array<std::array<int, 2>, 4> nbrs{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
    for (const auto& n : nbrs) {
      if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
      const auto j = static_cast<std::size_t>(n[1] * w + n[0]);
      if (seen[j] || level[j] == kSolid) continue;
      seen[j] = 1;
      stack.push_back(static_cast<int>(j));
    }
  }
  return reached == open;
}

std::vector<MetricSpec> metrics() {
  return {
      {"enemies", count_enemies, 0, 5, 4},
      {"nearest_enemy", nearest_enemy_distance, 0, 12, 5},
      {"solution_length", solution_length, 10, 31, 6},
  };
}

namespace {

// n values spread evenly over [lo, hi], then shuffled.
std::vector<int> stratified(int n, int lo, int hi, std::mt19937_64& rng) {
  std::vector<int> v(static_cast<std::size_t>(n));
  const int span = hi - lo + 1;
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + static_cast<int>((static_cast<long long>(i) * span) / n);
  shuffle_in_place(v, rng);
  return v;
}

void place_walls(CellGrid& level, int segments, std::mt19937_64& rng) {
  const int w = level.extents().x(), h = level.extents().y();
  for (int s = 0; s < segments; ++s) {
    const bool horizontal = uniform_index(rng, 2) == 0;
    const int len = 2 + static_cast<int>(uniform_index(rng, 3));
    const int x0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(w)));
    const int y0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(h)));
    for (int k = 0; k < len; ++k) {
      const int x = horizontal ? x0 + k : x0;
      const int y = horizontal ? y0 : y0 + k;
      if (x < w && y < h) level.set(static_cast<std::size_t>(y * w + x), kSolid);
    }
  }
}

// Walls alone must not split the room. Reuses the playability flood fill by
// planting one of each entity on open cells.
bool open_area_connected(const CellGrid& level) {
  CellGrid probe = level;
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (probe[i] == kEmpty) open.push_back(i);
  }
  if (open.size() < 3) return false;
  probe.set(open[0], kPlayer);
  probe.set(open[1], kKey);
  probe.set(open[2], kDoor);
  return is_playable(probe);
}

}  // namespace

std::vector<CellGrid> generate_goal_set(int n, std::mt19937_64& rng, const GoalConstraints& c) {
  if (n < 1) fail(ErrorKind::Config, "goal set size must be at least 1");
  const auto enemy_targets = stratified(n, c.min_enemies, c.max_enemies, rng);
  const auto solution_targets = stratified(n, c.min_solution, c.max_solution, rng);
  const auto nearest_targets = stratified(n, std::max(1, c.min_nearest), c.max_nearest, rng);
  const int w = kWidth, h = kHeight;

  std::vector<CellGrid> goals;
  goals.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int enemies = enemy_targets[static_cast<std::size_t>(i)];
    const int solution = solution_targets[static_cast<std::size_t>(i)];
    const int nearest = enemies > 0 ? nearest_targets[static_cast<std::size_t>(i)] : 0;
    bool placed = false;
    for (int attempt = 0; attempt < c.max_attempts && !placed; ++attempt) {
      CellGrid level(level_extents(), kTileCount, kEmpty);
      place_walls(level, static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(c.max_wall_segments) + 1)), rng);
      if (!open_area_connected(level)) continue;

      std::vector<Pos> free;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (level.at(x, y) == kEmpty) free.push_back({x, y});
        }
      }
      const Pos player = free[uniform_index(rng, free.size())];
      const Pos key = free[uniform_index(rng, free.size())];
      const int remaining = solution - manhattan(player, key);
      if (manhattan(player, key) == 0 || remaining < 1) continue;
      std::vector<Pos> doors;
      for (const auto& p : free) {
        if (manhattan(p, key) == remaining && manhattan(p, player) > 0) doors.push_back(p);
      }
      if (doors.empty()) continue;
      const Pos door = doors[uniform_index(rng, doors.size())];
      level.set(static_cast<std::size_t>(player.y * w + player.x), kPlayer);
      level.set(static_cast<std::size_t>(key.y * w + key.x), kKey);
      level.set(static_cast<std::size_t>(door.y * w + door.x), kDoor);

      if (enemies > 0) {
        std::vector<Pos> exact, farther;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            if (level.at(x, y) != kEmpty) continue;
            const int d = manhattan(player, {x, y});
            if (d == nearest) exact.push_back({x, y});
            if (d >= nearest) farther.push_back({x, y});
          }
        }
        if (exact.empty() || static_cast<int>(farther.size()) < enemies) continue;
        const Pos first = exact[uniform_index(rng, exact.size())];
        level.set(static_cast<std::size_t>(first.y * w + first.x), kEnemy);
        shuffle_in_place(farther, rng);
        int placed_enemies = 1;
        for (const auto& p : farther) {
          if (placed_enemies == enemies) break;
          if (level.at(p.x, p.y) != kEmpty) continue;
          level.set(static_cast<std::size_t>(p.y * w + p.x), kEnemy);
          ++placed_enemies;
        }
        if (placed_enemies != enemies) continue;
      }
      if (!is_playable(level) || count_enemies(level) != enemies || nearest_enemy_distance(level) != nearest ||
          solution_length(level) != solution) {
        continue;
      }
      goals.push_back(std::move(level));
      placed = true;
    }
    if (!placed) {
      fail(ErrorKind::Generation, "could not place a goal level with enemies=" + std::to_string(enemies) +
                                      " nearest=" + std::to_string(nearest) + " solution=" + std::to_string(solution));
    }
  }
  return goals;
}

std::string render_ascii(const CellGrid& level) { return format_grid(level, char_table()); }

void render_png(const CellGrid& level, const std::string& path) {
  static constexpr int kTile = 16;
  static constexpr std::array<Rgb, kTileCount> kPalette{{
      {222, 206, 160},  // empty
      {86, 68, 52},     // solid
      {40, 120, 220},   // player
      {240, 200, 30},   // key
      {150, 60, 160},   // door
      {200, 40, 40},    // enemy
  }};
  // The solid frame around the interior is drawn as part of the image.
  const int gw = level.extents().x() + 2, gh = level.extents().y() + 2;
  const int pw = gw * kTile, ph = gh * kTile;
  std::vector<Rgb> px(static_cast<std::size_t>(pw) * ph);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const bool frame = gx == 0 || gy == 0 || gx == gw - 1 || gy == gh - 1;
      const Category c = frame ? static_cast<Category>(kSolid) : level.at(gx - 1, gy - 1);
      const Rgb base = kPalette.at(c);
      for (int y = 0; y < kTile; ++y) {
        for (int x = 0; x < kTile; ++x) {
          Rgb p = base;
          // Entity tiles get a darker one-pixel border so adjacent entities stay distinct.
          const bool edge = x == 0 || y == 0 || x == kTile - 1 || y == kTile - 1;
          if (edge && c >= kPlayer) p = {static_cast<std::uint8_t>(p.r / 2), static_cast<std::uint8_t>(p.g / 2),
                                         static_cast<std::uint8_t>(p.b / 2)};
          px[static_cast<std::size_t>(gy * kTile + y) * pw + gx * kTile + x] = p;
        }
      }
    }
  }
  write_png(path, pw, ph, px);
}

}  // namespace pod::zelda
