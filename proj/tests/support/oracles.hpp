#pragma once

// Independent reference implementations used as test oracles. They work on
// raw cell vectors and deliberately avoid the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <stack>
#include <string>
#include <vector>

#include "pod/grid.hpp"

namespace oracle {

// Zelda tile codes restated here so the oracle does not depend on the enum.
inline constexpr int kSolid = 1, kPlayer = 2, kKey = 3, kDoor = 4, kEnemy = 5;

struct Pos {
  int x, y;
};

inline std::vector<Pos> positions(const pod::CellGrid& g, int tile) {
  std::vector<Pos> out;
  const int w = g.extents().x(), h = g.extents().y();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (g.cells()[static_cast<std::size_t>(y * w + x)] == tile) out.push_back({x, y});
  return out;
}

// Depth-first fill with an explicit stack, counting components by seeding
// from every unvisited open cell.
inline bool playable(const pod::CellGrid& g) {
  if (positions(g, kPlayer).size() != 1 || positions(g, kKey).size() != 1 || positions(g, kDoor).size() != 1)
    return false;
  const int w = g.extents().x(), h = g.extents().y();
  std::vector<int> label(static_cast<std::size_t>(w * h), -1);
  int components = 0;
  for (int s = 0; s < w * h; ++s) {
    if (g.cells()[static_cast<std::size_t>(s)] == kSolid || label[static_cast<std::size_t>(s)] >= 0) continue;
    std::stack<int> todo;
    todo.push(s);
    label[static_cast<std::size_t>(s)] = components;
    while (!todo.empty()) {
      const int c = todo.top();
      todo.pop();
      const int cx = c % w, cy = c / w;
      const int nx[4] = {cx - 1, cx + 1, cx, cx};
      const int ny[4] = {cy, cy, cy - 1, cy + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const int n = ny[k] * w + nx[k];
        if (g.cells()[static_cast<std::size_t>(n)] == kSolid || label[static_cast<std::size_t>(n)] >= 0) continue;
        label[static_cast<std::size_t>(n)] = components;
        todo.push(n);
      }
    }
    ++components;
  }
  return components == 1;
}

inline int manhattan(Pos a, Pos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

inline int nearest_enemy(const pod::CellGrid& g) {
  const auto players = positions(g, kPlayer);
  if (players.size() != 1) return 0;
  int best = -1;
  for (const auto& e : positions(g, kEnemy)) {
    const int d = manhattan(players[0], e);
    if (best < 0 || d < best) best = d;
  }
  return best < 0 ? 0 : best;
}

inline int solution_length(const pod::CellGrid& g) {
  const auto p = positions(g, kPlayer), k = positions(g, kKey), d = positions(g, kDoor);
  if (p.size() != 1 || k.size() != 1 || d.size() != 1) return 0;
  return manhattan(p[0], k[0]) + manhattan(k[0], d[0]);
}

inline double hamming_fraction(const pod::CellGrid& a, const pod::CellGrid& b) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a.cells()[i] != b.cells()[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

inline std::vector<std::size_t> inter_survivors(const std::vector<pod::CellGrid>& items,
                                                const std::vector<pod::CellGrid>& goals, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool dup = false;
    for (const auto& goal : goals) dup = dup || hamming_fraction(items[i], goal) < threshold;
    if (!dup) out.push_back(i);
  }
  return out;
}

// Pairwise matrix first, then keep-first over it.
inline std::vector<std::size_t> intra_survivors(const std::vector<pod::CellGrid>& items,
                                                const std::vector<std::size_t>& candidates, double threshold) {
  const std::size_t n = candidates.size();
  std::vector<std::vector<bool>> close(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      close[i][j] = hamming_fraction(items[candidates[i]], items[candidates[j]]) < threshold;
  std::vector<bool> kept(n, false);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    bool dup = false;
    for (std::size_t j = 0; j < i; ++j) dup = dup || (kept[j] && close[i][j]);
    if (!dup) {
      kept[i] = true;
      out.push_back(candidates[i]);
    }
  }
  return out;
}

// Rank by counting: rank = 1 + #smaller + (#equal - 1) / 2, then Pearson on ranks.
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double less = 0, equal = 0;
      for (std::size_t j = 0; j < n; ++j) {
        less += v[j] < v[i];
        equal += v[j] == v[i];
      }
      r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Category seen at window offset (wx, wy, wz) of a cursor-centred window,
// built by copying the grid into an explicitly padded canvas.
inline int padded_window_cell(const pod::CellGrid& g, const pod::Cursor& cursor, const pod::Extents& window, int pad,
                              int wx, int wy, int wz) {
  const auto& e = g.extents();
  const int mx = window.x() / 2, my = window.y() / 2, mz = window.z() / 2;
  const int cw = e.x() + 2 * mx, ch = e.y() + 2 * my, cd = e.z() + 2 * mz;
  std::vector<int> canvas(static_cast<std::size_t>(cw * ch * cd), pad);
  for (int z = 0; z < e.z(); ++z)
    for (int y = 0; y < e.y(); ++y)
      for (int x = 0; x < e.x(); ++x)
        canvas[static_cast<std::size_t>(((z + mz) * ch + (y + my)) * cw + (x + mx))] = g.at(x, y, z);
  const int px = cursor.x() + wx + mx, py = cursor.y() + wy + my, pz = cursor.z() + wz + mz;
  return canvas[static_cast<std::size_t>((pz * ch + py) * cw + px)];
}

struct ScalarAdam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  int t = 0;
  double step(double param, double grad) {
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every regular file under `dir`, relative path plus contents, in path order.
inline std::vector<std::pair<std::string, std::string>> tree_contents(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    out.emplace_back(std::filesystem::relative(entry.path(), dir).string(), slurp(entry.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
