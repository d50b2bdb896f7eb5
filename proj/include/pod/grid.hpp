#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pod/error.hpp"

namespace pod {

using Category = std::uint8_t;
inline constexpr int kMaxCategories = 256;

/// Ordered set of tile/block identifiers. Index 0 is always the empty/air
/// category.
class TileAlphabet {
 public:
  TileAlphabet() = default;
  explicit TileAlphabet(std::vector<std::string> names);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  int index_of(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

/// Extents of a 2D (x, y) or 3D (x, y, z) grid. Unused axes hold 1.
struct Extents {
  int rank = 2;
  std::array<int, 3> size{1, 1, 1};

  static Extents plane(int width, int height) { return {2, {width, height, 1}}; }
  static Extents volume(int width, int height, int depth) { return {3, {width, height, depth}}; }

  int x() const noexcept { return size[0]; }
  int y() const noexcept { return size[1]; }
  int z() const noexcept { return size[2]; }
  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(size[0]) * static_cast<std::size_t>(size[1]) *
           static_cast<std::size_t>(size[2]);
  }

  bool operator==(const Extents&) const = default;
};

struct Cursor {
  std::array<int, 3> coords{0, 0, 0};

  int x() const noexcept { return coords[0]; }
  int y() const noexcept { return coords[1]; }
  int z() const noexcept { return coords[2]; }

  bool operator==(const Cursor&) const = default;
};

/// Dense row-major categorical grid. Cell (x, y, z) lives at
/// (z * Y + y) * X + x.
class CellGrid {
 public:
  CellGrid() = default;
  CellGrid(Extents extents, int categories, Category fill = 0);
  CellGrid(Extents extents, int categories, std::vector<Category> cells);

  const Extents& extents() const noexcept { return extents_; }
  int categories() const noexcept { return categories_; }
  std::size_t size() const noexcept { return cells_.size(); }
  std::span<const Category> cells() const noexcept { return cells_; }

  bool in_bounds(const Cursor& c) const noexcept;
  std::size_t index_of(const Cursor& c) const;
  Cursor cursor_of(std::size_t index) const;

  Category at(const Cursor& c) const { return cells_[index_of(c)]; }
  Category at(int x, int y, int z = 0) const { return at(Cursor{{x, y, z}}); }
  Category operator[](std::size_t index) const { return cells_[index]; }

  /// Copy-and-edit: the only way to change a cell.
  CellGrid with_cell(const Cursor& c, Category value) const;
  void set(const Cursor& c, Category value);
  void set(std::size_t index, Category value);

  bool operator==(const CellGrid&) const = default;

 private:
  Extents extents_{};
  int categories_ = 0;
  std::vector<Category> cells_;
};

struct TileHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  double frequency(int category) const;
};

struct HammingDistance {
  std::size_t count = 0;
  double fraction = 0.0;
};

/// Returns a (cells x categories) tensor laid out cell-major: entry
/// [cell * categories + k] is 1 when the cell holds category k.
std::vector<float> one_hot_encode(const CellGrid& grid, const TileAlphabet& alphabet);

HammingDistance hamming_distance(const CellGrid& a, const CellGrid& b);

TileHistogram tile_histogram(const CellGrid& grid);
TileHistogram merge_histograms(std::span<const CellGrid> grids);
TileHistogram uniform_histogram(int categories);

double histogram_l1(const TileHistogram& a, const TileHistogram& b);

CellGrid sample_iid_grid(const TileHistogram& dist, const Extents& extents, std::uint64_t seed);
CellGrid sample_iid_grid(const TileHistogram& dist, const Extents& extents, std::mt19937_64& rng);

/// FNV-1a over extents and cells; used for goal-set provenance.
std::uint64_t grid_digest(const CellGrid& grid);

/// Maps categories to single printable characters for the plain-text format.
class CharTable {
 public:
  CharTable() = default;
  explicit CharTable(std::string symbols);

  char symbol(Category c) const;
  Category category(char symbol) const;
  int size() const noexcept { return static_cast<int>(symbols_.size()); }

 private:
  std::string symbols_;
};

/// Text format: a `dims: W H [D]` line, then H rows of W characters per slab,
/// slabs separated by one blank line.
std::string format_grid(const CellGrid& grid, const CharTable& table);
CellGrid parse_grid(std::string_view text, const CharTable& table);

CellGrid read_grid_file(const std::string& path, const CharTable& table);
void write_grid_file(const std::string& path, const CellGrid& grid, const CharTable& table);

}  // namespace pod
