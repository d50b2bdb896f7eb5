#include "pod/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "pod/random.hpp"

namespace pod {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGrid: return "invalid-grid";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Generation: return "generation";
  }
  return "unknown";
}

TileAlphabet::TileAlphabet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2 || names_.size() > static_cast<std::size_t>(kMaxCategories)) {
    fail(ErrorKind::Config, "alphabet needs between 2 and 256 categories");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) fail(ErrorKind::Config, "duplicate alphabet entry '" + n + "'");
  }
}

int TileAlphabet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  fail(ErrorKind::Config, "unknown category '" + std::string(name) + "'");
}

namespace {

void check_extents(const Extents& e) {
  if (e.rank != 2 && e.rank != 3) fail(ErrorKind::Shape, "grid rank must be 2 or 3");
  for (int a = 0; a < 3; ++a) {
    if (e.size[a] < 1) fail(ErrorKind::Shape, "grid extents must be positive");
  }
  if (e.rank == 2 && e.size[2] != 1) fail(ErrorKind::Shape, "2D grid with depth != 1");
}

}  // namespace

CellGrid::CellGrid(Extents extents, int categories, Category fill)
    : extents_(extents), categories_(categories) {
  check_extents(extents_);
  if (categories < 1 || categories > kMaxCategories) fail(ErrorKind::InvalidGrid, "bad category count");
  if (fill >= categories) fail(ErrorKind::InvalidGrid, "fill category out of range");
  cells_.assign(extents_.cell_count(), fill);
}

CellGrid::CellGrid(Extents extents, int categories, std::vector<Category> cells)
    : extents_(extents), categories_(categories), cells_(std::move(cells)) {
  check_extents(extents_);
  if (categories < 1 || categories > kMaxCategories) fail(ErrorKind::InvalidGrid, "bad category count");
  if (cells_.size() != extents_.cell_count()) {
    fail(ErrorKind::Shape, "cell count does not match extents");
  }
  for (Category c : cells_) {
    if (c >= categories_) {
      fail(ErrorKind::InvalidGrid, "cell index " + std::to_string(c) + " outside alphabet of size " +
                                       std::to_string(categories_));
    }
  }
}

bool CellGrid::in_bounds(const Cursor& c) const noexcept {
  for (int a = 0; a < 3; ++a) {
    if (c.coords[a] < 0 || c.coords[a] >= extents_.size[a]) return false;
  }
  return true;
}

std::size_t CellGrid::index_of(const Cursor& c) const {
  if (!in_bounds(c)) fail(ErrorKind::Shape, "cursor out of bounds");
  return (static_cast<std::size_t>(c.z()) * extents_.y() + c.y()) * extents_.x() + c.x();
}

Cursor CellGrid::cursor_of(std::size_t index) const {
  if (index >= cells_.size()) fail(ErrorKind::Shape, "cell index out of bounds");
  const auto w = static_cast<std::size_t>(extents_.x());
  const auto h = static_cast<std::size_t>(extents_.y());
  return Cursor{{static_cast<int>(index % w), static_cast<int>((index / w) % h),
                 static_cast<int>(index / (w * h))}};
}

CellGrid CellGrid::with_cell(const Cursor& c, Category value) const {
  CellGrid copy = *this;
  copy.set(c, value);
  return copy;
}

void CellGrid::set(const Cursor& c, Category value) { set(index_of(c), value); }

void CellGrid::set(std::size_t index, Category value) {
  if (value >= categories_) fail(ErrorKind::InvalidGrid, "category out of range");
  cells_.at(index) = value;
}

double TileHistogram::frequency(int category) const {
  if (total == 0) fail(ErrorKind::DegenerateInput, "empty histogram");
  return static_cast<double>(counts.at(static_cast<std::size_t>(category))) / static_cast<double>(total);
}

std::vector<float> one_hot_encode(const CellGrid& grid, const TileAlphabet& alphabet) {
  const auto k = static_cast<std::size_t>(alphabet.size());
  std::vector<float> out(grid.size() * k, 0.0f);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Category c = grid[i];
    if (c >= k) fail(ErrorKind::InvalidGrid, "cell category outside alphabet");
    out[i * k + c] = 1.0f;
  }
  return out;
}

HammingDistance hamming_distance(const CellGrid& a, const CellGrid& b) {
  if (a.extents() != b.extents()) fail(ErrorKind::Shape, "hamming distance on mismatched extents");
  HammingDistance d;
  auto ca = a.cells();
  auto cb = b.cells();
  for (std::size_t i = 0; i < ca.size(); ++i) d.count += ca[i] != cb[i] ? 1 : 0;
  d.fraction = ca.empty() ? 0.0 : static_cast<double>(d.count) / static_cast<double>(ca.size());
  return d;
}

TileHistogram tile_histogram(const CellGrid& grid) {
  TileHistogram h;
  h.counts.assign(static_cast<std::size_t>(grid.categories()), 0);
  for (Category c : grid.cells()) ++h.counts[c];
  h.total = grid.size();
  return h;
}

TileHistogram merge_histograms(std::span<const CellGrid> grids) {
  TileHistogram h;
  for (const auto& g : grids) {
    auto one = tile_histogram(g);
    if (h.counts.empty()) h.counts.assign(one.counts.size(), 0);
    if (one.counts.size() != h.counts.size()) fail(ErrorKind::Shape, "mixed alphabets");
    for (std::size_t k = 0; k < one.counts.size(); ++k) h.counts[k] += one.counts[k];
    h.total += one.total;
  }
  return h;
}

TileHistogram uniform_histogram(int categories) {
  TileHistogram h;
  h.counts.assign(static_cast<std::size_t>(categories), 1);
  h.total = static_cast<std::uint64_t>(categories);
  return h;
}

double histogram_l1(const TileHistogram& a, const TileHistogram& b) {
  if (a.counts.size() != b.counts.size()) fail(ErrorKind::Shape, "histograms over different alphabets");
  if (a.total == 0 || b.total == 0) fail(ErrorKind::DegenerateInput, "zero-total histogram");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.counts.size(); ++k) {
    sum += std::abs(a.frequency(static_cast<int>(k)) - b.frequency(static_cast<int>(k)));
  }
  return sum;
}

CellGrid sample_iid_grid(const TileHistogram& dist, const Extents& extents, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_iid_grid(dist, extents, rng);
}

CellGrid sample_iid_grid(const TileHistogram& dist, const Extents& extents, std::mt19937_64& rng) {
  if (dist.total == 0) fail(ErrorKind::DegenerateInput, "sampling from an empty distribution");
  CategoricalSampler sampler(dist.counts);
  std::vector<Category> cells(extents.cell_count());
  for (auto& c : cells) c = static_cast<Category>(sampler(rng));
  return CellGrid(extents, static_cast<int>(dist.counts.size()), std::move(cells));
}

std::uint64_t grid_digest(const CellGrid& grid) {
  Fnv1a h;
  h.add(static_cast<std::uint32_t>(grid.extents().rank));
  for (int a = 0; a < 3; ++a) h.add(static_cast<std::uint32_t>(grid.extents().size[a]));
  h.add_bytes(grid.cells().data(), grid.size());
  return h.value();
}

CharTable::CharTable(std::string symbols) : symbols_(std::move(symbols)) {
  std::unordered_set<char> seen;
  for (char ch : symbols_) {
    if (ch == '\n' || ch == ' ' || !seen.insert(ch).second) {
      fail(ErrorKind::Config, "character table symbols must be unique and printable");
    }
  }
}

char CharTable::symbol(Category c) const {
  if (c >= symbols_.size()) fail(ErrorKind::InvalidGrid, "no symbol for category " + std::to_string(c));
  return symbols_[c];
}

Category CharTable::category(char symbol) const {
  auto pos = symbols_.find(symbol);
  if (pos == std::string::npos) {
    fail(ErrorKind::InvalidGrid, std::string("unknown grid symbol '") + symbol + "'");
  }
  return static_cast<Category>(pos);
}

std::string format_grid(const CellGrid& grid, const CharTable& table) {
  const auto& e = grid.extents();
  std::ostringstream out;
  out << "dims: " << e.x() << ' ' << e.y();
  if (e.rank == 3) out << ' ' << e.z();
  out << '\n';
  for (int z = 0; z < e.z(); ++z) {
    if (z > 0) out << '\n';
    for (int y = 0; y < e.y(); ++y) {
      for (int x = 0; x < e.x(); ++x) out << table.symbol(grid.at(x, y, z));
      out << '\n';
    }
  }
  return out.str();
}

CellGrid parse_grid(std::string_view text, const CharTable& table) {
  std::vector<std::string> lines;
  {
    std::string line;
    for (char ch : text) {
      if (ch == '\r') continue;
      if (ch == '\n') {
        lines.push_back(line);
        line.clear();
      } else {
        line.push_back(ch);
      }
    }
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty() || lines[0].rfind("dims:", 0) != 0) {
    fail(ErrorKind::InvalidGrid, "grid text must start with 'dims:'");
  }
  std::istringstream header(lines[0].substr(5));
  std::vector<int> dims;
  int v = 0;
  while (header >> v) dims.push_back(v);
  if (dims.size() != 2 && dims.size() != 3) fail(ErrorKind::InvalidGrid, "dims line needs 2 or 3 extents");
  Extents e = dims.size() == 2 ? Extents::plane(dims[0], dims[1])
                               : Extents::volume(dims[0], dims[1], dims[2]);
  for (int d : dims) {
    if (d < 1) fail(ErrorKind::InvalidGrid, "non-positive extent in dims line");
  }

  std::vector<Category> cells;
  cells.reserve(e.cell_count());
  std::size_t row = 1;
  for (int z = 0; z < e.z(); ++z) {
    if (z > 0) {
      if (row >= lines.size() || !lines[row].empty()) fail(ErrorKind::InvalidGrid, "missing slab separator");
      ++row;
    }
    for (int y = 0; y < e.y(); ++y, ++row) {
      if (row >= lines.size()) fail(ErrorKind::InvalidGrid, "grid text truncated");
      const auto& l = lines[row];
      if (static_cast<int>(l.size()) != e.x()) fail(ErrorKind::InvalidGrid, "row width does not match dims");
      for (char ch : l) cells.push_back(table.category(ch));
    }
  }
  for (; row < lines.size(); ++row) {
    if (!lines[row].empty()) fail(ErrorKind::InvalidGrid, "trailing content after grid");
  }
  return CellGrid(e, table.size(), std::move(cells));
}

CellGrid read_grid_file(const std::string& path, const CharTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open grid file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str(), table);
}

void write_grid_file(const std::string& path, const CellGrid& grid, const CharTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write grid file " + path);
  out << format_grid(grid, table);
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

}  // namespace pod
