#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "pod/destruction.hpp"
#include "pod/grid.hpp"

namespace pod::lego {

inline constexpr int kSize = 6;
inline constexpr int kBlockTypes = 37;  // includes air at index 0
inline constexpr int kGenerationSteps = 54;
inline constexpr int kSuccessTolerance = 6;
inline constexpr int kMinTargetBlocks = 15;
inline constexpr int kMaxTargetBlocks = 27;

// Axes: x along the car, y up (0 = ground), z across the car.
inline Extents structure_extents() { return Extents::volume(kSize, kSize, kSize); }

const TileAlphabet& alphabet();
const CharTable& char_table();

/// Tires and hubcaps.
bool is_wheel_class(Category c);
const std::vector<Category>& wheel_categories();

int block_count(const CellGrid& s);
int wheel_count(const CellGrid& s);

enum class Verdict { Success, Partial, Failure };
const char* to_string(Verdict v);

struct CarVerdict {
  int wheels = 0;
  int blocks = 0;
  Verdict verdict = Verdict::Failure;
};

/// Success: at least four wheel-class voxels and |blocks - target| <= 6.
/// Partial: the wheels without the block-count condition.
CarVerdict classify_success(const CellGrid& s, int target_blocks);

struct Similarity {
  double best = 0.0;  // 1 - Hamming fraction
  std::size_t goal_index = 0;
};

Similarity similarity_to_goals(const CellGrid& s, std::span<const CellGrid> goals);

/// Block count in [15, 27], threshold 6.
std::vector<MetricSpec> metrics();

/// Template cars: a chassis slab on four wheel-class voxels plus cabin
/// blocks, with block counts stratified over 15..27.
std::vector<CellGrid> build_goal_cars(int n, std::mt19937_64& rng);

struct PartEntry {
  std::string part;
  int color = 0;
};
/// Fixed category -> LDraw part table (air has an empty part).
const std::vector<PartEntry>& part_table();

/// `{"dims":[6,6,6],"blocks":[{"x":..,"y":..,"z":..,"type":..}]}` sorted by (z, y, x).
std::string to_voxel_json(const CellGrid& s);
CellGrid from_voxel_json(const std::string& text);
/// One type-1 line per non-air voxel.
std::string to_ldraw(const CellGrid& s);

enum class ExportFormat { VoxelJson, LdrawText };
ExportFormat parse_export_format(const std::string& name);
void export_structure(const CellGrid& s, const std::string& path, ExportFormat format);
CellGrid read_voxel_json_file(const std::string& path);

}  // namespace pod::lego
