#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pod/destruction.hpp"
#include "pod/grid.hpp"

namespace pod {

/// Centered: a cursor-centered window of fixed extents over the padded grid.
/// Full: the whole grid, unshifted; the cursor channel alone marks the cell.
enum class ObservationMode { Centered, Full };

/// Where inference starts: i.i.d. from the goal tile histogram, or uniform
/// over every category.
enum class StartKind { GoalHistogram, Uniform };

struct Domain {
  std::string name;
  TileAlphabet alphabet;
  CharTable chars;
  Extents extents;
  std::vector<MetricSpec> metrics;
  Category pad = 0;
  ObservationMode observation_mode = ObservationMode::Centered;
  Extents observation;
  int generation_steps = 0;
  bool early_stop = false;
  StartKind start = StartKind::GoalHistogram;
  int trajectory_min_steps = 1;
  std::function<bool(const CellGrid&)> is_valid;

  int metric_index(const std::string& metric) const;
  int spatial_dims() const { return extents.rank; }
};

const Domain& zelda_domain();
const Domain& lego_domain();
/// "zelda" or "lego"; anything else is a configuration error.
const Domain& domain_by_name(const std::string& name);

TileHistogram start_distribution(const Domain& domain, std::span<const CellGrid> goals);

/// Text grid for Zelda, voxel-json for Lego.
std::string artifact_extension(const Domain& domain);
std::string format_artifact(const Domain& domain, const CellGrid& grid);
CellGrid parse_artifact(const Domain& domain, const std::string& text);
CellGrid read_artifact(const Domain& domain, const std::string& path);
void write_artifact(const Domain& domain, const std::string& path, const CellGrid& grid);

/// Goal sets live in a directory as goal_NNN.<ext>, read in name order.
void write_goal_dir(const Domain& domain, const std::string& dir, std::span<const CellGrid> goals);
std::vector<CellGrid> read_goal_dir(const Domain& domain, const std::string& dir);

/// Goal sets shipped with the library: zelda uses the constructive
/// generator, lego the template cars.
std::vector<CellGrid> generate_goals(const Domain& domain, int n, std::uint64_t seed);

}  // namespace pod
