#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pod/domain.hpp"
#include "pod/policy.hpp"

namespace pod {

enum class SweepOrder { RowMajor, Random };
SweepOrder parse_sweep_order(const std::string& name);

struct GenerationConfig {
  int max_steps = -1;  // -1 selects the domain default
  bool early_stop = true;
  SweepOrder order = SweepOrder::RowMajor;
  double temperature = 0.0;
};

struct StepLog {
  Cursor cursor;
  ConditionSignal condition;  // computed on the pre-edit state
  Category before = 0;
  Category after = 0;
};

struct Artifact {
  CellGrid start;
  CellGrid grid;
  std::vector<int> targets;
  std::vector<int> achieved;
  int steps = 0;
  bool stopped_early = false;
  std::vector<StepLog> log;
};

/// Targets outside a metric's range are clamped; one message per clamp is
/// appended to `warnings`.
std::vector<int> clamp_targets(const Domain& domain, std::span<const int> targets,
                               std::vector<std::string>* warnings = nullptr);

/// Validity predicate plus |metric - target| <= threshold for every metric.
bool targets_met(const Domain& domain, const CellGrid& grid, std::span<const int> targets);

CellGrid sample_start(const Domain& domain, const TileHistogram& start, std::mt19937_64& rng);

/// Chooses the category written at `cursor` given the pre-edit state and signal.
using RepairFn = std::function<Category(const CellGrid&, const Cursor&, std::span<const std::int8_t>)>;

/// The shared sweep: start state, then max_steps single-cell edits in sweep
/// order, checking the early-stop rule before each edit.
Artifact run_sweep(const Domain& domain, CellGrid start, std::span<const int> targets, const GenerationConfig& config,
                   std::mt19937_64& rng, const RepairFn& repair);

Artifact generate_artifact(const PolicyModel& model, std::span<const int> targets, const GenerationConfig& config,
                           std::mt19937_64& rng);

/// Same sweep, but every edit writes a uniformly random category.
Artifact random_agent_generate(const Domain& domain, const TileHistogram& start, std::span<const int> targets,
                               const GenerationConfig& config, std::mt19937_64& rng);

struct ArchiveEntry {
  std::string id;
  std::string run;
  std::string agent;
  std::uint64_t seed = 0;
  std::vector<int> targets;
  std::vector<int> achieved;
  int steps = 0;
  bool stopped_early = false;
  std::string verdict;
  CellGrid grid;
};

struct Archive {
  std::string domain;
  std::vector<std::string> metric_names;
  std::vector<ArchiveEntry> entries;

  std::vector<CellGrid> grids() const;
};

/// "playable"/"unplayable" for Zelda; success/partial/failure against the
/// first target for Lego.
std::string artifact_verdict(const Domain& domain, const CellGrid& grid, std::span<const int> targets);

/// Each metric stratified over its range and shuffled independently.
std::vector<std::vector<int>> sample_target_grid(const Domain& domain, int n, std::mt19937_64& rng);

struct BatchConfig {
  int per_target = 1;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string run = "run0";
  GenerationConfig generation;
};

using EpisodeFn = std::function<Artifact(std::span<const int> targets, std::mt19937_64& rng)>;

/// Episode (i, j) for target i and repetition j uses seed
/// derive_seed(seed, i * per_target + j).
Archive run_batch(const Domain& domain, std::span<const std::vector<int>> target_grid, const BatchConfig& config,
                  const std::string& agent, const EpisodeFn& episode);

Archive generate_batch(const PolicyModel& model, std::span<const std::vector<int>> target_grid,
                       const BatchConfig& config);
Archive random_batch(const Domain& domain, const TileHistogram& start, std::span<const std::vector<int>> target_grid,
                     const BatchConfig& config);

/// Concatenates archives of the same domain.
Archive merge_archives(std::span<const Archive> archives);

/// Directory with archive.json, index.csv and one grid file per entry.
void write_archive(const std::string& dir, const Archive& archive);
Archive read_archive(const std::string& dir);

}  // namespace pod
