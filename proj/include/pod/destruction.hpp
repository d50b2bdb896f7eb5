#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pod/grid.hpp"
#include "pod/random.hpp"

namespace pod {

/// Per-metric signed control input, each entry in {-1, 0, +1}.
using ConditionSignal = std::vector<std::int8_t>;

/// A named integer-valued artifact property with its control range and the
/// tolerance used to accept a generated artifact.
struct MetricSpec {
  std::string name;
  std::function<int(const CellGrid&)> evaluate;
  int min = 0;
  int max = 0;
  int threshold = 0;
};

void validate_metrics(std::span<const MetricSpec> metrics);

/// +1 when the metric must increase to reach the target, -1 when it must
/// decrease, 0 when it already matches.
constexpr int condition_sign(int target, int current) noexcept {
  return current < target ? 1 : (current > target ? -1 : 0);
}

ConditionSignal condition_signal(std::span<const MetricSpec> metrics, std::span<const int> targets,
                                 const CellGrid& state);

std::vector<int> evaluate_metrics(std::span<const MetricSpec> metrics, const CellGrid& state);

struct Provenance {
  std::uint64_t goal_digest = 0;
  std::uint32_t trajectory = 0;
  std::uint32_t step = 0;
};

struct DatasetRecord {
  CellGrid state;  // post-destruction state
  Cursor cursor;
  ConditionSignal condition;
  Category repair_action = 0;  // category at cursor before the destructive write
  Provenance provenance;
};

struct DestroyStep {
  CellGrid state;
  Cursor cursor;
  Category repair_action = 0;
  Category written = 0;
};

/// Strategy that picks a location and a destructive value.
class Destroyer {
 public:
  virtual ~Destroyer() = default;
  virtual DestroyStep destroy(const CellGrid& state, std::mt19937_64& rng) const = 0;
  virtual std::string name() const = 0;
};

/// Uniform cursor, uniform category (which may equal the existing value).
class UniformDestroyer final : public Destroyer {
 public:
  DestroyStep destroy(const CellGrid& state, std::mt19937_64& rng) const override;
  std::string name() const override { return "uniform"; }
};

/// Uniform cursor, category drawn from a fixed histogram.
class HistogramDestroyer final : public Destroyer {
 public:
  explicit HistogramDestroyer(TileHistogram dist);
  DestroyStep destroy(const CellGrid& state, std::mt19937_64& rng) const override;
  std::string name() const override { return "histogram"; }

 private:
  TileHistogram dist_;
  CategoricalSampler sampler_;
};

DestroyStep destroy_step(const CellGrid& state, std::mt19937_64& rng);

struct TrajectoryConfig {
  double epsilon = 0.1;
  int max_steps = 0;  // 0 selects 2 x cell count
  int min_steps = 1;  // stop test is skipped until this many records exist
};

int resolved_max_steps(const TrajectoryConfig& config, const CellGrid& goal);

std::vector<DatasetRecord> make_trajectory(const CellGrid& goal, std::span<const MetricSpec> metrics,
                                           const TileHistogram& start_dist, const TrajectoryConfig& config,
                                           std::mt19937_64& rng, const Destroyer* destroyer = nullptr);

struct DatasetConfig {
  std::uint64_t target_size = 1;
  TrajectoryConfig trajectory;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string domain;
};

struct DatasetManifest {
  std::string domain;
  std::vector<std::string> alphabet;
  Extents extents;
  std::vector<std::string> metric_names;
  std::uint64_t seed = 0;
  std::uint64_t record_count = 0;
  std::uint64_t trajectory_count = 0;
  std::uint64_t goal_set_digest = 0;
  std::vector<std::uint64_t> goal_digests;
  double epsilon = 0.0;
  int max_steps = 0;
  int min_steps = 0;
  std::string destroyer = "uniform";
  std::vector<std::uint64_t> start_distribution;  // tile counts
};

/// Flat in-memory dataset: one fixed-width slot per record.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Extents extents, int categories, int metric_count);

  const Extents& extents() const noexcept { return extents_; }
  int categories() const noexcept { return categories_; }
  int metric_count() const noexcept { return metric_count_; }
  std::size_t size() const noexcept { return actions_.size(); }
  std::size_t cells_per_record() const noexcept { return extents_.cell_count(); }

  void push_back(const DatasetRecord& record);
  DatasetRecord record(std::size_t i) const;

  std::span<const Category> cells(std::size_t i) const {
    return {cells_.data() + i * cells_per_record(), cells_per_record()};
  }
  const Cursor& cursor(std::size_t i) const { return cursors_[i]; }
  std::span<const std::int8_t> condition(std::size_t i) const {
    return {conditions_.data() + i * static_cast<std::size_t>(metric_count_),
            static_cast<std::size_t>(metric_count_)};
  }
  Category repair_action(std::size_t i) const { return actions_[i]; }
  const Provenance& provenance(std::size_t i) const { return provenance_[i]; }

 private:
  Extents extents_{};
  int categories_ = 0;
  int metric_count_ = 0;
  std::vector<Category> cells_;
  std::vector<Cursor> cursors_;
  std::vector<std::int8_t> conditions_;
  std::vector<Category> actions_;
  std::vector<Provenance> provenance_;
};

/// Generates trajectories over uniformly drawn goals until at least
/// `config.target_size` records exist. Trajectory i uses a seed derived from
/// (config.seed, i), so the output does not depend on the worker count.
Dataset generate_dataset(std::span<const CellGrid> goals, std::span<const MetricSpec> metrics,
                         const TileHistogram& start_dist, const DatasetConfig& config,
                         const Destroyer* destroyer = nullptr, std::uint64_t* trajectory_count = nullptr);

DatasetManifest build_dataset(std::span<const CellGrid> goals, std::span<const MetricSpec> metrics,
                              const TileAlphabet& alphabet, const TileHistogram& start_dist,
                              const DatasetConfig& config, const std::string& path,
                              const Destroyer* destroyer = nullptr);

std::uint64_t goal_set_digest(std::span<const CellGrid> goals);

// Binary format: 64-byte header followed by fixed-width little-endian records.
inline constexpr char kDatasetMagic[6] = {'P', 'O', 'D', 'D', 'S', '1'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderSize = 64;

std::size_t dataset_record_width(const Extents& extents, int metric_count, bool with_provenance);

void write_dataset(const std::string& path, const Dataset& dataset, std::uint64_t seed);
Dataset read_dataset(const std::string& path, std::uint64_t* seed = nullptr);

std::string manifest_path_for(const std::string& dataset_path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

/// One JSON object per line mirroring the binary record fields.
void export_dataset_jsonl(const Dataset& dataset, const std::string& path);

}  // namespace pod
