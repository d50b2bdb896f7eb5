#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pod/destruction.hpp"
#include "pod/domain.hpp"
#include "pod/nn/network.hpp"
#include "pod/nn/optim.hpp"

namespace pod {

/// How a grid becomes network input: one-hot channels for every category
/// plus a final cursor channel, laid out [C, D, H, W] with W along x.
struct ObservationSpec {
  Extents grid;
  Extents window;
  ObservationMode mode = ObservationMode::Centered;
  Category pad = 0;
  int categories = 0;

  int channels() const { return categories + 1; }
  std::vector<int> shape() const { return {channels(), window.z(), window.y(), window.x()}; }
  std::size_t floats() const { return static_cast<std::size_t>(channels()) * window.cell_count(); }
};

ObservationSpec observation_spec(const Domain& domain);

/// Writes one observation into `out` (spec.floats() entries, overwritten).
void write_observation(const ObservationSpec& spec, std::span<const Category> cells, const Cursor& cursor, float* out);
nn::Tensor<float> build_observation(const ObservationSpec& spec, const CellGrid& state, const Cursor& cursor);

/// Per metric, one-hot over (-1, 0, +1).
std::vector<float> encode_condition(std::span<const std::int8_t> signal);
ConditionSignal decode_condition(std::span<const float> encoded);

struct PolicyConfig {
  int conv1 = 32;
  int conv2 = 64;
  int conv3 = 64;
  int hidden = 256;
  int kernel = 3;
  bool condition_enabled = true;
  std::uint64_t seed = 0;
};

std::vector<nn::LayerSpec> policy_layers(const Domain& domain, const PolicyConfig& config);

class PolicyModel {
 public:
  PolicyModel(const Domain& domain, PolicyConfig config);

  const Domain& domain() const noexcept { return *domain_; }
  const PolicyConfig& config() const noexcept { return config_; }
  const ObservationSpec& observation() const noexcept { return obs_; }
  int alphabet_size() const noexcept { return obs_.categories; }
  int metric_count() const noexcept { return static_cast<int>(domain_->metrics.size()); }
  int condition_width() const noexcept { return config_.condition_enabled ? 3 * metric_count() : 0; }

  nn::Network<float>& network() noexcept { return net_; }
  const nn::Network<float>& network() const noexcept { return net_; }

  /// Start distribution for inference, carried from the training data.
  const TileHistogram& start_distribution() const noexcept { return start_; }
  void set_start_distribution(TileHistogram dist) { start_ = std::move(dist); }

 private:
  const Domain* domain_;
  PolicyConfig config_;
  ObservationSpec obs_;
  nn::Network<float> net_;
  TileHistogram start_;
};

struct RepairPrediction {
  Category action = 0;
  std::vector<float> probabilities;
};

/// Argmax with lowest-index tie-break when `temperature` is 0; otherwise
/// samples from p^(1/temperature) using `rng`.
RepairPrediction predict_repair(const PolicyModel& model, const CellGrid& state, const Cursor& cursor,
                                std::span<const std::int8_t> signal, double temperature = 0.0,
                                std::mt19937_64* rng = nullptr);

struct EpochReport {
  int epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
  double wall_seconds = 0.0;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 256;
  std::uint64_t seed = 0;
  nn::AdamConfig adam;
  std::string checkpoint_path;  // rewritten after every epoch when set
  std::string report_path;      // CSV rewritten after every epoch when set
  std::function<void(const EpochReport&)> on_epoch;
};

std::vector<EpochReport> train(PolicyModel& model, const Dataset& dataset, const TrainConfig& config);

/// Rejects datasets whose alphabet, extents or metrics differ from the model.
void check_compatible(const PolicyModel& model, const DatasetManifest& manifest);
std::vector<EpochReport> train_from_file(PolicyModel& model, const std::string& dataset_path,
                                         const TrainConfig& config);

std::string report_csv(std::span<const EpochReport> reports);

/// Checkpoint at `path` plus a JSON sidecar at `path + ".json"` holding the
/// domain, policy config and start distribution.
void save_model(const std::string& path, const PolicyModel& model);
PolicyModel load_model(const std::string& path);
std::string model_sidecar_path(const std::string& path);

}  // namespace pod
