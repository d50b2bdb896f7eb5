#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pod/nn/layers.hpp"

namespace pod::nn {

/// Activations and per-layer caches recorded by a training forward pass.
template <typename T>
struct Tape {
  std::vector<Tensor<T>> activations;  // activations[i] is the input of layer i
  std::vector<LayerCache> caches;
  bool recorded = false;
};

/// A feed-forward chain of layers with one optional side input that a
/// concat-condition layer splices in. Reverse-mode differentiation walks the
/// recorded tape backwards.
template <typename T>
class Network {
 public:
  /// `input_shape` is the per-sample shape [C, D, H, W].
  Network(std::vector<int> input_shape, int side_width, std::vector<LayerSpec> specs, std::uint64_t seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// Output of the last layer (probabilities when the chain ends in softmax).
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side) const;

  /// Runs every layer except a trailing softmax; records into `tape` if given.
  Tensor<T> forward_logits(const Tensor<T>& input, const Tensor<T>* side, Tape<T>* tape = nullptr) const;

  /// Accumulates parameter gradients from d(loss)/d(logits). The tape is
  /// consumed; a second call without a new forward pass is a usage error.
  void backward(Tape<T>& tape, const Tensor<T>& grad_logits);

  void zero_grad();
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  const std::vector<int>& input_shape() const noexcept { return input_shape_; }
  int side_width() const noexcept { return side_width_; }
  int output_width() const noexcept { return output_width_; }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  /// FNV-1a over input shape, side width and layer descriptions.
  std::uint64_t digest() const;

 private:
  std::size_t logits_layer_count() const;

  std::vector<int> input_shape_;
  int side_width_;
  int output_width_ = 0;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

inline constexpr char kCheckpointMagic[6] = {'P', 'O', 'D', 'N', 'N', '1'};

void save_checkpoint(const std::string& path, const Network<float>& net);
std::vector<std::uint8_t> checkpoint_bytes(const Network<float>& net);
/// Rejects files whose layer-spec digest or parameter shapes differ from `net`.
void load_checkpoint(const std::string& path, Network<float>& net);

}  // namespace pod::nn
