#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pod/nn/tensor.hpp"

namespace pod::nn {

enum class LayerKind {
  Conv2d,
  Conv3d,
  MaxPool2d,
  MaxPool3d,
  Relu,
  Flatten,
  ConcatCondition,
  Dense,
  Softmax,
};

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int out_channels = 0;  // conv
  int kernel = 3;        // conv, per spatial axis
  int window = 2;        // maxpool, also the stride
  int out_features = 0;  // dense

  static LayerSpec conv(int dims, int out_channels, int kernel = 3);
  static LayerSpec maxpool(int dims, int window = 2);
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
  static LayerSpec concat_condition() { return {LayerKind::ConcatCondition}; }
  static LayerSpec dense(int out_features);
  static LayerSpec softmax() { return {LayerKind::Softmax}; }

  std::string describe() const;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Per-layer record of what backward needs from the forward pass.
struct LayerCache {
  std::vector<std::int32_t> indices;  // maxpool argmax, flat input offsets
  int side_width = 0;                 // concat-condition
};

/// Activations are [N, C, D, H, W] for spatial layers (D = 1 in 2D) and
/// [N, F] after flatten.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::vector<int> output_shape(const std::vector<int>& input_shape, int side_width) const = 0;

  /// Pure with respect to parameters; `cache` may be null for inference.
  virtual Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const = 0;

  /// Accumulates parameter gradients and returns the gradient w.r.t. the
  /// layer input (empty when `need_input_grad` is false).
  virtual Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                             const LayerCache& cache, bool need_input_grad) = 0;

  virtual std::vector<Parameter<T>*> parameters() { return {}; }
};

template <typename T>
class Conv final : public Layer<T> {
 public:
  Conv(int dims, int in_channels, int out_channels, int kernel);

  LayerKind kind() const override { return dims_ == 2 ? LayerKind::Conv2d : LayerKind::Conv3d; }
  std::vector<int> output_shape(const std::vector<int>& in, int side_width) const override;
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::array<int, 3> kernel_extent() const;
  int patch_size() const;

  int dims_;
  int in_channels_;
  int out_channels_;
  int kernel_;
  Parameter<T> weight_;  // [out, in * kd * kh * kw]
  Parameter<T> bias_;    // [out]
};

template <typename T>
class MaxPool final : public Layer<T> {
 public:
  MaxPool(int dims, int window);

  LayerKind kind() const override { return dims_ == 2 ? LayerKind::MaxPool2d : LayerKind::MaxPool3d; }
  std::vector<int> output_shape(const std::vector<int>& in, int side_width) const override;
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;

 private:
  std::array<int, 3> window_extent() const;

  int dims_;
  int window_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Relu; }
  std::vector<int> output_shape(const std::vector<int>& in, int) const override { return in; }
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }
  std::vector<int> output_shape(const std::vector<int>& in, int) const override;
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;
};

/// Appends the per-sample side input (the encoded condition) to [N, F].
template <typename T>
class ConcatCondition final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ConcatCondition; }
  std::vector<int> output_shape(const std::vector<int>& in, int side_width) const override;
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features);

  LayerKind kind() const override { return LayerKind::Dense; }
  std::vector<int> output_shape(const std::vector<int>& in, int side_width) const override;
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  int in_features_;
  int out_features_;
  Parameter<T> weight_;  // [out, in]
  Parameter<T> bias_;    // [out]
};

/// Row-wise softmax over [N, K].
template <typename T>
class Softmax final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  std::vector<int> output_shape(const std::vector<int>& in, int) const override { return in; }
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>& output,
                     const LayerCache& cache, bool need_input_grad) override;
};

/// Kaiming-uniform fan-in initialisation for weights, zero biases.
template <typename T>
void kaiming_uniform(Parameter<T>& weight, int fan_in, std::mt19937_64& rng);

}  // namespace pod::nn
