#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pod/nn/layers.hpp"

namespace pod::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
};

/// Bias-corrected Adam update using each parameter's accumulated gradient.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> probabilities;
};

/// Max-subtracted softmax of one logit row and -log p[target].
CrossEntropy softmax_cross_entropy(std::span<const double> logits, int target);

template <typename T>
struct BatchLoss {
  double mean_loss = 0.0;
  int correct = 0;  // rows whose argmax (lowest index on ties) equals the target
  Tensor<T> probabilities;
  Tensor<T> grad_logits;  // d(mean loss)/d(logits) = (p - onehot) / N
};

template <typename T>
BatchLoss<T> softmax_cross_entropy_batch(const Tensor<T>& logits, std::span<const int> targets);

/// Index of the largest entry, lowest index on ties.
template <typename T>
int argmax(std::span<const T> values);

}  // namespace pod::nn
