#include "pod/nn/optim.hpp"

#include <cmath>

namespace pod::nn {

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state) {
  if (state.first_moment.empty()) {
    for (auto* p : params) {
      state.first_moment.emplace_back(p->value.shape);
      state.second_moment.emplace_back(p->value.shape);
    }
  }
  if (state.first_moment.size() != params.size()) fail(ErrorKind::Shape, "Adam state does not match parameters");
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T step_size = static_cast<T>(c.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.shape != p.value.shape || p.grad.shape != p.value.shape) {
      fail(ErrorKind::Shape, "Adam moment shape mismatch for " + p.name);
    }
    T* w = p.value.ptr();
    const T* g = p.grad.ptr();
    T* mp = m.ptr();
    T* vp = v.ptr();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      mp[j] = b1 * mp[j] + (T(1) - b1) * g[j];
      vp[j] = b2 * vp[j] + (T(1) - b2) * g[j] * g[j];
      // m_hat / (sqrt(v_hat) + eps) with the bias corrections folded in.
      w[j] -= step_size * mp[j] / (std::sqrt(vp[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int target) {
  if (logits.empty()) fail(ErrorKind::Shape, "empty logits");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) fail(ErrorKind::Shape, "target index out of range");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, "non-finite logit");
    mx = std::max(mx, v);
  }
  CrossEntropy out;
  out.probabilities.resize(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) sum += std::exp(logits[j] - mx);
  const double log_sum = std::log(sum);
  for (std::size_t j = 0; j < logits.size(); ++j) out.probabilities[j] = std::exp(logits[j] - mx - log_sum);
  out.loss = -(logits[static_cast<std::size_t>(target)] - mx - log_sum);
  return out;
}

template <typename T>
BatchLoss<T> softmax_cross_entropy_batch(const Tensor<T>& logits, std::span<const int> targets) {
  if (logits.rank() != 2) fail(ErrorKind::Shape, "logits must be [N, K]");
  const int n = logits.dim(0), k = logits.dim(1);
  if (targets.size() != static_cast<std::size_t>(n)) fail(ErrorKind::Shape, "target count does not match batch");
  BatchLoss<T> out;
  out.probabilities = Tensor<T>(logits.shape);
  out.grad_logits = Tensor<T>(logits.shape);
  std::vector<double> row(static_cast<std::size_t>(k));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* src = logits.ptr() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = static_cast<double>(src[j]);
    const auto ce = softmax_cross_entropy(row, targets[static_cast<std::size_t>(i)]);
    total += ce.loss;
    if (argmax<double>(row) == targets[static_cast<std::size_t>(i)]) ++out.correct;
    for (int j = 0; j < k; ++j) {
      const double p = ce.probabilities[static_cast<std::size_t>(j)];
      out.probabilities[static_cast<std::size_t>(i) * k + j] = static_cast<T>(p);
      const double onehot = j == targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      out.grad_logits[static_cast<std::size_t>(i) * k + j] = static_cast<T>((p - onehot) / n);
    }
  }
  out.mean_loss = n > 0 ? total / n : 0.0;
  return out;
}

template <typename T>
int argmax(std::span<const T> values) {
  int best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

template void adam_step<float>(std::span<Parameter<float>* const>, AdamState<float>&);
template void adam_step<double>(std::span<Parameter<double>* const>, AdamState<double>&);
template BatchLoss<float> softmax_cross_entropy_batch<float>(const Tensor<float>&, std::span<const int>);
template BatchLoss<double> softmax_cross_entropy_batch<double>(const Tensor<double>&, std::span<const int>);
template int argmax<float>(std::span<const float>);
template int argmax<double>(std::span<const double>);

}  // namespace pod::nn
