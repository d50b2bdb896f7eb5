#include "pod/nn/network.hpp"

#include <random>

#include "pod/binary_io.hpp"
#include "pod/random.hpp"

namespace pod::nn {

template <typename T>
Network<T>::Network(std::vector<int> input_shape, int side_width, std::vector<LayerSpec> specs, std::uint64_t seed)
    : input_shape_(std::move(input_shape)), side_width_(side_width), specs_(std::move(specs)) {
  if (input_shape_.size() != 4) fail(ErrorKind::Shape, "network input shape must be [C, D, H, W]");
  if (side_width_ < 0) fail(ErrorKind::Shape, "negative side width");
  std::mt19937_64 rng(seed);
  std::vector<int> shape{1};
  shape.insert(shape.end(), input_shape_.begin(), input_shape_.end());
  bool seen_concat = false;

  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    std::unique_ptr<Layer<T>> layer;
    switch (s.kind) {
      case LayerKind::Conv2d:
      case LayerKind::Conv3d: {
        if (shape.size() != 5) fail(ErrorKind::Shape, "conv after flatten");
        const int dims = s.kind == LayerKind::Conv3d ? 3 : 2;
        auto conv = std::make_unique<Conv<T>>(dims, shape[1], s.out_channels, s.kernel);
        kaiming_uniform(conv->weight(), conv->weight().value.dim(1), rng);
        layer = std::move(conv);
        break;
      }
      case LayerKind::MaxPool2d:
      case LayerKind::MaxPool3d:
        layer = std::make_unique<MaxPool<T>>(s.kind == LayerKind::MaxPool3d ? 3 : 2, s.window);
        break;
      case LayerKind::Relu: layer = std::make_unique<Relu<T>>(); break;
      case LayerKind::Flatten: layer = std::make_unique<Flatten<T>>(); break;
      case LayerKind::ConcatCondition:
        if (seen_concat) fail(ErrorKind::Shape, "only one concat-condition layer is supported");
        seen_concat = true;
        layer = std::make_unique<ConcatCondition<T>>();
        break;
      case LayerKind::Dense: {
        if (shape.size() != 2) fail(ErrorKind::Shape, "dense layer needs flattened input");
        auto dense = std::make_unique<Dense<T>>(shape[1], s.out_features);
        kaiming_uniform(dense->weight(), shape[1], rng);
        layer = std::move(dense);
        break;
      }
      case LayerKind::Softmax:
        if (i + 1 != specs_.size()) fail(ErrorKind::Shape, "softmax must be the last layer");
        layer = std::make_unique<Softmax<T>>();
        break;
    }
    shape = layer->output_shape(shape, side_width_);
    layers_.push_back(std::move(layer));
  }
  if (side_width_ > 0 && !seen_concat) fail(ErrorKind::Shape, "side input given but no concat-condition layer");
  if (shape.size() != 2) fail(ErrorKind::Shape, "network output must be [N, K]");
  output_width_ = shape[1];
}

template <typename T>
std::size_t Network<T>::logits_layer_count() const {
  if (!layers_.empty() && layers_.back()->kind() == LayerKind::Softmax) return layers_.size() - 1;
  return layers_.size();
}

namespace {

template <typename T>
void check_input(const Tensor<T>& input, const Tensor<T>* side, const std::vector<int>& per_sample, int side_width) {
  if (input.rank() != 5) fail(ErrorKind::Shape, "network input must be [N, C, D, H, W]");
  for (int a = 0; a < 4; ++a) {
    if (input.shape[static_cast<std::size_t>(a) + 1] != per_sample[static_cast<std::size_t>(a)]) {
      fail(ErrorKind::Shape, "network input shape " + shape_string(input.shape) + " does not match model");
    }
  }
  if (side_width > 0) {
    if (side == nullptr || side->shape != std::vector<int>{input.dim(0), side_width}) {
      fail(ErrorKind::Shape, "side input must be [N, " + std::to_string(side_width) + "]");
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, const Tensor<T>* side) const {
  Tensor<T> x = forward_logits(input, side, nullptr);
  for (std::size_t i = logits_layer_count(); i < layers_.size(); ++i) x = layers_[i]->forward(x, side, nullptr);
  return x;
}

template <typename T>
Tensor<T> Network<T>::forward_logits(const Tensor<T>& input, const Tensor<T>* side, Tape<T>* tape) const {
  check_input(input, side, input_shape_, side_width_);
  const Tensor<T>* effective_side = side_width_ > 0 ? side : nullptr;
  const std::size_t n = logits_layer_count();
  if (tape != nullptr) {
    tape->activations.clear();
    tape->caches.assign(n, LayerCache{});
    tape->activations.reserve(n + 1);
    tape->activations.push_back(input);
    for (std::size_t i = 0; i < n; ++i) {
      tape->activations.push_back(layers_[i]->forward(tape->activations.back(), effective_side, &tape->caches[i]));
    }
    tape->recorded = true;
    return tape->activations.back();
  }
  Tensor<T> x = input;
  LayerCache scratch;
  for (std::size_t i = 0; i < n; ++i) x = layers_[i]->forward(x, effective_side, &scratch);
  return x;
}

template <typename T>
void Network<T>::backward(Tape<T>& tape, const Tensor<T>& grad_logits) {
  if (!tape.recorded) fail(ErrorKind::Usage, "backward called without a recorded forward pass");
  const std::size_t n = logits_layer_count();
  if (tape.activations.size() != n + 1) fail(ErrorKind::Usage, "tape does not belong to this network");
  if (grad_logits.shape != tape.activations.back().shape) fail(ErrorKind::Shape, "gradient shape mismatch");
  Tensor<T> g = grad_logits;
  for (std::size_t i = n; i-- > 0;) {
    // The network input needs no gradient.
    g = layers_[i]->backward(g, tape.activations[i], tape.activations[i + 1], tape.caches[i], i > 0);
  }
  tape.recorded = false;
  tape.activations.clear();
  tape.caches.clear();
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_) {
    for (auto* p : l->parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Network<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& l : layers_) {
    for (auto* p : l->parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::uint64_t Network<T>::digest() const {
  Fnv1a h;
  for (int d : input_shape_) h.add(static_cast<std::int32_t>(d));
  h.add(static_cast<std::int32_t>(side_width_));
  for (const auto& s : specs_) h.add(std::string_view(s.describe()));
  return h.value();
}

template class Network<float>;
template class Network<double>;

std::vector<std::uint8_t> checkpoint_bytes(const Network<float>& net) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u64(net.digest());
  const auto params = net.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (int d : p->value.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : p->value.data) w.f32(v);
  }
  return w.data();
}

void save_checkpoint(const std::string& path, const Network<float>& net) {
  write_file_bytes(path, checkpoint_bytes(net));
}

void load_checkpoint(const std::string& path, Network<float>& net) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size());
  char magic[6];
  r.bytes(magic, 6);
  if (std::memcmp(magic, kCheckpointMagic, 6) != 0) fail(ErrorKind::Io, path + " is not a PODNN1 checkpoint");
  if (r.u64() != net.digest()) fail(ErrorKind::Config, "checkpoint layer-spec digest does not match the model");
  auto params = net.parameters();
  if (r.u32() != params.size()) fail(ErrorKind::Config, "checkpoint parameter count mismatch");
  // Decode everything before touching the model so a bad file leaves it intact.
  std::vector<std::vector<float>> values;
  for (auto* p : params) {
    const auto rank = r.u32();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    if (shape != p->value.shape) fail(ErrorKind::Config, "checkpoint parameter shape mismatch");
    std::vector<float> v(p->value.size());
    for (auto& x : v) x = r.f32();
    values.push_back(std::move(v));
  }
  if (r.remaining() != 0) fail(ErrorKind::Io, "trailing bytes in checkpoint");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = std::move(values[i]);
}

}  // namespace pod::nn
