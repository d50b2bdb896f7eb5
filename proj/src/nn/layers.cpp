#include "pod/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/Dense>

#include "pod/random.hpp"

namespace pod::nn {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

// Upper bound on im2col buffer elements per chunk.
constexpr std::size_t kColumnBudget = std::size_t{1} << 18;

struct Spatial {
  int n, c, d, h, w;
  int plane() const { return d * h * w; }
};

Spatial spatial_of(const std::vector<int>& shape) {
  if (shape.size() != 5) fail(ErrorKind::Shape, "spatial layer expects [N, C, D, H, W], got " + shape_string(shape));
  return {shape[0], shape[1], shape[2], shape[3], shape[4]};
}

}  // namespace

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Conv3d: return "conv3d";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::MaxPool3d: return "maxpool3d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::ConcatCondition: return "concat-condition";
    case LayerKind::Dense: return "dense";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(int dims, int out_channels, int kernel) {
  LayerSpec s;
  s.kind = dims == 3 ? LayerKind::Conv3d : LayerKind::Conv2d;
  s.out_channels = out_channels;
  s.kernel = kernel;
  return s;
}

LayerSpec LayerSpec::maxpool(int dims, int window) {
  LayerSpec s;
  s.kind = dims == 3 ? LayerKind::MaxPool3d : LayerKind::MaxPool2d;
  s.window = window;
  return s;
}

LayerSpec LayerSpec::dense(int out_features) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.out_features = out_features;
  return s;
}

std::string LayerSpec::describe() const {
  std::ostringstream out;
  out << to_string(kind);
  switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::Conv3d: out << "(out=" << out_channels << ",k=" << kernel << ")"; break;
    case LayerKind::MaxPool2d:
    case LayerKind::MaxPool3d: out << "(w=" << window << ")"; break;
    case LayerKind::Dense: out << "(out=" << out_features << ")"; break;
    default: break;
  }
  return out.str();
}

template <typename T>
void kaiming_uniform(Parameter<T>& weight, int fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : weight.value.data) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
}

// ---------------------------------------------------------------- conv

template <typename T>
Conv<T>::Conv(int dims, int in_channels, int out_channels, int kernel)
    : dims_(dims), in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel) {
  if (dims != 2 && dims != 3) fail(ErrorKind::Shape, "conv dims must be 2 or 3");
  if (kernel < 1 || kernel % 2 == 0) fail(ErrorKind::Shape, "conv kernel extent must be odd");
  if (in_channels < 1 || out_channels < 1) fail(ErrorKind::Shape, "conv channel counts must be positive");
  weight_.name = "conv.weight";
  weight_.value = Tensor<T>({out_channels_, patch_size()});
  weight_.grad = Tensor<T>({out_channels_, patch_size()});
  bias_.name = "conv.bias";
  bias_.value = Tensor<T>({out_channels_});
  bias_.grad = Tensor<T>({out_channels_});
}

template <typename T>
std::array<int, 3> Conv<T>::kernel_extent() const {
  return {dims_ == 3 ? kernel_ : 1, kernel_, kernel_};
}

template <typename T>
int Conv<T>::patch_size() const {
  const auto k = kernel_extent();
  return in_channels_ * k[0] * k[1] * k[2];
}

template <typename T>
std::vector<int> Conv<T>::output_shape(const std::vector<int>& in, int) const {
  const auto s = spatial_of(in);
  if (s.c != in_channels_) {
    fail(ErrorKind::Shape, "conv expects " + std::to_string(in_channels_) + " input channels, got " +
                               std::to_string(s.c));
  }
  if (dims_ == 2 && s.d != 1) fail(ErrorKind::Shape, "conv2d on input with depth > 1");
  return {s.n, out_channels_, s.d, s.h, s.w};
}

namespace {

// Rows of the column matrix enumerate (channel, kz, ky, kx); columns
// enumerate (sample, z, y, x) for the samples in [n0, n0 + nb).
template <typename T>
void im2col(const T* input, const Spatial& s, const std::array<int, 3>& k, int n0, int nb, T* col) {
  const int P = s.plane();
  const std::size_t cols = static_cast<std::size_t>(nb) * static_cast<std::size_t>(P);
  const int pz = k[0] / 2, py = k[1] / 2, px = k[2] / 2;
  std::size_t row = 0;
  for (int c = 0; c < s.c; ++c) {
    for (int kz = 0; kz < k[0]; ++kz) {
      for (int ky = 0; ky < k[1]; ++ky) {
        for (int kx = 0; kx < k[2]; ++kx, ++row) {
          T* dst_row = col + row * cols;
          const int dx = kx - px;
          const int x_lo = std::max(0, -dx);
          const int x_hi = std::min(s.w, s.w - dx);
          for (int n = 0; n < nb; ++n) {
            const T* src_c = input + (static_cast<std::size_t>(n0 + n) * s.c + c) * P;
            T* dst_n = dst_row + static_cast<std::size_t>(n) * P;
            for (int z = 0; z < s.d; ++z) {
              const int sz = z + kz - pz;
              for (int y = 0; y < s.h; ++y) {
                T* dst = dst_n + (z * s.h + y) * s.w;
                const int sy = y + ky - py;
                if (sz < 0 || sz >= s.d || sy < 0 || sy >= s.h || x_lo >= x_hi) {
                  std::fill(dst, dst + s.w, T(0));
                  continue;
                }
                const T* src = src_c + (sz * s.h + sy) * s.w;
                std::fill(dst, dst + x_lo, T(0));
                std::memcpy(dst + x_lo, src + x_lo + dx, sizeof(T) * static_cast<std::size_t>(x_hi - x_lo));
                std::fill(dst + x_hi, dst + s.w, T(0));
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const Spatial& s, const std::array<int, 3>& k, int n0, int nb, T* grad_input) {
  const int P = s.plane();
  const std::size_t cols = static_cast<std::size_t>(nb) * static_cast<std::size_t>(P);
  const int pz = k[0] / 2, py = k[1] / 2, px = k[2] / 2;
  std::size_t row = 0;
  for (int c = 0; c < s.c; ++c) {
    for (int kz = 0; kz < k[0]; ++kz) {
      for (int ky = 0; ky < k[1]; ++ky) {
        for (int kx = 0; kx < k[2]; ++kx, ++row) {
          const T* src_row = col + row * cols;
          const int dx = kx - px;
          const int x_lo = std::max(0, -dx);
          const int x_hi = std::min(s.w, s.w - dx);
          for (int n = 0; n < nb; ++n) {
            T* dst_c = grad_input + (static_cast<std::size_t>(n0 + n) * s.c + c) * P;
            const T* src_n = src_row + static_cast<std::size_t>(n) * P;
            for (int z = 0; z < s.d; ++z) {
              const int sz = z + kz - pz;
              if (sz < 0 || sz >= s.d) continue;
              for (int y = 0; y < s.h; ++y) {
                const int sy = y + ky - py;
                if (sy < 0 || sy >= s.h) continue;
                const T* src = src_n + (z * s.h + y) * s.w;
                T* dst = dst_c + (sz * s.h + sy) * s.w;
                for (int x = x_lo; x < x_hi; ++x) dst[x + dx] += src[x];
              }
            }
          }
        }
      }
    }
  }
}

int chunk_samples(int n, std::size_t rows, int plane) {
  const std::size_t per = rows * static_cast<std::size_t>(plane);
  const auto nb = static_cast<int>(std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, per)));
  return std::min(n, nb);
}

}  // namespace

template <typename T>
Tensor<T> Conv<T>::forward(const Tensor<T>& input, const Tensor<T>*, LayerCache*) const {
  const auto out_shape = output_shape(input.shape, 0);
  const auto s = spatial_of(input.shape);
  const int P = s.plane();
  const int CK = patch_size();
  const auto k = kernel_extent();
  Tensor<T> out(out_shape);

  const int nb_max = chunk_samples(s.n, static_cast<std::size_t>(CK), P);
  std::unique_ptr<T[]> col(new T[static_cast<std::size_t>(CK) * nb_max * P]);
  Mat<T> y;
  CMapM<T> wmat(weight_.value.ptr(), out_channels_, CK);
  for (int n0 = 0; n0 < s.n; n0 += nb_max) {
    const int nb = std::min(nb_max, s.n - n0);
    im2col(input.ptr(), s, k, n0, nb, col.get());
    CMapM<T> colm(col.get(), CK, static_cast<Eigen::Index>(nb) * P);
    y.noalias() = wmat * colm;
    for (int n = 0; n < nb; ++n) {
      for (int o = 0; o < out_channels_; ++o) {
        T* dst = out.ptr() + (static_cast<std::size_t>(n0 + n) * out_channels_ + o) * P;
        const T* src = y.data() + static_cast<std::size_t>(o) * y.cols() + static_cast<std::size_t>(n) * P;
        const T b = bias_.value[static_cast<std::size_t>(o)];
        for (int p = 0; p < P; ++p) dst[p] = src[p] + b;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> Conv<T>::backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>&,
                            const LayerCache&, bool need_input_grad) {
  const auto s = spatial_of(input.shape);
  if (grad_output.shape != output_shape(input.shape, 0)) fail(ErrorKind::Shape, "conv gradient shape mismatch");
  const int P = s.plane();
  const int CK = patch_size();
  const auto k = kernel_extent();

  Tensor<T> grad_input;
  if (need_input_grad) grad_input = Tensor<T>(input.shape);

  const int nb_max = chunk_samples(s.n, static_cast<std::size_t>(CK), P);
  std::unique_ptr<T[]> col(new T[static_cast<std::size_t>(CK) * nb_max * P]);
  Mat<T> g(out_channels_, static_cast<Eigen::Index>(nb_max) * P);
  Mat<T> dcol;
  MapM<T> dw(weight_.grad.ptr(), out_channels_, CK);
  CMapM<T> wmat(weight_.value.ptr(), out_channels_, CK);
  for (int n0 = 0; n0 < s.n; n0 += nb_max) {
    const int nb = std::min(nb_max, s.n - n0);
    const Eigen::Index cols = static_cast<Eigen::Index>(nb) * P;
    for (int n = 0; n < nb; ++n) {
      for (int o = 0; o < out_channels_; ++o) {
        const T* src = grad_output.ptr() + (static_cast<std::size_t>(n0 + n) * out_channels_ + o) * P;
        std::memcpy(g.data() + static_cast<std::size_t>(o) * g.cols() + static_cast<std::size_t>(n) * P, src,
                    sizeof(T) * static_cast<std::size_t>(P));
      }
    }
    auto gblock = g.leftCols(cols);
    for (int o = 0; o < out_channels_; ++o) bias_.grad[static_cast<std::size_t>(o)] += gblock.row(o).sum();

    im2col(input.ptr(), s, k, n0, nb, col.get());
    CMapM<T> colm(col.get(), CK, cols);
    dw.noalias() += gblock * colm.transpose();
    if (need_input_grad) {
      dcol.noalias() = wmat.transpose() * gblock;
      col2im_add(dcol.data(), s, k, n0, nb, grad_input.ptr());
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------- maxpool

template <typename T>
MaxPool<T>::MaxPool(int dims, int window) : dims_(dims), window_(window) {
  if (dims != 2 && dims != 3) fail(ErrorKind::Shape, "maxpool dims must be 2 or 3");
  if (window < 1) fail(ErrorKind::Shape, "maxpool window must be positive");
}

template <typename T>
std::array<int, 3> MaxPool<T>::window_extent() const {
  return {dims_ == 3 ? window_ : 1, window_, window_};
}

template <typename T>
std::vector<int> MaxPool<T>::output_shape(const std::vector<int>& in, int) const {
  const auto s = spatial_of(in);
  const auto w = window_extent();
  auto ceil_div = [](int a, int b) { return (a + b - 1) / b; };
  return {s.n, s.c, ceil_div(s.d, w[0]), ceil_div(s.h, w[1]), ceil_div(s.w, w[2])};
}

template <typename T>
Tensor<T> MaxPool<T>::forward(const Tensor<T>& input, const Tensor<T>*, LayerCache* cache) const {
  const auto s = spatial_of(input.shape);
  const auto out_shape = output_shape(input.shape, 0);
  const auto w = window_extent();
  Tensor<T> out(out_shape);
  std::vector<std::int32_t> arg(out.size());
  const int od = out_shape[2], oh = out_shape[3], ow = out_shape[4];
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    const T* src = input.ptr() + base;
    for (int z = 0; z < od; ++z) {
      const int z0 = z * w[0], z1 = std::min(z0 + w[0], s.d);
      for (int y = 0; y < oh; ++y) {
        const int y0 = y * w[1], y1 = std::min(y0 + w[1], s.h);
        for (int x = 0; x < ow; ++x, ++o) {
          // Windows are clipped at odd extents.
          const int x0 = x * w[2], x1 = std::min(x0 + w[2], s.w);
          int best_i = (z0 * s.h + y0) * s.w + x0;
          T best = src[best_i];
          for (int iz = z0; iz < z1; ++iz) {
            for (int iy = y0; iy < y1; ++iy) {
              const int row = (iz * s.h + iy) * s.w;
              for (int ix = x0; ix < x1; ++ix) {
                if (src[row + ix] > best) {
                  best = src[row + ix];
                  best_i = row + ix;
                }
              }
            }
          }
          out[o] = best;
          arg[o] = static_cast<std::int32_t>(base + static_cast<std::size_t>(best_i));
        }
      }
    }
  }
  if (cache != nullptr) cache->indices = std::move(arg);
  return out;
}

template <typename T>
Tensor<T> MaxPool<T>::backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>&,
                               const LayerCache& cache, bool need_input_grad) {
  if (!need_input_grad) return {};
  if (cache.indices.size() != grad_output.size()) fail(ErrorKind::Usage, "maxpool backward without forward cache");
  Tensor<T> grad_input(input.shape);
  for (std::size_t o = 0; o < grad_output.size(); ++o) {
    grad_input[static_cast<std::size_t>(cache.indices[o])] += grad_output[o];
  }
  return grad_input;
}

// ---------------------------------------------------------------- relu

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& input, const Tensor<T>*, LayerCache*) const {
  Tensor<T> out = input;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>&,
                            const LayerCache&, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor<T> g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(input[i] > T(0))) g[i] = T(0);
  }
  return g;
}

// ---------------------------------------------------------------- flatten

template <typename T>
std::vector<int> Flatten<T>::output_shape(const std::vector<int>& in, int) const {
  if (in.empty()) fail(ErrorKind::Shape, "flatten on scalar");
  int f = 1;
  for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
  return {in[0], f};
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& input, const Tensor<T>*, LayerCache*) const {
  Tensor<T> out = input;
  out.reshape(output_shape(input.shape, 0));
  return out;
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>&,
                               const LayerCache&, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor<T> g = grad_output;
  g.reshape(input.shape);
  return g;
}

// ---------------------------------------------------------------- concat

template <typename T>
std::vector<int> ConcatCondition<T>::output_shape(const std::vector<int>& in, int side_width) const {
  if (in.size() != 2) fail(ErrorKind::Shape, "concat-condition expects [N, F]");
  return {in[0], in[1] + side_width};
}

template <typename T>
Tensor<T> ConcatCondition<T>::forward(const Tensor<T>& input, const Tensor<T>* side, LayerCache* cache) const {
  const int width = side != nullptr && side->rank() == 2 ? side->dim(1) : 0;
  if (width > 0 && side->dim(0) != input.dim(0)) fail(ErrorKind::Shape, "condition batch size mismatch");
  const int n = input.dim(0), f = input.dim(1);
  Tensor<T> out({n, f + width});
  for (int i = 0; i < n; ++i) {
    std::memcpy(out.ptr() + static_cast<std::size_t>(i) * (f + width), input.ptr() + static_cast<std::size_t>(i) * f,
                sizeof(T) * static_cast<std::size_t>(f));
    if (width > 0) {
      std::memcpy(out.ptr() + static_cast<std::size_t>(i) * (f + width) + f,
                  side->ptr() + static_cast<std::size_t>(i) * width, sizeof(T) * static_cast<std::size_t>(width));
    }
  }
  if (cache != nullptr) cache->side_width = width;
  return out;
}

template <typename T>
Tensor<T> ConcatCondition<T>::backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>&,
                                       const LayerCache&, bool need_input_grad) {
  if (!need_input_grad) return {};
  const int n = input.dim(0), f = input.dim(1);
  const int total = grad_output.dim(1);
  Tensor<T> g(input.shape);
  for (int i = 0; i < n; ++i) {
    std::memcpy(g.ptr() + static_cast<std::size_t>(i) * f, grad_output.ptr() + static_cast<std::size_t>(i) * total,
                sizeof(T) * static_cast<std::size_t>(f));
  }
  return g;
}

// ---------------------------------------------------------------- dense

template <typename T>
Dense<T>::Dense(int in_features, int out_features) : in_features_(in_features), out_features_(out_features) {
  if (in_features < 1 || out_features < 1) fail(ErrorKind::Shape, "dense widths must be positive");
  weight_.name = "dense.weight";
  weight_.value = Tensor<T>({out_features_, in_features_});
  weight_.grad = Tensor<T>({out_features_, in_features_});
  bias_.name = "dense.bias";
  bias_.value = Tensor<T>({out_features_});
  bias_.grad = Tensor<T>({out_features_});
}

template <typename T>
std::vector<int> Dense<T>::output_shape(const std::vector<int>& in, int) const {
  if (in.size() != 2 || in[1] != in_features_) {
    fail(ErrorKind::Shape, "dense expects [N, " + std::to_string(in_features_) + "], got " + shape_string(in));
  }
  return {in[0], out_features_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input, const Tensor<T>*, LayerCache*) const {
  Tensor<T> out(output_shape(input.shape, 0));
  const int n = input.dim(0);
  CMapM<T> x(input.ptr(), n, in_features_);
  CMapM<T> w(weight_.value.ptr(), out_features_, in_features_);
  MapM<T> y(out.ptr(), n, out_features_);
  y.noalias() = x * w.transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.ptr(), out_features_);
  y.rowwise() += b;
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_output, const Tensor<T>& input, const Tensor<T>&,
                             const LayerCache&, bool need_input_grad) {
  const int n = input.dim(0);
  if (grad_output.shape != std::vector<int>{n, out_features_}) fail(ErrorKind::Shape, "dense gradient shape mismatch");
  CMapM<T> x(input.ptr(), n, in_features_);
  CMapM<T> g(grad_output.ptr(), n, out_features_);
  MapM<T> dw(weight_.grad.ptr(), out_features_, in_features_);
  dw.noalias() += g.transpose() * x;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad.ptr(), out_features_);
  db += g.colwise().sum();
  if (!need_input_grad) return {};
  Tensor<T> gi(input.shape);
  CMapM<T> w(weight_.value.ptr(), out_features_, in_features_);
  MapM<T> dx(gi.ptr(), n, in_features_);
  dx.noalias() = g * w;
  return gi;
}

// ---------------------------------------------------------------- softmax

template <typename T>
Tensor<T> Softmax<T>::forward(const Tensor<T>& input, const Tensor<T>*, LayerCache*) const {
  if (input.rank() != 2) fail(ErrorKind::Shape, "softmax expects [N, K]");
  Tensor<T> out(input.shape);
  const int n = input.dim(0), k = input.dim(1);
  for (int i = 0; i < n; ++i) {
    const T* row = input.ptr() + static_cast<std::size_t>(i) * k;
    T* dst = out.ptr() + static_cast<std::size_t>(i) * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      dst[j] = std::exp(row[j] - mx);
      sum += static_cast<double>(dst[j]);
    }
    for (int j = 0; j < k; ++j) dst[j] = static_cast<T>(static_cast<double>(dst[j]) / sum);
  }
  return out;
}

template <typename T>
Tensor<T> Softmax<T>::backward(const Tensor<T>& grad_output, const Tensor<T>&, const Tensor<T>& output,
                               const LayerCache&, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor<T> g(output.shape);
  const int n = output.dim(0), k = output.dim(1);
  for (int i = 0; i < n; ++i) {
    const T* y = output.ptr() + static_cast<std::size_t>(i) * k;
    const T* go = grad_output.ptr() + static_cast<std::size_t>(i) * k;
    double dot = 0.0;
    for (int j = 0; j < k; ++j) dot += static_cast<double>(go[j]) * y[j];
    for (int j = 0; j < k; ++j) g[static_cast<std::size_t>(i) * k + j] = static_cast<T>(y[j] * (go[j] - dot));
  }
  return g;
}

#define POD_INSTANTIATE_LAYERS(T)                                                   \
  template class Conv<T>;                                                           \
  template class MaxPool<T>;                                                        \
  template class Relu<T>;                                                           \
  template class Flatten<T>;                                                        \
  template class ConcatCondition<T>;                                                \
  template class Dense<T>;                                                          \
  template class Softmax<T>;                                                        \
  template void kaiming_uniform<T>(Parameter<T>&, int, std::mt19937_64&);

POD_INSTANTIATE_LAYERS(float)
POD_INSTANTIATE_LAYERS(double)

#undef POD_INSTANTIATE_LAYERS

}  // namespace pod::nn
