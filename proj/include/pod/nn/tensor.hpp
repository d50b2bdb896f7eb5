#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pod/error.hpp"

namespace pod::nn {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(element_count(shape), fill);
  }

  static std::size_t element_count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) fail(ErrorKind::Shape, "negative tensor extent");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const noexcept { return data.size(); }
  int dim(std::size_t axis) const { return shape.at(axis); }
  int rank() const noexcept { return static_cast<int>(shape.size()); }
  T* ptr() noexcept { return data.data(); }
  const T* ptr() const noexcept { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void reshape(std::vector<int> s) {
    if (element_count(s) != data.size()) fail(ErrorKind::Shape, "reshape changes element count");
    shape = std::move(s);
  }
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace pod::nn
