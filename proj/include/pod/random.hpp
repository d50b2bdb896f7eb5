#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

namespace pod {

// The std distributions are implementation-defined; these helpers keep
// seeded streams identical across standard libraries.

/// Uniform integer in [0, n) by rejection sampling.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return r % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent child seed for stream `index` of a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const std::uint64_t> weights) {
    cdf_.reserve(weights.size());
    double acc = 0.0;
    for (auto w : weights) {
      acc += static_cast<double>(w);
      cdf_.push_back(acc);
    }
    for (auto& c : cdf_) c /= acc;
  }

  int operator()(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    for (std::size_t k = 0; k < cdf_.size(); ++k) {
      if (u < cdf_[k]) return static_cast<int>(k);
    }
    // Only reached through rounding at the top of the cdf.
    for (std::size_t k = cdf_.size(); k-- > 0;) {
      if (k == 0 || cdf_[k] > cdf_[k - 1]) return static_cast<int>(k);
    }
    return 0;
  }

 private:
  std::vector<double> cdf_;
};

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void add(T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    add_bytes(buf, sizeof(T));
  }
  void add(std::string_view s) {
    add(static_cast<std::uint64_t>(s.size()));
    add_bytes(s.data(), s.size());
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace pod
