#pragma once

#include <cstdint>
#include <random>

#include "divid/core/hash.hpp"
#include "divid/core/tensor.hpp"

namespace divid {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(mix_seed(seed, stream)); }

template <typename T = float>
BasicTensor<T> gaussian_tensor(const Shape& shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  BasicTensor<T> out(shape);
  for (auto& v : out) v = static_cast<T>(normal(rng));
  return out;
}

template <typename T = float>
BasicTensor<T> uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> uni(lo, hi);
  BasicTensor<T> out(shape);
  for (auto& v : out) v = static_cast<T>(uni(rng));
  return out;
}

}  // namespace divid
