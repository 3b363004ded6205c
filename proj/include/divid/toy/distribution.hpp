#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/core/tensor.hpp"

namespace divid::toy {

inline constexpr int kToySize = 16;
inline constexpr int kToyChannels = 3;

enum class ToyKind {
  band_limited,  // smooth low-frequency textures
  grating,       // oriented high-frequency stripes
};

inline std::string to_string(ToyKind k) { return k == ToyKind::band_limited ? "band_limited" : "grating"; }

inline ToyKind parse_toy_kind(const std::string& s) {
  if (s == "band_limited") return ToyKind::band_limited;
  if (s == "grating") return ToyKind::grating;
  throw UsageError("unknown toy distribution '" + s + "'");
}

// Synthetic 16x16x3 images in [-1, 1]. sample(i) depends only on (kind, seed, i).
struct ToyDistribution {
  ToyKind kind = ToyKind::band_limited;
  std::uint64_t seed = 0;
  int size = kToySize;
  int max_frequency = 2;          // band-limited: |kx|, |ky| <= max_frequency cycles per image
  double min_cycles = 4.0;        // grating frequency range, cycles per image
  double max_cycles = 7.0;

  Tensor sample(std::uint64_t index) const {
    Rng rng = make_rng(seed, 0x70790000ULL ^ (index * 0x9e3779b97f4a7c15ULL));
    return kind == ToyKind::band_limited ? band_limited(rng) : grating(rng);
  }

 private:
  Tensor band_limited(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    const int K = max_frequency;
    const int terms = (2 * K + 1) * (2 * K + 1);
    const double scale = 1.6 / std::sqrt(static_cast<double>(terms));
    // One luminance field plus a weaker per-channel colour field.
    std::vector<double> field(static_cast<std::size_t>(size * size * (1 + kToyChannels)), 0.0);
    for (int layer = 0; layer <= kToyChannels; ++layer) {
      const double amp = layer == 0 ? scale : 0.35 * scale;
      for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx) {
          const double a = amp * normal(rng);
          const double ph = phase(rng);
          for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
              field[static_cast<std::size_t>((layer * size + y) * size + x)] +=
                  a * std::cos(2.0 * M_PI * (kx * x + ky * y) / size + ph);
        }
    }
    Tensor out(Shape{static_cast<std::size_t>(size), static_cast<std::size_t>(size), kToyChannels});
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < kToyChannels; ++c) {
          const double v = field[static_cast<std::size_t>(y * size + x)] +
                           field[static_cast<std::size_t>(((c + 1) * size + y) * size + x)];
          out.at(y, x, c) = static_cast<float>(0.9 * std::tanh(v));
        }
    return out;
  }

  Tensor grating(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double cycles = min_cycles + (max_cycles - min_cycles) * unit(rng);
    const double theta = M_PI * unit(rng);
    const double phase = 2.0 * M_PI * unit(rng);
    double amp[kToyChannels];
    for (double& a : amp) a = (0.6 + 0.3 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    const double offset = 0.1 * (2.0 * unit(rng) - 1.0);
    Tensor out(Shape{static_cast<std::size_t>(size), static_cast<std::size_t>(size), kToyChannels});
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double s = std::cos(2.0 * M_PI * cycles * (x * std::cos(theta) + y * std::sin(theta)) / size + phase);
        for (int c = 0; c < kToyChannels; ++c) out.at(y, x, c) = static_cast<float>(offset + amp[c] * s);
      }
    return out;
  }
};

}  // namespace divid::toy
