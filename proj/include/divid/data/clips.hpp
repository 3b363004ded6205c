#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"

namespace divid::data {

inline constexpr int kDefaultClipLength = 25;

struct ClipWindow {
  std::size_t start = 0;
  std::size_t length = 0;
};

// Start of a contiguous `clip_length` window, uniform over the valid starts.
inline ClipWindow choose_clip_window(std::size_t total_frames, int clip_length, std::uint64_t seed) {
  if (clip_length < 1) throw UsageError("clip_length must be positive");
  if (total_frames < static_cast<std::size_t>(clip_length)) {
    throw DataError("video has " + std::to_string(total_frames) + " frames, shorter than clip length " +
                    std::to_string(clip_length));
  }
  const std::size_t last = total_frames - static_cast<std::size_t>(clip_length);
  std::mt19937_64 rng(mix_seed(seed, 0xc1));
  std::uniform_int_distribution<std::size_t> pick(0, last);
  return {pick(rng), static_cast<std::size_t>(clip_length)};
}

template <typename Frame>
std::vector<Frame> crop_clip(const std::vector<Frame>& frames, int clip_length, std::uint64_t seed) {
  const ClipWindow w = choose_clip_window(frames.size(), clip_length, seed);
  return std::vector<Frame>(frames.begin() + static_cast<std::ptrdiff_t>(w.start),
                            frames.begin() + static_cast<std::ptrdiff_t>(w.start + w.length));
}

// Per-clip crop seed: a dataset build is reproducible without any global ordering.
inline std::uint64_t clip_seed(const std::string& clip_id, std::uint64_t seed) { return fnv1a64(clip_id, seed ^ 0xcbf29ce484222325ULL); }

}  // namespace divid::data
