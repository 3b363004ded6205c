#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"
#include "divid/data/manifest.hpp"

namespace divid::data {

enum class BatchMode { frame, sequence };

inline constexpr int kDefaultSequencesPerBatch = 32;
inline constexpr int kDefaultSequenceLength = 4;

struct FrameRef {
  std::size_t clip = 0;  // index into the clip list given to make_batches
  int frame = 0;
  bool operator==(const FrameRef&) const = default;
};

// `length` consecutive frames of one clip starting at `start`.
struct SequenceRef {
  std::size_t clip = 0;
  int start = 0;
  int length = 0;
  bool operator==(const SequenceRef&) const = default;
};

struct Batch {
  std::vector<FrameRef> frames;
  std::vector<SequenceRef> sequences;

  std::size_t frame_count() const {
    std::size_t n = frames.size();
    for (const auto& s : sequences) n += static_cast<std::size_t>(s.length);
    return n;
  }
  bool operator==(const Batch&) const = default;
};

struct BatchPlan {
  std::vector<Batch> batches;
  std::vector<std::string> warnings;
};

// One epoch of batches. Frame mode shuffles every frame of every clip; sequence mode shuffles the
// non-overlapping seq_len windows of each clip (a window never crosses a clip boundary). The last
// batch may be short.
inline BatchPlan make_batches(const std::vector<int>& clip_lengths, BatchMode mode, int batch_size, int seq_len,
                              std::uint64_t seed, std::uint64_t epoch = 0) {
  if (batch_size < 1) throw UsageError("batch_size must be positive");
  if (mode == BatchMode::sequence && seq_len < 1) throw UsageError("seq_len must be positive");
  BatchPlan plan;
  std::mt19937_64 rng(mix_seed(seed, 0xba7c0000ULL + epoch));

  if (mode == BatchMode::frame) {
    std::vector<FrameRef> all;
    for (std::size_t c = 0; c < clip_lengths.size(); ++c)
      for (int f = 0; f < clip_lengths[c]; ++f) all.push_back({c, f});
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t i = 0; i < all.size(); i += static_cast<std::size_t>(batch_size)) {
      Batch b;
      b.frames.assign(all.begin() + static_cast<std::ptrdiff_t>(i),
                      all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), i + static_cast<std::size_t>(batch_size))));
      plan.batches.push_back(std::move(b));
    }
    return plan;
  }

  std::vector<SequenceRef> windows;
  for (std::size_t c = 0; c < clip_lengths.size(); ++c) {
    if (clip_lengths[c] < seq_len) {
      plan.warnings.push_back("clip " + std::to_string(c) + " has " + std::to_string(clip_lengths[c]) +
                              " frames, shorter than seq_len " + std::to_string(seq_len) + "; skipped");
      continue;
    }
    for (int s = 0; s + seq_len <= clip_lengths[c]; s += seq_len) windows.push_back({c, s, seq_len});
  }
  std::shuffle(windows.begin(), windows.end(), rng);
  for (std::size_t i = 0; i < windows.size(); i += static_cast<std::size_t>(batch_size)) {
    Batch b;
    b.sequences.assign(windows.begin() + static_cast<std::ptrdiff_t>(i),
                       windows.begin() + static_cast<std::ptrdiff_t>(std::min(windows.size(), i + static_cast<std::size_t>(batch_size))));
    plan.batches.push_back(std::move(b));
  }
  return plan;
}

inline BatchPlan make_batches(const std::vector<const ClipRecord*>& clips, BatchMode mode, int batch_size,
                              int seq_len, std::uint64_t seed, std::uint64_t epoch = 0) {
  std::vector<int> lengths;
  lengths.reserve(clips.size());
  for (const auto* c : clips) lengths.push_back(c->frame_count);
  return make_batches(lengths, mode, batch_size, seq_len, seed, epoch);
}

}  // namespace divid::data
