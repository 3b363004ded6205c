#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/parallel.hpp"
#include "divid/core/random.hpp"
#include "divid/data/build.hpp"
#include "divid/data/manifest.hpp"
#include "divid/data/video.hpp"
#include "divid/detector/dataset.hpp"
#include "divid/diffusion/predictor.hpp"
#include "divid/diffusion/sampler.hpp"
#include "divid/dire/frame.hpp"
#include "divid/toy/distribution.hpp"

namespace divid::toy {

inline constexpr int kToyClipLength = 8;

struct ToyClip {
  std::string clip_id;
  data::Source source = data::Source::toy_real;
  data::Label label = data::Label::real;
  std::vector<Tensor> frames;  // HWC in [-1, 1], or DIRE maps in [0, 2] for the synthetic DIRE sets
};

struct ToyClipOptions {
  int clip_length = kToyClipLength;
  double drift = 0.05;
  diffusion::SamplerConfig sampler;  // used to generate fake frames
  std::uint64_t seed = 0;
  std::string prefix = "toy";
  data::Source real_source = data::Source::toy_real;
  data::Source fake_source = data::Source::toy_fake;
  std::uint64_t first_index = 0;  // offset into the real distribution's sample indices
};

namespace detail {

inline Tensor clamp_unit(Tensor t) {
  for (auto& v : t) v = std::clamp(v, -1.0f, 1.0f);
  return t;
}

}  // namespace detail

// Real clip: a distribution sample with per-frame pixel-space Gaussian drift.
inline ToyClip make_real_clip(const ToyDistribution& dist, std::uint64_t index, const ToyClipOptions& opt) {
  ToyClip clip{opt.prefix + "-real-" + std::to_string(index), opt.real_source, data::Label::real, {}};
  Rng rng = make_rng(opt.seed, 0x12ea1000ULL + index);
  Tensor frame = dist.sample(opt.first_index + index);
  for (int f = 0; f < opt.clip_length; ++f) {
    if (f > 0 && opt.drift > 0.0) {
      const Tensor n = gaussian_tensor<float>(frame.shape(), rng);
      for (std::size_t i = 0; i < frame.size(); ++i) frame[i] += static_cast<float>(opt.drift) * n[i];
      frame = detail::clamp_unit(std::move(frame));
    }
    clip.frames.push_back(frame);
  }
  return clip;
}

// Fake clip: frames sampled by the predictor from latents that drift on the unit-variance sphere,
// z_{f+1} = (z_f + drift * n) / sqrt(1 + drift^2).
inline ToyClip make_fake_clip(const diffusion::NoisePredictor& predictor, const diffusion::NoiseSchedule& schedule,
                              std::uint64_t index, const ToyClipOptions& opt) {
  ToyClip clip{opt.prefix + "-" + data::to_string(opt.fake_source) + "-" + std::to_string(index), opt.fake_source,
               data::Label::fake, {}};
  const auto info = predictor.info();
  const Shape shape{static_cast<std::size_t>(info.height > 0 ? info.height : kToySize),
                    static_cast<std::size_t>(info.width > 0 ? info.width : kToySize),
                    static_cast<std::size_t>(info.channels > 0 ? info.channels : kToyChannels)};
  Rng rng = make_rng(opt.seed, 0xfa4e0000ULL + index);
  const auto steps = opt.sampler.timesteps(schedule);
  Tensor z = gaussian_tensor<float>(shape, rng);
  const double norm = 1.0 / std::sqrt(1.0 + opt.drift * opt.drift);
  for (int f = 0; f < opt.clip_length; ++f) {
    if (f > 0 && opt.drift > 0.0) {
      const Tensor n = gaussian_tensor<float>(shape, rng);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>((z[i] + opt.drift * n[i]) * norm);
    }
    diffusion::SamplerConfig cfg = opt.sampler;
    cfg.seed = mix_seed(opt.seed, index * 1000 + static_cast<std::uint64_t>(f));
    clip.frames.push_back(
        detail::clamp_unit(diffusion::reconstruct(diffusion::LatentState{z, steps.back()}, predictor, schedule, cfg)));
  }
  return clip;
}

// Balanced clip set: n/2 fake clips (rounded down) and the rest real. Real clips first.
inline std::vector<ToyClip> make_toy_clips(const ToyDistribution& dist_real, const diffusion::NoisePredictor& predictor,
                                           const diffusion::NoiseSchedule& schedule, int n_clips,
                                           const ToyClipOptions& opt, int workers = 1) {
  if (n_clips < 0) throw UsageError("n_clips must be non-negative");
  if (opt.clip_length < 1) throw UsageError("clip_length must be positive");
  if (opt.drift < 0.0) throw UsageError("drift must be non-negative");
  const int n_fake = n_clips / 2;
  const int n_real = n_clips - n_fake;
  std::vector<ToyClip> clips(static_cast<std::size_t>(n_clips));
  parallel_for(clips.size(), predictor.info().shareable ? workers : 1, [&](std::size_t i, int) {
    clips[i] = static_cast<int>(i) < n_real
                   ? make_real_clip(dist_real, i, opt)
                   : make_fake_clip(predictor, schedule, i - static_cast<std::size_t>(n_real), opt);
  });
  return clips;
}

// ---- synthetic DIRE sets for detector checks ----

namespace detail {

inline void add_blob(Tensor& map, double cy, double cx, double sigma, double peak) {
  const std::size_t H = map.dim(0), W = map.dim(1), C = map.dim(2);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      const auto v = static_cast<float>(peak * std::exp(-d2 / (2.0 * sigma * sigma)));
      for (std::size_t c = 0; c < C; ++c) map.at(y, x, c) = std::min(2.0f, map.at(y, x, c) + v);
    }
}

inline Tensor quiet_map(Rng& rng, int size) {
  std::uniform_real_distribution<float> u(0.0f, 0.05f);
  Tensor m(Shape{static_cast<std::size_t>(size), static_cast<std::size_t>(size), kToyChannels});
  for (auto& v : m) v = u(rng);
  return m;
}

}  // namespace detail

// Fake maps carry one to three bright blobs; real maps are near zero.
inline std::vector<ToyClip> make_separable_dire_set(int n_clips, int clip_length, std::uint64_t seed,
                                                    int size = kToySize) {
  std::vector<ToyClip> clips;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n_clips; ++i) {
    const bool fake = i % 2 == 1;
    ToyClip clip{"sep-" + std::to_string(i), fake ? data::Source::toy_fake : data::Source::toy_real,
                 fake ? data::Label::fake : data::Label::real, {}};
    Rng rng = make_rng(seed, 0x5e90000ULL + static_cast<std::uint64_t>(i));
    for (int f = 0; f < clip_length; ++f) {
      Tensor m = detail::quiet_map(rng, size);
      if (fake) {
        const int blobs = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
        for (int b = 0; b < blobs; ++b)
          detail::add_blob(m, unit(rng) * (size - 1), unit(rng) * (size - 1), 1.5 + 1.5 * unit(rng),
                           1.2 + 0.7 * unit(rng));
      }
      clip.frames.push_back(std::move(m));
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

// Every frame holds one blob at a low or high level with equal marginal odds in both classes. Real
// clips keep one level throughout; fake clips alternate. Only the frame-to-frame dynamics separate
// the classes.
inline std::vector<ToyClip> make_temporal_dire_set(int n_clips, int clip_length, std::uint64_t seed,
                                                   int size = kToySize, double low = 0.5, double high = 1.5) {
  std::vector<ToyClip> clips;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n_clips; ++i) {
    const bool fake = i % 2 == 1;
    ToyClip clip{"tmp-" + std::to_string(i), fake ? data::Source::toy_fake : data::Source::toy_real,
                 fake ? data::Label::fake : data::Label::real, {}};
    Rng rng = make_rng(seed, 0x7e390000ULL + static_cast<std::uint64_t>(i));
    bool level_high = (i / 2) % 2 == 1;
    for (int f = 0; f < clip_length; ++f) {
      Tensor m = detail::quiet_map(rng, size);
      const double peak = (level_high ? high : low) + 0.1 * (unit(rng) - 0.5);
      detail::add_blob(m, 4.0 + unit(rng) * (size - 9), 4.0 + unit(rng) * (size - 9), 2.5, peak);
      clip.frames.push_back(std::move(m));
      if (fake) level_high = !level_high;
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

// Detector inputs for DIRE-map clips (dire_only fusion).
inline std::vector<detector::ClipInputs> dire_clip_inputs(const std::vector<ToyClip>& clips) {
  std::vector<detector::ClipInputs> out;
  for (const auto& c : clips) {
    detector::ClipInputs in{c.clip_id, c.source, c.label, {}};
    for (const auto& m : c.frames) in.fused.push_back(detector::fuse_inputs(nullptr, &m, detector::FusionMode::dire_only));
    out.push_back(std::move(in));
  }
  return out;
}

// ---- on-disk datasets ----

// Writes frames as PNG under <root>/<source>/<label>/<clip_id>/ and appends one record per clip.
// Paths in the records are relative to `manifest.base_dir`.
inline void write_toy_clips(const std::vector<ToyClip>& clips, data::Split split, data::DatasetManifest& manifest,
                            const std::string& config_digest, double fps = 8.0) {
  namespace fs = std::filesystem;
  for (const auto& clip : clips) {
    if (clip.frames.empty()) throw UsageError("toy clip '" + clip.clip_id + "' has no frames");
    const fs::path rel = fs::path(data::to_string(clip.source)) / data::to_string(clip.label) / clip.clip_id;
    fs::create_directories(manifest.base_dir / rel);
    data::ClipRecord rec;
    rec.clip_id = clip.clip_id;
    rec.source = clip.source;
    rec.label = clip.label;
    rec.split = split;
    rec.fps = fps;
    rec.source_width = static_cast<int>(clip.frames.front().dim(1));
    rec.source_height = static_cast<int>(clip.frames.front().dim(0));
    rec.config_digest = config_digest;
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      const fs::path p = rel / data::frame_name(f);
      data::save_frame(dire::to_raw_frame(clip.frames[f], static_cast<int>(f)), (manifest.base_dir / p).string());
      rec.frame_paths.push_back(p.generic_string());
    }
    rec.frame_count = static_cast<int>(rec.frame_paths.size());
    data::validate(rec);
    manifest.entries.push_back(std::move(rec));
  }
}

}  // namespace divid::toy
