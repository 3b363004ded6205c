#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/parallel.hpp"
#include "divid/core/tensor.hpp"
#include "divid/diffusion/predictor.hpp"
#include "divid/diffusion/sampler.hpp"
#include "divid/dire/frame.hpp"

namespace divid::dire {

// |x0 - R(I(x0))| for one frame, values in [0, 2].
struct DireMap {
  Tensor values;
  int total_steps = 0;
  int ddim_steps = 0;
  int frame_index = 0;
};

struct DireSequence {
  std::string clip_id;
  std::vector<DireMap> maps;
};

// Reconstruction of x0 through the deterministic inversion/reconstruction pair, clamped to the
// pixel range.
template <typename T>
BasicTensor<T> invert_reconstruct(const BasicTensor<T>& x0, const diffusion::BasicNoisePredictor<T>& predictor,
                                  const diffusion::NoiseSchedule& schedule, const diffusion::SamplerConfig& config) {
  if (config.eta != 0.0) throw UsageError("DIRE requires a deterministic sampler (eta = 0)");
  const auto noised = diffusion::invert(x0, predictor, schedule, config);
  BasicTensor<T> recon = diffusion::reconstruct(noised, predictor, schedule, config);
  for (auto& v : recon) v = std::clamp(v, T(-1), T(1));
  return recon;
}

template <typename T>
BasicTensor<T> dire_values(const BasicTensor<T>& x0, const BasicTensor<T>& reconstruction) {
  require_same_shape(x0, reconstruction, "dire");
  BasicTensor<T> out(x0.shape());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = std::abs(x0[i] - reconstruction[i]);
  return out;
}

template <typename T>
BasicTensor<T> dire_values(const BasicTensor<T>& x0, const diffusion::BasicNoisePredictor<T>& predictor,
                           const diffusion::NoiseSchedule& schedule, const diffusion::SamplerConfig& config) {
  return dire_values(x0, invert_reconstruct(x0, predictor, schedule, config));
}

inline void check_native_resolution(const FrameTensor& frame, const diffusion::PredictorInfo& info) {
  if (info.height > 0 && (frame.height() != info.height || frame.width() != info.width)) {
    throw FrameError(ErrorKind::usage, frame.frame_index,
                     "frame is " + std::to_string(frame.height()) + "x" + std::to_string(frame.width()) +
                         " but predictor '" + info.name + "' expects " + std::to_string(info.height) + "x" +
                         std::to_string(info.width));
  }
  if (info.channels > 0 && frame.channels() != info.channels) {
    throw FrameError(ErrorKind::usage, frame.frame_index, "channel count does not match predictor");
  }
}

inline DireMap compute_dire(const FrameTensor& frame, const diffusion::NoisePredictor& predictor,
                            const diffusion::NoiseSchedule& schedule, const diffusion::SamplerConfig& config) {
  check_native_resolution(frame, predictor.info());
  try {
    return DireMap{dire_values(frame.pixels, predictor, schedule, config), schedule.total_steps(), config.ddim_steps,
                   frame.frame_index};
  } catch (const FrameError&) {
    throw;
  } catch (const Error& e) {
    throw FrameError(e.kind(), frame.frame_index, e.what());
  }
}

// Frames are processed independently, optionally on several workers. `predictors` holds either one
// shareable predictor or one replica per worker.
inline DireSequence compute_clip_dire(const std::string& clip_id, const std::vector<FrameTensor>& frames,
                                      const std::vector<const diffusion::NoisePredictor*>& predictors,
                                      const diffusion::NoiseSchedule& schedule,
                                      const diffusion::SamplerConfig& config, int workers = 1) {
  if (frames.empty()) throw UsageError("clip '" + clip_id + "' has no frames");
  if (predictors.empty()) throw UsageError("no predictor supplied");
  if (predictors.size() == 1 && !predictors[0]->info().shareable) workers = 1;
  workers = std::min<int>(workers, predictors.size() == 1 ? workers : static_cast<int>(predictors.size()));

  DireSequence seq{clip_id, std::vector<DireMap>(frames.size())};
  parallel_for(frames.size(), workers, [&](std::size_t i, int w) {
    const auto* p = predictors.size() == 1 ? predictors[0] : predictors[static_cast<std::size_t>(w)];
    seq.maps[i] = compute_dire(frames[i], *p, schedule, config);
  });
  return seq;
}

inline DireSequence compute_clip_dire(const std::string& clip_id, const std::vector<FrameTensor>& frames,
                                      const diffusion::NoisePredictor& predictor,
                                      const diffusion::NoiseSchedule& schedule,
                                      const diffusion::SamplerConfig& config, int workers = 1) {
  return compute_clip_dire(clip_id, frames, std::vector<const diffusion::NoisePredictor*>{&predictor}, schedule,
                           config, workers);
}

// Stacks a sequence into an [F, H, W, C] tensor (the on-disk layout).
inline Tensor stack_maps(const DireSequence& seq) {
  if (seq.maps.empty()) return Tensor(Shape{0});
  Shape shape = seq.maps.front().values.shape();
  shape.insert(shape.begin(), seq.maps.size());
  Tensor out(shape);
  std::size_t offset = 0;
  for (const auto& m : seq.maps) {
    require_same_shape(m.values, seq.maps.front().values, "stack_maps");
    std::copy(m.values.begin(), m.values.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += m.values.size();
  }
  return out;
}

inline DireSequence unstack_maps(const std::string& clip_id, const Tensor& stacked, int total_steps = 0,
                                 int ddim_steps = 0) {
  if (stacked.rank() != 4) throw DataError("DIRE tensor for clip '" + clip_id + "' must be rank 4");
  DireSequence seq{clip_id, {}};
  const Shape frame_shape(stacked.shape().begin() + 1, stacked.shape().end());
  const std::size_t n = shape_numel(frame_shape);
  for (std::size_t f = 0; f < stacked.dim(0); ++f) {
    std::vector<float> v(stacked.begin() + static_cast<std::ptrdiff_t>(f * n),
                         stacked.begin() + static_cast<std::ptrdiff_t>((f + 1) * n));
    seq.maps.push_back(DireMap{Tensor(frame_shape, std::move(v)), total_steps, ddim_steps, static_cast<int>(f)});
  }
  return seq;
}

}  // namespace divid::dire
