#pragma once

#include <string>
#include <vector>

#include "divid/core/parallel.hpp"
#include "divid/data/manifest.hpp"
#include "divid/detector/dataset.hpp"
#include "divid/detector/model.hpp"
#include "divid/eval/metrics.hpp"

namespace divid::eval {

// Per-frame fake probabilities for each clip; clips are independent and may be scored in parallel.
inline std::vector<ScoredClip> score_clips(const detector::DetectorModel& model,
                                           const std::vector<detector::ClipInputs>& clips, int workers = 1) {
  std::vector<ScoredClip> out(clips.size());
  parallel_for(clips.size(), workers, [&](std::size_t i, int) {
    const auto probs = model.predict(clips[i].fused);
    out[i] = ScoredClip{clips[i].clip_id, clips[i].source, clips[i].label, std::vector<double>(probs.begin(), probs.end())};
  });
  return out;
}

inline MetricsReport evaluate_clips(const detector::DetectorModel& model, const std::vector<detector::ClipInputs>& clips,
                                    int workers = 1) {
  return summarize(score_clips(model, clips, workers));
}

inline MetricsReport evaluate_split(const detector::DetectorModel& model, const data::DatasetManifest& manifest,
                                    data::Split split, int workers = 1) {
  const int side = model.config().input_size;
  const auto clips = detector::load_split_inputs(manifest, split, model.fusion(), {side, side});
  if (clips.empty()) throw DataError("split " + data::to_string(split) + " has no clips");
  return evaluate_clips(model, clips, workers);
}

}  // namespace divid::eval
