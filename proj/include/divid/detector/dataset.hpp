#pragma once

#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/data/manifest.hpp"
#include "divid/data/tensor_io.hpp"
#include "divid/data/video.hpp"
#include "divid/detector/model.hpp"
#include "divid/dire/dire.hpp"
#include "divid/dire/frame.hpp"

namespace divid::detector {

// One clip's detector inputs, already fused for the model's mode.
struct ClipInputs {
  std::string clip_id;
  data::Source source = data::Source::toy_real;
  data::Label label = data::Label::real;
  std::vector<Tensor> fused;

  float target() const { return label == data::Label::fake ? 1.0f : 0.0f; }
};

// Loads a clip's frames (and DIRE maps when the mode consumes them). RGB frames are preprocessed to
// the DIRE resolution, or to `resolution` when no DIRE is involved.
inline ClipInputs load_clip_inputs(const data::DatasetManifest& manifest, const data::ClipRecord& rec, FusionMode mode,
                                   dire::Resolution resolution) {
  ClipInputs out{rec.clip_id, rec.source, rec.label, {}};
  std::vector<Tensor> dire_maps;
  if (needs_dire(mode)) {
    if (!rec.dire_path) throw DataError("clip '" + rec.clip_id + "' has no extracted DIRE");
    const Tensor stacked = data::read_tensor<float>(manifest.resolve(*rec.dire_path).string());
    const auto seq = dire::unstack_maps(rec.clip_id, stacked);
    if (static_cast<int>(seq.maps.size()) != rec.frame_count) {
      throw DataError("clip '" + rec.clip_id + "': DIRE has " + std::to_string(seq.maps.size()) + " frames, clip has " +
                      std::to_string(rec.frame_count));
    }
    for (const auto& m : seq.maps) dire_maps.push_back(m.values);
    resolution = {static_cast<int>(stacked.dim(1)), static_cast<int>(stacked.dim(2))};
  }
  for (int i = 0; i < rec.frame_count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (needs_rgb(mode)) {
      const auto raw = data::load_frame(manifest.resolve(rec.frame_paths[idx]).string(), i);
      const auto frame = dire::preprocess_frame(raw, resolution);
      out.fused.push_back(fuse_inputs(&frame.pixels, needs_dire(mode) ? &dire_maps[idx] : nullptr, mode));
    } else {
      out.fused.push_back(fuse_inputs(nullptr, &dire_maps[idx], mode));
    }
  }
  return out;
}

// All clips of a split; every missing DIRE artifact is reported together.
inline std::vector<ClipInputs> load_split_inputs(const data::DatasetManifest& manifest, data::Split split, FusionMode mode,
                                                 dire::Resolution resolution) {
  const auto clips = manifest.split(split);
  if (needs_dire(mode)) {
    std::string missing;
    for (const auto* c : clips) {
      if (!c->dire_path || !std::filesystem::exists(manifest.resolve(*c->dire_path))) missing += " " + c->clip_id;
    }
    if (!missing.empty()) throw DataError("missing DIRE artifacts for clips:" + missing);
  }
  std::vector<ClipInputs> out;
  out.reserve(clips.size());
  for (const auto* c : clips) out.push_back(load_clip_inputs(manifest, *c, mode, resolution));
  return out;
}

}  // namespace divid::detector
