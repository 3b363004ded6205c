#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"
#include "divid/core/parallel.hpp"
#include "divid/data/manifest.hpp"
#include "divid/data/tensor_io.hpp"
#include "divid/data/video.hpp"
#include "divid/diffusion/predictor.hpp"
#include "divid/diffusion/settings.hpp"
#include "divid/dire/dire.hpp"
#include "divid/dire/frame.hpp"
#include "divid/toy/predictor.hpp"

namespace divid {

namespace fs = std::filesystem;

inline constexpr const char* kDireFile = "dire.dvtn";

// Registered predictors: "zero" (any resolution), "toy" (16x16x3, checkpoint directory) and "adm"
// (256x256x3, declared for external weights that this build cannot load).
inline diffusion::PredictorRegistry builtin_registry() {
  diffusion::PredictorRegistry r;
  r.add({"zero", 0, 0, 3, "", true}, [](const std::string&) {
    return std::make_unique<diffusion::ZeroPredictor<float>>();
  });
  r.add({"toy", toy::kToySize, toy::kToySize, toy::kToyChannels, "toy_predictor", true},
        [](const std::string& locator) -> std::unique_ptr<diffusion::NoisePredictor> {
          return std::make_unique<toy::ToyPredictor>(toy::ToyPredictor::load(locator));
        });
  r.add({"adm", 256, 256, 3, "adm256_uncond", true},
        [](const std::string& locator) -> std::unique_ptr<diffusion::NoisePredictor> {
          throw DataError("predictor 'adm' needs pretrained 256x256 weights at '" + locator +
                          "', which this build cannot load; register an adapter or use 'toy'");
        });
  return r;
}

struct ExtractOptions {
  diffusion::DiffusionSettings settings;
  std::string predictor = "toy";
  std::string locator;     // empty: the registry default
  int workers = 1;
  fs::path output_dir;     // empty: next to each clip's frames
  std::optional<data::Split> split;  // only this split when set
};

struct ExtractReport {
  int clips = 0;
  int frames = 0;
  std::string config_digest;
};

// Digest of everything that determines a DIRE artifact.
inline std::string extraction_digest(const ExtractOptions& opt) {
  return digest_of(opt.settings.canonical() + "predictor = " + opt.predictor + "\nlocator = " + opt.locator + "\n");
}

inline diffusion::NoiseSchedule checked_schedule(const diffusion::DiffusionSettings& s) {
  if (s.eta != 0.0) throw UsageError("DIRE extraction needs eta = 0 (deterministic inversion)");
  auto schedule = s.schedule();
  s.sampler().timesteps(schedule);
  return schedule;
}

// Computes one DIRE tensor per clip, writes it with a JSON sidecar and records its path and digest
// in the manifest.
inline ExtractReport extract_dire(data::DatasetManifest& manifest, const ExtractOptions& opt,
                                  const diffusion::PredictorRegistry& registry = builtin_registry()) {
  const auto schedule = checked_schedule(opt.settings);
  const auto sampler = opt.settings.sampler();
  const auto digest = extraction_digest(opt);
  const auto& entry = registry.entry(opt.predictor);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (!opt.split || manifest.entries[i].split == *opt.split) todo.push_back(i);

  const int workers = std::max(1, opt.workers);
  std::vector<std::unique_ptr<diffusion::NoisePredictor>> replicas;
  replicas.push_back(registry.create(opt.predictor, opt.locator));
  if (!replicas.front()->info().shareable)
    for (int w = 1; w < workers; ++w) replicas.push_back(registry.create(opt.predictor, opt.locator));
  const auto info = entry.info;

  std::vector<std::string> paths(todo.size());
  parallel_for(todo.size(), workers, [&](std::size_t k, int w) {
    const data::ClipRecord& rec = manifest.entries[todo[k]];
    const auto& predictor = *replicas[replicas.size() == 1 ? 0 : static_cast<std::size_t>(w)];
    std::vector<dire::FrameTensor> frames;
    for (int f = 0; f < rec.frame_count; ++f) {
      const auto raw = data::load_frame(manifest.resolve(rec.frame_paths[static_cast<std::size_t>(f)]).string(), f);
      dire::Resolution target{info.height, info.width};
      if (info.height <= 0) target = {std::min(raw.height, raw.width), std::min(raw.height, raw.width)};
      frames.push_back(dire::preprocess_frame(raw, target));
    }
    dire::DireSequence seq;
    try {
      seq = dire::compute_clip_dire(rec.clip_id, frames, predictor, schedule, sampler, 1);
    } catch (const Error& e) {
      throw Error(e.kind(), "clip '" + rec.clip_id + "': " + e.what());
    }
    fs::path dir = opt.output_dir.empty() ? manifest.resolve(rec.frame_paths.front()).parent_path()
                                          : opt.output_dir / rec.clip_id;
    fs::create_directories(dir);
    const fs::path file = dir / kDireFile;
    data::write_tensor(dire::stack_maps(seq), file.string());
    nlohmann::json side{{"clip_id", rec.clip_id},
                        {"config_digest", digest},
                        {"predictor", opt.predictor},
                        {"settings", opt.settings.canonical()},
                        {"frames", rec.frame_count}};
    std::ofstream(file.string() + ".json") << side.dump(2) << '\n';
    paths[k] = file.string();
  });

  ExtractReport report{static_cast<int>(todo.size()), 0, digest};
  for (std::size_t k = 0; k < todo.size(); ++k) {
    auto& rec = manifest.entries[todo[k]];
    const fs::path file(paths[k]);
    const auto rel = fs::relative(file, manifest.base_dir.empty() ? fs::path(".") : manifest.base_dir);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    rec.dire_path = inside ? rel.generic_string() : fs::absolute(file).generic_string();
    rec.dire_digest = digest;
    report.frames += rec.frame_count;
  }
  return report;
}

}  // namespace divid
