#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "divid/data/manifest.hpp"
#include "divid/diffusion/settings.hpp"
#include "divid/toy/clips.hpp"

namespace divid::toy {

struct ToyDatasetOptions {
  int train_clips = 24;
  int test_clips = 12;
  int out_clips_per_source = 4;  // per out-domain generator, half real
  int clip_length = kToyClipLength;
  double drift = 0.05;
  diffusion::DiffusionSettings settings;  // schedule and sampler for fake frames
  std::uint64_t seed = 0;
  int workers = 1;
};

// Out-domain surrogates: each stands in for an unseen generator by changing how fake frames are sampled.
struct OutDomainSource {
  data::Source fake;
  data::Source real;
  double eta;
  double ddim_scale;
  double drift_scale;
};

inline const std::vector<OutDomainSource>& out_domain_sources() {
  static const std::vector<OutDomainSource> s{
      {data::Source::gen2, data::Source::vidvrd, 1.0, 1.0, 1.0},
      {data::Source::pika, data::Source::vidvrd, 0.0, 0.5, 1.0},
      {data::Source::sora, data::Source::youtube, 0.5, 1.0, 3.0},
  };
  return s;
}

// Writes frames under `root` and returns the manifest (base_dir = root). train and test_in hold
// toy_real/toy_fake clips; test_out holds gen2/pika/sora surrogates with vidvrd/youtube reals.
inline data::DatasetManifest generate_toy_dataset(const diffusion::NoisePredictor& predictor, const fs::path& root,
                                                  const ToyDatasetOptions& opt) {
  if (opt.train_clips < 2 || opt.test_clips < 2) throw UsageError("toy dataset needs at least 2 clips per split");
  const auto schedule = opt.settings.schedule();
  data::DatasetManifest m;
  m.base_dir = root;
  const std::string digest = opt.settings.digest();
  const ToyDistribution dist{ToyKind::band_limited, opt.seed};

  ToyClipOptions base;
  base.clip_length = opt.clip_length;
  base.drift = opt.drift;
  base.sampler = opt.settings.sampler();
  base.seed = opt.seed;

  auto split = [&](data::Split s, const std::string& prefix, int n, std::uint64_t first, ToyClipOptions o) {
    o.prefix = prefix;
    o.first_index = first;
    o.seed = opt.seed + first;
    o.sampler.seed = o.seed;
    write_toy_clips(make_toy_clips(dist, predictor, schedule, n, o, opt.workers), s, m, digest);
  };
  split(data::Split::train, "train", opt.train_clips, 0, base);
  split(data::Split::test_in, "test", opt.test_clips, 100000, base);
  std::uint64_t first = 200000;
  for (const auto& src : out_domain_sources()) {
    if (opt.out_clips_per_source < 1) break;
    ToyClipOptions o = base;
    o.fake_source = src.fake;
    o.real_source = src.real;
    o.sampler.eta = src.eta;
    o.sampler.ddim_steps = std::max(1, static_cast<int>(opt.settings.ddim_steps * src.ddim_scale));
    o.drift = opt.drift * src.drift_scale;
    split(data::Split::test_out, "out-" + data::to_string(src.fake), opt.out_clips_per_source, first, o);
    first += 100000;
  }
  return m;
}

}  // namespace divid::toy
