#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"
#include "divid/detector/model.hpp"
#include "divid/detector/train.hpp"
#include "divid/diffusion/settings.hpp"

namespace divid::cli {

namespace fs = std::filesystem;

inline constexpr const char* kHomeVariable = "DIVID_HOME";

// Resolved settings shared by every subcommand. Built from defaults, then the config file, then flags.
struct RunConfig {
  diffusion::DiffusionSettings diffusion;
  std::string fusion = "dire";
  std::string phase = "cnn";
  int batch_size = 128;
  int seq_len = data::kDefaultSequenceLength;
  int workers = 1;
  int epochs = 1;
  double lr = 1e-4;
  std::string predictor = "toy";
  std::string locator;
  int feature_dim = detector::kDefaultFeatureDim;
  int hidden_size = detector::kDefaultFeatureDim;
  int stem_width = 16;
  int stage_width = 32;
  int input_size = 256;

  std::uint64_t seed() const { return diffusion.seed; }

  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << diffusion.canonical() << "fusion = " << fusion << "\nphase = " << phase << "\nbatch_size = " << batch_size
       << "\nseq_len = " << seq_len << "\nepochs = " << epochs << "\nlr = " << lr << "\npredictor = " << predictor
       << "\nlocator = " << locator << "\nfeature_dim = " << feature_dim << "\nhidden_size = " << hidden_size
       << "\nstem_width = " << stem_width << "\nstage_width = " << stage_width << "\ninput_size = " << input_size
       << '\n';
    return os.str();
  }

  std::string digest() const { return digest_of(canonical()); }

  detector::DetectorConfig detector() const {
    detector::DetectorConfig c;
    c.fusion = detector::parse_fusion(fusion);
    c.backbone.stem_width = stem_width;
    c.backbone.stage_width = stage_width;
    c.backbone.feature_dim = feature_dim;
    c.hidden_size = hidden_size;
    c.input_size = input_size;
    return detector::DetectorModel::fix_channels(c);
  }

  detector::TrainConfig train(detector::Phase p) const {
    detector::TrainConfig t;
    t.phase = p;
    t.batch_size = batch_size;
    t.seq_len = seq_len;
    t.epochs = epochs;
    t.seed = seed();
    t.adam.lr = lr;
    return t;
  }

  void validate() const {
    detector::parse_fusion(fusion);
    detector::parse_phase(phase);
    if (batch_size < 1) throw UsageError("batch_size must be positive");
    if (seq_len < 1) throw UsageError("seq_len must be positive");
    if (workers < 1) throw UsageError("workers must be positive");
    if (epochs < 0) throw UsageError("epochs must be non-negative");
    if (!(lr > 0.0)) throw UsageError("lr must be positive");
    if (feature_dim < 1 || hidden_size < 1 || stem_width < 1 || stage_width < 1 || input_size < 1) {
      throw UsageError("model dimensions must be positive");
    }
  }
};

// Applies a `key = value` config file. Unknown keys are an error.
inline void apply_config_stream(RunConfig& cfg, std::istream& in, const std::string& origin) {
  auto rest = diffusion::apply_settings(diffusion::parse_key_values(in, origin), cfg.diffusion);
  auto take = [&rest](const char* key) -> std::optional<std::string> {
    auto it = rest.find(key);
    if (it == rest.end()) return std::nullopt;
    std::string v = it->second;
    rest.erase(it);
    return v;
  };
  try {
    if (auto v = take("fusion")) cfg.fusion = *v;
    if (auto v = take("phase")) cfg.phase = *v;
    if (auto v = take("batch_size")) cfg.batch_size = std::stoi(*v);
    if (auto v = take("seq_len")) cfg.seq_len = std::stoi(*v);
    if (auto v = take("workers")) cfg.workers = std::stoi(*v);
    if (auto v = take("epochs")) cfg.epochs = std::stoi(*v);
    if (auto v = take("lr")) cfg.lr = std::stod(*v);
    if (auto v = take("predictor")) cfg.predictor = *v;
    if (auto v = take("locator")) cfg.locator = *v;
    if (auto v = take("feature_dim")) cfg.feature_dim = std::stoi(*v);
    if (auto v = take("hidden_size")) cfg.hidden_size = std::stoi(*v);
    if (auto v = take("stem_width")) cfg.stem_width = std::stoi(*v);
    if (auto v = take("stage_width")) cfg.stage_width = std::stoi(*v);
    if (auto v = take("input_size")) cfg.input_size = std::stoi(*v);
  } catch (const std::logic_error& e) {
    throw UsageError(origin + ": malformed numeric value: " + e.what());
  }
  if (!rest.empty()) throw UsageError(origin + ": unknown key '" + rest.begin()->first + "'");
}

inline void apply_config_file(RunConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  apply_config_stream(cfg, in, path.string());
}

// Artifact root: $DIVID_HOME when set, else ./divid_home.
inline fs::path artifact_root() {
  const char* home = std::getenv(kHomeVariable);
  return home && *home ? fs::path(home) : fs::path("divid_home");
}

}  // namespace divid::cli
