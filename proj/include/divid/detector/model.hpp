#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/tensor.hpp"
#include "divid/detector/backbone.hpp"
#include "divid/detector/lstm.hpp"
#include "divid/nn/checkpoint.hpp"

namespace divid::detector {

enum class FusionMode { dire_only, rgb_only, dire_plus_rgb };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::dire_only:
      return "dire";
    case FusionMode::rgb_only:
      return "rgb";
    case FusionMode::dire_plus_rgb:
      return "dire+rgb";
  }
  return "?";
}

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "dire") return FusionMode::dire_only;
  if (s == "rgb") return FusionMode::rgb_only;
  if (s == "dire+rgb") return FusionMode::dire_plus_rgb;
  throw UsageError("unknown fusion mode '" + s + "' (expected dire, rgb or dire+rgb)");
}

inline int fusion_channels(FusionMode m) { return m == FusionMode::dire_plus_rgb ? 6 : 3; }
inline bool needs_dire(FusionMode m) { return m != FusionMode::rgb_only; }
inline bool needs_rgb(FusionMode m) { return m != FusionMode::dire_only; }

// Backbone input for one frame. DIRE in [0, 2] is shifted to [-1, 1]; the fused layout is
// [rgb channels | dire channels]. `dire` may be null for rgb_only and `rgb` for dire_only.
inline Tensor fuse_inputs(const Tensor* rgb, const Tensor* dire, FusionMode mode) {
  auto normalized = [](const Tensor& d) {
    Tensor out(d.shape());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i] - 1.0f;
    return out;
  };
  if (needs_rgb(mode) && !rgb) throw UsageError("fusion mode " + to_string(mode) + " needs RGB frames");
  if (needs_dire(mode) && !dire) throw UsageError("fusion mode " + to_string(mode) + " needs DIRE maps");
  switch (mode) {
    case FusionMode::rgb_only:
      return *rgb;
    case FusionMode::dire_only:
      return normalized(*dire);
    case FusionMode::dire_plus_rgb: {
      require_same_shape(*rgb, *dire, "fuse_inputs");
      if (rgb->rank() != 3) throw UsageError("fuse_inputs: expected HWC frames");
      const std::size_t H = rgb->dim(0), W = rgb->dim(1), C = rgb->dim(2);
      Tensor out(Shape{H, W, 2 * C});
      for (std::size_t p = 0; p < H * W; ++p)
        for (std::size_t c = 0; c < C; ++c) {
          out[p * 2 * C + c] = (*rgb)[p * C + c];
          out[p * 2 * C + C + c] = (*dire)[p * C + c] - 1.0f;
        }
      return out;
    }
  }
  throw UsageError("unreachable fusion mode");
}

// Stacks HWC frames into an NHWC batch.
template <typename T>
BasicTensor<T> stack_frames(const std::vector<const BasicTensor<T>*>& frames) {
  if (frames.empty()) throw UsageError("stack_frames: no frames");
  Shape shape = frames.front()->shape();
  shape.insert(shape.begin(), frames.size());
  BasicTensor<T> out(shape);
  const std::size_t n = frames.front()->size();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require_same_shape(*frames[i], *frames.front(), "stack_frames");
    std::copy(frames[i]->begin(), frames[i]->end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

struct DetectorConfig {
  FusionMode fusion = FusionMode::dire_only;
  BackboneConfig backbone;
  int hidden_size = kDefaultFeatureDim;
  int input_size = 256;  // square frame side for RGB-only inputs
};

inline nlohmann::json to_json(const DetectorConfig& c) {
  return {{"fusion", to_string(c.fusion)}, {"backbone", to_json(c.backbone)}, {"hidden_size", c.hidden_size},
          {"input_size", c.input_size}};
}

inline DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig c;
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.backbone = backbone_config_from_json(j.at("backbone"));
  c.hidden_size = j.at("hidden_size").get<int>();
  c.input_size = j.value("input_size", 256);
  return c;
}

// CNN backbone + frame head, plus the LSTM temporal head once phase two has run.
class DetectorModel {
 public:
  DetectorModel() = default;
  explicit DetectorModel(DetectorConfig cfg) : cfg_(fix_channels(cfg)), backbone(cfg_.backbone) {
    temporal = SequenceHead<float>(cfg_.backbone.feature_dim, cfg_.hidden_size);
  }

  const DetectorConfig& config() const { return cfg_; }
  FusionMode fusion() const { return cfg_.fusion; }

  void init(Rng& rng) {
    backbone.init(rng);
    temporal.init(rng);
  }

  // Features for a stack of fused frames ([N, H, W, C]) -> [N, F].
  Tensor features(const Tensor& batch) const { return backbone.features(batch); }

  std::vector<float> frame_logits(const std::vector<Tensor>& fused) const {
    std::vector<const Tensor*> ptrs;
    for (const auto& f : fused) ptrs.push_back(&f);
    const Tensor logits = backbone.frame_logits(features(stack_frames(ptrs)));
    return std::vector<float>(logits.begin(), logits.end());
  }

  // Per-frame logits of the temporal head over one ordered clip, starting from a zero state.
  std::vector<float> sequence_forward(const std::vector<Tensor>& fused) const {
    if (fused.empty()) throw UsageError("sequence_forward: empty clip");
    std::vector<const Tensor*> ptrs;
    for (const auto& f : fused) ptrs.push_back(&f);
    const Tensor phi = features(stack_frames(ptrs));
    const auto F = static_cast<Eigen::Index>(phi.dim(1));
    std::vector<RowMat<float>> steps;
    for (std::size_t t = 0; t < fused.size(); ++t) {
      steps.emplace_back(Eigen::Map<const RowMat<float>>(phi.data() + t * phi.dim(1), 1, F));
    }
    const RowMat<float> logits = sequence_logits(steps, temporal);
    return std::vector<float>(logits.data(), logits.data() + logits.size());
  }

  // Fake-probabilities per frame: temporal head when trained, frame head otherwise.
  std::vector<float> predict(const std::vector<Tensor>& fused) const {
    auto logits = has_temporal_head ? sequence_forward(fused) : frame_logits(fused);
    for (auto& v : logits) v = nn::sigmoid(v);
    return logits;
  }

  std::string architecture() const { return has_temporal_head ? "CNN+LSTM" : "CNN"; }

  std::vector<nn::Param<float>*> params() {
    auto ps = backbone.params();
    for (auto* p : temporal.params()) ps.push_back(p);
    return ps;
  }

  void save(const std::filesystem::path& dir, nlohmann::json extra = {}) {
    nlohmann::json cfg = extra.is_null() ? nlohmann::json::object() : extra;
    cfg["model"] = to_json(cfg_);
    cfg["phase"] = has_temporal_head ? "lstm" : "cnn";
    nn::save_checkpoint(dir, has_temporal_head ? params() : backbone.params(), cfg);
  }

  // A CNN-phase checkpoint carries no temporal weights; those are freshly initialised from `seed`.
  static DetectorModel load(const std::filesystem::path& dir, std::uint64_t seed = 0) {
    const auto cfg = nn::read_checkpoint_config(dir);
    DetectorModel m(detector_config_from_json(cfg.at("model")));
    m.has_temporal_head = cfg.value("phase", "cnn") == "lstm";
    if (!m.has_temporal_head) {
      Rng rng = make_rng(seed);
      m.temporal.init(rng);
    }
    nn::load_checkpoint(dir, m.has_temporal_head ? m.params() : m.backbone.params());
    return m;
  }

  static DetectorConfig fix_channels(DetectorConfig c) {
    c.backbone.in_channels = fusion_channels(c.fusion);
    return c;
  }

 private:
  DetectorConfig cfg_;

 public:
  CnnBackbone<float> backbone;
  SequenceHead<float> temporal;
  bool has_temporal_head = false;
};

}  // namespace divid::detector
