#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/nn/layers.hpp"

namespace divid::detector {

inline constexpr int kDefaultFeatureDim = 2048;

struct BackboneConfig {
  int in_channels = 3;
  int stem_width = 16;
  int stage_width = 32;
  int feature_dim = kDefaultFeatureDim;
};

inline nlohmann::json to_json(const BackboneConfig& c) {
  return {{"in_channels", c.in_channels}, {"stem_width", c.stem_width}, {"stage_width", c.stage_width},
          {"feature_dim", c.feature_dim}};
}

inline BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.stem_width = j.at("stem_width").get<int>();
  c.stage_width = j.at("stage_width").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  return c;
}

template <typename T>
struct BackboneCache {
  nn::Conv2dCache<T> stem, b1a, b1b, down, b2a, b2b;
  BasicTensor<T> stem_out, b1a_out, b1_out, down_out, b2a_out, b2_out;
  Shape pooled_from;
  nn::LinearCache<T> proj;
  BasicTensor<T> features;
};

// Residual CNN: stem conv, residual block, stride-2 conv, residual block, global average pool,
// then a ReLU projection to the feature vector phi. A linear frame head maps phi to one logit.
template <typename T>
class CnnBackbone {
 public:
  CnnBackbone() = default;
  explicit CnnBackbone(BackboneConfig cfg)
      : cfg_(cfg),
        stem_("backbone.stem", cfg.in_channels, cfg.stem_width),
        b1a_("backbone.block1.conv1", cfg.stem_width, cfg.stem_width),
        b1b_("backbone.block1.conv2", cfg.stem_width, cfg.stem_width),
        down_("backbone.down", cfg.stem_width, cfg.stage_width, 3, 2),
        b2a_("backbone.block2.conv1", cfg.stage_width, cfg.stage_width),
        b2b_("backbone.block2.conv2", cfg.stage_width, cfg.stage_width),
        proj_("backbone.proj", cfg.stage_width, cfg.feature_dim),
        frame_head("frame_head", cfg.feature_dim, 1) {
    if (cfg.in_channels != 3 && cfg.in_channels != 6) throw UsageError("backbone input must have 3 or 6 channels");
    if (cfg.feature_dim < 1 || cfg.stem_width < 1 || cfg.stage_width < 1) throw UsageError("bad backbone widths");
  }

  // A 6-channel stem starts from a 3-channel initialisation duplicated across both halves and
  // scaled by 1/2, so fused inputs initially respond like the average of the two streams.
  void init(Rng& rng) {
    if (cfg_.in_channels == 6) {
      nn::Conv2d<T> stem3("backbone.stem", 3, cfg_.stem_width);
      stem3.init(rng);
      stem_.weight.value = expand_stem_weights(stem3.weight.value, cfg_.stem_width);
    } else {
      stem_.init(rng);
    }
    b1a_.init(rng);
    b1b_.init(rng, 0.5);
    down_.init(rng);
    b2a_.init(rng);
    b2b_.init(rng, 0.5);
    proj_.init(rng);
    frame_head.init(rng, 0.5);
  }

  // [3*3*3, out] stem weights -> [3*3*6, out]: both input halves get w/2.
  static BasicTensor<T> expand_stem_weights(const BasicTensor<T>& w3, int out) {
    BasicTensor<T> w6(Shape{9 * 6, static_cast<std::size_t>(out)});
    for (std::size_t tap = 0; tap < 9; ++tap)
      for (std::size_t ci = 0; ci < 6; ++ci)
        for (std::size_t co = 0; co < static_cast<std::size_t>(out); ++co)
          w6[(tap * 6 + ci) * out + co] = w3[(tap * 3 + ci % 3) * out + co] / T(2);
    return w6;
  }

  const BackboneConfig& config() const { return cfg_; }

  // x: [N, H, W, C] -> phi: [N, feature_dim]
  BasicTensor<T> features(const BasicTensor<T>& x, BackboneCache<T>* k = nullptr) const {
    BackboneCache<T> local;
    BackboneCache<T>& c = k ? *k : local;
    c.stem_out = nn::relu(stem_.forward(x, &c.stem));
    c.b1a_out = nn::relu(b1a_.forward(c.stem_out, &c.b1a));
    c.b1_out = nn::relu(nn::add(b1b_.forward(c.b1a_out, &c.b1b), c.stem_out));
    c.down_out = nn::relu(down_.forward(c.b1_out, &c.down));
    c.b2a_out = nn::relu(b2a_.forward(c.down_out, &c.b2a));
    c.b2_out = nn::relu(nn::add(b2b_.forward(c.b2a_out, &c.b2b), c.down_out));
    c.pooled_from = c.b2_out.shape();
    c.features = nn::relu(proj_.forward(nn::global_avg_pool(c.b2_out), &c.proj));
    return c.features;
  }

  // Frame-head logits for [N, F] features.
  BasicTensor<T> frame_logits(const BasicTensor<T>& phi, nn::LinearCache<T>* cache = nullptr) const {
    return frame_head.forward(phi, cache);
  }

  // Accumulates backbone parameter gradients from dL/dphi.
  void backward(const BasicTensor<T>& dphi, BackboneCache<T>& c) {
    auto g = nn::relu_backward(dphi, c.features);
    g = proj_.backward(g, c.proj);
    g = nn::global_avg_pool_backward(g, c.pooled_from);
    // block 2
    auto d_sum2 = nn::relu_backward(g, c.b2_out);
    auto d_b2a = b2b_.backward(d_sum2, c.b2b);
    auto d_down = nn::add(b2a_.backward(nn::relu_backward(d_b2a, c.b2a_out), c.b2a), d_sum2);
    // downsample
    auto d_b1 = down_.backward(nn::relu_backward(d_down, c.down_out), c.down);
    // block 1
    auto d_sum1 = nn::relu_backward(d_b1, c.b1_out);
    auto d_b1a = b1b_.backward(d_sum1, c.b1b);
    auto d_stem = nn::add(b1a_.backward(nn::relu_backward(d_b1a, c.b1a_out), c.b1a), d_sum1);
    stem_.backward(nn::relu_backward(d_stem, c.stem_out), c.stem, false);
  }

  // Parameters of phi (without the frame head).
  std::vector<nn::Param<T>*> feature_params() {
    std::vector<nn::Param<T>*> ps;
    for (auto* layer : {&stem_, &b1a_, &b1b_, &down_, &b2a_, &b2b_})
      for (auto* p : layer->params()) ps.push_back(p);
    for (auto* p : proj_.params()) ps.push_back(p);
    return ps;
  }

  std::vector<nn::Param<T>*> params() {
    auto ps = feature_params();
    for (auto* p : frame_head.params()) ps.push_back(p);
    return ps;
  }

 private:
  BackboneConfig cfg_;
  nn::Conv2d<T> stem_, b1a_, b1b_, down_, b2a_, b2b_;
  nn::Linear<T> proj_;

 public:
  nn::Linear<T> frame_head;
};

}  // namespace divid::detector
