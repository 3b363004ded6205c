#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/data/batches.hpp"
#include "divid/detector/dataset.hpp"
#include "divid/detector/model.hpp"

namespace divid::detector {

enum class Phase { cnn, lstm };

inline std::string to_string(Phase p) { return p == Phase::cnn ? "cnn" : "lstm"; }

inline Phase parse_phase(const std::string& s) {
  if (s == "cnn") return Phase::cnn;
  if (s == "lstm") return Phase::lstm;
  throw UsageError("unknown phase '" + s + "' (expected cnn or lstm)");
}

struct TrainConfig {
  Phase phase = Phase::cnn;
  int batch_size = 128;  // frames (cnn) or sequences (lstm)
  int seq_len = data::kDefaultSequenceLength;
  int epochs = 1;
  long max_steps = 0;  // 0: no cap
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  bool freeze_backbone = true;
  std::string metrics_log;  // JSON Lines; empty disables
};

struct TrainResult {
  std::vector<double> losses;  // one per step
  long steps = 0;
  std::vector<std::string> warnings;

  double final_loss() const { return losses.empty() ? 0.0 : losses.back(); }
};

namespace detail {

class MetricsLog {
 public:
  MetricsLog(const std::string& path, Phase phase, std::uint64_t seed) : phase_(to_string(phase)), seed_(seed) {
    if (path.empty()) return;
    out_ = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*out_) throw DataError("cannot open metrics log " + path);
  }

  void write(long step, double loss, double lr) {
    if (!out_) return;
    nlohmann::json j{{"step", step}, {"phase", phase_}, {"loss", loss}, {"lr", lr}, {"seed", seed_}};
    *out_ << j.dump() << '\n';
    out_->flush();
  }

 private:
  std::unique_ptr<std::ofstream> out_;
  std::string phase_;
  std::uint64_t seed_;
};

inline void check_loss(double loss, long step, Phase phase) {
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss at step " + std::to_string(step) + " of phase " + to_string(phase));
  }
}

inline std::vector<int> clip_lengths(const std::vector<ClipInputs>& clips) {
  std::vector<int> lengths;
  for (const auto& c : clips) lengths.push_back(static_cast<int>(c.fused.size()));
  return lengths;
}

}  // namespace detail

// Phase one: frame-level fine-tuning of the backbone and frame head with per-frame BCE.
inline TrainResult train_cnn_phase(DetectorModel& model, const std::vector<ClipInputs>& clips, const TrainConfig& cfg) {
  if (clips.empty()) throw DataError("training split is empty");
  if (cfg.epochs < 0) throw UsageError("epochs must be non-negative");
  nn::Adam<float> opt(model.backbone.params(), cfg.adam);
  detail::MetricsLog log(cfg.metrics_log, Phase::cnn, cfg.seed);
  TrainResult result;
  const auto lengths = detail::clip_lengths(clips);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto plan = data::make_batches(lengths, data::BatchMode::frame, cfg.batch_size, cfg.seq_len, cfg.seed,
                                         static_cast<std::uint64_t>(epoch));
    for (const auto& batch : plan.batches) {
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) return result;
      std::vector<const Tensor*> frames;
      std::vector<float> targets;
      for (const auto& r : batch.frames) {
        frames.push_back(&clips[r.clip].fused[static_cast<std::size_t>(r.frame)]);
        targets.push_back(clips[r.clip].target());
      }
      opt.zero_grad();
      BackboneCache<float> cache;
      nn::LinearCache<float> head_cache;
      const Tensor phi = model.backbone.features(stack_frames(frames), &cache);
      const Tensor logits = model.backbone.frame_logits(phi, &head_cache);
      const auto n = static_cast<double>(targets.size());
      double loss = 0.0;
      Tensor dlogits(logits.shape());
      for (std::size_t i = 0; i < targets.size(); ++i) {
        loss += nn::bce_with_logit(static_cast<double>(logits[i]), static_cast<double>(targets[i]));
        dlogits[i] = static_cast<float>((nn::sigmoid(static_cast<double>(logits[i])) - targets[i]) / n);
      }
      loss /= n;
      detail::check_loss(loss, result.steps, Phase::cnn);
      model.backbone.backward(model.backbone.frame_head.backward(dlogits, head_cache), cache);
      opt.step();
      log.write(result.steps, loss, opt.lr());
      result.losses.push_back(loss);
      ++result.steps;
    }
  }
  return result;
}

// Phase two: LSTM + sequence head on seq_len windows. With a frozen backbone the features are
// computed once per clip; otherwise gradients flow back into the backbone.
inline TrainResult train_lstm_phase(DetectorModel& model, const std::vector<ClipInputs>& clips, const TrainConfig& cfg) {
  if (clips.empty()) throw DataError("training split is empty");
  if (cfg.epochs < 0) throw UsageError("epochs must be non-negative");
  const auto lengths = detail::clip_lengths(clips);
  auto first = data::make_batches(lengths, data::BatchMode::sequence, cfg.batch_size, cfg.seq_len, cfg.seed, 0);
  if (first.batches.empty()) {
    throw UsageError("no clip has at least seq_len=" + std::to_string(cfg.seq_len) + " frames");
  }

  auto trainable = model.temporal.params();
  if (!cfg.freeze_backbone)
    for (auto* p : model.backbone.feature_params()) trainable.push_back(p);
  nn::Adam<float> opt(trainable, cfg.adam);
  detail::MetricsLog log(cfg.metrics_log, Phase::lstm, cfg.seed);

  const auto F = static_cast<Eigen::Index>(model.config().backbone.feature_dim);
  std::vector<Tensor> clip_features;
  if (cfg.freeze_backbone) {
    for (const auto& c : clips) {
      std::vector<const Tensor*> ptrs;
      for (const auto& f : c.fused) ptrs.push_back(&f);
      clip_features.push_back(model.features(stack_frames(ptrs)));
    }
  }

  TrainResult result;
  result.warnings = first.warnings;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto plan = epoch == 0 ? first
                                 : data::make_batches(lengths, data::BatchMode::sequence, cfg.batch_size, cfg.seq_len,
                                                      cfg.seed, static_cast<std::uint64_t>(epoch));
    for (const auto& batch : plan.batches) {
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        model.has_temporal_head = true;
        return result;
      }
      const auto N = static_cast<Eigen::Index>(batch.sequences.size());
      const auto L = static_cast<Eigen::Index>(cfg.seq_len);
      opt.zero_grad();

      // Row n*L + t of `phi` is step t of sequence n.
      Tensor phi;
      BackboneCache<float> cache;
      if (cfg.freeze_backbone) {
        phi = Tensor(Shape{static_cast<std::size_t>(N * L), static_cast<std::size_t>(F)});
        for (Eigen::Index n = 0; n < N; ++n) {
          const auto& s = batch.sequences[static_cast<std::size_t>(n)];
          const auto& src = clip_features[s.clip];
          std::copy(src.begin() + static_cast<std::ptrdiff_t>(s.start) * F,
                    src.begin() + static_cast<std::ptrdiff_t>(s.start + s.length) * F,
                    phi.begin() + static_cast<std::ptrdiff_t>(n * L * F));
        }
      } else {
        std::vector<const Tensor*> frames;
        for (const auto& s : batch.sequences)
          for (int t = 0; t < s.length; ++t) frames.push_back(&clips[s.clip].fused[static_cast<std::size_t>(s.start + t)]);
        phi = model.backbone.features(stack_frames(frames), &cache);
      }

      std::vector<RowMat<float>> steps(static_cast<std::size_t>(L), RowMat<float>(N, F));
      for (Eigen::Index t = 0; t < L; ++t)
        for (Eigen::Index n = 0; n < N; ++n)
          steps[static_cast<std::size_t>(t)].row(n) = Eigen::Map<const RowMat<float>>(phi.data() + (n * L + t) * F, 1, F);

      SequenceCache<float> scache;
      const RowMat<float> logits = sequence_logits(steps, model.temporal, &scache);
      const double count = static_cast<double>(N * L);
      double loss = 0.0;
      RowMat<float> dlogits(N, L);
      for (Eigen::Index n = 0; n < N; ++n) {
        const double y = clips[batch.sequences[static_cast<std::size_t>(n)].clip].target();
        for (Eigen::Index t = 0; t < L; ++t) {
          const double z = logits(n, t);
          loss += nn::bce_with_logit(z, y);
          dlogits(n, t) = static_cast<float>((nn::sigmoid(z) - y) / count);
        }
      }
      loss /= count;
      detail::check_loss(loss, result.steps, Phase::lstm);
      const auto dx = sequence_backward(dlogits, scache, model.temporal, !cfg.freeze_backbone);
      if (!cfg.freeze_backbone) {
        Tensor dphi(phi.shape());
        for (Eigen::Index t = 0; t < L; ++t)
          for (Eigen::Index n = 0; n < N; ++n)
            Eigen::Map<RowMat<float>>(dphi.data() + (n * L + t) * F, 1, F) = dx[static_cast<std::size_t>(t)].row(n);
        model.backbone.backward(dphi, cache);
      }
      opt.step();
      log.write(result.steps, loss, opt.lr());
      result.losses.push_back(loss);
      ++result.steps;
    }
  }
  model.has_temporal_head = true;
  return result;
}

inline TrainResult train(DetectorModel& model, const std::vector<ClipInputs>& clips, const TrainConfig& cfg) {
  return cfg.phase == Phase::cnn ? train_cnn_phase(model, clips, cfg) : train_lstm_phase(model, clips, cfg);
}

}  // namespace divid::detector
