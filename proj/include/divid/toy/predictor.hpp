#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/diffusion/predictor.hpp"
#include "divid/diffusion/sampler.hpp"
#include "divid/diffusion/schedule.hpp"
#include "divid/nn/checkpoint.hpp"
#include "divid/nn/layers.hpp"
#include "divid/toy/distribution.hpp"

namespace divid::toy {

inline constexpr std::size_t kToyParamBudget = 100000;
inline constexpr int kToyMaxSteps = 200;
inline constexpr int kTimeEmbedding = 16;

// Sinusoidal features of the schedule fraction t/T, one row per sample.
inline Tensor time_embedding(const std::vector<double>& fractions) {
  Tensor e(Shape{fractions.size(), kTimeEmbedding});
  for (std::size_t n = 0; n < fractions.size(); ++n)
    for (int k = 0; k < kTimeEmbedding / 2; ++k) {
      const double w = M_PI * std::pow(2.0, 0.5 * k);
      e[n * kTimeEmbedding + 2 * k] = static_cast<float>(std::sin(w * fractions[n]));
      e[n * kTimeEmbedding + 2 * k + 1] = static_cast<float>(std::cos(w * fractions[n]));
    }
  return e;
}

struct FilmCache {
  Tensor h;
  Tensor gb;
  nn::LinearCache<float> lin;
};

// h * (1 + gamma(t)) + beta(t), per sample and channel.
inline Tensor film_forward(const nn::Linear<float>& lin, const Tensor& h, const Tensor& emb, FilmCache* k) {
  FilmCache local;
  FilmCache& c = k ? *k : local;
  c.gb = lin.forward(emb, &c.lin);
  c.h = h;
  const std::size_t N = h.dim(0), P = h.dim(1) * h.dim(2), C = h.dim(3);
  Tensor out(h.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const std::size_t i = (n * P + p) * C + ch;
        out[i] = h[i] * (1.0f + c.gb[n * 2 * C + ch]) + c.gb[n * 2 * C + C + ch];
      }
  return out;
}

inline Tensor film_backward(nn::Linear<float>& lin, const Tensor& dout, const FilmCache& c) {
  const std::size_t N = c.h.dim(0), P = c.h.dim(1) * c.h.dim(2), C = c.h.dim(3);
  Tensor dgb(c.gb.shape());
  Tensor dh(c.h.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const std::size_t i = (n * P + p) * C + ch;
        dh[i] = dout[i] * (1.0f + c.gb[n * 2 * C + ch]);
        dgb[n * 2 * C + ch] += dout[i] * c.h[i];
        dgb[n * 2 * C + C + ch] += dout[i];
      }
  lin.backward(dgb, c.lin, false);
  return dh;
}

struct ToyNetCache {
  Tensor emb;
  nn::Conv2dCache<float> c1, c2, c3, out;
  FilmCache f1, f2, f3;
  Tensor h1, h2, r3;
};

// Three time-modulated 3x3 conv layers (the last one residual) and a linear 3x3 output conv.
class ToyNet {
 public:
  explicit ToyNet(int width = 32)
      : width_(width),
        c1_("toy.conv1", kToyChannels, width),
        c2_("toy.conv2", width, width),
        c3_("toy.conv3", width, width),
        out_("toy.out", width, kToyChannels),
        f1_("toy.film1", kTimeEmbedding, 2 * width),
        f2_("toy.film2", kTimeEmbedding, 2 * width),
        f3_("toy.film3", kTimeEmbedding, 2 * width) {
    if (width < 1) throw UsageError("toy predictor width must be positive");
    if (param_count() > kToyParamBudget) {
      throw UsageError("toy predictor width " + std::to_string(width) + " exceeds the " +
                       std::to_string(kToyParamBudget) + "-parameter budget");
    }
  }

  int width() const { return width_; }

  void init(Rng& rng) {
    c1_.init(rng);
    c2_.init(rng);
    c3_.init(rng, 0.5);
    out_.init(rng, 0.1);
    for (auto* f : {&f1_, &f2_, &f3_}) f->init(rng, 0.1);
  }

  // x: [N, 16, 16, 3]; one schedule fraction per sample.
  Tensor forward(const Tensor& x, const std::vector<double>& fractions, ToyNetCache* k = nullptr) const {
    if (x.rank() != 4 || x.dim(0) != fractions.size()) throw UsageError("toy predictor: batch/time mismatch");
    ToyNetCache local;
    ToyNetCache& c = k ? *k : local;
    c.emb = time_embedding(fractions);
    c.h1 = nn::relu(film_forward(f1_, c1_.forward(x, &c.c1), c.emb, &c.f1));
    c.h2 = nn::relu(film_forward(f2_, c2_.forward(c.h1, &c.c2), c.emb, &c.f2));
    c.r3 = nn::relu(film_forward(f3_, c3_.forward(c.h2, &c.c3), c.emb, &c.f3));
    return out_.forward(nn::add(c.r3, c.h1), &c.out);
  }

  void backward(const Tensor& dout, const ToyNetCache& c) {
    const Tensor dh3 = out_.backward(dout, c.out);
    Tensor dh2 = c3_.backward(film_backward(f3_, nn::relu_backward(dh3, c.r3), c.f3), c.c3);
    Tensor dh1 = c2_.backward(film_backward(f2_, nn::relu_backward(dh2, c.h2), c.f2), c.c2);
    dh1 = nn::add(dh1, dh3);
    c1_.backward(film_backward(f1_, nn::relu_backward(dh1, c.h1), c.f1), c.c1, false);
  }

  std::vector<nn::Param<float>*> params() {
    std::vector<nn::Param<float>*> ps;
    for (auto* l : {&c1_, &c2_, &c3_, &out_})
      for (auto* p : l->params()) ps.push_back(p);
    for (auto* l : {&f1_, &f2_, &f3_})
      for (auto* p : l->params()) ps.push_back(p);
    return ps;
  }

  std::size_t param_count() { return nn::param_count(params()); }

 private:
  int width_;
  nn::Conv2d<float> c1_, c2_, c3_, out_;
  nn::Linear<float> f1_, f2_, f3_;
};

// NoisePredictor adapter over ToyNet at 16x16x3. Conditioned on t/T, so one network serves any
// schedule length.
class ToyPredictor final : public diffusion::NoisePredictor {
 public:
  explicit ToyPredictor(int width = 32, std::string checkpoint = "") : net(width), checkpoint_(std::move(checkpoint)) {}

  Tensor predict(const Tensor& x, diffusion::TimeIndex t) const override {
    if (x.rank() != 3 || x.dim(0) != kToySize || x.dim(1) != kToySize || x.dim(2) != kToyChannels) {
      throw UsageError("toy predictor expects 16x16x3 input, got " + shape_str(x.shape()));
    }
    return net.forward(x.reshaped(Shape{1, kToySize, kToySize, kToyChannels}), {t.fraction()})
        .reshaped(x.shape());
  }

  // Batched evaluation: x [N, 16, 16, 3], one timestep for all samples.
  Tensor predict_batch(const Tensor& x, diffusion::TimeIndex t) const {
    return net.forward(x, std::vector<double>(x.dim(0), t.fraction()));
  }

  diffusion::PredictorInfo info() const override {
    return {"toy", kToySize, kToySize, kToyChannels, checkpoint_, true};
  }

  void save(const std::filesystem::path& dir, nlohmann::json extra = nlohmann::json::object()) {
    extra["kind"] = "toy_predictor";
    extra["width"] = net.width();
    extra["parameters"] = net.param_count();
    nn::save_checkpoint(dir, net.params(), extra);
  }

  static ToyPredictor load(const std::filesystem::path& dir) {
    const auto cfg = nn::read_checkpoint_config(dir);
    if (cfg.value("kind", "") != "toy_predictor") throw DataError(dir.string() + " is not a toy predictor checkpoint");
    ToyPredictor p(cfg.at("width").get<int>(), dir.string());
    nn::load_checkpoint(dir, p.net.params());
    return p;
  }

  ToyNet net;

 private:
  std::string checkpoint_;
};

struct ToyTrainBudget {
  long steps = 1500;
  int batch_size = 32;
  double lr = 2e-3;
  double max_seconds = 600.0;
  int pool_size = 2048;  // training images drawn once from the distribution
  int heldout = 256;
};

struct ToyTrainResult {
  double initial_heldout = 0.0;
  double final_heldout = 0.0;
  std::vector<double> losses;
  long steps = 0;
  double seconds = 0.0;
};

// Mean squared epsilon error over a fixed held-out set of (x0, t, eps) triples.
inline double heldout_loss(const ToyNet& net, const ToyDistribution& dist, const diffusion::NoiseSchedule& schedule,
                           int count, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x4e1d0000ULL);
  std::uniform_int_distribution<int> pick_t(1, schedule.total_steps());
  double total = 0.0;
  std::size_t n = 0;
  constexpr int kChunk = 64;
  for (int start = 0; start < count; start += kChunk) {
    const int m = std::min(kChunk, count - start);
    Tensor x(Shape{static_cast<std::size_t>(m), kToySize, kToySize, kToyChannels});
    Tensor eps = gaussian_tensor<float>(x.shape(), rng);
    std::vector<double> fr;
    const std::size_t per = static_cast<std::size_t>(kToySize * kToySize * kToyChannels);
    for (int i = 0; i < m; ++i) {
      const Tensor x0 = dist.sample((1ULL << 40) + static_cast<std::uint64_t>(start + i));
      const int t = pick_t(rng);
      const double ab = schedule.alpha_bar(t);
      for (std::size_t j = 0; j < per; ++j)
        x[i * per + j] = static_cast<float>(std::sqrt(ab) * x0[j] + std::sqrt(1.0 - ab) * eps[i * per + j]);
      fr.push_back(static_cast<double>(t) / schedule.total_steps());
    }
    const Tensor out = net.forward(x, fr);
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double d = out[j] - eps[j];
      total += d * d;
    }
    n += out.size();
  }
  return total / static_cast<double>(n);
}

// Standard denoising objective: predict eps from forward-diffused samples at uniform timesteps.
inline ToyTrainResult train_toy_predictor(ToyPredictor& predictor, const ToyDistribution& dist,
                                          const diffusion::NoiseSchedule& schedule, const ToyTrainBudget& budget,
                                          std::uint64_t seed) {
  if (schedule.total_steps() > kToyMaxSteps) {
    throw UsageError("toy predictor training needs total_steps <= " + std::to_string(kToyMaxSteps));
  }
  if (budget.steps < 0 || budget.batch_size < 1 || budget.pool_size < 1 || budget.heldout < 1) {
    throw UsageError("invalid toy training budget");
  }
  const auto start = std::chrono::steady_clock::now();
  ToyNet& net = predictor.net;
  ToyTrainResult r;
  r.initial_heldout = heldout_loss(net, dist, schedule, budget.heldout, seed);

  std::vector<Tensor> pool;
  if (budget.steps > 0)
    for (int i = 0; i < budget.pool_size; ++i) pool.push_back(dist.sample(static_cast<std::uint64_t>(i)));

  nn::AdamConfig adam;
  adam.lr = budget.lr;
  nn::Adam<float> opt(net.params(), adam);
  Rng rng = make_rng(seed, 0x7a1e0000ULL);
  std::uniform_int_distribution<int> pick_t(1, schedule.total_steps());
  std::uniform_int_distribution<int> pick_x(0, budget.pool_size - 1);
  const std::size_t per = static_cast<std::size_t>(kToySize * kToySize * kToyChannels);
  const auto B = static_cast<std::size_t>(budget.batch_size);

  for (long step = 0; step < budget.steps; ++step) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > budget.max_seconds) {
      throw UsageError("toy predictor training exceeded its " + std::to_string(budget.max_seconds) +
                       " s budget after " + std::to_string(step) + " steps");
    }
    Tensor x(Shape{B, kToySize, kToySize, kToyChannels});
    Tensor eps = gaussian_tensor<float>(x.shape(), rng);
    std::vector<double> fr;
    for (std::size_t i = 0; i < B; ++i) {
      const Tensor& x0 = pool[static_cast<std::size_t>(pick_x(rng))];
      const int t = pick_t(rng);
      const double ab = schedule.alpha_bar(t);
      const auto sa = static_cast<float>(std::sqrt(ab)), sb = static_cast<float>(std::sqrt(1.0 - ab));
      for (std::size_t j = 0; j < per; ++j) x[i * per + j] = sa * x0[j] + sb * eps[i * per + j];
      fr.push_back(static_cast<double>(t) / schedule.total_steps());
    }
    opt.zero_grad();
    ToyNetCache cache;
    const Tensor out = net.forward(x, fr, &cache);
    Tensor dout(out.shape());
    double loss = 0.0;
    const auto inv = 1.0 / static_cast<double>(out.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double d = out[j] - eps[j];
      loss += d * d;
      dout[j] = static_cast<float>(2.0 * d * inv);
    }
    loss *= inv;
    if (!std::isfinite(loss)) throw NumericError("toy predictor loss is non-finite at step " + std::to_string(step));
    net.backward(dout, cache);
    opt.step();
    r.losses.push_back(loss);
    ++r.steps;
  }
  r.final_heldout = heldout_loss(net, dist, schedule, budget.heldout, seed);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace divid::toy
