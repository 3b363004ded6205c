#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/core/tensor.hpp"

namespace divid::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
MatMap<T> as_matrix(BasicTensor<T>& t, Eigen::Index rows, Eigen::Index cols) {
  return MatMap<T>(t.data(), rows, cols);
}
template <typename T>
ConstMatMap<T> as_matrix(const BasicTensor<T>& t, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatMap<T>(t.data(), rows, cols);
}

template <typename T>
struct Param {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;

  Param() = default;
  Param(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(T(0)); }
  std::size_t size() const { return value.size(); }
};

template <typename T>
void he_init(Param<T>& p, std::size_t fan_in, Rng& rng, double gain = 1.0) {
  std::normal_distribution<double> normal(0.0, gain * std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : p.value) v = static_cast<T>(normal(rng));
}

// ---- Conv2d (NHWC, square kernel, zero padding) ----

template <typename T>
struct Conv2dCache {
  RowMat<T> cols;
  Shape in_shape;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int kernel = 3, int stride = 1, int pad = -1)
      : in_(in_ch), out_(out_ch), k_(kernel), stride_(stride), pad_(pad < 0 ? kernel / 2 : pad),
        weight(name + ".weight", Shape{static_cast<std::size_t>(kernel * kernel * in_ch), static_cast<std::size_t>(out_ch)}),
        bias(name + ".bias", Shape{static_cast<std::size_t>(out_ch)}) {}

  void init(Rng& rng, double gain = 1.0) {
    he_init(weight, static_cast<std::size_t>(k_ * k_ * in_), rng, gain);
    bias.value.fill(T(0));
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int out_size(int n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

  BasicTensor<T> forward(const BasicTensor<T>& x, Conv2dCache<T>* cache) const {
    if (x.rank() != 4 || static_cast<int>(x.dim(3)) != in_) {
      throw UsageError(weight.name + ": expected NHWC input with " + std::to_string(in_) + " channels, got " +
                       shape_str(x.shape()));
    }
    const int N = static_cast<int>(x.dim(0)), H = static_cast<int>(x.dim(1)), W = static_cast<int>(x.dim(2));
    const int Ho = out_size(H), Wo = out_size(W);
    RowMat<T> cols_local;
    RowMat<T>& cols = cache ? cache->cols : cols_local;
    im2col(x, N, H, W, Ho, Wo, cols);
    BasicTensor<T> y(Shape{static_cast<std::size_t>(N), static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo),
                           static_cast<std::size_t>(out_)});
    auto Y = as_matrix(y, static_cast<Eigen::Index>(N) * Ho * Wo, out_);
    Y.noalias() = cols * as_matrix(weight.value, k_ * k_ * in_, out_);
    Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value.data(), out_);
    if (cache) cache->in_shape = x.shape();
    return y;
  }

  // Accumulates parameter gradients; returns dL/dx.
  BasicTensor<T> backward(const BasicTensor<T>& dy, const Conv2dCache<T>& cache, bool need_dx = true) {
    const int N = static_cast<int>(cache.in_shape[0]), H = static_cast<int>(cache.in_shape[1]),
              W = static_cast<int>(cache.in_shape[2]);
    const int Ho = out_size(H), Wo = out_size(W);
    auto dY = as_matrix(dy, static_cast<Eigen::Index>(N) * Ho * Wo, out_);
    as_matrix(weight.grad, k_ * k_ * in_, out_).noalias() += cache.cols.transpose() * dY;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.grad.data(), out_) += dY.colwise().sum();
    if (!need_dx) return {};
    RowMat<T> dcols = dY * as_matrix(weight.value, k_ * k_ * in_, out_).transpose();
    BasicTensor<T> dx(cache.in_shape);
    col2im(dcols, N, H, W, Ho, Wo, dx);
    return dx;
  }

  std::vector<Param<T>*> params() { return {&weight, &bias}; }

 private:
  int in_ = 0, out_ = 0, k_ = 3, stride_ = 1, pad_ = 1;

 public:
  Param<T> weight;
  Param<T> bias;

 private:
  void im2col(const BasicTensor<T>& x, int N, int H, int W, int Ho, int Wo, RowMat<T>& cols) const {
    const int K = k_ * k_ * in_;
    cols.setZero(static_cast<Eigen::Index>(N) * Ho * Wo, K);
    for (int n = 0; n < N; ++n)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T* row = cols.data() + ((static_cast<Eigen::Index>(n) * Ho + oy) * Wo + ox) * K;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= W) continue;
              const T* src = x.data() + ((static_cast<std::size_t>(n) * H + iy) * W + ix) * in_;
              std::copy(src, src + in_, row + (ky * k_ + kx) * in_);
            }
          }
        }
  }

  void col2im(const RowMat<T>& dcols, int N, int H, int W, int Ho, int Wo, BasicTensor<T>& dx) const {
    const int K = k_ * k_ * in_;
    for (int n = 0; n < N; ++n)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          const T* row = dcols.data() + ((static_cast<Eigen::Index>(n) * Ho + oy) * Wo + ox) * K;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= W) continue;
              T* dst = dx.data() + ((static_cast<std::size_t>(n) * H + iy) * W + ix) * in_;
              const T* src = row + (ky * k_ + kx) * in_;
              for (int c = 0; c < in_; ++c) dst[c] += src[c];
            }
          }
        }
  }
};

// ---- Linear: [N, in] -> [N, out] ----

template <typename T>
struct LinearCache {
  BasicTensor<T> x;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : in_(in), out_(out), weight(name + ".weight", Shape{static_cast<std::size_t>(in), static_cast<std::size_t>(out)}),
        bias(name + ".bias", Shape{static_cast<std::size_t>(out)}) {}

  void init(Rng& rng, double gain = 1.0) {
    he_init(weight, static_cast<std::size_t>(in_), rng, gain);
    bias.value.fill(T(0));
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  BasicTensor<T> forward(const BasicTensor<T>& x, LinearCache<T>* cache) const {
    if (x.rank() != 2 || static_cast<int>(x.dim(1)) != in_) {
      throw UsageError(weight.name + ": expected [N, " + std::to_string(in_) + "] input, got " + shape_str(x.shape()));
    }
    const auto N = static_cast<Eigen::Index>(x.dim(0));
    BasicTensor<T> y(Shape{x.dim(0), static_cast<std::size_t>(out_)});
    auto Y = as_matrix(y, N, out_);
    Y.noalias() = as_matrix(x, N, in_) * as_matrix(weight.value, in_, out_);
    Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value.data(), out_);
    if (cache) cache->x = x;
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy, const LinearCache<T>& cache, bool need_dx = true) {
    const auto N = static_cast<Eigen::Index>(cache.x.dim(0));
    auto dY = as_matrix(dy, N, out_);
    as_matrix(weight.grad, in_, out_).noalias() += as_matrix(cache.x, N, in_).transpose() * dY;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.grad.data(), out_) += dY.colwise().sum();
    if (!need_dx) return {};
    BasicTensor<T> dx(cache.x.shape());
    as_matrix(dx, N, in_).noalias() = dY * as_matrix(weight.value, in_, out_).transpose();
    return dx;
  }

  std::vector<Param<T>*> params() { return {&weight, &bias}; }

 private:
  int in_ = 0, out_ = 0;

 public:
  Param<T> weight;
  Param<T> bias;
};

// ---- elementwise / pooling helpers ----

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

// dL/dx given dL/dy and the relu output y.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& dy, const BasicTensor<T>& y) {
  BasicTensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  const std::size_t N = x.dim(0), HW = x.dim(1) * x.dim(2), C = x.dim(3);
  BasicTensor<T> y(Shape{N, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t p = 0; p < HW; ++p)
      for (std::size_t c = 0; c < C; ++c) y[n * C + c] += x[(n * HW + p) * C + c];
  const T inv = T(1) / static_cast<T>(HW);
  for (auto& v : y) v *= inv;
  return y;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& dy, const Shape& in_shape) {
  const std::size_t N = in_shape[0], HW = in_shape[1] * in_shape[2], C = in_shape[3];
  BasicTensor<T> dx(in_shape);
  const T inv = T(1) / static_cast<T>(HW);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t p = 0; p < HW; ++p)
      for (std::size_t c = 0; c < C; ++c) dx[(n * HW + p) * C + c] = dy[n * C + c] * inv;
  return dx;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// Numerically stable binary cross-entropy on a logit.
template <typename T>
T bce_with_logit(T logit, T target) {
  return std::max(logit, T(0)) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

// ---- Adam ----

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        double g = static_cast<double>(p.grad[i]);
        if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * static_cast<double>(p.value[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        p.value[i] -= static_cast<T>(cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps));
      }
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long steps() const { return t_; }

 private:
  std::vector<Param<T>*> params_;
  AdamConfig cfg_;
  std::vector<BasicTensor<T>> m_, v_;
  long t_ = 0;
};

template <typename T>
std::size_t param_count(const std::vector<Param<T>*>& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->size();
  return n;
}

}  // namespace divid::nn
