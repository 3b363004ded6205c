#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/core/tensor.hpp"
#include "divid/nn/layers.hpp"

namespace divid::detector {

using nn::Param;
using nn::RowMat;

// One-layer LSTM.
//   candidate  c~ = tanh(Wca a' + Wcx x)
//   cell       c  = f * c' + u * c~
//   hidden     a  = o * tanh(c)
// with gates g = sigmoid(Wga a' + Wgx x + bg) for g in {f (forget), u (update), o (output)}.
// Weight matrices are [out, in]; states are batched row-wise ([N, H]).
template <typename T>
struct LstmWeights {
  int input_size = 0;
  int hidden_size = 0;

  Param<T> cand_a, cand_x;
  Param<T> forget_a, forget_x, forget_b;
  Param<T> update_a, update_x, update_b;
  Param<T> output_a, output_x, output_b;

  LstmWeights() = default;
  LstmWeights(int input, int hidden, const std::string& prefix = "lstm") : input_size(input), hidden_size(hidden) {
    const auto H = static_cast<std::size_t>(hidden), F = static_cast<std::size_t>(input);
    cand_a = Param<T>(prefix + ".cand_a", {H, H});
    cand_x = Param<T>(prefix + ".cand_x", {H, F});
    forget_a = Param<T>(prefix + ".forget_a", {H, H});
    forget_x = Param<T>(prefix + ".forget_x", {H, F});
    forget_b = Param<T>(prefix + ".forget_b", {H});
    update_a = Param<T>(prefix + ".update_a", {H, H});
    update_x = Param<T>(prefix + ".update_x", {H, F});
    update_b = Param<T>(prefix + ".update_b", {H});
    output_a = Param<T>(prefix + ".output_a", {H, H});
    output_x = Param<T>(prefix + ".output_x", {H, F});
    output_b = Param<T>(prefix + ".output_b", {H});
  }

  // Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget bias 1.
  void init(Rng& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    std::uniform_real_distribution<double> uni(-k, k);
    for (auto* p : params()) {
      for (auto& v : p->value) v = static_cast<T>(uni(rng));
    }
    forget_b.value.fill(T(1));
    update_b.value.fill(T(0));
    output_b.value.fill(T(0));
  }

  std::vector<Param<T>*> params() {
    return {&cand_a, &cand_x, &forget_a, &forget_x, &forget_b, &update_a,
            &update_x, &update_b, &output_a, &output_x, &output_b};
  }

  bool all_finite() {
    for (auto* p : params())
      if (!p->value.all_finite()) return false;
    return true;
  }
};

template <typename T>
struct LstmState {
  RowMat<T> a;  // hidden, [N, H]
  RowMat<T> c;  // cell,   [N, H]

  static LstmState zeros(Eigen::Index n, Eigen::Index hidden) {
    return {RowMat<T>::Zero(n, hidden), RowMat<T>::Zero(n, hidden)};
  }
};

template <typename T>
struct LstmStepCache {
  RowMat<T> a_prev, c_prev, x;
  RowMat<T> cand, f, u, o, tanh_c;
};

namespace detail {
template <typename T>
Eigen::Map<const RowMat<T>> mat(const Param<T>& p) {
  return Eigen::Map<const RowMat<T>>(p.value.data(), static_cast<Eigen::Index>(p.value.dim(0)),
                                     static_cast<Eigen::Index>(p.value.dim(1)));
}
template <typename T>
Eigen::Map<RowMat<T>> grad_mat(Param<T>& p) {
  return Eigen::Map<RowMat<T>>(p.grad.data(), static_cast<Eigen::Index>(p.grad.dim(0)),
                               static_cast<Eigen::Index>(p.grad.dim(1)));
}
template <typename T>
Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> row(const Param<T>& p) {
  return Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(p.value.data(), static_cast<Eigen::Index>(p.value.size()));
}
template <typename T>
Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> grad_row(Param<T>& p) {
  return Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(p.grad.data(), static_cast<Eigen::Index>(p.grad.size()));
}
template <typename M>
auto sigmoid_of(const M& z) {
  using T = typename M::Scalar;
  return z.unaryExpr([](T v) { return nn::sigmoid(v); });
}
}  // namespace detail

// One recurrence step for a batch of inputs x ([N, F]).
template <typename T>
LstmState<T> lstm_cell_step(const LstmState<T>& state, const RowMat<T>& x, const LstmWeights<T>& w,
                            LstmStepCache<T>* cache = nullptr) {
  using detail::mat;
  using detail::row;
  if (x.cols() != w.input_size || state.a.cols() != w.hidden_size || state.c.cols() != w.hidden_size ||
      x.rows() != state.a.rows() || state.c.rows() != state.a.rows()) {
    throw UsageError("lstm_cell_step: dimension mismatch");
  }
  if (!x.allFinite() || !state.a.allFinite() || !state.c.allFinite()) {
    throw NumericError("lstm_cell_step: non-finite input");
  }
  const RowMat<T>& a = state.a;
  RowMat<T> cand = (a * mat(w.cand_a).transpose() + x * mat(w.cand_x).transpose()).array().tanh().matrix();
  RowMat<T> zf = a * mat(w.forget_a).transpose() + x * mat(w.forget_x).transpose();
  zf.rowwise() += row(w.forget_b);
  RowMat<T> zu = a * mat(w.update_a).transpose() + x * mat(w.update_x).transpose();
  zu.rowwise() += row(w.update_b);
  RowMat<T> zo = a * mat(w.output_a).transpose() + x * mat(w.output_x).transpose();
  zo.rowwise() += row(w.output_b);
  RowMat<T> f = detail::sigmoid_of(zf);
  RowMat<T> u = detail::sigmoid_of(zu);
  RowMat<T> o = detail::sigmoid_of(zo);

  LstmState<T> next;
  next.c = (f.array() * state.c.array() + u.array() * cand.array()).matrix();
  RowMat<T> tanh_c = next.c.array().tanh().matrix();
  next.a = (o.array() * tanh_c.array()).matrix();

  if (cache) {
    cache->a_prev = state.a;
    cache->c_prev = state.c;
    cache->x = x;
    cache->cand = std::move(cand);
    cache->f = std::move(f);
    cache->u = std::move(u);
    cache->o = std::move(o);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

template <typename T>
struct LstmStepGrads {
  RowMat<T> da_prev, dc_prev, dx;
};

// Back-propagates through one step. `da` and `dc` are the total gradients reaching a^t and c^t.
template <typename T>
LstmStepGrads<T> lstm_cell_backward(const RowMat<T>& da, const RowMat<T>& dc_in, const LstmStepCache<T>& k,
                                    LstmWeights<T>& w, bool need_dx = true) {
  using detail::grad_mat;
  using detail::grad_row;
  using detail::mat;
  const auto one = T(1);
  RowMat<T> dout = (da.array() * k.tanh_c.array()).matrix();
  RowMat<T> dc = (dc_in.array() + da.array() * k.o.array() * (one - k.tanh_c.array().square())).matrix();
  RowMat<T> dzf = (dc.array() * k.c_prev.array() * k.f.array() * (one - k.f.array())).matrix();
  RowMat<T> dzu = (dc.array() * k.cand.array() * k.u.array() * (one - k.u.array())).matrix();
  RowMat<T> dzo = (dout.array() * k.o.array() * (one - k.o.array())).matrix();
  RowMat<T> dzc = (dc.array() * k.u.array() * (one - k.cand.array().square())).matrix();

  grad_mat(w.cand_a).noalias() += dzc.transpose() * k.a_prev;
  grad_mat(w.cand_x).noalias() += dzc.transpose() * k.x;
  grad_mat(w.forget_a).noalias() += dzf.transpose() * k.a_prev;
  grad_mat(w.forget_x).noalias() += dzf.transpose() * k.x;
  grad_row(w.forget_b) += dzf.colwise().sum();
  grad_mat(w.update_a).noalias() += dzu.transpose() * k.a_prev;
  grad_mat(w.update_x).noalias() += dzu.transpose() * k.x;
  grad_row(w.update_b) += dzu.colwise().sum();
  grad_mat(w.output_a).noalias() += dzo.transpose() * k.a_prev;
  grad_mat(w.output_x).noalias() += dzo.transpose() * k.x;
  grad_row(w.output_b) += dzo.colwise().sum();

  LstmStepGrads<T> g;
  g.dc_prev = (dc.array() * k.f.array()).matrix();
  g.da_prev = dzc * mat(w.cand_a) + dzf * mat(w.forget_a) + dzu * mat(w.update_a) + dzo * mat(w.output_a);
  if (need_dx) g.dx = dzc * mat(w.cand_x) + dzf * mat(w.forget_x) + dzu * mat(w.update_x) + dzo * mat(w.output_x);
  return g;
}

// Temporal head: LSTM followed by a per-step linear logit head.
template <typename T>
struct SequenceHead {
  LstmWeights<T> lstm;
  nn::Linear<T> head;

  SequenceHead() = default;
  SequenceHead(int input, int hidden) : lstm(input, hidden), head("seq_head", hidden, 1) {}

  void init(Rng& rng) {
    lstm.init(rng);
    head.init(rng, 0.5);
  }

  std::vector<Param<T>*> params() {
    auto ps = lstm.params();
    for (auto* p : head.params()) ps.push_back(p);
    return ps;
  }
};

template <typename T>
struct SequenceCache {
  std::vector<LstmStepCache<T>> steps;
  std::vector<nn::LinearCache<T>> heads;
};

// features: one [N, F] matrix per timestep. Returns logits [N, L]. Zero initial state.
template <typename T>
RowMat<T> sequence_logits(const std::vector<RowMat<T>>& features, const SequenceHead<T>& model,
                          SequenceCache<T>* cache = nullptr) {
  if (features.empty()) throw UsageError("sequence_forward: empty sequence");
  const Eigen::Index N = features.front().rows();
  const Eigen::Index L = static_cast<Eigen::Index>(features.size());
  auto state = LstmState<T>::zeros(N, model.lstm.hidden_size);
  RowMat<T> logits(N, L);
  if (cache) {
    cache->steps.assign(features.size(), {});
    cache->heads.assign(features.size(), {});
  }
  for (Eigen::Index t = 0; t < L; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    state = lstm_cell_step(state, features[ti], model.lstm, cache ? &cache->steps[ti] : nullptr);
    BasicTensor<T> a(Shape{static_cast<std::size_t>(N), static_cast<std::size_t>(model.lstm.hidden_size)});
    Eigen::Map<RowMat<T>>(a.data(), N, model.lstm.hidden_size) = state.a;
    const auto y = model.head.forward(a, cache ? &cache->heads[ti] : nullptr);
    for (Eigen::Index n = 0; n < N; ++n) logits(n, t) = y[static_cast<std::size_t>(n)];
  }
  return logits;
}

// Back-propagation through time given dL/dlogits ([N, L]). Returns dL/dfeatures per step when
// requested.
template <typename T>
std::vector<RowMat<T>> sequence_backward(const RowMat<T>& dlogits, const SequenceCache<T>& cache,
                                         SequenceHead<T>& model, bool need_dx) {
  const Eigen::Index N = dlogits.rows();
  const Eigen::Index L = dlogits.cols();
  const int H = model.lstm.hidden_size;
  std::vector<RowMat<T>> dx(static_cast<std::size_t>(L));
  RowMat<T> da_next = RowMat<T>::Zero(N, H);
  RowMat<T> dc_next = RowMat<T>::Zero(N, H);
  for (Eigen::Index t = L; t-- > 0;) {
    const auto ti = static_cast<std::size_t>(t);
    BasicTensor<T> dy(Shape{static_cast<std::size_t>(N), 1});
    for (Eigen::Index n = 0; n < N; ++n) dy[static_cast<std::size_t>(n)] = dlogits(n, t);
    const auto da_head = model.head.backward(dy, cache.heads[ti]);
    RowMat<T> da = da_next + Eigen::Map<const RowMat<T>>(da_head.data(), N, H);
    auto g = lstm_cell_backward(da, dc_next, cache.steps[ti], model.lstm, need_dx);
    da_next = std::move(g.da_prev);
    dc_next = std::move(g.dc_prev);
    if (need_dx) dx[ti] = std::move(g.dx);
  }
  return dx;
}

}  // namespace divid::detector
