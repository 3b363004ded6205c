#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "divid/core/random.hpp"
#include "divid/detector/lstm.hpp"

using namespace divid;
using namespace divid::detector;

namespace {

// Independent scalar reference of one cell step, in plain loops.
struct RefState {
  std::vector<double> a, c;
};

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename T>
double w(const nn::Param<T>& p, int r, int c, int cols) { return static_cast<double>(p.value[r * cols + c]); }

template <typename T>
RefState ref_step(const RefState& s, const std::vector<double>& x, const LstmWeights<T>& W) {
  const int H = W.hidden_size, F = W.input_size;
  RefState out{std::vector<double>(H), std::vector<double>(H)};
  for (int i = 0; i < H; ++i) {
    double zc = 0, zf = W.forget_b.value[i], zu = W.update_b.value[i], zo = W.output_b.value[i];
    for (int j = 0; j < H; ++j) {
      zc += w(W.cand_a, i, j, H) * s.a[j];
      zf += w(W.forget_a, i, j, H) * s.a[j];
      zu += w(W.update_a, i, j, H) * s.a[j];
      zo += w(W.output_a, i, j, H) * s.a[j];
    }
    for (int j = 0; j < F; ++j) {
      zc += w(W.cand_x, i, j, F) * x[j];
      zf += w(W.forget_x, i, j, F) * x[j];
      zu += w(W.update_x, i, j, F) * x[j];
      zo += w(W.output_x, i, j, F) * x[j];
    }
    out.c[i] = sig(zf) * s.c[i] + sig(zu) * std::tanh(zc);
    out.a[i] = sig(zo) * std::tanh(out.c[i]);
  }
  return out;
}

template <typename T>
void randomize(LstmWeights<T>& W, Rng& rng, double scale = 0.8) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto* p : W.params())
    for (auto& v : p->value) v = static_cast<T>(u(rng));
}

template <typename T>
RowMat<T> row_of(const std::vector<double>& v) {
  RowMat<T> m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = static_cast<T>(v[i]);
  return m;
}

}  // namespace

TEST(Lstm, MatchesScalarReference) {
  Rng rng = make_rng(1);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int H = 1 + trial % 5, F = 1 + (trial / 5) % 6;
    LstmWeights<float> W(F, H);
    randomize(W, rng);
    RefState s{std::vector<double>(H), std::vector<double>(H)};
    std::vector<double> x(F);
    for (auto& v : s.a) v = static_cast<float>(u(rng));
    for (auto& v : s.c) v = static_cast<float>(u(rng));
    for (auto& v : x) v = static_cast<float>(u(rng));
    const auto ref = ref_step(s, x, W);
    LstmState<float> st{row_of<float>(s.a), row_of<float>(s.c)};
    const auto got = lstm_cell_step(st, row_of<float>(x), W);
    for (int i = 0; i < H; ++i) {
      worst = std::max(worst, std::abs(got.a(0, i) - ref.a[i]));
      worst = std::max(worst, std::abs(got.c(0, i) - ref.c[i]));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Lstm, ZeroFixedPoint) {
  LstmWeights<double> W(3, 4);
  const auto s = lstm_cell_step(LstmState<double>::zeros(1, 4), RowMat<double>(RowMat<double>::Constant(1, 3, 0.7)), W);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(s.a(0, i), 0.0);
    EXPECT_EQ(s.c(0, i), 0.0);
  }
  LstmStepCache<double> k;
  lstm_cell_step(LstmState<double>::zeros(1, 4), RowMat<double>(RowMat<double>::Zero(1, 3)), W, &k);
  EXPECT_EQ(k.f(0, 0), 0.5);
  EXPECT_EQ(k.u(0, 0), 0.5);
  EXPECT_EQ(k.o(0, 0), 0.5);
  EXPECT_EQ(k.cand(0, 0), 0.0);
}

TEST(Lstm, HalfGatesCarryCell) {
  LstmWeights<double> W(2, 3);
  LstmState<double> s = LstmState<double>::zeros(1, 3);
  s.c << -2.0, 0.3, 5.0;
  const auto out = lstm_cell_step(s, RowMat<double>(RowMat<double>::Zero(1, 2)), W);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(out.c(0, i), 0.5 * s.c(0, i));
    EXPECT_DOUBLE_EQ(out.a(0, i), 0.5 * std::tanh(0.5 * s.c(0, i)));
  }
}

TEST(Lstm, LocallyLipschitz) {
  Rng rng = make_rng(2);
  LstmWeights<double> W(6, 5);
  randomize(W, rng);
  RowMat<double> x = RowMat<double>::Random(1, 6);
  const auto s0 = LstmState<double>::zeros(1, 5);
  const auto a = lstm_cell_step(s0, x, W);
  x(0, 2) += 1e-6;
  const auto b = lstm_cell_step(s0, x, W);
  const double d = (a.a - b.a).cwiseAbs().maxCoeff();
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, 1e-5);
}

TEST(Lstm, RejectsBadInput) {
  LstmWeights<float> W(3, 2);
  EXPECT_THROW(lstm_cell_step(LstmState<float>::zeros(1, 2), RowMat<float>(RowMat<float>::Zero(1, 4)), W), Error);
  RowMat<float> x = RowMat<float>::Zero(1, 3);
  x(0, 1) = std::nanf("");
  EXPECT_THROW(lstm_cell_step(LstmState<float>::zeros(1, 2), x, W), NumericError);
}

// 2-frame, 8-dimensional cell: loss = sum_t sum_i r_ti * a^t_i.
TEST(Lstm, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(3);
  const int H = 8, F = 8;
  LstmWeights<double> W(F, H);
  randomize(W, rng, 0.5);
  std::vector<RowMat<double>> xs{RowMat<double>::Random(2, F), RowMat<double>::Random(2, F)};
  std::vector<RowMat<double>> rs{RowMat<double>::Random(2, H), RowMat<double>::Random(2, H)};
  auto loss = [&] {
    auto s = LstmState<double>::zeros(2, H);
    double l = 0.0;
    for (int t = 0; t < 2; ++t) {
      s = lstm_cell_step(s, xs[t], W);
      l += (s.a.array() * rs[t].array()).sum();
    }
    return l;
  };
  // Analytic.
  for (auto* p : W.params()) p->zero_grad();
  std::vector<LstmStepCache<double>> cache(2);
  auto s = LstmState<double>::zeros(2, H);
  for (int t = 0; t < 2; ++t) s = lstm_cell_step(s, xs[t], W, &cache[t]);
  RowMat<double> da_next = RowMat<double>::Zero(2, H), dc_next = RowMat<double>::Zero(2, H);
  std::vector<RowMat<double>> dxs(2);
  for (int t = 1; t >= 0; --t) {
    auto g = lstm_cell_backward<double>(rs[t] + da_next, dc_next, cache[t], W);
    da_next = g.da_prev;
    dc_next = g.dc_prev;
    dxs[t] = g.dx;
  }
  const double h = 1e-6;
  double worst = 0.0;
  for (auto* p : W.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = loss();
      p->value[i] = keep - h;
      const double down = loss();
      p->value[i] = keep;
      const double num = (up - down) / (2 * h);
      const double rel = std::abs(num - p->grad[i]) / std::max(1e-8, std::abs(num) + std::abs(p->grad[i]));
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-4);
  for (int t = 0; t < 2; ++t)
    for (Eigen::Index n = 0; n < 2; ++n)
      for (Eigen::Index j = 0; j < F; ++j) {
        const double keep = xs[t](n, j);
        xs[t](n, j) = keep + h;
        const double up = loss();
        xs[t](n, j) = keep - h;
        const double down = loss();
        xs[t](n, j) = keep;
        EXPECT_NEAR((up - down) / (2 * h), dxs[t](n, j), 1e-6);
      }
}

TEST(Sequence, LengthOneIsHeadOfFirstState) {
  Rng rng = make_rng(4);
  SequenceHead<double> m(5, 4);
  m.init(rng);
  const RowMat<double> x = RowMat<double>::Random(1, 5);
  const auto logits = sequence_logits<double>({x}, m);
  ASSERT_EQ(logits.cols(), 1);
  const auto s = lstm_cell_step(LstmState<double>::zeros(1, 4), x, m.lstm);
  BasicTensor<double> a(Shape{1, 4});
  for (int i = 0; i < 4; ++i) a[i] = s.a(0, i);
  EXPECT_NEAR(logits(0, 0), m.head.forward(a, nullptr)[0], 1e-12);
}

TEST(Sequence, PrefixAndUnrolledOracle) {
  Rng rng = make_rng(5);
  SequenceHead<float> m(6, 5);
  m.init(rng);
  std::vector<RowMat<float>> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(RowMat<float>::Random(3, 6));
  const std::vector<RowMat<float>> four(xs.begin(), xs.begin() + 4);
  const auto l4 = sequence_logits(four, m);
  const auto l5 = sequence_logits(xs, m);
  for (int t = 0; t < 4; ++t)
    for (int n = 0; n < 3; ++n) EXPECT_EQ(l4(n, t), l5(n, t));

  auto s = LstmState<float>::zeros(3, 5);
  for (int t = 0; t < 4; ++t) {
    s = lstm_cell_step(s, xs[t], m.lstm);
    BasicTensor<float> a(Shape{3, 5});
    Eigen::Map<RowMat<float>>(a.data(), 3, 5) = s.a;
    const auto y = m.head.forward(a, nullptr);
    for (int n = 0; n < 3; ++n) EXPECT_NEAR(l4(n, t), y[n], 1e-6);
  }
  EXPECT_THROW(sequence_logits(std::vector<RowMat<float>>{}, m), UsageError);
}

TEST(Sequence, BackwardMatchesFiniteDifferences) {
  Rng rng = make_rng(6);
  SequenceHead<double> m(4, 3);
  m.init(rng);
  std::vector<RowMat<double>> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(RowMat<double>::Random(2, 4));
  const RowMat<double> r = RowMat<double>::Random(2, 3);
  auto loss = [&] { return (sequence_logits(xs, m).array() * r.array()).sum(); };
  for (auto* p : m.params()) p->zero_grad();
  SequenceCache<double> cache;
  sequence_logits(xs, m, &cache);
  const auto dx = sequence_backward<double>(r, cache, m, true);
  const double h = 1e-6;
  for (auto* p : m.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = loss();
      p->value[i] = keep - h;
      const double down = loss();
      p->value[i] = keep;
      EXPECT_NEAR((up - down) / (2 * h), p->grad[i], 1e-6) << p->name << "[" << i << "]";
    }
  }
  for (int t = 0; t < 3; ++t) {
    const double keep = xs[t](1, 2);
    xs[t](1, 2) = keep + h;
    const double up = loss();
    xs[t](1, 2) = keep - h;
    const double down = loss();
    xs[t](1, 2) = keep;
    EXPECT_NEAR((up - down) / (2 * h), dx[t](1, 2), 1e-6);
  }
}
