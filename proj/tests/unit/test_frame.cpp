#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "divid/dire/frame.hpp"

using namespace divid;
using namespace divid::dire;

namespace {

RawFrame solid(int w, int h, float v) {
  RawFrame f;
  f.width = w;
  f.height = h;
  f.pixels.assign(static_cast<std::size_t>(w) * h * 3, v);
  return f;
}

}  // namespace

TEST(Frame, IdentityGeometryRescalesOnly) {
  RawFrame raw = solid(256, 256, 0.0f);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = static_cast<float>((i * 37) % 256);
  const auto ft = preprocess_frame(raw, {256, 256});
  ASSERT_EQ(ft.height(), 256);
  ASSERT_EQ(ft.width(), 256);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) EXPECT_NEAR(ft.pixels[i], raw.pixels[i] / 127.5f - 1.0f, 1e-6);
}

TEST(Frame, MidGrayMapsToZero) {
  const auto ft = preprocess_frame(solid(40, 30, 127.5f), {16, 16});
  for (float v : ft.pixels) EXPECT_FLOAT_EQ(v, 0.0f);
}

TEST(Frame, WideFrameUsesCentreColumns) {
  // Columns outside 224..799 carry NaN; any contribution from them would poison the output.
  RawFrame raw = solid(1024, 576, 0.0f);
  for (int y = 0; y < 576; ++y)
    for (int x = 0; x < 1024; ++x)
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = (static_cast<std::size_t>(y) * 1024 + x) * 3 + c;
        raw.pixels[i] = (x < 224 || x > 799) ? std::numeric_limits<float>::quiet_NaN()
                                             : static_cast<float>(x - 224) / 575.0f * 255.0f;
      }
  const auto ft = preprocess_frame(raw, {256, 256});
  EXPECT_EQ(ft.height(), 256);
  EXPECT_EQ(ft.width(), 256);
  EXPECT_EQ(ft.channels(), 3);
  EXPECT_EQ(ft.source_width, 1024);
  EXPECT_EQ(ft.source_height, 576);
  for (float v : ft.pixels) ASSERT_TRUE(std::isfinite(v));
  EXPECT_LT(ft.pixels.at(0, 0, 0), -0.99f);
  EXPECT_GT(ft.pixels.at(0, 255, 0), 0.99f);
  EXPECT_LT(ft.pixels.at(255, 0, 0), -0.99f);
  EXPECT_GT(ft.pixels.at(255, 255, 0), 0.99f);
}

TEST(Frame, TallFrameCropsRows) {
  RawFrame raw = solid(10, 30, 255.0f);
  for (int y = 10; y < 20; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) raw.pixels[(static_cast<std::size_t>(y) * 10 + x) * 3 + c] = 0.0f;
  const auto ft = preprocess_frame(raw, {5, 5});
  for (float v : ft.pixels) EXPECT_FLOAT_EQ(v, -1.0f);
}

TEST(Frame, Deterministic) {
  RawFrame raw = solid(33, 21, 0.0f);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = static_cast<float>((i * 7919) % 256);
  const auto a = preprocess_frame(raw, {16, 16});
  const auto b = preprocess_frame(raw, {16, 16});
  EXPECT_EQ(max_abs_diff(a.pixels, b.pixels), 0.0);
  for (float v : a.pixels) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Frame, UndecodedCarriesIndex) {
  RawFrame raw;
  raw.frame_index = 12;
  try {
    preprocess_frame(raw, {8, 8});
    FAIL();
  } catch (const FrameError& e) {
    EXPECT_EQ(e.frame_index(), 12);
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
  EXPECT_THROW(preprocess_frame(solid(4, 4, 0), {0, 4}), UsageError);
}

TEST(Frame, RawRoundTrip) {
  RawFrame raw = solid(8, 8, 0.0f);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = static_cast<float>(i % 256);
  const auto back = to_raw_frame(preprocess_frame(raw, {8, 8}).pixels, 3);
  EXPECT_EQ(back.frame_index, 3);
  EXPECT_EQ(back.pixels, raw.pixels);
}
