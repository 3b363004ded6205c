#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "divid/core/random.hpp"
#include "divid/data/tensor_io.hpp"
#include "test_util.hpp"

using namespace divid;
using namespace divid::data;

namespace {

std::string golden(const std::string& name) { return std::string(DIVID_TEST_DATA) + "/" + name; }

std::vector<std::uint8_t> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

template <typename T>
void expect_bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  ASSERT_EQ(a.shape(), b.shape());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(T)), 0);
}

}  // namespace

TEST(TensorIo, LargeFloatRoundTrip) {
  test::TempDir dir("tio");
  Rng rng = make_rng(11);
  const auto t = gaussian_tensor<float>({25, 256, 256, 3}, rng);
  const auto p = (dir / "big.dvtn").string();
  write_tensor(t, p);
  expect_bit_identical(read_tensor<float>(p), t);
  EXPECT_EQ(std::filesystem::file_size(p), 7u + 4 * 8 + t.size() * 4);
}

TEST(TensorIo, AllTypesAndRanks) {
  test::TempDir dir("tio");
  Rng rng = make_rng(12);
  const std::vector<Shape> shapes{{}, {5}, {2, 3}, {2, 1, 4}, {1, 2, 3, 2}, {0, 3}};
  for (const auto& s : shapes) {
    const auto f = gaussian_tensor<float>(s, rng);
    const auto d = gaussian_tensor<double>(s, rng);
    BasicTensor<std::uint8_t> u(s);
    BasicTensor<std::int32_t> i(s);
    BasicTensor<std::int64_t> l(s);
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] = static_cast<std::uint8_t>(rng());
      i[k] = static_cast<std::int32_t>(rng());
      l[k] = static_cast<std::int64_t>(rng());
    }
    const auto p = (dir / "t.dvtn").string();
    write_tensor(f, p);
    expect_bit_identical(read_tensor<float>(p), f);
    write_tensor(d, p);
    expect_bit_identical(read_tensor<double>(p), d);
    write_tensor(u, p);
    expect_bit_identical(read_tensor<std::uint8_t>(p), u);
    write_tensor(i, p);
    expect_bit_identical(read_tensor<std::int32_t>(p), i);
    write_tensor(l, p);
    expect_bit_identical(read_tensor<std::int64_t>(p), l);
  }
}

// Golden files are written independently (little-endian, by tests/golden/make_golden.py), so these
// checks hold regardless of host byte order.
TEST(TensorIo, GoldenF32) {
  const auto t = read_tensor<float>(golden("f32_2x3x4.dvtn"));
  ASSERT_EQ(t.shape(), (Shape{2, 3, 4}));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float expect = static_cast<float>((-1.5 + 0.25 * static_cast<double>(i)) * (i % 3 ? 1.0 : -1.0));
    EXPECT_EQ(t[i], expect) << i;
    EXPECT_EQ(std::signbit(t[i]), std::signbit(expect)) << i;
  }
  EXPECT_EQ(encode_tensor(t), file_bytes(golden("f32_2x3x4.dvtn")));
}

TEST(TensorIo, GoldenF64) {
  const double expect[] = {0.44879895051282759, 0.89759790102565518, 1.3463968515384828,
                           1.7951958020513104,  2.2439947525641379,  2.6927937030769655};
  const auto t = read_tensor<double>(golden("f64_3x2.dvtn"));
  ASSERT_EQ(t.shape(), (Shape{3, 2}));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(t[i], expect[i]);
  EXPECT_EQ(encode_tensor(t), file_bytes(golden("f64_3x2.dvtn")));
}

TEST(TensorIo, GoldenIntegers) {
  const auto u = read_tensor<std::uint8_t>(golden("u8_5.dvtn"));
  EXPECT_EQ(std::vector<std::uint8_t>(u.begin(), u.end()), (std::vector<std::uint8_t>{0, 1, 127, 128, 255}));
  const auto l = read_tensor<std::int64_t>(golden("i64_2x2.dvtn"));
  EXPECT_EQ(std::vector<std::int64_t>(l.begin(), l.end()),
            (std::vector<std::int64_t>{-(std::int64_t{1} << 40), -1, 0, std::int64_t{1} << 62}));
  EXPECT_EQ(encode_tensor(l), file_bytes(golden("i64_2x2.dvtn")));
}

TEST(TensorIo, HeaderLayout) {
  BasicTensor<float> t(Shape{2, 2}, {1.0f, 0.0f, -2.0f, 0.5f});
  const auto b = encode_tensor(t);
  ASSERT_EQ(b.size(), 7u + 16 + 16);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "DVTN");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 1);
  EXPECT_EQ(b[6], 2);
  EXPECT_EQ(b[7], 2);
  for (int k = 8; k < 15; ++k) EXPECT_EQ(b[k], 0);
  // 1.0f = 0x3f800000, little-endian.
  EXPECT_EQ(b[23], 0x00);
  EXPECT_EQ(b[25], 0x80);
  EXPECT_EQ(b[26], 0x3f);
}

TEST(TensorIo, ShortPayloadIsCorruption) {
  test::TempDir dir("tio");
  BasicTensor<float> t(Shape{2, 2}, {1, 2, 3, 4});
  auto b = encode_tensor(t);
  b.resize(b.size() - 4);  // 2x2 header, 3-element payload
  write_bytes(dir / "short.dvtn", b);
  EXPECT_THROW(read_tensor<float>((dir / "short.dvtn").string()), DataError);
}

TEST(TensorIo, OtherCorruptions) {
  test::TempDir dir("tio");
  const auto good = encode_tensor(BasicTensor<float>(Shape{3}, {1, 2, 3}));
  auto check = [&](std::vector<std::uint8_t> b, const char* what) {
    write_bytes(dir / "x.dvtn", b);
    EXPECT_THROW(read_tensor<float>((dir / "x.dvtn").string()), DataError) << what;
  };
  auto b = good;
  b[0] = 'X';
  check(b, "magic");
  b = good;
  b[4] = 9;
  check(b, "version");
  b = good;
  b[5] = 42;
  check(b, "dtype");
  b = good;
  b.push_back(0);
  check(b, "trailing");
  check({'D', 'V'}, "truncated header");
  b = good;
  b[5] = 2;  // declares f64, payload too short
  check(b, "size mismatch");
  EXPECT_THROW(read_tensor<double>((dir / "missing.dvtn").string()), DataError);
  write_bytes(dir / "f.dvtn", good);
  EXPECT_THROW(read_tensor<double>((dir / "f.dvtn").string()), DataError);
  EXPECT_EQ(read_any((dir / "f.dvtn").string()).to_float()[2], 3.0f);
}

TEST(TensorIo, RefusesNonFinite) {
  BasicTensor<float> t(Shape{2}, {1.0f, std::nanf("")});
  EXPECT_THROW(encode_tensor(t), NumericError);
}
