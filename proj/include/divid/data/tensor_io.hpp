#pragma once

// DVTN tensor container.
//
//   offset  size        field
//   0       4           magic "DVTN"
//   4       1           version (1)
//   5       1           element type code (see DType)
//   6       1           dimension count n
//   7       8 * n       dimension sizes, uint64 little-endian
//   7 + 8n  ...         payload, row-major, little-endian elements
//
// Several records may be concatenated in one stream (checkpoints do this).

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/tensor.hpp"

namespace divid::data {

inline constexpr std::array<char, 4> kDvtnMagic{'D', 'V', 'T', 'N'};
inline constexpr std::uint8_t kDvtnVersion = 1;
inline constexpr std::size_t kDvtnMaxRank = 8;

enum class DType : std::uint8_t { f32 = 1, f64 = 2, u8 = 3, i32 = 4, i64 = 5 };

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::f32:
    case DType::i32:
      return 4;
    case DType::f64:
    case DType::i64:
      return 8;
    case DType::u8:
      return 1;
  }
  throw DataError("unknown DVTN element type");
}

inline const char* dtype_name(DType t) {
  switch (t) {
    case DType::f32:
      return "f32";
    case DType::f64:
      return "f64";
    case DType::u8:
      return "u8";
    case DType::i32:
      return "i32";
    case DType::i64:
      return "i64";
  }
  return "?";
}

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::f32;
  else if constexpr (std::is_same_v<T, double>) return DType::f64;
  else if constexpr (std::is_same_v<T, std::uint8_t>) return DType::u8;
  else if constexpr (std::is_same_v<T, std::int32_t>) return DType::i32;
  else if constexpr (std::is_same_v<T, std::int64_t>) return DType::i64;
  else static_assert(sizeof(T) == 0, "unsupported DVTN element type");
}

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return v;
}

template <typename T>
using bits_t = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_tensor(const BasicTensor<T>& t) {
  if (t.rank() > kDvtnMaxRank) throw UsageError("DVTN supports at most 8 dimensions");
  if constexpr (std::is_floating_point_v<T>) {
    if (!t.all_finite()) throw NumericError("refusing to write a tensor with non-finite values");
  }
  std::vector<std::uint8_t> out;
  out.reserve(7 + 8 * t.rank() + t.size() * sizeof(T));
  out.insert(out.end(), kDvtnMagic.begin(), kDvtnMagic.end());
  out.push_back(kDvtnVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) detail::put_le<std::uint64_t>(out, d);
  using B = detail::bits_t<T>;
  for (T v : t) detail::put_le<B>(out, std::bit_cast<B>(v));
  return out;
}

// A decoded record whose element type is only known at run time.
struct AnyTensor {
  DType dtype = DType::f32;
  Shape shape;
  std::vector<std::uint8_t> payload;  // little-endian

  template <typename T>
  BasicTensor<T> as() const {
    if (dtype != dtype_of<T>()) {
      throw DataError(std::string("DVTN element type is ") + dtype_name(dtype) + ", expected " +
                      dtype_name(dtype_of<T>()));
    }
    using B = detail::bits_t<T>;
    BasicTensor<T> out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::bit_cast<T>(detail::get_le<B>(payload.data() + i * sizeof(T)));
    }
    return out;
  }

  // Converting read for floating-point consumers.
  BasicTensor<float> to_float() const {
    switch (dtype) {
      case DType::f32:
        return as<float>();
      case DType::f64:
        return as<double>().cast<float>();
      case DType::u8:
        return as<std::uint8_t>().cast<float>();
      case DType::i32:
        return as<std::int32_t>().cast<float>();
      case DType::i64:
        return as<std::int64_t>().cast<float>();
    }
    throw DataError("unknown DVTN element type");
  }
};

// Reads one record from `in`. `origin` names the source in error messages.
inline AnyTensor read_record(std::istream& in, const std::string& origin) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4)) throw DataError(origin + ": truncated DVTN header");
  if (magic != kDvtnMagic) throw DataError(origin + ": bad magic, not a DVTN file");
  std::uint8_t head[3];
  if (!in.read(reinterpret_cast<char*>(head), 3)) throw DataError(origin + ": truncated DVTN header");
  if (head[0] != kDvtnVersion) throw DataError(origin + ": unsupported DVTN version " + std::to_string(head[0]));
  AnyTensor t;
  if (head[1] < 1 || head[1] > 5) throw DataError(origin + ": unknown element type code " + std::to_string(head[1]));
  t.dtype = static_cast<DType>(head[1]);
  const std::size_t rank = head[2];
  if (rank > kDvtnMaxRank) throw DataError(origin + ": rank " + std::to_string(rank) + " exceeds limit");
  std::vector<std::uint8_t> dims(8 * rank);
  if (rank && !in.read(reinterpret_cast<char*>(dims.data()), static_cast<std::streamsize>(dims.size()))) {
    throw DataError(origin + ": truncated DVTN shape");
  }
  std::size_t numel = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto d = detail::get_le<std::uint64_t>(dims.data() + 8 * i);
    if (d > (std::uint64_t{1} << 40)) throw DataError(origin + ": implausible dimension size");
    t.shape.push_back(static_cast<std::size_t>(d));
    numel *= static_cast<std::size_t>(d);
  }
  t.payload.resize(numel * dtype_size(t.dtype));
  if (!t.payload.empty() && !in.read(reinterpret_cast<char*>(t.payload.data()), static_cast<std::streamsize>(t.payload.size()))) {
    throw DataError(origin + ": payload holds " + std::to_string(in.gcount()) + " bytes but shape " +
                    shape_str(t.shape) + " needs " + std::to_string(t.payload.size()));
  }
  return t;
}

inline AnyTensor read_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file " + path);
  AnyTensor t = read_record(in, path);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(path + ": trailing bytes after payload, shape and file size disagree");
  }
  return t;
}

template <typename T>
BasicTensor<T> read_tensor(const std::string& path) {
  return read_any(path).as<T>();
}

template <typename T>
void write_record(std::ostream& out, const BasicTensor<T>& t) {
  const auto bytes = encode_tensor(t);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void write_tensor(const BasicTensor<T>& t, const std::string& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write tensor file " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path);
}

}  // namespace divid::data
