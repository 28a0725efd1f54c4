#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

#include "embseg/errors.hpp"

namespace embseg::detail {

template <typename T>
T byteswap_value(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& os, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (auto v : values) {
      const T s = byteswap_value(v);
      os.write(reinterpret_cast<const char*>(&s), sizeof(T));
    }
  }
  if (!os) throw DataError("write failed");
}

template <typename T>
void write_le_value(std::ostream& os, T value) {
  write_le<T>(os, std::span<const T>(&value, 1));
}

template <typename T>
void read_le(std::istream& is, std::span<T> out) {
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
  if (!is || static_cast<std::size_t>(is.gcount()) != out.size_bytes()) throw DataError("unexpected end of binary data");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : out) v = byteswap_value(v);
  }
}

template <typename T>
T read_le_value(std::istream& is) {
  T v{};
  read_le<T>(is, std::span<T>(&v, 1));
  return v;
}

}  // namespace embseg::detail
