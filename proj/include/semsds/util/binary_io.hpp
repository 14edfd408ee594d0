#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>

namespace semsds::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline bool read_magic(std::istream& is, std::string_view magic) {
  std::array<char, 8> buf{};
  is.read(buf.data(), static_cast<std::streamsize>(magic.size()));
  return is.good() && std::string_view(buf.data(), magic.size()) == magic;
}

template <typename T>
void write(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace semsds::binio
