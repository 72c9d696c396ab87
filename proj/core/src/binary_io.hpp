// Copyright 2026 The longdoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian binary helpers shared by the shard and checkpoint formats.

#ifndef LONGDOC_SRC_BINARY_IO_HPP_
#define LONGDOC_SRC_BINARY_IO_HPP_

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "longdoc/errors.hpp"

namespace longdoc::inline LONGDOC_ABI::detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xff));
    u = static_cast<U>(u >> 8);
  }
}

inline void put_f32(std::string& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  put_le(out, bits);
}

// Bounds-checked reader over an in-memory file image.
class Reader {
 public:
  Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::string_view bytes(std::size_t n) {
    if (remaining() < n) {
      throw TruncatedFileError(what_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                               std::to_string(pos_) + ", have " + std::to_string(remaining()) + ")");
    }
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get_le() {
    auto b = bytes(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
      u = static_cast<std::make_unsigned_t<T>>((u << 8) | static_cast<unsigned char>(b[i]));
    }
    return static_cast<T>(u);
  }

  float get_f32() {
    const auto bits = get_le<std::uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

 private:
  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace longdoc::inline LONGDOC_ABI::detail

#endif  // LONGDOC_SRC_BINARY_IO_HPP_
