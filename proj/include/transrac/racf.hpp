#pragma once

// Little-endian binary I/O helpers and the RACF precomputed-feature format:
//   "RACF" | u32 version=1 | u32 T | u32 S1 | u32 S2 | u32 d_f | float32[T*S1*S2*d_f]

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "transrac/error.hpp"
#include "transrac/tensor.hpp"

namespace transrac {
namespace io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  template <typename U>
  void put(U v) {
    char raw[sizeof(U)];
    std::memcpy(raw, &v, sizeof(U));
    buf_.insert(buf_.end(), raw, raw + sizeof(U));
  }
  const std::string& str() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("unexpected end of binary data");
  }
  std::string_view data_;
  std::size_t pos_{0};
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace io

inline constexpr std::uint32_t kRacfVersion = 1;

/// Serializes a [T, S1, S2, d_f] feature tensor.
inline std::string encode_racf(const Tensor<float>& features) {
  if (features.rank() != 4) throw ShapeError("RACF tensor must be rank 4 [T, S1, S2, d_f]");
  io::ByteWriter w;
  w.bytes("RACF");
  w.put<std::uint32_t>(kRacfVersion);
  for (std::size_t d : features.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  for (float v : features.data) w.put<float>(v);
  return w.str();
}

inline Tensor<float> decode_racf(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.bytes(4) != "RACF") throw ParseError("RACF: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kRacfVersion)
    throw ParseError("RACF: unsupported version " + std::to_string(version));
  Shape shape(4);
  for (auto& d : shape) d = r.get<std::uint32_t>();
  Tensor<float> t(shape);
  for (auto& v : t.data) v = r.get<float>();
  if (!r.at_end()) throw ParseError("RACF: trailing bytes");
  return t;
}

inline void write_racf(const std::filesystem::path& path, const Tensor<float>& features) {
  io::write_file(path, encode_racf(features));
}

inline Tensor<float> read_racf(const std::filesystem::path& path) {
  return decode_racf(io::read_file(path));
}

}  // namespace transrac
