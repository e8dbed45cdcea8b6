#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vlcest::io {

/// Append-only little-endian byte sink.
class ByteWriter {
 public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void f32s(std::span<const float> v);
  void f64s(std::span<const double> v);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; every short read throws FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes, std::string source = {});
  static ByteReader from_file(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  float f32();
  double f64();
  void f32s(std::span<float> out);
  void f64s(std::span<double> out);

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const;

 private:
  const std::uint8_t* take(std::size_t n);

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace vlcest::io
