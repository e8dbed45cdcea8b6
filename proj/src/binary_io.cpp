#include "vlcest/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "vlcest/errors.hpp"

namespace vlcest::io {

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(p[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void ByteWriter::magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

void ByteWriter::u32(std::uint32_t v) { put_le(bytes_, v); }

void ByteWriter::f32(float v) { put_le(bytes_, std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { put_le(bytes_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f32s(std::span<const float> v) {
  bytes_.reserve(bytes_.size() + 4 * v.size());
  for (float x : v) f32(x);
}

void ByteWriter::f64s(std::span<const double> v) {
  bytes_.reserve(bytes_.size() + 8 * v.size());
  for (double x : v) f64(x);
}

void ByteWriter::write_file(const std::filesystem::path& path) const { io::write_file(path, bytes_); }

ByteReader::ByteReader(std::vector<std::uint8_t> bytes, std::string source)
    : bytes_(std::move(bytes)), source_(std::move(source)) {}

ByteReader ByteReader::from_file(const std::filesystem::path& path) { return ByteReader(read_file(path), path.string()); }

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (remaining() < n) {
    throw FormatError("truncated data in " + (source_.empty() ? std::string("buffer") : source_));
  }
  const std::uint8_t* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

void ByteReader::expect_magic(std::string_view tag) {
  const auto* p = take(tag.size());
  if (std::memcmp(p, tag.data(), tag.size()) != 0) {
    throw FormatError("bad magic in " + source_ + ": expected \"" + std::string(tag) + "\"");
  }
}

std::uint32_t ByteReader::u32() { return get_le<std::uint32_t>(take(4)); }

float ByteReader::f32() { return std::bit_cast<float>(get_le<std::uint32_t>(take(4))); }

double ByteReader::f64() { return std::bit_cast<double>(get_le<std::uint64_t>(take(8))); }

void ByteReader::f32s(std::span<float> out) {
  const auto* p = take(4 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
}

void ByteReader::f64s(std::span<double> out) {
  const auto* p = take(8 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
}

void ByteReader::expect_end() const {
  if (remaining() != 0) throw FormatError("trailing bytes in " + source_);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

}  // namespace vlcest::io
