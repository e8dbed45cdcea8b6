#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "vlcest/vlc_channel.hpp"

namespace vlcest {

/// Row-major single-channel image of doubles.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), pixels(r * c, fill) {}
  Image(std::size_t r, std::size_t c, std::vector<double> px);

  double& operator()(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
};

/// Noise-free channel image: pixels in [0,1], original gain = pixel * norm_scale + norm_min.
struct ChannelImage {
  Image image;
  double norm_min = 0.0;
  double norm_scale = 1.0;
};

/// Channel image after AWGN; pixels are not clipped. sigma_o uses the 0-255 convention.
struct NoisyChannelImage {
  Image image;
  double sigma_o = 0.0;
};

/// Per-image min-max normalization. Requires even dimensions and at least two distinct values.
ChannelImage matrix_to_image(const ChannelMatrix& h);
ChannelMatrix image_to_matrix(const ChannelImage& x);

/// y = x + e with e ~ N(0, (sigma_o/255)^2), seed-deterministic.
NoisyChannelImage add_awgn(const Image& clean, double sigma_o, std::uint64_t seed);
inline NoisyChannelImage add_awgn(const ChannelImage& clean, double sigma_o, std::uint64_t seed) {
  return add_awgn(clean.image, sigma_o, seed);
}

/// Sentinel returned by psnr for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double mean_squared_error(const Image& reference, const Image& estimate);
/// 10 log10(1 / MSE) with peak 1 on the unit pixel scale.
double psnr(const Image& reference, const Image& estimate);

struct PatchCorner {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const PatchCorner&) const = default;
};

/// Uniformly random top-left corners for square patches; deterministic for a seed.
std::vector<PatchCorner> patch_corners(std::size_t rows, std::size_t cols, std::size_t patch, std::size_t count,
                                       std::uint64_t seed);
Image crop(const Image& src, std::size_t row, std::size_t col, std::size_t height, std::size_t width);
std::vector<Image> extract_patches(const Image& x, std::size_t patch, std::size_t count, std::uint64_t seed);

}  // namespace vlcest
