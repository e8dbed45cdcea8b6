#include "vlcest/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vlcest/errors.hpp"
#include "vlcest/rng.hpp"

namespace vlcest {

Image::Image(std::size_t r, std::size_t c, std::vector<double> px) : rows(r), cols(c), pixels(std::move(px)) {
  if (pixels.size() != r * c) throw ShapeError("image pixel count does not match its dimensions");
}

ChannelImage matrix_to_image(const ChannelMatrix& h) {
  if (h.n_r() % 2 != 0 || h.n_t() % 2 != 0) {
    throw ShapeError("channel image dimensions must be even, got " + std::to_string(h.n_r()) + "x" +
                     std::to_string(h.n_t()));
  }
  const auto entries = h.entries();
  const auto [lo, hi] = std::minmax_element(entries.begin(), entries.end());
  if (entries.empty() || !(*hi > *lo)) throw NumericalError("cannot normalize a constant channel matrix");

  ChannelImage x;
  x.norm_min = *lo;
  x.norm_scale = *hi - *lo;
  x.image = Image(h.n_r(), h.n_t());
  for (std::size_t k = 0; k < entries.size(); ++k) x.image.pixels[k] = (entries[k] - x.norm_min) / x.norm_scale;
  return x;
}

ChannelMatrix image_to_matrix(const ChannelImage& x) {
  std::vector<double> entries(x.image.size());
  for (std::size_t k = 0; k < entries.size(); ++k) entries[k] = x.image.pixels[k] * x.norm_scale + x.norm_min;
  return ChannelMatrix(x.image.rows, x.image.cols, std::move(entries));
}

NoisyChannelImage add_awgn(const Image& clean, double sigma_o, std::uint64_t seed) {
  if (!(sigma_o >= 0.0)) throw DomainError("noise level must be nonnegative");
  NoisyChannelImage y{clean, sigma_o};
  if (sigma_o == 0.0) return y;
  Rng rng(seed);
  const double stddev = sigma_o / 255.0;
  for (auto& p : y.image.pixels) p += stddev * rng.normal();
  return y;
}

double mean_squared_error(const Image& reference, const Image& estimate) {
  if (!reference.same_shape(estimate)) throw ShapeError("images differ in size");
  if (reference.size() == 0) throw ShapeError("empty image");
  double acc = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const double d = reference.pixels[k] - estimate.pixels[k];
    acc += d * d;
  }
  return acc / static_cast<double>(reference.size());
}

double psnr(const Image& reference, const Image& estimate) {
  const double mse = mean_squared_error(reference, estimate);
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<PatchCorner> patch_corners(std::size_t rows, std::size_t cols, std::size_t patch, std::size_t count,
                                       std::uint64_t seed) {
  if (patch == 0 || patch % 2 != 0) throw ShapeError("patch size must be a positive even number");
  if (patch > rows || patch > cols) {
    throw ShapeError("patch " + std::to_string(patch) + " exceeds image " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Rng rng(seed);
  std::vector<PatchCorner> corners(count);
  for (auto& c : corners) {
    c.row = rng.uniform_index(rows - patch + 1);
    c.col = rng.uniform_index(cols - patch + 1);
  }
  return corners;
}

Image crop(const Image& src, std::size_t row, std::size_t col, std::size_t height, std::size_t width) {
  if (row + height > src.rows || col + width > src.cols) throw ShapeError("crop window exceeds image");
  Image out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    std::copy_n(src.pixels.begin() + static_cast<std::ptrdiff_t>((row + r) * src.cols + col), width,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return out;
}

std::vector<Image> extract_patches(const Image& x, std::size_t patch, std::size_t count, std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(count);
  for (const auto& c : patch_corners(x.rows, x.cols, patch, count, seed)) out.push_back(crop(x, c.row, c.col, patch, patch));
  return out;
}

}  // namespace vlcest
