#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vlcest/imaging.hpp"

namespace vlcest {

/// Gaussian patch prior for the linear-MMSE (empirical Wiener) baseline.
struct MmseModel {
  std::size_t patch_size = 8;
  std::vector<double> mean;        // p^2, patch pixels in row-major order
  std::vector<double> covariance;  // p^2 x p^2, row-major, jitter already on the diagonal
  double jitter = 1e-8;
  std::size_t sample_count = 0;    // patches used by the fit; not serialized

  std::size_t dim() const { return patch_size * patch_size; }
};

/// Sample mean and (n-1) covariance over non-overlapping p x p tiles of the training images.
/// When max_patches > 0, a seed-determined random subset of the tiles is used.
MmseModel fit_mmse(const std::vector<Image>& images, std::size_t patch_size, std::size_t max_patches,
                   std::uint64_t seed);

/// Per tile: x = mu + C (C + s I)^{-1} (y - mu), s = (sigma_o / 255)^2, with a known noise level.
/// Dimensions not divisible by p are reflect-padded, and the result is cropped back.
Image mmse_denoise(const MmseModel& model, const Image& noisy, double sigma_o);

/// z = (C + s I)^{-1} r for one centered patch r, exposed for residual checks.
std::vector<double> mmse_solve(const MmseModel& model, std::span<const double> centered, double sigma_o);

/// "MMSE" file: magic, u32 version, u32 p, f64 mean, f64 covariance.
std::vector<std::uint8_t> mmse_bytes(const MmseModel& model);
MmseModel mmse_from_bytes(std::vector<std::uint8_t> bytes, const std::string& source = "<memory>");
void save_mmse(const MmseModel& model, const std::filesystem::path& path);
MmseModel load_mmse(const std::filesystem::path& path);

}  // namespace vlcest
