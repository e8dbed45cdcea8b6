#include "vlcest/mmse.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <iostream>

#include "vlcest/binary_io.hpp"
#include "vlcest/errors.hpp"
#include "vlcest/rng.hpp"

namespace vlcest {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;

constexpr std::uint32_t kMmseVersion = 1;
constexpr int kMaxJitterEscalations = 8;

struct Tile {
  std::size_t image;
  std::size_t row;
  std::size_t col;
};

void check_model(const MmseModel& m) {
  if (m.patch_size == 0 || m.mean.size() != m.dim() || m.covariance.size() != m.dim() * m.dim()) {
    throw ShapeError("MMSE model dimensions are inconsistent");
  }
}

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

// Cholesky of C + s I, adding jitter in decades until it succeeds.
Eigen::LLT<Matrix> factor(const MmseModel& model, double noise_var) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const Eigen::Map<const Matrix> c(model.covariance.data(), d, d);
  double extra = 0.0;
  for (int k = 0; k <= kMaxJitterEscalations; ++k) {
    Matrix a = c;
    a.diagonal().array() += noise_var + extra;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) return llt;
    extra = extra == 0.0 ? std::max(model.jitter, 1e-12) * 10.0 : extra * 10.0;
  }
  throw NumericalError("MMSE covariance factorization failed after jitter escalation");
}

}  // namespace

MmseModel fit_mmse(const std::vector<Image>& images, std::size_t patch_size, std::size_t max_patches,
                   std::uint64_t seed) {
  if (images.empty()) throw DomainError("MMSE fit needs at least one image");
  if (patch_size == 0) throw ShapeError("MMSE patch size must be positive");
  std::vector<Tile> tiles;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto& im = images[k];
    for (std::size_t r = 0; r + patch_size <= im.rows; r += patch_size)
      for (std::size_t c = 0; c + patch_size <= im.cols; c += patch_size) tiles.push_back({k, r, c});
  }
  if (tiles.empty()) throw ShapeError("no image is large enough for a " + std::to_string(patch_size) + " patch");
  if (max_patches > 0 && max_patches < tiles.size()) {
    Rng rng(seed);
    rng.shuffle(tiles.begin(), tiles.end());
    tiles.resize(max_patches);
  }

  MmseModel m;
  m.patch_size = patch_size;
  m.sample_count = tiles.size();
  const auto d = static_cast<Eigen::Index>(m.dim());
  Matrix samples(d, static_cast<Eigen::Index>(tiles.size()));
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& im = images[tiles[t].image];
    for (std::size_t r = 0; r < patch_size; ++r)
      for (std::size_t c = 0; c < patch_size; ++c)
        samples(static_cast<Eigen::Index>(r * patch_size + c), static_cast<Eigen::Index>(t)) =
            im(tiles[t].row + r, tiles[t].col + c);
  }
  const Vector mean = samples.rowwise().mean();
  samples.colwise() -= mean;
  const double denom = tiles.size() > 1 ? static_cast<double>(tiles.size() - 1) : 1.0;
  Matrix cov = (samples * samples.transpose()) / denom;
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += m.jitter;
  if (tiles.size() < m.dim()) {
    std::clog << "warning: MMSE fit uses " << tiles.size() << " patches for a " << m.dim()
              << "-dimensional covariance; the estimate is ill-conditioned and relies on jitter\n";
  }
  m.mean.assign(mean.data(), mean.data() + d);
  m.covariance.assign(cov.data(), cov.data() + d * d);
  return m;
}

std::vector<double> mmse_solve(const MmseModel& model, std::span<const double> centered, double sigma_o) {
  check_model(model);
  if (centered.size() != model.dim()) throw ShapeError("centered patch has the wrong length");
  if (!(sigma_o >= 0.0)) throw DomainError("noise level must be nonnegative");
  const double s = (sigma_o / 255.0) * (sigma_o / 255.0);
  const auto llt = factor(model, s);
  const Vector z = llt.solve(Eigen::Map<const Vector>(centered.data(), static_cast<Eigen::Index>(centered.size())));
  return {z.data(), z.data() + z.size()};
}

Image mmse_denoise(const MmseModel& model, const Image& noisy, double sigma_o) {
  check_model(model);
  if (!(sigma_o >= 0.0)) throw DomainError("noise level must be nonnegative");
  if (noisy.size() == 0) throw ShapeError("empty image");
  const std::size_t p = model.patch_size;
  const std::size_t rows = (noisy.rows + p - 1) / p * p;
  const std::size_t cols = (noisy.cols + p - 1) / p * p;
  const std::size_t tiles_r = rows / p;
  const std::size_t tiles_c = cols / p;
  const auto d = static_cast<Eigen::Index>(model.dim());

  const Eigen::Map<const Vector> mean(model.mean.data(), d);
  const Eigen::Map<const Matrix> cov(model.covariance.data(), d, d);
  Matrix residual(d, static_cast<Eigen::Index>(tiles_r * tiles_c));
  for (std::size_t tr = 0; tr < tiles_r; ++tr)
    for (std::size_t tc = 0; tc < tiles_c; ++tc) {
      const auto col = static_cast<Eigen::Index>(tr * tiles_c + tc);
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) {
          const auto y = noisy(reflect(static_cast<std::ptrdiff_t>(tr * p + r), noisy.rows),
                               reflect(static_cast<std::ptrdiff_t>(tc * p + c), noisy.cols));
          residual(static_cast<Eigen::Index>(r * p + c), col) = y;
        }
    }
  residual.colwise() -= mean;

  const double s = (sigma_o / 255.0) * (sigma_o / 255.0);
  const auto llt = factor(model, s);
  Matrix estimate = cov * llt.solve(residual);
  estimate.colwise() += mean;

  Image out(noisy.rows, noisy.cols);
  for (std::size_t tr = 0; tr < tiles_r; ++tr)
    for (std::size_t tc = 0; tc < tiles_c; ++tc) {
      const auto col = static_cast<Eigen::Index>(tr * tiles_c + tc);
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) {
          const std::size_t y = tr * p + r;
          const std::size_t x = tc * p + c;
          if (y < noisy.rows && x < noisy.cols) out(y, x) = estimate(static_cast<Eigen::Index>(r * p + c), col);
        }
    }
  return out;
}

std::vector<std::uint8_t> mmse_bytes(const MmseModel& model) {
  check_model(model);
  io::ByteWriter w;
  w.magic("MMSE");
  w.u32(kMmseVersion);
  w.u32(static_cast<std::uint32_t>(model.patch_size));
  w.f64s(model.mean);
  w.f64s(model.covariance);
  return w.bytes();
}

MmseModel mmse_from_bytes(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic("MMSE");
  if (const auto v = r.u32(); v != kMmseVersion) {
    throw FormatError(source + ": unsupported MMSE model version " + std::to_string(v));
  }
  MmseModel m;
  m.patch_size = r.u32();
  if (m.patch_size == 0 || r.remaining() != 8 * (m.dim() + m.dim() * m.dim())) {
    throw FormatError(source + ": MMSE model size does not match its header");
  }
  m.mean.resize(m.dim());
  m.covariance.resize(m.dim() * m.dim());
  r.f64s(m.mean);
  r.f64s(m.covariance);
  r.expect_end();
  return m;
}

void save_mmse(const MmseModel& model, const std::filesystem::path& path) { io::write_file(path, mmse_bytes(model)); }

MmseModel load_mmse(const std::filesystem::path& path) { return mmse_from_bytes(io::read_file(path), path.string()); }

}  // namespace vlcest
