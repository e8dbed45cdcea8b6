#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "vlcest/binary_io.hpp"
#include "vlcest/errors.hpp"
#include "vlcest/mmse.hpp"
#include "vlcest/rng.hpp"

using namespace vlcest;
using doctest::Approx;

namespace {

Image random_image(std::size_t rows, std::size_t cols, Rng& rng) {
  Image im(rows, cols);
  for (auto& v : im.pixels) v = rng.uniform();
  return im;
}

// A p=2 model with a known, well-conditioned covariance.
MmseModel known_model() {
  MmseModel m;
  m.patch_size = 2;
  m.mean = {0.2, 0.4, 0.6, 0.8};
  const Eigen::Matrix4d l = (Eigen::Matrix4d() << 0.10, 0, 0, 0,  //
                             0.05, 0.08, 0, 0,                       //
                             0.02, 0.03, 0.09, 0,                    //
                             0.01, 0.04, 0.02, 0.07)
                                .finished();
  const Eigen::Matrix4d c = l * l.transpose();
  m.covariance.assign(c.data(), c.data() + 16);
  return m;
}

}  // namespace

TEST_CASE("fit on constant images has no spread") {
  const std::vector<Image> images(3, Image(16, 16, 0.4));
  const auto m = fit_mmse(images, 8, 0, 1);
  CHECK(m.sample_count == 12);
  for (double v : m.mean) CHECK(v == Approx(0.4));
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) {
      const double expect = i == j ? m.jitter : 0.0;
      CHECK(m.covariance[i * m.dim() + j] == Approx(expect).epsilon(1e-12).scale(1e-12));
    }
}

TEST_CASE("fit matches the hand-computed sample covariance") {
  const Image a(2, 2, std::vector<double>{1, 2, 3, 4});
  const Image b(2, 2, std::vector<double>{3, 2, 1, 0});
  const auto m = fit_mmse({a, b}, 2, 0, 1);
  CHECK(m.sample_count == 2);
  const std::vector<double> mu{2, 2, 2, 2};
  CHECK(m.mean == mu);
  // deviations: a - mu = (-1, 0, 1, 2), b - mu = (1, 0, -1, -2); n - 1 = 1
  const double da[4] = {-1, 0, 1, 2};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double expect = 2.0 * da[i] * da[j] + (i == j ? 1e-8 : 0.0);
      CHECK(m.covariance[i * 4 + j] == Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("fitted covariance is symmetric and the patch subset is deterministic") {
  Rng rng(2);
  std::vector<Image> images;
  for (int k = 0; k < 4; ++k) images.push_back(random_image(32, 32, rng));
  const auto m = fit_mmse(images, 8, 30, 5);
  CHECK(m.sample_count == 30);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) CHECK(m.covariance[i * 64 + j] == m.covariance[j * 64 + i]);
  CHECK(fit_mmse(images, 8, 30, 5).covariance == m.covariance);
  CHECK_FALSE(fit_mmse(images, 8, 30, 6).covariance == m.covariance);
}

TEST_CASE("fit validation") {
  CHECK_THROWS(fit_mmse({}, 8, 0, 1));
  CHECK_THROWS(fit_mmse({Image(4, 4, 0.5)}, 8, 0, 1));
  CHECK_THROWS(fit_mmse({Image(8, 8, 0.5)}, 0, 0, 1));
}

TEST_CASE("limits of the estimator") {
  Rng rng(3);
  std::vector<Image> train;
  for (int k = 0; k < 6; ++k) train.push_back(random_image(32, 32, rng));
  const auto m = fit_mmse(train, 8, 0, 1);
  const auto y = random_image(24, 20, rng);

  SUBCASE("no noise returns the observation") {
    const auto x = mmse_denoise(m, y, 0.0);
    REQUIRE(x.same_shape(y));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(x.pixels[i] - y.pixels[i]) < 1e-8);
  }
  SUBCASE("overwhelming noise returns the prior mean") {
    const Image square = crop(y, 0, 0, 16, 16);
    const auto x = mmse_denoise(m, square, 1e6);
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 0; c < 16; ++c) CHECK(std::abs(x(r, c) - m.mean[(r % 8) * 8 + c % 8]) < 1e-6);
  }
  CHECK_THROWS_AS(mmse_denoise(m, y, -1.0), DomainError);
}

TEST_CASE("scalar patches halve the deviation when prior and noise variances match") {
  MmseModel m;
  m.patch_size = 1;
  m.mean = {0.3};
  const double s = std::pow(20.0 / 255.0, 2);
  m.covariance = {s};
  const Image y(2, 2, std::vector<double>{0.1, 0.5, 0.9, 0.3});
  const auto x = mmse_denoise(m, y, 20.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.pixels[i] == Approx(0.3 + (y.pixels[i] - 0.3) / 2).epsilon(1e-12));
}

TEST_CASE("linear solve residual") {
  Rng rng(4);
  std::vector<Image> train;
  for (int k = 0; k < 3; ++k) train.push_back(random_image(64, 64, rng));
  const auto m = fit_mmse(train, 8, 0, 1);
  const Eigen::Map<const Eigen::Matrix<double, 64, 64, Eigen::RowMajor>> c(m.covariance.data());
  for (double sigma_o : {1.0, 10.0, 50.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> r(64);
      for (auto& v : r) v = rng.normal();
      const auto z = mmse_solve(m, r, sigma_o);
      const Eigen::Map<const Eigen::VectorXd> rv(r.data(), 64), zv(z.data(), 64);
      const double s = std::pow(sigma_o / 255.0, 2);
      const Eigen::VectorXd res = c * zv + s * zv - rv;
      CHECK(res.norm() / rv.norm() < 1e-8);
    }
  }
}

TEST_CASE("MMSE beats the identity estimator on data drawn from its own prior") {
  const auto m = known_model();
  const Eigen::Map<const Eigen::Matrix4d> c(m.covariance.data());
  const Eigen::Matrix4d l = Eigen::LLT<Eigen::Matrix4d>(c).matrixL();
  const Eigen::Map<const Eigen::Vector4d> mu(m.mean.data());
  Rng rng(5);
  for (double sigma_o : {1.0, 5.0, 15.0, 25.0, 50.0}) {
    double err_mmse = 0.0, err_identity = 0.0;
    for (int trial = 0; trial < 5000; ++trial) {
      Eigen::Vector4d z;
      for (int i = 0; i < 4; ++i) z[i] = rng.normal();
      const Eigen::Vector4d x = mu + l * z;
      Image clean(2, 2, std::vector<double>(x.data(), x.data() + 4));
      const auto y = add_awgn(clean, sigma_o, 1000 + trial);
      const auto est = mmse_denoise(m, y.image, sigma_o);
      err_mmse += mean_squared_error(clean, est);
      err_identity += mean_squared_error(clean, y.image);
    }
    INFO("sigma_o = " << sigma_o);
    CHECK(err_mmse <= err_identity);
  }
}

TEST_CASE("serialization") {
  Rng rng(6);
  const auto m = fit_mmse({random_image(16, 16, rng), random_image(16, 16, rng)}, 4, 0, 1);
  const auto bytes = mmse_bytes(m);
  CHECK(bytes.size() == 4 + 4 + 4 + 8 * (16 + 256));
  const auto back = mmse_from_bytes(bytes);
  CHECK(back.patch_size == 4);
  CHECK(back.mean == m.mean);
  CHECK(back.covariance == m.covariance);
  CHECK(mmse_bytes(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "vlcest_test_mmse.mmse";
  save_mmse(m, path);
  CHECK(io::read_file(path) == bytes);
  CHECK(load_mmse(path).covariance == m.covariance);
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS_AS(mmse_from_bytes(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(mmse_from_bytes(bad), FormatError);
}
