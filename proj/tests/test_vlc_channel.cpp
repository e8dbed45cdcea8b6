#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vlcest/errors.hpp"
#include "vlcest/vlc_channel.hpp"

using namespace vlcest;
using doctest::Approx;

namespace {

// Table 1 optics with a single aligned LED/PD pair L metres apart.
VlcScene single_pair(double l) {
  VlcScene s;
  s.led = {1, 1, 0.25, 1.0 + l};
  s.pd = {1, 1, 0.25, 1.0};
  return s;
}

std::size_t zero_count(const ChannelMatrix& h) {
  const auto e = h.entries();
  return static_cast<std::size_t>(std::count(e.begin(), e.end(), 0.0));
}

}  // namespace

TEST_CASE("lambertian order") {
  CHECK(lambertian_order(60.0) == Approx(1.0).epsilon(1e-12));
  // -ln2 / ln(cos 50 deg), evaluated independently in Python's math module.
  CHECK(lambertian_order(50.0) == Approx(1.5684159304466327).epsilon(1e-12));
  const double near_90 = lambertian_order(89.9);
  CHECK(std::isfinite(near_90));
  CHECK(near_90 > 0.0);
  CHECK(near_90 == Approx(0.10914307002228488).epsilon(1e-10));
  CHECK_THROWS_AS(lambertian_order(0.0), DomainError);
  CHECK_THROWS_AS(lambertian_order(90.0), DomainError);
  CHECK_THROWS_AS(lambertian_order(-5.0), DomainError);
}

TEST_CASE("radiant intensity") {
  CHECK(radiant_intensity(1.0, 0.0) == Approx(1.0 / std::numbers::pi).epsilon(1e-14));
  CHECK(radiant_intensity(1.0, 90.0) == 0.0);
  CHECK(radiant_intensity(1.5672, 0.0) == Approx(0.4085).epsilon(1e-3 / 0.4085));
  CHECK_THROWS_AS(radiant_intensity(0.0, 10.0), DomainError);
  CHECK_THROWS_AS(radiant_intensity(1.0, 91.0), DomainError);
}

TEST_CASE("concentrator gain") {
  CHECK(concentrator_gain(1.5, 30.0, 45.0) == Approx(4.5).epsilon(1e-12));
  CHECK(concentrator_gain(1.5, 46.0, 45.0) == 0.0);
  CHECK(concentrator_gain(1.5, 45.0, 45.0) == Approx(4.5).epsilon(1e-12));
  CHECK(concentrator_gain(1.0, 0.0, 90.0) == Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(concentrator_gain(0.5, 0.0, 45.0), DomainError);
}

TEST_CASE("channel gain of one link") {
  const ReceiverOptics optics{1e-4, 1.0, 1.5, 45.0};
  const double m = lambertian_order(50.0);
  // (A_r / d^2) (m+1)/(2 pi) T_s n^2/sin^2(fov) at d = 2, both angles 0; Python oracle.
  CHECK(channel_gain(2.0, 0.0, 0.0, m, optics) == Approx(4.5987310265237024e-05).epsilon(1e-12));
  CHECK(std::abs(channel_gain(2.0, 0.0, 0.0, m, optics) - 4.599e-5) < 1e-7);
  CHECK(channel_gain(2.0, 0.0, 90.0, m, optics) == 0.0);
  CHECK(channel_gain(4.0, 20.0, 20.0, m, optics) ==
        Approx(channel_gain(2.0, 20.0, 20.0, m, optics) / 4.0).epsilon(1e-14));
  CHECK_THROWS_AS(channel_gain(0.0, 0.0, 0.0, m, optics), GeometryError);

  SUBCASE("strictly decreasing in distance") {
    double prev = channel_gain(0.5, 10.0, 10.0, m, optics);
    for (double d = 0.6; d < 5.0; d += 0.1) {
      const double h = channel_gain(d, 10.0, 10.0, m, optics);
      CHECK(h < prev);
      prev = h;
    }
  }
}

TEST_CASE("1x1 aligned scene reproduces the scalar gain") {
  const auto h = build_channel_matrix(single_pair(2.0));
  REQUIRE(h.n_r() == 1);
  REQUIRE(h.n_t() == 1);
  CHECK(h(0, 0) == Approx(4.5987310265237024e-05).epsilon(1e-12));
}

TEST_CASE("matrix entries match an independent per-pair evaluation") {
  VlcScene s = VlcScene::with_array_size(128);
  s.pd_offset_x_m = 0.3;
  s.pd_offset_y_m = -0.2;
  const auto h = build_channel_matrix(s);
  REQUIRE(h.n_r() == 128);
  REQUIRE(h.n_t() == 128);

  const double m = -std::log(2.0) / std::log(std::cos(s.semi_angle_deg * std::numbers::pi / 180.0));
  const double gmax = s.refractive_index * s.refractive_index / std::pow(std::sin(s.fov_deg * std::numbers::pi / 180.0), 2);
  double worst = 0.0;
  for (int j = 0; j < s.n_r(); ++j) {
    const double px = 4.0 + 0.3 + (j % 16 - 7.5) * 0.25;
    const double py = 4.0 - 0.2 + (j / 16 - 3.5) * 0.25;
    for (int i = 0; i < s.n_t(); ++i) {
      const double lx = 4.0 + (i % 16 - 7.5) * 0.25;
      const double ly = 4.0 + (i / 16 - 3.5) * 0.25;
      const double d = std::sqrt((px - lx) * (px - lx) + (py - ly) * (py - ly) + 4.0);
      const double angle = std::acos(2.0 / d);
      const double expected = angle > s.fov_deg * std::numbers::pi / 180.0
                                  ? 0.0
                                  : 1e-4 / (d * d) * (m + 1) / (2 * std::numbers::pi) * std::pow(std::cos(angle), m) *
                                        gmax * std::cos(angle);
      const double got = h(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
      CHECK(got >= 0.0);
      if (expected == 0.0) {
        CHECK(got == 0.0);
      } else {
        worst = std::max(worst, std::abs(got - expected) / expected);
      }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("PDs outside every LED's field of view give zero rows") {
  VlcScene s;
  s.led = {2, 2, 0.2, 3.0};
  s.pd = {2, 2, 3.5, 1.0};  // PD corners 1.75 m from centre, L = 2 m
  s.fov_deg = 20.0;
  const auto h = build_channel_matrix(s);
  for (std::size_t j = 0; j < h.n_r(); ++j)
    for (std::size_t i = 0; i < h.n_t(); ++i) CHECK(h(j, i) == 0.0);
}

TEST_CASE("sparsity grows as the field of view shrinks") {
  VlcScene s = VlcScene::with_array_size(128);
  s.led.spacing_m = s.pd.spacing_m = 0.4;
  std::size_t prev = 0;
  bool first = true;
  for (double fov : {60.0, 45.0, 35.0, 25.0}) {
    s.fov_deg = fov;
    const auto zeros = zero_count(build_channel_matrix(s));
    if (fov <= 45.0) CHECK(zeros > 0);
    if (!first) CHECK(zeros > prev);
    prev = zeros;
    first = false;
  }
}

TEST_CASE("swapping two LEDs permutes only their columns") {
  VlcScene s = VlcScene::with_array_size(128);
  s.pd_offset_x_m = 0.1;
  const auto h = build_channel_matrix(s);
  // Reflecting the LED grid in x maps LED (ix, iy) to (15 - ix, iy); mirror the PD offset as well.
  VlcScene mirrored = s;
  mirrored.pd_offset_x_m = -0.1;
  const auto hm = build_channel_matrix(mirrored);
  for (std::size_t j = 0; j < 128; ++j) {
    const std::size_t jm = (j / 16) * 16 + (15 - j % 16);
    for (std::size_t i = 0; i < 128; ++i) {
      const std::size_t im = (i / 16) * 16 + (15 - i % 16);
      CHECK(hm(jm, im) == Approx(h(j, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("scene validation") {
  VlcScene s;
  CHECK_NOTHROW(s.validate());
  VlcScene low = s;
  low.led.plane_height_m = 0.5;
  CHECK_THROWS_AS(low.validate(), GeometryError);
  VlcScene outside = s;
  outside.pd_offset_x_m = 3.0;
  CHECK_THROWS_AS(build_channel_matrix(outside), GeometryError);
  VlcScene bad_angle = s;
  bad_angle.semi_angle_deg = 90.0;
  CHECK_THROWS_AS(bad_angle.validate(), DomainError);
  CHECK_THROWS_AS(VlcScene::with_array_size(64), DomainError);
}

TEST_CASE("scene config round trip") {
  VlcScene s = VlcScene::with_array_size(256);
  s.pd_offset_x_m = 0.123456789;
  s.fov_deg = 40.0;
  KeyValueConfig cfg;
  s.write_config(cfg);
  const auto back = VlcScene::from_config(KeyValueConfig::parse(cfg.to_string()));
  CHECK(back.pd_offset_x_m == s.pd_offset_x_m);
  CHECK(back.fov_deg == 40.0);
  CHECK(back.n_t() == 256);
  CHECK(back.led_power_w == 0.02);
}
