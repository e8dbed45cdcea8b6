#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlcest/config.hpp"

namespace vlcest {

struct RoomSize {
  double length_m = 8.0;
  double width_m = 8.0;
  double height_m = 4.0;
};

/// Regular rectangular array on a horizontal plane, centered on the room footprint.
struct ArrayGrid {
  int count_x = 16;
  int count_y = 8;
  double spacing_m = 0.25;
  double plane_height_m = 1.0;

  int count() const { return count_x * count_y; }
};

/// One transceiver configuration: LED array on the ceiling side facing down,
/// PD array on a parallel plane below facing up.
struct VlcScene {
  RoomSize room;
  ArrayGrid led{16, 8, 0.25, 3.0};
  ArrayGrid pd{16, 8, 0.25, 1.0};
  double pd_offset_x_m = 0.0;
  double pd_offset_y_m = 0.0;
  double semi_angle_deg = 50.0;
  double fov_deg = 45.0;
  double pd_area_m2 = 1e-4;
  double filter_gain = 1.0;
  double refractive_index = 1.5;
  /// Stored for completeness; LED power does not enter the gain model.
  double led_power_w = 0.02;

  int n_t() const { return led.count(); }
  int n_r() const { return pd.count(); }
  double vertical_distance() const { return led.plane_height_m - pd.plane_height_m; }

  /// Throws DomainError / GeometryError when an invariant is violated.
  void validate() const;

  /// Square N x N arrays: 128 uses 16x8 grids, 256 uses 16x16 grids.
  static VlcScene with_array_size(int n);

  /// Reads the keys written by `write_config`; missing keys keep the defaults.
  static VlcScene from_config(const KeyValueConfig& cfg, const VlcScene& defaults);
  static VlcScene from_config(const KeyValueConfig& cfg);
  void write_config(KeyValueConfig& cfg) const;
};

struct Position {
  double x;
  double y;
  double z;
};

/// LED positions in row-major grid order (index = iy * count_x + ix).
std::vector<Position> led_positions(const VlcScene& scene);
/// PD positions in row-major grid order, including the plane offset.
std::vector<Position> pd_positions(const VlcScene& scene);

/// Dense N_r x N_t matrix of LOS gains; row = PD, column = LED.
class ChannelMatrix {
 public:
  ChannelMatrix() = default;
  ChannelMatrix(std::size_t n_r, std::size_t n_t) : n_r_(n_r), n_t_(n_t), entries_(n_r * n_t, 0.0) {}
  ChannelMatrix(std::size_t n_r, std::size_t n_t, std::vector<double> entries);

  std::size_t n_r() const { return n_r_; }
  std::size_t n_t() const { return n_t_; }
  double& operator()(std::size_t pd, std::size_t led) { return entries_[pd * n_t_ + led]; }
  double operator()(std::size_t pd, std::size_t led) const { return entries_[pd * n_t_ + led]; }
  std::span<const double> entries() const { return entries_; }

 private:
  std::size_t n_r_ = 0;
  std::size_t n_t_ = 0;
  std::vector<double> entries_;
};

struct ReceiverOptics {
  double pd_area_m2 = 1e-4;
  double filter_gain = 1.0;
  double refractive_index = 1.5;
  double fov_deg = 45.0;
};

/// m = -ln 2 / ln cos(semi_angle). Requires 0 < semi_angle_deg < 90.
double lambertian_order(double semi_angle_deg);

/// (m + 1) / (2 pi) * cos^m(angle). Requires order > 0 and 0 <= angle <= 90 degrees.
double radiant_intensity(double order, double irradiance_deg);

/// n^2 / sin^2(fov) inside the field of view, zero outside.
double concentrator_gain(double refractive_index, double incidence_deg, double fov_deg);

/// LOS DC gain of one LED/PD link. Throws GeometryError for distance <= 0.
double channel_gain(double distance_m, double irradiance_deg, double incidence_deg, double order,
                    const ReceiverOptics& optics);

ChannelMatrix build_channel_matrix(const VlcScene& scene);

}  // namespace vlcest
