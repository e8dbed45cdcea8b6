#include "vlcest/vlc_channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "vlcest/errors.hpp"

namespace vlcest {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr Position kLedAxis{0.0, 0.0, -1.0};
constexpr Position kPdAxis{0.0, 0.0, 1.0};

void require_angle(double deg, double lo, double hi, const char* what) {
  if (!(deg >= lo && deg <= hi)) {
    throw DomainError(std::string(what) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] degrees, got " + std::to_string(deg));
  }
}

// Radian-domain kernels shared by the public scalar functions and the matrix builder.
double intensity_rad(double order, double irradiance_rad) {
  return (order + 1.0) / (2.0 * std::numbers::pi) * std::pow(std::cos(irradiance_rad), order);
}

double concentrator_rad(double n, double incidence_rad, double fov_rad) {
  if (incidence_rad < 0.0 || incidence_rad > fov_rad) return 0.0;
  const double s = std::sin(fov_rad);
  return n * n / (s * s);
}

double gain_rad(double distance, double irradiance_rad, double incidence_rad, double order,
                const ReceiverOptics& optics) {
  if (!(distance > 0.0)) throw GeometryError("LED/PD distance must be positive");
  const double fov_rad = optics.fov_deg * kDegToRad;
  const double g = concentrator_rad(optics.refractive_index, incidence_rad, fov_rad);
  if (g == 0.0) return 0.0;
  return optics.pd_area_m2 / (distance * distance) * intensity_rad(order, irradiance_rad) * optics.filter_gain * g *
         std::cos(incidence_rad);
}

std::vector<Position> grid_positions(const ArrayGrid& grid, const RoomSize& room, double dx, double dy) {
  std::vector<Position> out;
  out.reserve(static_cast<std::size_t>(grid.count()));
  const double cx = 0.5 * room.length_m + dx;
  const double cy = 0.5 * room.width_m + dy;
  for (int iy = 0; iy < grid.count_y; ++iy) {
    for (int ix = 0; ix < grid.count_x; ++ix) {
      out.push_back({cx + (ix - 0.5 * (grid.count_x - 1)) * grid.spacing_m,
                     cy + (iy - 0.5 * (grid.count_y - 1)) * grid.spacing_m, grid.plane_height_m});
    }
  }
  return out;
}

bool inside(const Position& p, const RoomSize& room) {
  return p.x >= 0.0 && p.x <= room.length_m && p.y >= 0.0 && p.y <= room.width_m;
}

}  // namespace

void VlcScene::validate() const {
  if (!(room.length_m > 0 && room.width_m > 0 && room.height_m > 0)) throw GeometryError("room dimensions must be positive");
  for (const auto* grid : {&led, &pd}) {
    if (grid->count_x < 1 || grid->count_y < 1) throw GeometryError("array counts must be positive");
    if (!(grid->spacing_m > 0)) throw GeometryError("array spacing must be positive");
    if (!(grid->plane_height_m >= 0 && grid->plane_height_m <= room.height_m)) {
      throw GeometryError("array plane height must lie inside the room");
    }
  }
  if (!(vertical_distance() > 0)) throw GeometryError("LED plane must be above the PD plane");
  if (!(semi_angle_deg > 0 && semi_angle_deg < 90)) throw DomainError("semi-angle must lie in (0, 90) degrees");
  if (!(fov_deg > 0 && fov_deg <= 90)) throw DomainError("field of view must lie in (0, 90] degrees");
  if (!(pd_area_m2 > 0)) throw DomainError("PD area must be positive");
  if (!(filter_gain > 0)) throw DomainError("filter gain must be positive");
  if (!(refractive_index >= 1)) throw DomainError("refractive index must be >= 1");
  for (const auto& p : led_positions(*this)) {
    if (!inside(p, room)) throw GeometryError("LED array extends outside the room");
  }
  for (const auto& p : pd_positions(*this)) {
    if (!inside(p, room)) throw GeometryError("PD array extends outside the room after offset");
  }
}

VlcScene VlcScene::with_array_size(int n) {
  VlcScene s;
  switch (n) {
    case 128:
      s.led.count_x = s.pd.count_x = 16;
      s.led.count_y = s.pd.count_y = 8;
      break;
    case 256:
      s.led.count_x = s.pd.count_x = 16;
      s.led.count_y = s.pd.count_y = 16;
      break;
    default:
      throw DomainError("supported array sizes are 128 and 256, got " + std::to_string(n));
  }
  return s;
}

VlcScene VlcScene::from_config(const KeyValueConfig& cfg, const VlcScene& d) {
  VlcScene s = d;
  s.room.length_m = cfg.get_double("room_length_m", d.room.length_m);
  s.room.width_m = cfg.get_double("room_width_m", d.room.width_m);
  s.room.height_m = cfg.get_double("room_height_m", d.room.height_m);
  s.led.count_x = static_cast<int>(cfg.get_int("led_count_x", d.led.count_x));
  s.led.count_y = static_cast<int>(cfg.get_int("led_count_y", d.led.count_y));
  s.led.spacing_m = cfg.get_double("led_spacing_m", d.led.spacing_m);
  s.led.plane_height_m = cfg.get_double("led_height_m", d.led.plane_height_m);
  s.pd.count_x = static_cast<int>(cfg.get_int("pd_count_x", d.pd.count_x));
  s.pd.count_y = static_cast<int>(cfg.get_int("pd_count_y", d.pd.count_y));
  s.pd.spacing_m = cfg.get_double("pd_spacing_m", d.pd.spacing_m);
  s.pd.plane_height_m = cfg.get_double("pd_height_m", d.pd.plane_height_m);
  s.pd_offset_x_m = cfg.get_double("pd_offset_x_m", d.pd_offset_x_m);
  s.pd_offset_y_m = cfg.get_double("pd_offset_y_m", d.pd_offset_y_m);
  s.semi_angle_deg = cfg.get_double("semi_angle_deg", d.semi_angle_deg);
  s.fov_deg = cfg.get_double("fov_deg", d.fov_deg);
  s.pd_area_m2 = cfg.get_double("pd_area_m2", d.pd_area_m2);
  s.filter_gain = cfg.get_double("filter_gain", d.filter_gain);
  s.refractive_index = cfg.get_double("refractive_index", d.refractive_index);
  s.led_power_w = cfg.get_double("led_power_w", d.led_power_w);
  return s;
}

VlcScene VlcScene::from_config(const KeyValueConfig& cfg) { return from_config(cfg, VlcScene{}); }

void VlcScene::write_config(KeyValueConfig& cfg) const {
  auto put = [&cfg](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    cfg.set(key, buf);
  };
  put("room_length_m", room.length_m);
  put("room_width_m", room.width_m);
  put("room_height_m", room.height_m);
  cfg.set("led_count_x", std::to_string(led.count_x));
  cfg.set("led_count_y", std::to_string(led.count_y));
  put("led_spacing_m", led.spacing_m);
  put("led_height_m", led.plane_height_m);
  cfg.set("pd_count_x", std::to_string(pd.count_x));
  cfg.set("pd_count_y", std::to_string(pd.count_y));
  put("pd_spacing_m", pd.spacing_m);
  put("pd_height_m", pd.plane_height_m);
  put("pd_offset_x_m", pd_offset_x_m);
  put("pd_offset_y_m", pd_offset_y_m);
  put("semi_angle_deg", semi_angle_deg);
  put("fov_deg", fov_deg);
  put("pd_area_m2", pd_area_m2);
  put("filter_gain", filter_gain);
  put("refractive_index", refractive_index);
  put("led_power_w", led_power_w);
}

std::vector<Position> led_positions(const VlcScene& scene) { return grid_positions(scene.led, scene.room, 0.0, 0.0); }

std::vector<Position> pd_positions(const VlcScene& scene) {
  return grid_positions(scene.pd, scene.room, scene.pd_offset_x_m, scene.pd_offset_y_m);
}

ChannelMatrix::ChannelMatrix(std::size_t n_r, std::size_t n_t, std::vector<double> entries)
    : n_r_(n_r), n_t_(n_t), entries_(std::move(entries)) {
  if (entries_.size() != n_r * n_t) throw ShapeError("channel matrix entry count does not match its dimensions");
}

double lambertian_order(double semi_angle_deg) {
  if (!(semi_angle_deg > 0.0 && semi_angle_deg < 90.0)) {
    throw DomainError("semi-angle must lie in (0, 90) degrees, got " + std::to_string(semi_angle_deg));
  }
  return -std::log(2.0) / std::log(std::cos(semi_angle_deg * kDegToRad));
}

double radiant_intensity(double order, double irradiance_deg) {
  if (!(order > 0.0)) throw DomainError("Lambertian order must be positive");
  require_angle(irradiance_deg, 0.0, 90.0, "irradiance angle");
  if (irradiance_deg == 90.0) return 0.0;
  return intensity_rad(order, irradiance_deg * kDegToRad);
}

double concentrator_gain(double refractive_index, double incidence_deg, double fov_deg) {
  if (!(refractive_index >= 1.0)) throw DomainError("refractive index must be >= 1");
  require_angle(incidence_deg, 0.0, 90.0, "incidence angle");
  if (!(fov_deg > 0.0 && fov_deg <= 90.0)) throw DomainError("field of view must lie in (0, 90] degrees");
  if (incidence_deg > fov_deg) return 0.0;
  return concentrator_rad(refractive_index, incidence_deg * kDegToRad, fov_deg * kDegToRad);
}

double channel_gain(double distance_m, double irradiance_deg, double incidence_deg, double order,
                    const ReceiverOptics& optics) {
  if (!(distance_m > 0.0)) throw GeometryError("LED/PD distance must be positive");
  if (!(order > 0.0)) throw DomainError("Lambertian order must be positive");
  require_angle(irradiance_deg, 0.0, 90.0, "irradiance angle");
  require_angle(incidence_deg, 0.0, 90.0, "incidence angle");
  if (incidence_deg > optics.fov_deg || incidence_deg == 90.0 || irradiance_deg == 90.0) return 0.0;
  return gain_rad(distance_m, irradiance_deg * kDegToRad, incidence_deg * kDegToRad, order, optics);
}

ChannelMatrix build_channel_matrix(const VlcScene& scene) {
  scene.validate();
  const auto leds = led_positions(scene);
  const auto pds = pd_positions(scene);
  const double order = lambertian_order(scene.semi_angle_deg);
  const ReceiverOptics optics{scene.pd_area_m2, scene.filter_gain, scene.refractive_index, scene.fov_deg};

  ChannelMatrix h(pds.size(), leds.size());
  for (std::size_t j = 0; j < pds.size(); ++j) {
    for (std::size_t i = 0; i < leds.size(); ++i) {
      const double dx = pds[j].x - leds[i].x;
      const double dy = pds[j].y - leds[i].y;
      const double dz = leds[i].z - pds[j].z;
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (!(d > 0.0)) throw GeometryError("LED and PD coincide");
      // LED axis (0,0,-1) against the LED->PD ray (dx,dy,-dz); PD axis (0,0,1) against the PD->LED ray (-dx,-dy,dz).
      const double cos_irradiance = (dx * kLedAxis.x + dy * kLedAxis.y - dz * kLedAxis.z) / d;
      const double cos_incidence = (-dx * kPdAxis.x - dy * kPdAxis.y + dz * kPdAxis.z) / d;
      if (std::abs(cos_irradiance - cos_incidence) > 1e-12) throw GeometryError("parallel-plane self-check failed");
      const double irradiance = std::acos(std::clamp(cos_irradiance, -1.0, 1.0));
      const double incidence = std::acos(std::clamp(cos_incidence, -1.0, 1.0));
      h(j, i) = gain_rad(d, irradiance, incidence, order, optics);
    }
  }
  return h;
}

}  // namespace vlcest
