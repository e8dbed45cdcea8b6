#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlcest/ffdnet.hpp"
#include "vlcest/mmse.hpp"
#include "vlcest/training.hpp"

namespace vlcest {

enum class SigmaMode { fixed, tunable };

struct SweepSpec {
  std::vector<double> sigma_o_grid{0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::vector<double> sigma_inputs{5, 15, 25, 50};
  std::vector<std::uint64_t> seeds{1};
  SigmaMode mode = SigmaMode::fixed;
  /// Tunable policy sigma = sigma_o + offset; 0 is the matched policy, 5 the "slightly above" variant.
  double tunable_offset = 0.0;
  /// Input level of the fixed-sigma comparison curve.
  double fixed_sigma = 15.0;

  void validate() const;
  double tunable_sigma(double sigma_o) const { return sigma_o + tunable_offset; }
  std::string tunable_label() const;
};

struct CurvePoint {
  double sigma_o = 0.0;
  std::string method;
  std::optional<double> sigma_input;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
};

inline constexpr const char* kCsvHeader = "sigma_o,method,sigma_input,psnr_mean,psnr_std";

/// The noisy observation of test image `id` at level sigma_o for noise seed `seed`.
/// Every method sees the same realization.
std::uint64_t observation_seed(std::uint64_t seed, std::uint32_t id, double sigma_o);

/// Noise-level sensitivity curves. Fixed mode: one curve per entry of sigma_inputs.
/// Tunable mode: one curve with sigma = tunable_sigma(sigma_o).
std::vector<CurvePoint> run_sensitivity_sweep(const ModelParams<float>& model, const std::vector<DatasetRecord>& test,
                                              std::span<const std::uint32_t> train_ids, const SweepSpec& spec);

/// Per sigma_o: fixed-sigma FFDNet, tunable-sigma FFDNet and the patchwise MMSE stand-in
/// (with sigma_o known to it).
std::vector<CurvePoint> run_mmse_comparison(const ModelParams<float>& model, const MmseModel& mmse,
                                            const std::vector<DatasetRecord>& test,
                                            std::span<const std::uint32_t> train_ids, const SweepSpec& spec);

/// Looks up the point for (sigma_o, method[, sigma_input]); throws std::out_of_range if absent.
const CurvePoint& find_point(const std::vector<CurvePoint>& points, double sigma_o, const std::string& method,
                             std::optional<double> sigma_input = std::nullopt);

/// CSV text: one `# ...` comment line, the header, then one row per point.
std::string curves_csv(const std::vector<CurvePoint>& points, const std::string& comment);

}  // namespace vlcest
