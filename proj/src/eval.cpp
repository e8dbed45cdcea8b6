#include "vlcest/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "vlcest/errors.hpp"
#include "vlcest/rng.hpp"

namespace vlcest {

namespace {

struct Accumulator {
  std::vector<double> values;

  void add(double v) { values.push_back(v); }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  double stddev() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    if (!std::isfinite(m)) return 0.0;
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
  }
};

void check_protocol(const std::vector<DatasetRecord>& test, std::span<const std::uint32_t> train_ids) {
  if (test.empty()) throw ProtocolError("test set is empty");
  std::vector<std::uint32_t> test_ids;
  for (const auto& r : test) test_ids.push_back(r.id);
  require_disjoint(train_ids, test_ids);
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_sigma(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

const char* kFfdnet = "ffdnet";
const char* kFixed = "ffdnet-fixed";
const char* kMmse = "mmse-patchwise";

}  // namespace

void SweepSpec::validate() const {
  if (sigma_o_grid.empty()) throw DomainError("sigma_o grid is empty");
  if (mode == SigmaMode::fixed && sigma_inputs.empty()) throw DomainError("fixed mode needs at least one input sigma");
  if (seeds.empty()) throw DomainError("at least one noise seed is required");
  for (double s : sigma_o_grid)
    if (!(s >= 0.0)) throw DomainError("sigma_o values must be nonnegative");
  for (double s : sigma_inputs)
    if (!(s >= 0.0)) throw DomainError("input sigmas must be nonnegative");
  if (!(tunable_offset >= 0.0) || !(fixed_sigma >= 0.0)) throw DomainError("sigma policy values must be nonnegative");
}

std::string SweepSpec::tunable_label() const {
  return tunable_offset == 0.0 ? "ffdnet-tunable" : "ffdnet-tunable+" + format_sigma(tunable_offset);
}

std::uint64_t observation_seed(std::uint64_t seed, std::uint32_t id, double sigma_o) {
  return derive_seed(derive_seed(seed, id), static_cast<std::uint64_t>(std::llround(sigma_o * 1000.0)));
}

std::vector<CurvePoint> run_sensitivity_sweep(const ModelParams<float>& model, const std::vector<DatasetRecord>& test,
                                              std::span<const std::uint32_t> train_ids, const SweepSpec& spec) {
  spec.validate();
  check_protocol(test, train_ids);
  std::vector<CurvePoint> points;
  for (double sigma_o : spec.sigma_o_grid) {
    std::vector<double> inputs = spec.mode == SigmaMode::fixed ? spec.sigma_inputs
                                                               : std::vector<double>{spec.tunable_sigma(sigma_o)};
    std::vector<Accumulator> acc(inputs.size());
    for (const auto& rec : test) {
      for (auto seed : spec.seeds) {
        const auto y = add_awgn(rec.clean.image, sigma_o, observation_seed(seed, rec.id, sigma_o));
        for (std::size_t k = 0; k < inputs.size(); ++k) acc[k].add(psnr(rec.clean.image, denoise(model, y.image, inputs[k])));
      }
    }
    const std::string label = spec.mode == SigmaMode::fixed ? kFfdnet : spec.tunable_label();
    for (std::size_t k = 0; k < inputs.size(); ++k) points.push_back({sigma_o, label, inputs[k], acc[k].mean(), acc[k].stddev()});
  }
  std::stable_sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.sigma_o != b.sigma_o) return a.sigma_o < b.sigma_o;
    return a.sigma_input.value_or(-1) < b.sigma_input.value_or(-1);
  });
  return points;
}

std::vector<CurvePoint> run_mmse_comparison(const ModelParams<float>& model, const MmseModel& mmse,
                                            const std::vector<DatasetRecord>& test,
                                            std::span<const std::uint32_t> train_ids, const SweepSpec& spec) {
  spec.validate();
  check_protocol(test, train_ids);
  std::vector<CurvePoint> points;
  for (double sigma_o : spec.sigma_o_grid) {
    Accumulator fixed, tunable, linear;
    const double tuned = spec.tunable_sigma(sigma_o);
    for (const auto& rec : test) {
      for (auto seed : spec.seeds) {
        const auto y = add_awgn(rec.clean.image, sigma_o, observation_seed(seed, rec.id, sigma_o));
        fixed.add(psnr(rec.clean.image, denoise(model, y.image, spec.fixed_sigma)));
        tunable.add(psnr(rec.clean.image, denoise(model, y.image, tuned)));
        linear.add(psnr(rec.clean.image, mmse_denoise(mmse, y.image, sigma_o)));
      }
    }
    points.push_back({sigma_o, kFixed, spec.fixed_sigma, fixed.mean(), fixed.stddev()});
    points.push_back({sigma_o, spec.tunable_label(), tuned, tunable.mean(), tunable.stddev()});
    points.push_back({sigma_o, kMmse, std::nullopt, linear.mean(), linear.stddev()});
  }
  std::stable_sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.sigma_o != b.sigma_o) return a.sigma_o < b.sigma_o;
    return a.method < b.method;
  });
  return points;
}

const CurvePoint& find_point(const std::vector<CurvePoint>& points, double sigma_o, const std::string& method,
                             std::optional<double> sigma_input) {
  for (const auto& p : points) {
    if (p.sigma_o == sigma_o && p.method == method && (!sigma_input || p.sigma_input == sigma_input)) return p;
  }
  throw std::out_of_range("no curve point for sigma_o=" + format_sigma(sigma_o) + " method=" + method);
}

std::string curves_csv(const std::vector<CurvePoint>& points, const std::string& comment) {
  std::string out = "# " + comment + "\n" + kCsvHeader + "\n";
  for (const auto& p : points) {
    out += format_sigma(p.sigma_o) + "," + p.method + "," + (p.sigma_input ? format_sigma(*p.sigma_input) : "") + "," +
           format_number(p.psnr_mean) + "," + format_number(p.psnr_std) + "\n";
  }
  return out;
}

}  // namespace vlcest
