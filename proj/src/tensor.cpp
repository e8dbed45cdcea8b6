#include "vlcest/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>

#include "vlcest/errors.hpp"

namespace vlcest {

namespace {

std::atomic<bool> g_checked{true};

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<RowMajor<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const RowMajor<T>>;

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!checked_mode()) return;
  for (T v : t.values()) {
    if (!std::isfinite(v)) throw NumericalError(std::string(op) + ": non-finite input value");
  }
}

void require_same(const Shape4& a, const Shape4& b, const char* op) {
  if (!(a == b)) throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename T>
void check_conv(const Tensor<T>& input, const ConvLayerParams<T>& p, const char* op) {
  const auto& ws = p.weights.shape();
  if (ws.h != 3 || ws.w != 3) throw ShapeError(std::string(op) + ": kernel must be 3x3");
  if (input.shape().c != ws.c) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(input.shape().c) + " channels, layer expects " +
                     std::to_string(ws.c));
  }
  if (p.bias.size() != ws.n) throw ShapeError(std::string(op) + ": bias size does not match output channels");
}

// Image rows [y0, y1) of the patch matrix: col(c*9 + ky*3 + kx, (y-y0)*w + x) = in(c, y+ky-1, x+kx-1),
// zero outside. `col` has (y1-y0)*w columns.
template <typename T>
void im2col(const T* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t y0, std::size_t y1, T* col) {
  const std::size_t hw = h * w;
  const std::size_t cols = (y1 - y0) * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = in + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* dst = col + ((c * 3 + ky) * 3 + kx) * cols;
        const std::size_t x_lo = kx == 0 ? 1 : 0;
        const std::size_t x_hi = kx == 2 ? w - 1 : w;
        for (std::size_t y = y0; y < y1; ++y) {
          T* row = dst + (y - y0) * w;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(row, row + w, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(sy) * w;
          if (x_lo == 1) row[0] = T(0);
          if (x_hi == w - 1) row[w - 1] = T(0);
          for (std::size_t x = x_lo; x < x_hi; ++x) row[x] = srow[x + kx - 1];
        }
      }
    }
  }
}

// Rows per band so that one band of the patch matrix stays cache resident.
inline std::size_t band_rows(std::size_t channels, std::size_t w) {
  constexpr std::size_t kBandValues = 128 * 1024;
  return std::max<std::size_t>(1, kBandValues / std::max<std::size_t>(1, channels * 9 * w));
}


struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};

// Sum of f(p[k]) in double with eight independent lanes, so the loop vectorizes while the
// summation order stays fixed.
template <typename T, typename F>
double lane_sum(const T* p, std::size_t n, F f) {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += f(static_cast<double>(p[k + j]), k + j);
  for (; k < n; ++k) acc[0] += f(static_cast<double>(p[k]), k);
  double total = 0.0;
  for (double a : acc) total += a;
  return total;
}

template <typename T>
ChannelStats channel_stats(const Tensor<T>& x) {
  const auto& s = x.shape();
  const std::size_t hw = s.h * s.w;
  const double count = static_cast<double>(s.n * hw);
  ChannelStats st{std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) sum += lane_sum(x.plane(n, c), hw, [](double v, std::size_t) { return v; });
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      sq += lane_sum(x.plane(n, c), hw, [mean](double v, std::size_t) { return (v - mean) * (v - mean); });
    st.mean[c] = mean;
    st.var[c] = sq / count;
  }
  return st;
}

template <typename T>
void check_bn(const Tensor<T>& input, const BatchNormParams<T>& p, const char* op) {
  const std::size_t c = p.channels();
  if (input.shape().c != c || p.beta.size() != c || p.running_mean.size() != c || p.running_var.size() != c) {
    throw ShapeError(std::string(op) + ": channel count mismatch");
  }
  if (!(p.epsilon > T(0))) throw DomainError(std::string(op) + ": epsilon must be positive");
}

template <typename T>
Tensor<T> bn_apply(const Tensor<T>& input, const BatchNormParams<T>& p, const std::vector<double>& mean,
                   const std::vector<double>& var) {
  const auto& s = input.shape();
  const std::size_t hw = s.h * s.w;
  Tensor<T> out(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    const double inv_std = 1.0 / std::sqrt(var[c] + static_cast<double>(p.epsilon));
    const T scale = static_cast<T>(p.gamma[c] * inv_std);
    const T shift = static_cast<T>(p.beta[c] - p.gamma[c] * mean[c] * inv_std);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t k = 0; k < hw; ++k) dst[k] = src[k] * scale + shift;
    }
  }
  return out;
}

}  // namespace

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape4 shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) throw ShapeError("value count does not match shape " + shape_.str());
}

bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }
void set_checked_mode(bool enabled) { g_checked.store(enabled, std::memory_order_relaxed); }

template <typename T>
ConvLayerParams<T> ConvLayerParams<T>::zeros(std::size_t out_channels, std::size_t in_channels) {
  return {Tensor<T>(Shape4{out_channels, in_channels, 3, 3}), std::vector<T>(out_channels, T(0))};
}

template <typename T>
BatchNormParams<T> BatchNormParams<T>::identity(std::size_t channels) {
  BatchNormParams p;
  p.gamma.assign(channels, T(1));
  p.beta.assign(channels, T(0));
  p.running_mean.assign(channels, T(0));
  p.running_var.assign(channels, T(1));
  return p;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayerParams<T>& params) {
  check_conv(input, params, "conv2d_forward");
  check_finite(input, "conv2d_forward");
  const auto& s = input.shape();
  const std::size_t out_c = params.out_channels();
  const std::size_t k = s.c * 9;
  const std::size_t hw = s.h * s.w;

  Tensor<T> out(Shape4{s.n, out_c, s.h, s.w});
  const std::size_t band = band_rows(s.c, s.w);
  RowMajor<T> col(k, std::min(band, s.h) * s.w);
  const ConstMapRM<T> weights(params.weights.data(), out_c, k);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params.bias.data(), out_c);
  for (std::size_t n = 0; n < s.n; ++n) {
    MapRM<T> y(out.plane(n, 0), out_c, hw);
    for (std::size_t y0 = 0; y0 < s.h; y0 += band) {
      const std::size_t y1 = std::min(s.h, y0 + band);
      const auto cols = static_cast<Eigen::Index>((y1 - y0) * s.w);
      im2col(input.plane(n, 0), s.c, s.h, s.w, y0, y1, col.data());
      const ConstMapRM<T> patch(col.data(), static_cast<Eigen::Index>(k), cols);
      y.middleCols(static_cast<Eigen::Index>(y0 * s.w), cols).noalias() = weights * patch;
    }
    y.colwise() += bias;
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvLayerParams<T>& params, const Tensor<T>& upstream) {
  check_conv(input, params, "conv2d_backward");
  const auto& s = input.shape();
  const std::size_t out_c = params.out_channels();
  require_same(upstream.shape(), Shape4{s.n, out_c, s.h, s.w}, "conv2d_backward");
  check_finite(upstream, "conv2d_backward");
  const std::size_t k = s.c * 9;
  const std::size_t hw = s.h * s.w;

  ConvGrads<T> g{Tensor<T>(s), Tensor<T>(params.weights.shape()), std::vector<T>(out_c, T(0))};
  // The input gradient is a convolution of the upstream gradient with the spatially flipped,
  // channel-transposed kernel: (in_c) x (out_c * 9).
  RowMajor<T> flipped(s.c, out_c * 9);
  for (std::size_t o = 0; o < out_c; ++o)
    for (std::size_t i = 0; i < s.c; ++i)
      for (std::size_t t = 0; t < 9; ++t) flipped(i, o * 9 + (8 - t)) = params.weights.data()[(o * s.c + i) * 9 + t];

  const std::size_t band = std::min(band_rows(s.c, s.w), band_rows(out_c, s.w));
  RowMajor<T> col(k, std::min(band, s.h) * s.w);
  RowMajor<T> upcol(out_c * 9, std::min(band, s.h) * s.w);
  MapRM<T> dweights(g.weights.data(), out_c, k);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbias(g.bias.data(), out_c);
  for (std::size_t n = 0; n < s.n; ++n) {
    const ConstMapRM<T> dy(upstream.plane(n, 0), out_c, hw);
    MapRM<T> dx(g.input.plane(n, 0), s.c, hw);
    for (std::size_t y0 = 0; y0 < s.h; y0 += band) {
      const std::size_t y1 = std::min(s.h, y0 + band);
      const auto first = static_cast<Eigen::Index>(y0 * s.w);
      const auto cols = static_cast<Eigen::Index>((y1 - y0) * s.w);
      im2col(input.plane(n, 0), s.c, s.h, s.w, y0, y1, col.data());
      const ConstMapRM<T> patch(col.data(), static_cast<Eigen::Index>(k), cols);
      dweights.noalias() += dy.middleCols(first, cols) * patch.transpose();
      im2col(upstream.plane(n, 0), out_c, s.h, s.w, y0, y1, upcol.data());
      const ConstMapRM<T> uppatch(upcol.data(), static_cast<Eigen::Index>(out_c * 9), cols);
      dx.middleCols(first, cols).noalias() = flipped * uppatch;
    }
    dbias += dy.rowwise().sum();
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  check_finite(input, "relu_forward");
  Tensor<T> out(input.shape());
  auto src = input.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
  require_same(input.shape(), upstream.shape(), "relu_backward");
  check_finite(upstream, "relu_backward");
  Tensor<T> out(input.shape());
  auto x = input.values();
  auto up = upstream.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > T(0) ? up[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode) {
  if (mode == Mode::inference) return batchnorm_forward(input, static_cast<const BatchNormParams<T>&>(params));
  check_bn(input, params, "batchnorm_forward");
  check_finite(input, "batchnorm_forward");
  const auto& s = input.shape();
  const std::size_t count = s.n * s.h * s.w;
  if (count < 2) throw DomainError("batchnorm_forward: train mode needs at least two values per channel");

  const auto st = channel_stats(input);
  auto out = bn_apply(input, params, st.mean, st.var);
  const double m = static_cast<double>(params.momentum);
  const double unbias = static_cast<double>(count) / static_cast<double>(count - 1);
  for (std::size_t c = 0; c < s.c; ++c) {
    params.running_mean[c] = static_cast<T>((1.0 - m) * params.running_mean[c] + m * st.mean[c]);
    params.running_var[c] = static_cast<T>((1.0 - m) * params.running_var[c] + m * st.var[c] * unbias);
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, const BatchNormParams<T>& params) {
  check_bn(input, params, "batchnorm_forward");
  check_finite(input, "batchnorm_forward");
  const std::vector<double> mean(params.running_mean.begin(), params.running_mean.end());
  const std::vector<double> var(params.running_var.begin(), params.running_var.end());
  return bn_apply(input, params, mean, var);
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& input, const BatchNormParams<T>& params,
                                     const Tensor<T>& upstream) {
  check_bn(input, params, "batchnorm_backward");
  require_same(input.shape(), upstream.shape(), "batchnorm_backward");
  check_finite(upstream, "batchnorm_backward");
  const auto& s = input.shape();
  const std::size_t hw = s.h * s.w;
  const double count = static_cast<double>(s.n * hw);
  if (count < 2) throw DomainError("batchnorm_backward: needs at least two values per channel");

  const auto st = channel_stats(input);
  BatchNormGrads<T> g{Tensor<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  for (std::size_t c = 0; c < s.c; ++c) {
    const double mean = st.mean[c];
    const double inv_std = 1.0 / std::sqrt(st.var[c] + static_cast<double>(params.epsilon));
    double sum_up = 0.0;
    double sum_up_xc = 0.0;  // sum up * (x - mean)
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* x = input.plane(n, c);
      sum_up += lane_sum(upstream.plane(n, c), hw, [](double u, std::size_t) { return u; });
      sum_up_xc += lane_sum(upstream.plane(n, c), hw, [x, mean](double u, std::size_t k) { return u * (x[k] - mean); });
    }
    const double sum_up_xhat = sum_up_xc * inv_std;
    g.beta[c] = static_cast<T>(sum_up);
    g.gamma[c] = static_cast<T>(sum_up_xhat);
    // dx = gamma * inv_std * (up - mean(up) - xhat * mean(up * xhat)), folded into a * up + b * x + c0
    const double gamma = static_cast<double>(params.gamma[c]);
    const double mean_up = sum_up / count;
    const double mean_up_xhat = sum_up_xhat / count;
    const T a = static_cast<T>(gamma * inv_std);
    const T b = static_cast<T>(-gamma * inv_std * inv_std * mean_up_xhat);
    const T c0 = static_cast<T>(-gamma * inv_std * (mean_up - mean * inv_std * mean_up_xhat));
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* x = input.plane(n, c);
      const T* up = upstream.plane(n, c);
      T* dx = g.input.plane(n, c);
      for (std::size_t k = 0; k < hw; ++k) dx[k] = a * up[k] + b * x[k] + c0;
    }
  }
  return g;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t factor) {
  const auto& s = input.shape();
  if (factor == 0) throw ShapeError("pixel_unshuffle: factor must be positive");
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw ShapeError("pixel_unshuffle: spatial size " + s.str() + " not divisible by " + std::to_string(factor));
  }
  check_finite(input, "pixel_unshuffle");
  const std::size_t oh = s.h / factor;
  const std::size_t ow = s.w / factor;
  Tensor<T> out(Shape4{s.n, s.c * factor * factor, oh, ow});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t dy = 0; dy < factor; ++dy)
        for (std::size_t dx = 0; dx < factor; ++dx) {
          T* dst = out.plane(n, (c * factor + dy) * factor + dx);
          for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = input.at(n, c, y * factor + dy, x * factor + dx);
        }
  return out;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t factor) {
  const auto& s = input.shape();
  const std::size_t f2 = factor * factor;
  if (factor == 0 || s.c % f2 != 0) {
    throw ShapeError("pixel_shuffle: channel count " + std::to_string(s.c) + " not divisible by " + std::to_string(f2));
  }
  check_finite(input, "pixel_shuffle");
  const std::size_t oc = s.c / f2;
  Tensor<T> out(Shape4{s.n, oc, s.h * factor, s.w * factor});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < oc; ++c)
      for (std::size_t dy = 0; dy < factor; ++dy)
        for (std::size_t dx = 0; dx < factor; ++dx) {
          const T* src = input.plane(n, (c * factor + dy) * factor + dx);
          for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y * factor + dy, x * factor + dx) = src[y * s.w + x];
        }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + sa.str() + " vs " + sb.str());
  }
  Tensor<T> out(Shape4{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t hw = sa.h * sa.w;
  for (std::size_t n = 0; n < sa.n; ++n) {
    if (sa.c > 0) std::copy_n(a.plane(n, 0), sa.c * hw, out.plane(n, 0));
    if (sb.c > 0) std::copy_n(b.plane(n, 0), sb.c * hw, out.plane(n, sa.c));
  }
  return out;
}

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, double scale) {
  require_same(pred.shape(), target.shape(), "mse_loss");
  check_finite(pred, "mse_loss");
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  auto p = pred.values();
  auto t = target.values();
  auto g = r.grad.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    sum += d * d;
    g[i] = static_cast<T>(2.0 * scale * d);
  }
  r.loss = scale * sum;
  return r;
}

#define VLCEST_INSTANTIATE(T)                                                                                    \
  template class Tensor<T>;                                                                                      \
  template struct ConvLayerParams<T>;                                                                            \
  template struct BatchNormParams<T>;                                                                            \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const ConvLayerParams<T>&);                                \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const ConvLayerParams<T>&, const Tensor<T>&);          \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                             \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, BatchNormParams<T>&, Mode);                             \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, const BatchNormParams<T>&);                             \
  template BatchNormGrads<T> batchnorm_backward(const Tensor<T>&, const BatchNormParams<T>&, const Tensor<T>&);  \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, std::size_t);                                             \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::size_t);                                               \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                        \
  template LossResult<T> mse_loss(const Tensor<T>&, const Tensor<T>&, double);

VLCEST_INSTANTIATE(float)
VLCEST_INSTANTIATE(double)

#undef VLCEST_INSTANTIATE

}  // namespace vlcest
