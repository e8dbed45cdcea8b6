#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vlcest {

/// (batch, channels, height, width)
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense NCHW tensor with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T(0)) : shape_(shape), values_(shape.size(), fill) {}
  Tensor(Shape4 shape, std::vector<T> values);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return values_[offset(n, c, h, w)]; }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const { return values_[offset(n, c, h, w)]; }

  /// Start of the h*w plane for (n, c).
  T* plane(std::size_t n, std::size_t c) { return values_.data() + offset(n, c, 0, 0); }
  const T* plane(std::size_t n, std::size_t c) const { return values_.data() + offset(n, c, 0, 0); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape4 shape_;
  std::vector<T> values_;
};

/// When enabled (the default) every op rejects non-finite inputs with NumericalError.
bool checked_mode();
void set_checked_mode(bool enabled);

/// Restores the previous checked-mode setting on destruction.
class CheckedModeScope {
 public:
  explicit CheckedModeScope(bool enabled) : previous_(checked_mode()) { set_checked_mode(enabled); }
  ~CheckedModeScope() { set_checked_mode(previous_); }
  CheckedModeScope(const CheckedModeScope&) = delete;
  CheckedModeScope& operator=(const CheckedModeScope&) = delete;

 private:
  bool previous_;
};

enum class Mode { train, inference };

/// 3x3 kernel, stride 1, zero padding 1.
template <typename T>
struct ConvLayerParams {
  Tensor<T> weights;  // (out_ch, in_ch, 3, 3)
  std::vector<T> bias;

  static ConvLayerParams zeros(std::size_t out_channels, std::size_t in_channels);
  std::size_t out_channels() const { return weights.shape().n; }
  std::size_t in_channels() const { return weights.shape().c; }
};

template <typename T>
struct BatchNormParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T epsilon = T(1e-5);
  T momentum = T(0.1);

  /// gamma 1, beta 0, running statistics (0, 1).
  static BatchNormParams identity(std::size_t channels);
  std::size_t channels() const { return gamma.size(); }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  std::vector<T> bias;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayerParams<T>& params);
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvLayerParams<T>& params, const Tensor<T>& upstream);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream);

/// Train mode normalizes with batch statistics (biased variance) and folds them into the
/// running statistics (unbiased variance) with the configured momentum.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode);
/// Inference-only overload; never touches the running statistics.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, const BatchNormParams<T>& params);
/// Gradient of the train-mode forward; batch statistics are recomputed from `input`.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& input, const BatchNormParams<T>& params,
                                     const Tensor<T>& upstream);

/// (n, c, h, w) -> (n, c*f*f, h/f, w/f); output channel c*f*f + dy*f + dx samples offset (dy, dx).
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t factor = 2);
/// Exact inverse of pixel_unshuffle.
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t factor = 2);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// loss = scale * sum (pred - target)^2, grad = 2 * scale * (pred - target).
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, double scale);

}  // namespace vlcest
