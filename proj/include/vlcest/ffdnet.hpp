#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "vlcest/imaging.hpp"
#include "vlcest/tensor.hpp"

namespace vlcest {

/// Architecture of the denoiser: Conv+ReLU, (depth-2) x Conv+BN+ReLU, Conv.
struct ModelConfig {
  int depth = 15;
  int features = 64;
  int image_channels = 1;

  void validate() const;
  /// Channels entering the first conv: the unshuffled image plus one noise-map channel.
  int input_channels() const { return 4 * image_channels + 1; }
  int output_channels() const { return 4 * image_channels; }
  /// Closed-form count of trainable scalars (weights, biases, BN gamma/beta).
  std::size_t parameter_count() const;
  /// Receptive field in full-resolution pixels: each 3x3 conv grows it by 2 half-resolution pixels.
  int receptive_field() const { return 2 * (2 * depth + 1); }

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct LayerParams {
  ConvLayerParams<T> conv;
  std::optional<BatchNormParams<T>> bn;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<LayerParams<T>> layers;

  /// Trainable scalar count obtained by walking the layer list.
  std::size_t parameter_count() const;

  template <typename U>
  ModelParams<U> cast() const;
};

/// Constant map sigma/255 at half the image resolution.
struct NoiseLevelMap {
  double sigma = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  NoiseLevelMap(double sigma_0_255, std::size_t image_rows, std::size_t image_cols);
  double level() const { return sigma / 255.0; }
  template <typename T>
  Tensor<T> tensor() const;
};

template <typename T>
struct LayerGrads {
  Tensor<T> weights;
  std::vector<T> bias;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
struct ModelGrads {
  std::vector<LayerGrads<T>> layers;
};

/// Activations kept by forward_train for the backward pass.
template <typename T>
struct ForwardCache {
  std::vector<Tensor<T>> conv_inputs;
  std::vector<Tensor<T>> conv_outputs;
  std::vector<Tensor<T>> relu_inputs;
  bool ready = false;

  void clear();
};

/// He-style init: conv weights ~ N(0, 2 / (in_ch * 9)), zero biases, identity BN.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Unshuffles (n,1,h,w) noisy images and appends one constant noise-map channel per sample.
/// `sigmas` holds either one value for the whole batch or one value per sample (0-255 scale).
template <typename T>
Tensor<T> build_network_input(const Tensor<T>& noisy, std::span<const double> sigmas);

/// Inference forward pass, F(y, M; params). BN uses running statistics.
template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& noisy, std::span<const double> sigmas);

/// Train-mode forward pass: BN uses batch statistics and updates running statistics.
template <typename T>
Tensor<T> forward_train(ModelParams<T>& params, const Tensor<T>& noisy, std::span<const double> sigmas,
                        ForwardCache<T>& cache);

/// Parameter gradients given dLoss/dOutput. Throws StateError without a prior forward_train.
template <typename T>
ModelGrads<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache, const Tensor<T>& loss_grad);

/// Flat views over the trainable tensors, in the same order for params and grads.
template <typename T>
std::vector<std::span<T>> trainable_tensors(ModelParams<T>& params);
template <typename T>
std::vector<std::span<const T>> gradient_tensors(const ModelGrads<T>& grads);

/// Single-image convenience wrapper around `forward` in single precision.
Image denoise(const ModelParams<float>& params, const Image& noisy, double sigma);

std::vector<std::uint8_t> checkpoint_bytes(const ModelParams<float>& params);
ModelParams<float> checkpoint_from_bytes(std::vector<std::uint8_t> bytes, const std::string& source = "<memory>");
void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace vlcest
