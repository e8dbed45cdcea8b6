#include "vlcest/ffdnet.hpp"

#include <cmath>
#include <string>

#include "vlcest/binary_io.hpp"
#include "vlcest/errors.hpp"
#include "vlcest/rng.hpp"

namespace vlcest {

void ModelConfig::validate() const {
  if (depth < 3) throw DomainError("model depth must be at least 3, got " + std::to_string(depth));
  if (features < 1) throw DomainError("feature count must be positive");
  if (image_channels != 1) throw DomainError("only single-channel channel images are supported");
}

std::size_t ModelConfig::parameter_count() const {
  const auto f = static_cast<std::size_t>(features);
  const auto in = static_cast<std::size_t>(input_channels());
  const auto out = static_cast<std::size_t>(output_channels());
  const auto mid = static_cast<std::size_t>(depth - 2);
  return (in * f * 9 + f) + mid * (f * f * 9 + f + 2 * f) + (f * out * 9 + out);
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) {
    total += layer.conv.weights.size() + layer.conv.bias.size();
    if (layer.bn) total += layer.bn->gamma.size() + layer.bn->beta.size();
  }
  return total;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  auto conv_vec = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
  ModelParams<U> out;
  out.config = config;
  for (const auto& layer : layers) {
    LayerParams<U> l;
    const auto w = layer.conv.weights.values();
    l.conv.weights = Tensor<U>(layer.conv.weights.shape(), std::vector<U>(w.begin(), w.end()));
    l.conv.bias = conv_vec(layer.conv.bias);
    if (layer.bn) {
      BatchNormParams<U> bn;
      bn.gamma = conv_vec(layer.bn->gamma);
      bn.beta = conv_vec(layer.bn->beta);
      bn.running_mean = conv_vec(layer.bn->running_mean);
      bn.running_var = conv_vec(layer.bn->running_var);
      bn.epsilon = static_cast<U>(layer.bn->epsilon);
      bn.momentum = static_cast<U>(layer.bn->momentum);
      l.bn = std::move(bn);
    }
    out.layers.push_back(std::move(l));
  }
  return out;
}

NoiseLevelMap::NoiseLevelMap(double sigma_0_255, std::size_t image_rows, std::size_t image_cols)
    : sigma(sigma_0_255), rows(image_rows / 2), cols(image_cols / 2) {
  if (!(sigma >= 0.0)) throw DomainError("input noise level must be nonnegative");
  if (image_rows % 2 != 0 || image_cols % 2 != 0) throw ShapeError("noise map needs even image dimensions");
}

template <typename T>
Tensor<T> NoiseLevelMap::tensor() const {
  return Tensor<T>(Shape4{1, 1, rows, cols}, static_cast<T>(level()));
}

template <typename T>
void ForwardCache<T>::clear() {
  conv_inputs.clear();
  conv_outputs.clear();
  relu_inputs.clear();
  ready = false;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams<T> p;
  p.config = config;
  const auto f = static_cast<std::size_t>(config.features);
  for (int l = 0; l < config.depth; ++l) {
    const std::size_t in = l == 0 ? static_cast<std::size_t>(config.input_channels()) : f;
    const std::size_t out = l == config.depth - 1 ? static_cast<std::size_t>(config.output_channels()) : f;
    LayerParams<T> layer{ConvLayerParams<T>::zeros(out, in), std::nullopt};
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * 9));
    for (auto& w : layer.conv.weights.values()) w = static_cast<T>(stddev * rng.normal());
    if (l > 0 && l < config.depth - 1) layer.bn = BatchNormParams<T>::identity(f);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
Tensor<T> build_network_input(const Tensor<T>& noisy, std::span<const double> sigmas) {
  const auto& s = noisy.shape();
  if (s.c != 1) throw ShapeError("noisy input must have exactly one channel, got " + s.str());
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("noisy image dimensions must be even, got " + s.str());
  if (sigmas.size() != 1 && sigmas.size() != s.n) throw ShapeError("need one sigma or one per batch sample");
  auto sub = pixel_unshuffle(noisy, 2);
  Tensor<T> map(Shape4{s.n, 1, s.h / 2, s.w / 2});
  const std::size_t hw = map.shape().h * map.shape().w;
  for (std::size_t n = 0; n < s.n; ++n) {
    const double sigma = sigmas[sigmas.size() == 1 ? 0 : n];
    if (!(sigma >= 0.0)) throw DomainError("input noise level must be nonnegative");
    std::fill_n(map.plane(n, 0), hw, static_cast<T>(sigma / 255.0));
  }
  return concat_channels(sub, map);
}

namespace {

template <typename T>
void check_params(const ModelParams<T>& params) {
  if (params.layers.size() != static_cast<std::size_t>(params.config.depth)) {
    throw ShapeError("parameter list length does not match model depth");
  }
}

}  // namespace

template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& noisy, std::span<const double> sigmas) {
  check_params(params);
  auto x = build_network_input(noisy, sigmas);
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    const auto& layer = params.layers[l];
    x = conv2d_forward(x, layer.conv);
    if (l == last) break;
    if (layer.bn) x = batchnorm_forward(x, *layer.bn);
    x = relu_forward(x);
  }
  return pixel_shuffle(x, 2);
}

template <typename T>
Tensor<T> forward_train(ModelParams<T>& params, const Tensor<T>& noisy, std::span<const double> sigmas,
                        ForwardCache<T>& cache) {
  check_params(params);
  cache.clear();
  auto x = build_network_input(noisy, sigmas);
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    auto& layer = params.layers[l];
    auto z = conv2d_forward(x, layer.conv);
    cache.conv_inputs.push_back(std::move(x));
    if (l == last) {
      x = std::move(z);
      break;
    }
    Tensor<T> u = layer.bn ? batchnorm_forward(z, *layer.bn, Mode::train) : z;
    x = relu_forward(u);
    cache.conv_outputs.push_back(std::move(z));
    cache.relu_inputs.push_back(std::move(u));
  }
  cache.ready = true;
  return pixel_shuffle(x, 2);
}

template <typename T>
ModelGrads<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache, const Tensor<T>& loss_grad) {
  if (!cache.ready || cache.conv_inputs.size() != params.layers.size()) {
    throw StateError("backward requires a preceding forward_train on the same model");
  }
  const std::size_t last = params.layers.size() - 1;
  ModelGrads<T> grads;
  grads.layers.resize(params.layers.size());
  auto g = pixel_unshuffle(loss_grad, 2);
  if (!(g.shape() == Shape4{cache.conv_inputs.front().shape().n, params.layers[last].conv.out_channels(),
                            cache.conv_inputs.front().shape().h, cache.conv_inputs.front().shape().w})) {
    throw ShapeError("loss gradient shape does not match the cached forward pass");
  }
  for (std::size_t k = 0; k <= last; ++k) {
    const std::size_t l = last - k;
    const auto& layer = params.layers[l];
    auto& out = grads.layers[l];
    if (l != last) {
      g = relu_backward(cache.relu_inputs[l], g);
      if (layer.bn) {
        auto bg = batchnorm_backward(cache.conv_outputs[l], *layer.bn, g);
        out.gamma = std::move(bg.gamma);
        out.beta = std::move(bg.beta);
        g = std::move(bg.input);
      }
    }
    auto cg = conv2d_backward(cache.conv_inputs[l], layer.conv, g);
    out.weights = std::move(cg.weights);
    out.bias = std::move(cg.bias);
    g = std::move(cg.input);
  }
  return grads;
}

template <typename T>
std::vector<std::span<T>> trainable_tensors(ModelParams<T>& params) {
  std::vector<std::span<T>> out;
  for (auto& layer : params.layers) {
    out.emplace_back(layer.conv.weights.values());
    out.emplace_back(layer.conv.bias);
    if (layer.bn) {
      out.emplace_back(layer.bn->gamma);
      out.emplace_back(layer.bn->beta);
    }
  }
  return out;
}

template <typename T>
std::vector<std::span<const T>> gradient_tensors(const ModelGrads<T>& grads) {
  std::vector<std::span<const T>> out;
  for (const auto& layer : grads.layers) {
    out.emplace_back(layer.weights.values());
    out.emplace_back(layer.bias);
    if (!layer.gamma.empty()) {
      out.emplace_back(layer.gamma);
      out.emplace_back(layer.beta);
    }
  }
  return out;
}

Image denoise(const ModelParams<float>& params, const Image& noisy, double sigma) {
  Tensor<float> y(Shape4{1, 1, noisy.rows, noisy.cols});
  std::copy(noisy.pixels.begin(), noisy.pixels.end(), y.values().begin());
  const double sigmas[] = {sigma};
  const auto x = forward(params, y, sigmas);
  Image out(noisy.rows, noisy.cols);
  std::copy(x.values().begin(), x.values().end(), out.pixels.begin());
  return out;
}

std::vector<std::uint8_t> checkpoint_bytes(const ModelParams<float>& params) {
  check_params(params);
  io::ByteWriter w;
  w.magic("FFDN");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.config.depth));
  w.u32(static_cast<std::uint32_t>(params.config.features));
  for (const auto& layer : params.layers) {
    const auto& s = layer.conv.weights.shape();
    w.u32(layer.bn ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.n));
    w.u32(static_cast<std::uint32_t>(s.c));
    w.u32(static_cast<std::uint32_t>(s.h));
    w.u32(static_cast<std::uint32_t>(s.w));
    w.f32s(layer.conv.weights.values());
    w.f32s(layer.conv.bias);
    if (layer.bn) {
      const auto& bn = *layer.bn;
      w.u32(static_cast<std::uint32_t>(bn.channels()));
      w.f32(bn.epsilon);
      w.f32(bn.momentum);
      w.f32s(bn.gamma);
      w.f32s(bn.beta);
      w.f32s(bn.running_mean);
      w.f32s(bn.running_var);
    }
  }
  return w.bytes();
}

ModelParams<float> checkpoint_from_bytes(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic("FFDN");
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  ModelParams<float> p;
  p.config.depth = static_cast<int>(r.u32());
  p.config.features = static_cast<int>(r.u32());
  try {
    p.config.validate();
  } catch (const std::exception& e) {
    throw FormatError(source + ": invalid model config: " + e.what());
  }
  // The reference layout the file must match.
  const auto expected = init_params<float>(p.config, 0);
  for (int l = 0; l < p.config.depth; ++l) {
    const auto& ref = expected.layers[static_cast<std::size_t>(l)];
    const bool has_bn = r.u32() != 0;
    Shape4 s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    if (has_bn != ref.bn.has_value() || !(s == ref.conv.weights.shape())) {
      throw FormatError(source + ": layer " + std::to_string(l + 1) + " shape " + s.str() +
                        " does not match the declared config");
    }
    LayerParams<float> layer{ConvLayerParams<float>::zeros(s.n, s.c), std::nullopt};
    r.f32s(layer.conv.weights.values());
    r.f32s(layer.conv.bias);
    if (has_bn) {
      const auto channels = r.u32();
      if (channels != s.n) throw FormatError(source + ": batch-norm channel count mismatch");
      auto bn = BatchNormParams<float>::identity(channels);
      bn.epsilon = r.f32();
      bn.momentum = r.f32();
      r.f32s(bn.gamma);
      r.f32s(bn.beta);
      r.f32s(bn.running_mean);
      r.f32s(bn.running_var);
      layer.bn = std::move(bn);
    }
    p.layers.push_back(std::move(layer));
  }
  r.expect_end();
  return p;
}

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path) {
  io::write_file(path, checkpoint_bytes(params));
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(io::read_file(path), path.string());
}

#define VLCEST_INSTANTIATE(T)                                                                                        \
  template struct ModelParams<T>;                                                                                    \
  template ModelParams<float> ModelParams<T>::cast<float>() const;                                                   \
  template ModelParams<double> ModelParams<T>::cast<double>() const;                                                 \
  template Tensor<T> NoiseLevelMap::tensor<T>() const;                                                               \
  template struct ForwardCache<T>;                                                                                   \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                         \
  template Tensor<T> build_network_input(const Tensor<T>&, std::span<const double>);                                 \
  template Tensor<T> forward(const ModelParams<T>&, const Tensor<T>&, std::span<const double>);                      \
  template Tensor<T> forward_train(ModelParams<T>&, const Tensor<T>&, std::span<const double>, ForwardCache<T>&);     \
  template ModelGrads<T> backward(const ModelParams<T>&, const ForwardCache<T>&, const Tensor<T>&);                  \
  template std::vector<std::span<T>> trainable_tensors(ModelParams<T>&);                                             \
  template std::vector<std::span<const T>> gradient_tensors(const ModelGrads<T>&);

VLCEST_INSTANTIATE(float)
VLCEST_INSTANTIATE(double)

#undef VLCEST_INSTANTIATE

}  // namespace vlcest
