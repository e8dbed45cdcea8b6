#include "vlcest/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "vlcest/binary_io.hpp"
#include "vlcest/errors.hpp"
#include "vlcest/rng.hpp"

namespace vlcest {

namespace {

constexpr std::uint32_t kRecordVersion = 1;
constexpr const char* kIndexHeader = "# vlcest dataset index v1";

std::string scene_descriptor(const VlcScene& scene) {
  KeyValueConfig cfg;
  scene.write_config(cfg);
  std::string out;
  for (const auto& [k, v] : cfg.entries()) {
    if (!out.empty()) out += ' ';
    out += k + "=" + v;
  }
  return out;
}

VlcScene parse_descriptor(const std::string& text, const std::string& source) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError(source + ": malformed scene token '" + token + "'");
    cfg.set(token.substr(0, eq), token.substr(eq + 1));
  }
  try {
    return VlcScene::from_config(cfg);
  } catch (const ConfigError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

}  // namespace

VlcScene randomize_scene(const VlcScene& base, const RandomizationRanges& ranges, std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt <= ranges.max_retries; ++attempt) {
    VlcScene s = base;
    s.led.plane_height_m += rng.uniform(-ranges.distance_jitter_m, ranges.distance_jitter_m);
    s.pd_offset_x_m += rng.uniform(-ranges.offset_jitter_m, ranges.offset_jitter_m);
    s.pd_offset_y_m += rng.uniform(-ranges.offset_jitter_m, ranges.offset_jitter_m);
    s.led.spacing_m *= 1.0 + rng.uniform(-ranges.spacing_jitter_rel, ranges.spacing_jitter_rel);
    s.pd.spacing_m *= 1.0 + rng.uniform(-ranges.spacing_jitter_rel, ranges.spacing_jitter_rel);
    try {
      s.validate();
      return s;
    } catch (const GeometryError&) {
      // redraw
    }
  }
  throw GeometryError("could not draw a valid randomized scene within " + std::to_string(ranges.max_retries) +
                      " retries; narrow the randomization ranges");
}

std::vector<DatasetRecord> generate_dataset(const VlcScene& base, std::size_t count, std::uint64_t seed,
                                            const RandomizationRanges& ranges) {
  if (count == 0) throw DomainError("dataset count must be at least 1");
  base.validate();
  std::vector<DatasetRecord> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    DatasetRecord r;
    r.id = static_cast<std::uint32_t>(k);
    r.scene = randomize_scene(base, ranges, derive_seed(seed, k));
    r.clean = matrix_to_image(build_channel_matrix(r.scene));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::uint8_t> record_bytes(const ChannelImage& clean) {
  io::ByteWriter w;
  w.magic("VLCH");
  w.u32(kRecordVersion);
  w.u32(static_cast<std::uint32_t>(clean.image.rows));
  w.u32(static_cast<std::uint32_t>(clean.image.cols));
  for (double p : clean.image.pixels) w.f32(static_cast<float>(p));
  w.f64(clean.norm_min);
  w.f64(clean.norm_scale);
  return w.bytes();
}

ChannelImage record_from_bytes(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic("VLCH");
  if (const auto v = r.u32(); v != kRecordVersion) {
    throw FormatError(source + ": unsupported record version " + std::to_string(v));
  }
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if (rows == 0 || cols == 0 || r.remaining() != rows * cols * 4 + 16) {
    throw FormatError(source + ": record size does not match its header");
  }
  std::vector<float> px(rows * cols);
  r.f32s(px);
  ChannelImage x;
  x.image = Image(rows, cols, std::vector<double>(px.begin(), px.end()));
  x.norm_min = r.f64();
  x.norm_scale = r.f64();
  r.expect_end();
  if (!(x.norm_scale > 0.0)) throw FormatError(source + ": nonpositive normalization scale");
  return x;
}

std::string record_file_name(std::uint32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "record_%06u.vlch", id);
  return buf;
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream index;
  index << kIndexHeader << "\n";
  for (const auto& r : records) {
    const auto name = record_file_name(r.id);
    io::write_file(dir / name, record_bytes(r.clean));
    index << r.id << '\t' << name << '\t' << scene_descriptor(r.scene) << '\n';
  }
  const auto text = index.str();
  io::write_file(dir / "index.txt", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.txt";
  std::ifstream in(index_path);
  if (!in) throw FormatError("dataset index not found: " + index_path.string());
  std::string line;
  if (!std::getline(in, line) || line != kIndexHeader) throw FormatError(index_path.string() + ": bad index header");
  std::vector<DatasetRecord> out;
  std::set<std::uint32_t> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError(index_path.string() + ": malformed line '" + line + "'");
    DatasetRecord r;
    try {
      r.id = static_cast<std::uint32_t>(std::stoul(line.substr(0, t1)));
    } catch (const std::exception&) {
      throw FormatError(index_path.string() + ": bad record id in '" + line + "'");
    }
    if (!seen.insert(r.id).second) throw FormatError(index_path.string() + ": duplicate id " + std::to_string(r.id));
    const auto file = dir / line.substr(t1 + 1, t2 - t1 - 1);
    r.scene = parse_descriptor(line.substr(t2 + 1), index_path.string());
    r.clean = record_from_bytes(io::read_file(file), file.string());
    if (r.clean.image.rows != static_cast<std::size_t>(r.scene.n_r()) ||
        r.clean.image.cols != static_cast<std::size_t>(r.scene.n_t())) {
      throw FormatError(file.string() + ": image size does not match its scene descriptor");
    }
    out.push_back(std::move(r));
  }
  if (out.empty()) throw FormatError(index_path.string() + ": dataset is empty");
  return out;
}

DataSplit split_by_id(std::vector<std::uint32_t> ids, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  DataSplit s;
  s.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

void require_disjoint(std::span<const std::uint32_t> train_ids, std::span<const std::uint32_t> test_ids) {
  const std::set<std::uint32_t> train(train_ids.begin(), train_ids.end());
  for (auto id : test_ids) {
    if (train.contains(id)) {
      throw ProtocolError("record id " + std::to_string(id) + " is in both the training and the test set");
    }
  }
}

void write_id_list(const std::vector<std::uint32_t>& ids, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (auto id : ids) out << id << '\n';
}

std::vector<std::uint32_t> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("id list not found: " + path.string());
  std::vector<std::uint32_t> ids;
  std::uint64_t id = 0;
  while (in >> id) ids.push_back(static_cast<std::uint32_t>(id));
  if (!in.eof()) throw FormatError(path.string() + ": malformed id list");
  return ids;
}

template <typename T>
void adam_step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads, AdamState<T>& state,
               double lr, const AdamConfig& adam, std::uint64_t t) {
  if (t < 1) throw DomainError("Adam step counter must be >= 1");
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter and gradient lists differ in length");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("Adam: state does not match parameter list");
  const double b1 = adam.beta1;
  const double b2 = adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("Adam: tensor " + std::to_string(k) + " size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(p[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + adam.epsilon));
    }
  }
  state.t = t;
}

template void adam_step<float>(std::span<const std::span<float>>, std::span<const std::span<const float>>,
                               AdamState<float>&, double, const AdamConfig&, std::uint64_t);
template void adam_step<double>(std::span<const std::span<double>>, std::span<const std::span<const double>>,
                                AdamState<double>&, double, const AdamConfig&, std::uint64_t);

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || patches_per_epoch < 1) throw DomainError("epochs, batch and patch counts must be positive");
  if (batch_size * patch_size * patch_size < 2) throw DomainError("batch too small for batch normalization");
  if (patch_size == 0 || patch_size % 2 != 0) throw ShapeError("patch size must be a positive even number");
  if (!(sigma_min >= 0.0 && sigma_max >= sigma_min)) throw DomainError("sigma training range must be nonnegative and ordered");
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
}

double TrainConfig::learning_rate_at(int epoch) const {
  const int stage = std::min(2, (3 * epoch) / epochs);
  return learning_rate * std::pow(0.5, stage);
}

template <typename T>
LossResult<T> denoising_loss(const Tensor<T>& denoised, const Tensor<T>& clean) {
  const auto n = static_cast<double>(denoised.shape().n);
  return mse_loss(denoised, clean, 1.0 / (2.0 * n));
}

template LossResult<float> denoising_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> denoising_loss(const Tensor<double>&, const Tensor<double>&);

TrainResult train(const std::vector<Image>& clean_images, const ModelConfig& model, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (clean_images.empty()) throw DomainError("training set is empty");
  config.validate();
  for (const auto& im : clean_images) {
    if (config.patch_size > im.rows || config.patch_size > im.cols) {
      throw ShapeError("patch size " + std::to_string(config.patch_size) + " exceeds a training image");
    }
  }

  TrainResult result{init_params<float>(model, derive_seed(config.seed, 1)), {}};
  Rng rng(derive_seed(config.seed, 2));
  AdamState<float> adam;
  ForwardCache<float> cache;
  const CheckedModeScope unchecked(false);

  const std::size_t p = config.patch_size;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const int steps = (config.patches_per_epoch + config.batch_size - 1) / config.batch_size;
  std::uint64_t t = 0;
  Tensor<float> noisy(Shape4{batch, 1, p, p});
  Tensor<float> clean(Shape4{batch, 1, p, p});
  std::vector<double> sigmas(batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate_at(epoch);
    double loss_sum = 0.0;
    for (int step = 0; step < steps; ++step) {
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& im = clean_images[rng.uniform_index(clean_images.size())];
        const auto r0 = rng.uniform_index(im.rows - p + 1);
        const auto c0 = rng.uniform_index(im.cols - p + 1);
        const double sigma = rng.uniform(config.sigma_min, config.sigma_max);
        const double stddev = sigma / 255.0;
        sigmas[b] = sigma;
        float* dst_clean = clean.plane(b, 0);
        float* dst_noisy = noisy.plane(b, 0);
        for (std::size_t r = 0; r < p; ++r) {
          for (std::size_t c = 0; c < p; ++c) {
            const double x = im(r0 + r, c0 + c);
            dst_clean[r * p + c] = static_cast<float>(x);
            dst_noisy[r * p + c] = static_cast<float>(x + stddev * rng.normal());
          }
        }
      }
      const auto out = forward_train(result.params, noisy, sigmas, cache);
      const auto loss = denoising_loss(out, clean);
      if (!std::isfinite(loss.loss)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                             std::to_string(step + 1) + " (loss " + std::to_string(loss.loss) + ", lr " +
                             std::to_string(lr) + ")");
      }
      loss_sum += loss.loss;
      const auto grads = backward(result.params, cache, loss.grad);
      const auto views = trainable_tensors(result.params);
      const auto gviews = gradient_tensors(grads);
      adam_step<float>(views, gviews, adam, lr, config.adam, ++t);
    }
    const double mean_loss = loss_sum / steps;
    result.loss_history.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss, lr);
  }
  return result;
}

}  // namespace vlcest
