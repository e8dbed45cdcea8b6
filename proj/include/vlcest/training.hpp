#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "vlcest/ffdnet.hpp"
#include "vlcest/imaging.hpp"
#include "vlcest/vlc_channel.hpp"

namespace vlcest {

struct DatasetRecord {
  std::uint32_t id = 0;
  VlcScene scene;
  ChannelImage clean;
};

/// Symmetric jitter applied around the base scene when generating a corpus.
struct RandomizationRanges {
  double distance_jitter_m = 0.5;   // LED plane height, so L varies by +/- this
  double offset_jitter_m = 0.5;     // PD-plane lateral offset, each axis
  double spacing_jitter_rel = 0.2;  // LED and PD spacings, relative, drawn independently
  int max_retries = 100;
};

VlcScene randomize_scene(const VlcScene& base, const RandomizationRanges& ranges, std::uint64_t seed);

/// Record k is built from a seed derived from (seed, k), so records are independent of each other.
std::vector<DatasetRecord> generate_dataset(const VlcScene& base, std::size_t count, std::uint64_t seed,
                                            const RandomizationRanges& ranges);

/// "VLCH" record: magic, u32 version, u32 rows, u32 cols, f32 pixels, f64 norm_min, f64 norm_scale.
std::vector<std::uint8_t> record_bytes(const ChannelImage& clean);
ChannelImage record_from_bytes(std::vector<std::uint8_t> bytes, const std::string& source = "<memory>");

/// Writes one .vlch file per record plus index.txt (id, file name, scene descriptor).
void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir);
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir);
std::string record_file_name(std::uint32_t id);

struct DataSplit {
  std::vector<std::uint32_t> train_ids;
  std::vector<std::uint32_t> test_ids;
};

/// The lowest `train_fraction` of the sorted ids train, the rest test.
DataSplit split_by_id(std::vector<std::uint32_t> ids, double train_fraction = 0.8);
/// Throws ProtocolError when any id appears in both sets.
void require_disjoint(std::span<const std::uint32_t> train_ids, std::span<const std::uint32_t> test_ids);

void write_id_list(const std::vector<std::uint32_t>& ids, const std::filesystem::path& path);
std::vector<std::uint32_t> read_id_list(const std::filesystem::path& path);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t t = 0;
};

/// Bias-corrected Adam update with step counter `t` (>= 1).
template <typename T>
void adam_step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads, AdamState<T>& state,
               double lr, const AdamConfig& adam, std::uint64_t t);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  int patches_per_epoch = 512;
  double learning_rate = 1e-3;
  std::size_t patch_size = 70;
  double sigma_min = 0.0;
  double sigma_max = 55.0;
  AdamConfig adam;
  std::uint64_t seed = 1;

  void validate() const;
  /// Base rate halved every third of the total epochs.
  double learning_rate_at(int epoch) const;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<double> loss_history;  // mean minibatch loss per epoch
};

/// Minibatch loss 1/(2 N) sum_k ||F(y_k, M_k) - x_k||^2 and its gradient, N = batch size.
template <typename T>
LossResult<T> denoising_loss(const Tensor<T>& denoised, const Tensor<T>& clean);

using EpochCallback = std::function<void(int epoch, double loss, double learning_rate)>;

/// Per step: random patches, sigma ~ U[sigma_min, sigma_max] per patch, AWGN at that sigma,
/// noise map with the same sigma, one Adam update. Deterministic for a fixed seed.
TrainResult train(const std::vector<Image>& clean_images, const ModelConfig& model, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace vlcest
