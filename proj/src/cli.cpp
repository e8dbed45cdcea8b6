#include "vlcest/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "vlcest/errors.hpp"
#include "vlcest/binary_io.hpp"
#include "vlcest/eval.hpp"

#ifndef VLCEST_VERSION
#define VLCEST_VERSION "dev"
#endif

namespace vlcest {

namespace {

namespace fs = std::filesystem;

// Keys naming files or directories; they do not change results, so they stay out of the config hash.
const std::set<std::string> kPathKeys = {"config", "data", "out", "checkpoint", "mmse", "loss_csv"};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::map<std::string, std::optional<std::string>> flags;

  void flag(const std::string& key, const std::string& help) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    auto& slot = flags[key];
    app->add_option_function<std::string>("--" + name, [&slot](const std::string& v) { slot = v; }, help);
  }

  KeyValueConfig resolve() const {
    KeyValueConfig cfg;
    if (const auto it = flags.find("config"); it != flags.end() && it->second) cfg = KeyValueConfig::load(*it->second);
    for (const auto& [k, v] : flags)
      if (v) cfg.set(k, *v);
    return cfg;
  }
};

std::string config_fingerprint(const KeyValueConfig& cfg, const std::string& extra = {}) {
  std::string text;
  for (const auto& [k, v] : cfg.entries())
    if (!kPathKeys.contains(k)) text += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text + extra)));
  return buf;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (auto v : seeds) s += (s.empty() ? "" : ",") + std::to_string(v);
  return s;
}

void log_config(std::ostream& err, const std::string& command, const KeyValueConfig& cfg) {
  err << "[vlcest " << command << "] resolved config:\n";
  for (const auto& [k, v] : cfg.entries()) err << "  " << k << " = " << v << "\n";
}

std::string require(const KeyValueConfig& cfg, const std::string& key, const std::string& what) {
  auto v = cfg.find(key);
  if (!v || v->empty()) throw ConfigError("missing " + what + ": pass --" + key + " or set '" + key + "' in the config");
  return *v;
}

fs::path require_file(const KeyValueConfig& cfg, const std::string& key, const std::string& what) {
  fs::path p = require(cfg, key, what);
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  return p;
}

fs::path ids_path(const fs::path& artifact) { return fs::path(artifact.string() + ".train_ids"); }

std::vector<std::uint64_t> seeds_of(const KeyValueConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (double v : cfg.get_doubles("seeds", {1})) {
    if (v < 0 || v != std::floor(v)) throw ConfigError("seeds must be nonnegative integers");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  return seeds;
}

std::vector<DatasetRecord> load_split(const KeyValueConfig& cfg, bool want_train) {
  const auto dir = require_file(cfg, "data", "dataset directory");
  auto records = load_dataset(dir);
  std::vector<std::uint32_t> ids;
  for (const auto& r : records) ids.push_back(r.id);
  const auto split = split_by_id(ids, cfg.get_double("train_fraction", 0.8));
  const auto& keep = want_train ? split.train_ids : split.test_ids;
  std::vector<DatasetRecord> out;
  for (auto& r : records)
    if (std::binary_search(keep.begin(), keep.end(), r.id)) out.push_back(std::move(r));
  if (out.empty()) throw ProtocolError(std::string(want_train ? "training" : "test") + " split is empty");
  return out;
}

SweepSpec sweep_spec(const KeyValueConfig& cfg) {
  SweepSpec spec;
  spec.sigma_o_grid = cfg.get_doubles("sigma_o_grid", spec.sigma_o_grid);
  spec.sigma_inputs = cfg.get_doubles("sigma_inputs", spec.sigma_inputs);
  spec.seeds = seeds_of(cfg);
  const auto mode = cfg.get_string("mode", "fixed");
  if (mode == "fixed") {
    spec.mode = SigmaMode::fixed;
  } else if (mode == "tunable") {
    spec.mode = SigmaMode::tunable;
  } else {
    throw ConfigError("mode must be 'fixed' or 'tunable', got '" + mode + "'");
  }
  spec.tunable_offset = cfg.get_double("tunable_offset", 0.0);
  spec.fixed_sigma = cfg.get_double("fixed_sigma", 15.0);
  return spec;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string file_fingerprint(const fs::path& path) {
  const auto bytes = io::read_file(path);
  return std::to_string(fnv1a64(std::string(bytes.begin(), bytes.end())));
}

void run_gen(const KeyValueConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto seed = cfg.get_u64("seed", 1);
  const auto count = cfg.get_int("count", 250);
  if (count < 1) throw ConfigError("count must be at least 1");
  const auto base = VlcScene::from_config(cfg, VlcScene::with_array_size(static_cast<int>(cfg.get_int("array_size", 128))));
  RandomizationRanges ranges;
  ranges.distance_jitter_m = cfg.get_double("distance_jitter_m", ranges.distance_jitter_m);
  ranges.offset_jitter_m = cfg.get_double("offset_jitter_m", ranges.offset_jitter_m);
  ranges.spacing_jitter_rel = cfg.get_double("spacing_jitter_rel", ranges.spacing_jitter_rel);
  const fs::path dir = cfg.get_string("out", "data");
  err << "[vlcest gen-channels] seed = " << seed << "\n";
  const auto records = generate_dataset(base, static_cast<std::size_t>(count), seed, ranges);
  save_dataset(records, dir);
  out << "wrote " << records.size() << " channel images (" << base.n_r() << "x" << base.n_t() << ") to " << dir.string()
      << "\n";
}

void run_train(const KeyValueConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto records = load_split(cfg, true);
  ModelConfig model;
  model.depth = static_cast<int>(cfg.get_int("depth", model.depth));
  model.features = static_cast<int>(cfg.get_int("features", model.features));
  TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("epochs", tc.epochs));
  tc.batch_size = static_cast<int>(cfg.get_int("batch_size", tc.batch_size));
  tc.patches_per_epoch = static_cast<int>(cfg.get_int("patches_per_epoch", tc.patches_per_epoch));
  tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
  tc.patch_size = static_cast<std::size_t>(cfg.get_int("patch_size", static_cast<std::int64_t>(tc.patch_size)));
  tc.sigma_min = cfg.get_double("sigma_min", tc.sigma_min);
  tc.sigma_max = cfg.get_double("sigma_max", tc.sigma_max);
  tc.adam.beta1 = cfg.get_double("adam_beta1", tc.adam.beta1);
  tc.adam.beta2 = cfg.get_double("adam_beta2", tc.adam.beta2);
  tc.adam.epsilon = cfg.get_double("adam_epsilon", tc.adam.epsilon);
  tc.seed = cfg.get_u64("seed", tc.seed);
  const fs::path ckpt = cfg.get_string("out", "model.ffdn");
  err << "[vlcest train] seed = " << tc.seed << ", " << records.size() << " training images\n";

  std::vector<Image> images;
  std::vector<std::uint32_t> ids;
  for (const auto& r : records) {
    images.push_back(r.clean.image);
    ids.push_back(r.id);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto result = train(images, model, tc, [&](int epoch, double loss, double lr) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    err << "epoch " << epoch << "/" << tc.epochs << "  loss " << loss << "  lr " << lr << "  (" << secs << " s)\n";
  });
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(result.params, ckpt);
  write_id_list(ids, ids_path(ckpt));
  if (const auto loss_csv = cfg.find("loss_csv")) {
    std::string text = "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e + 1, result.loss_history[e]);
      text += buf;
    }
    write_text(*loss_csv, text);
  }
  out << "wrote checkpoint " << ckpt.string() << " (" << result.params.parameter_count() << " parameters)\n";
}

void run_fit_mmse(const KeyValueConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto records = load_split(cfg, true);
  const auto seed = cfg.get_u64("seed", 1);
  const auto p = cfg.get_int("mmse_patch_size", 8);
  const auto max_patches = cfg.get_int("max_patches", 0);
  if (p < 1 || max_patches < 0) throw ConfigError("mmse_patch_size must be positive and max_patches nonnegative");
  const fs::path dst = cfg.get_string("out", "model.mmse");
  err << "[vlcest fit-mmse] seed = " << seed << "\n";
  std::vector<Image> images;
  std::vector<std::uint32_t> ids;
  for (const auto& r : records) {
    images.push_back(r.clean.image);
    ids.push_back(r.id);
  }
  const auto model = fit_mmse(images, static_cast<std::size_t>(p), static_cast<std::size_t>(max_patches), seed);
  if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
  save_mmse(model, dst);
  write_id_list(ids, ids_path(dst));
  out << "wrote MMSE model " << dst.string() << " (" << model.sample_count << " patches of " << p << "x" << p << ")\n";
}

std::vector<std::uint32_t> trained_ids(const fs::path& artifact) {
  const auto p = ids_path(artifact);
  if (!fs::exists(p)) throw ProtocolError("training id list not found: " + p.string());
  return read_id_list(p);
}

void run_sweep(const KeyValueConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto ckpt = require_file(cfg, "checkpoint", "checkpoint");
  const auto model = load_checkpoint(ckpt);
  const auto test = load_split(cfg, false);
  const auto spec = sweep_spec(cfg);
  err << "[vlcest sweep] seeds = " << join_seeds(spec.seeds) << "\n";
  const auto points = run_sensitivity_sweep(model, test, trained_ids(ckpt), spec);
  const auto csv = curves_csv(points, std::string("vlcest ") + VLCEST_VERSION + " sweep config_hash=" +
                                          config_fingerprint(cfg, file_fingerprint(ckpt)) +
                                          " seeds=" + join_seeds(spec.seeds));
  if (const auto dst = cfg.find("out")) {
    write_text(*dst, csv);
    err << "wrote " << points.size() << " curve points to " << *dst << "\n";
  } else {
    out << csv;
  }
}

void run_compare(const KeyValueConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto ckpt = require_file(cfg, "checkpoint", "checkpoint");
  const auto mmse_path = require_file(cfg, "mmse", "MMSE model");
  const auto model = load_checkpoint(ckpt);
  const auto mmse = load_mmse(mmse_path);
  const auto test = load_split(cfg, false);
  const auto spec = sweep_spec(cfg);
  auto train_ids = trained_ids(ckpt);
  const auto mmse_ids = trained_ids(mmse_path);
  train_ids.insert(train_ids.end(), mmse_ids.begin(), mmse_ids.end());
  err << "[vlcest compare] seeds = " << join_seeds(spec.seeds) << "\n";
  const auto points = run_mmse_comparison(model, mmse, test, train_ids, spec);
  const auto csv = curves_csv(points, std::string("vlcest ") + VLCEST_VERSION + " compare config_hash=" +
                                          config_fingerprint(cfg, file_fingerprint(ckpt) + file_fingerprint(mmse_path)) +
                                          " seeds=" + join_seeds(spec.seeds) +
                                          " mmse=patchwise-empirical-wiener(stand-in)");
  if (const auto dst = cfg.find("out")) {
    write_text(*dst, csv);
    err << "wrote " << points.size() << " curve points to " << *dst << "\n";
  } else {
    out << csv;
  }
}

}  // namespace

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"vlcest: massive-MIMO VLC channel estimation with an FFDNet-style denoiser"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VLCEST_VERSION);

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    auto cmd = std::make_unique<Command>();
    cmd->name = name;
    cmd->app = app.add_subcommand(name, help);
    cmd->flag("config", "flat key = value config file; flags override its entries");
    commands.push_back(std::move(cmd));
    return *commands.back();
  };

  auto& gen = add("gen-channels", "generate a corpus of channel images");
  for (const auto& [k, h] : std::vector<std::pair<std::string, std::string>>{
           {"out", "output dataset directory (default data)"},
           {"count", "number of channel images (default 250)"},
           {"seed", "master seed (default 1)"},
           {"array_size", "128 or 256 (default 128)"},
           {"distance_jitter_m", "LED height jitter, +/- metres"},
           {"offset_jitter_m", "PD plane offset jitter, +/- metres"},
           {"spacing_jitter_rel", "relative array spacing jitter"}})
    gen.flag(k, h);

  auto& tr = add("train", "train the denoiser on the training split");
  for (const auto& [k, h] : std::vector<std::pair<std::string, std::string>>{
           {"data", "dataset directory"},
           {"out", "checkpoint path (default model.ffdn)"},
           {"depth", "network depth (default 15)"},
           {"features", "feature maps per layer (default 64)"},
           {"epochs", "epochs (default 30)"},
           {"batch_size", "patches per minibatch (default 32)"},
           {"patches_per_epoch", "patches per epoch (default 512)"},
           {"learning_rate", "initial Adam learning rate (default 1e-3)"},
           {"patch_size", "training patch size (default 70)"},
           {"sigma_min", "lower training noise level (default 0)"},
           {"sigma_max", "upper training noise level (default 55)"},
           {"seed", "master seed (default 1)"},
           {"train_fraction", "train split fraction by id (default 0.8)"},
           {"loss_csv", "write per-epoch loss history here"}})
    tr.flag(k, h);

  auto& fit = add("fit-mmse", "fit the patchwise MMSE baseline on the training split");
  for (const auto& [k, h] : std::vector<std::pair<std::string, std::string>>{
           {"data", "dataset directory"},
           {"out", "model path (default model.mmse)"},
           {"mmse_patch_size", "patch size (default 8)"},
           {"max_patches", "cap on fitted patches, 0 = all"},
           {"seed", "patch subsampling seed"},
           {"train_fraction", "train split fraction by id (default 0.8)"}})
    fit.flag(k, h);

  for (const auto& name : {std::string("sweep"), std::string("compare")}) {
    auto& c = add(name, name == "sweep" ? "noise-level sensitivity sweep" : "FFDNet versus MMSE comparison");
    for (const auto& [k, h] : std::vector<std::pair<std::string, std::string>>{
             {"data", "dataset directory"},
             {"checkpoint", "trained checkpoint"},
             {"out", "CSV output path (stdout when omitted)"},
             {"sigma_o_grid", "real noise levels, list or start:stop:step (default 0:50:5)"},
             {"seeds", "noise seeds (default 1)"},
             {"mode", "fixed or tunable (default fixed)"},
             {"tunable_offset", "tunable policy sigma = sigma_o + offset (default 0)"},
             {"train_fraction", "train split fraction by id (default 0.8)"}})
      c.flag(k, h);
    if (name == "sweep") {
      c.flag("sigma_inputs", "input noise levels for fixed mode (default 5,15,25,50)");
    } else {
      c.flag("mmse", "fitted MMSE model");
      c.flag("fixed_sigma", "input noise level of the fixed curve (default 15)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (const auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    try {
      const auto cfg = cmd->resolve();
      log_config(err, cmd->name, cfg);
      if (cmd->name == "gen-channels") run_gen(cfg, out, err);
      if (cmd->name == "train") run_train(cfg, out, err);
      if (cmd->name == "fit-mmse") run_fit_mmse(cfg, out, err);
      if (cmd->name == "sweep") run_sweep(cfg, out, err);
      if (cmd->name == "compare") run_compare(cfg, out, err);
      return 0;
    } catch (const std::exception& e) {
      err << "vlcest " << cmd->name << ": error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}

}  // namespace vlcest
