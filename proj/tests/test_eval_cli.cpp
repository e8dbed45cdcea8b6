#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vlcest/binary_io.hpp"
#include "vlcest/cli.hpp"
#include "vlcest/errors.hpp"
#include "vlcest/eval.hpp"

using namespace vlcest;
using doctest::Approx;

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "vlcest");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vlcest_test_eval_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

struct Fixture {
  std::vector<DatasetRecord> test;
  std::vector<std::uint32_t> train_ids{0, 1, 2};
  ModelParams<float> model = init_params<float>(ModelConfig{3, 4, 1}, 1);
  MmseModel mmse;

  Fixture() {
    auto records = generate_dataset(VlcScene::with_array_size(128), 5, 2, RandomizationRanges{});
    std::vector<Image> train;
    for (auto& r : records) (r.id < 3 ? train.push_back(r.clean.image) : test.push_back(r)), void();
    mmse = fit_mmse(train, 8, 0, 1);
  }
};

}  // namespace

TEST_CASE("sweep specification") {
  SweepSpec spec;
  CHECK(spec.sigma_o_grid.size() == 11);
  CHECK(spec.tunable_label() == "ffdnet-tunable");
  spec.tunable_offset = 5;
  CHECK(spec.tunable_label() == "ffdnet-tunable+5");
  CHECK(spec.tunable_sigma(20) == 25);
  spec.sigma_o_grid = {-1};
  CHECK_THROWS(spec.validate());
  CHECK(observation_seed(1, 3, 25) == observation_seed(1, 3, 25));
  CHECK(observation_seed(1, 3, 25) != observation_seed(1, 4, 25));
  CHECK(observation_seed(1, 3, 25) != observation_seed(2, 3, 25));
}

TEST_CASE("sensitivity sweep and comparison") {
  const Fixture f;
  SweepSpec spec;

  const auto sweep = run_sensitivity_sweep(f.model, f.test, f.train_ids, spec);
  CHECK(sweep.size() == 44);
  for (const auto& p : sweep) {
    CHECK(p.method == "ffdnet");
    REQUIRE(p.sigma_input.has_value());
  }
  CHECK(find_point(sweep, 25, "ffdnet", 15.0).sigma_o == 25);
  CHECK_THROWS_AS(find_point(sweep, 26, "ffdnet", 15.0), std::out_of_range);

  spec.mode = SigmaMode::tunable;
  const auto tunable = run_sensitivity_sweep(f.model, f.test, f.train_ids, spec);
  CHECK(tunable.size() == 11);
  CHECK(*find_point(tunable, 40, "ffdnet-tunable").sigma_input == 40.0);

  const auto cmp = run_mmse_comparison(f.model, f.mmse, f.test, f.train_ids, spec);
  CHECK(cmp.size() == 33);
  CHECK(*find_point(cmp, 10, "ffdnet-fixed").sigma_input == 15.0);
  CHECK_FALSE(find_point(cmp, 10, "mmse-patchwise").sigma_input.has_value());
  // MMSE with no noise returns the observation up to round-off.
  CHECK(find_point(cmp, 0, "mmse-patchwise").psnr_mean > 150.0);
  for (std::size_t k = 1; k < cmp.size(); ++k) CHECK(cmp[k - 1].sigma_o <= cmp[k].sigma_o);

  SUBCASE("deterministic") {
    const auto again = run_sensitivity_sweep(f.model, f.test, f.train_ids, SweepSpec{});
    CHECK(curves_csv(again, "x") == curves_csv(sweep, "x"));
  }
  SUBCASE("the test set must not overlap training") {
    const std::vector<std::uint32_t> leaked{0, 3};
    CHECK_THROWS_AS(run_sensitivity_sweep(f.model, f.test, leaked, SweepSpec{}), ProtocolError);
    CHECK_THROWS_AS(run_mmse_comparison(f.model, f.mmse, f.test, leaked, SweepSpec{}), ProtocolError);
  }
}

TEST_CASE("CSV layout") {
  std::vector<CurvePoint> pts{{5, "ffdnet", 15.0, 30.5, 0.25}, {5, "mmse-patchwise", std::nullopt, 28.0, 0.0}};
  const auto lines = lines_of(curves_csv(pts, "hello"));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "# hello");
  CHECK(lines[1] == "sigma_o,method,sigma_input,psnr_mean,psnr_std");
  CHECK(lines[2] == "5,ffdnet,15,30.500000,0.250000");
  CHECK(lines[3] == "5,mmse-patchwise,,28.000000,0.000000");
}

TEST_CASE("command line") {
  const auto dir = fresh_dir("cli");
  const auto data = (dir / "data").string();

  SUBCASE("gen-channels is byte-reproducible") {
    const auto other = (dir / "data2").string();
    REQUIRE(run({"gen-channels", "--out", data, "--count", "6", "--seed", "3"}).code == 0);
    REQUIRE(run({"gen-channels", "--out", other, "--count", "6", "--seed", "3"}).code == 0);
    for (const auto& name : {std::string("index.txt"), record_file_name(0), record_file_name(5)})
      CHECK(io::read_file(fs::path(data) / name) == io::read_file(fs::path(other) / name));
  }

  SUBCASE("missing artifacts are named") {
    REQUIRE(run({"gen-channels", "--out", data, "--count", "5"}).code == 0);
    auto r = run({"sweep", "--data", data});
    CHECK(r.code != 0);
    CHECK(r.err.find("checkpoint") != std::string::npos);
    r = run({"sweep", "--data", data, "--checkpoint", (dir / "nope.ffdn").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("nope.ffdn") != std::string::npos);
    r = run({"train", "--data", (dir / "missing").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("dataset directory") != std::string::npos);
  }

  SUBCASE("unknown subcommands and flags are rejected") {
    CHECK(run({"frobnicate"}).code != 0);
    CHECK(run({"gen-channels", "--bogus", "1"}).code != 0);
    CHECK(run({}).code != 0);
  }

  SUBCASE("config file with flag overrides") {
    const auto cfg = dir / "gen.cfg";
    std::ofstream(cfg) << "# corpus\ncount = 7\nseed = 9\n";
    const auto r = run({"gen-channels", "--config", cfg.string(), "--out", data, "--count", "4"});
    REQUIRE(r.code == 0);
    CHECK(load_dataset(data).size() == 4);
    CHECK(r.err.find("seed = 9") != std::string::npos);
  }

  SUBCASE("full pipeline") {
    const auto ckpt = (dir / "m.ffdn").string();
    const auto mmse = (dir / "m.mmse").string();
    REQUIRE(run({"gen-channels", "--out", data, "--count", "5", "--seed", "2"}).code == 0);
    REQUIRE(run({"train", "--data", data, "--out", ckpt, "--depth", "3", "--features", "4", "--epochs", "2",
                 "--batch-size", "2", "--patches-per-epoch", "4", "--patch-size", "32", "--loss-csv",
                 (dir / "loss.csv").string()})
                .code == 0);
    CHECK(fs::exists(ckpt + ".train_ids"));
    CHECK(lines_of(slurp(dir / "loss.csv")).size() == 3);
    REQUIRE(run({"fit-mmse", "--data", data, "--out", mmse}).code == 0);

    const auto sweep = run({"sweep", "--data", data, "--checkpoint", ckpt, "--sigma-o-grid", "0:50:25"});
    REQUIRE(sweep.code == 0);
    auto lines = lines_of(sweep.out);
    CHECK(lines[0].rfind("# vlcest ", 0) == 0);
    CHECK(lines[0].find("config_hash=") != std::string::npos);
    CHECK(lines[1] == kCsvHeader);
    CHECK(lines.size() == 2 + 3 * 4);

    const auto cmp = run({"compare", "--data", data, "--checkpoint", ckpt, "--mmse", mmse, "--mode", "tunable",
                          "--sigma-o-grid", "10,20", "--out", (dir / "cmp.csv").string()});
    REQUIRE(cmp.code == 0);
    lines = lines_of(slurp(dir / "cmp.csv"));
    CHECK(lines[0].find(" compare ") != std::string::npos);
    CHECK(lines[1] == kCsvHeader);
    CHECK(lines.size() == 2 + 2 * 3);
    CHECK(slurp(dir / "cmp.csv").find("ffdnet-tunable") != std::string::npos);

    // Results do not depend on where files live, so relocating the output keeps the hash.
    const auto moved = run({"sweep", "--data", data, "--checkpoint", ckpt, "--sigma-o-grid", "0:50:25", "--out",
                            (dir / "s.csv").string()});
    CHECK(slurp(dir / "s.csv") == sweep.out);
    const auto changed = run({"sweep", "--data", data, "--checkpoint", ckpt, "--sigma-o-grid", "0:50:25", "--seeds", "2"});
    CHECK(lines_of(changed.out)[0] != lines_of(sweep.out)[0]);

    // A checkpoint trained on everything leaks into the test split.
    REQUIRE(run({"train", "--data", data, "--out", ckpt, "--depth", "3", "--features", "4", "--epochs", "1",
                 "--batch-size", "2", "--patches-per-epoch", "2", "--patch-size", "32", "--train-fraction", "0.9"})
                .code == 0);
    const auto leak = run({"sweep", "--data", data, "--checkpoint", ckpt, "--train-fraction", "0.6"});
    CHECK(leak.code != 0);
  }
  fs::remove_all(dir);
}
