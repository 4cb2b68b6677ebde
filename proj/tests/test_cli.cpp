#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nots/dataset_io.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return NOTS_CLI_PATH; }

int run(const std::string& args, const std::string& log = "/tmp/nots_cli_test.log") {
  const std::string cmd = std::string(cli_path()) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("nots_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_micro_config(const fs::path& path, const fs::path& dataset) {
  std::ofstream f(path);
  f << R"({
  "dataset": ")" << dataset.string() << R"(",
  "seed": 3,
  "schedule": {"kind": "local", "windows": [4, 2]},
  "tokenizer": {"stage_widths": [4], "blocks_per_stage": 1, "first_kernel": 3,
                "kernel": 3, "token_dim": 4, "stage_stride": 2},
  "transformer": {"layers": 1, "heads": 1, "token_dim": 4, "ff_mult": 2,
                  "max_levels": 4, "max_channels": 2, "max_prompts": 4},
  "pretrain": {"epochs": 2, "batch_size": 8, "lr": 0.01, "milestones": []},
  "tune": {"epochs": 3, "batch_size": 8, "lr": 0.05, "milestones": []},
  "task": {"prompts": 2},
  "features": {"segment_length": 4, "bands": [[1.0, 64.0]], "sampling_rate": 128.0},
  "imputation_ratios": [0.25]
})";
}

}  // namespace

TEST_CASE("help exits zero, bad invocations exit one") {
  CHECK(run("--help") == 0);
  CHECK(run("no-such-subcommand") == 1);
  CHECK(run("pretrain") == 1);  // missing required --config
  CHECK(run("eval --config /nonexistent.json --task segmentation") != 0);
}

TEST_CASE("generate writes a loadable dataset with the requested shape") {
  const auto dir = temp_dir("generate");
  CHECK(run("generate --kind fbm --n 16 --count 3 --seed 5 --out " + dir.string()) == 0);
  nots::DatasetFile ds = nots::load_dataset(dir.string());
  CHECK(ds.channels == 1);
  CHECK(ds.length == 16);
  CHECK(ds.samples.size() == 3);
  CHECK(ds.samples[0].labels.at("hurst") == std::vector<double>{0.7});
  fs::remove_all(dir);
}

TEST_CASE("generate rejects bad kinds and counts with exit 1") {
  const auto dir = temp_dir("generate_bad");
  CHECK(run("generate --kind wavelet --out " + dir.string()) == 1);
  CHECK(run("generate --kind fbm --count 0 --out " + dir.string()) == 1);
  fs::remove_all(dir);
}

TEST_CASE("validate flags divisor violations against the dataset") {
  const auto dir = temp_dir("validate");
  const auto data20 = dir / "data20";
  REQUIRE(run("generate --kind fbm --n 20 --count 2 --out " + data20.string()) == 0);
  // Default tokenizer stride is 8; T = 20 does not divide.
  std::ofstream(dir / "bad.json") << "{\"dataset\": \"" << data20.string() << "\"}";
  CHECK(run("validate --config " + (dir / "bad.json").string(),
            (dir / "validate.log").string()) == 1);
  CHECK(slurp((dir / "validate.log").string()).find("stride") != std::string::npos);

  const auto data16 = dir / "data16";
  REQUIRE(run("generate --kind fbm --n 16 --count 2 --out " + data16.string()) == 0);
  write_micro_config(dir / "good.json", data16);
  CHECK(run("validate --config " + (dir / "good.json").string()) == 0);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck subcommand passes") {
  CHECK(run("gradcheck --tol 1e-4") == 0);
}

TEST_CASE("pretrain, adapt, eval pipeline with reproducible metrics") {
  const auto dir = temp_dir("pipeline");
  const auto data = dir / "data";
  REQUIRE(run("generate --kind fbm --n 16 --count 6 --seed 2 --out " + data.string()) == 0);
  const auto cfg = dir / "config.json";
  write_micro_config(cfg, data);

  const auto pre = dir / "pre";
  REQUIRE(run("pretrain --config " + cfg.string() + " --out " + pre.string()) == 0);
  CHECK(fs::exists(pre / "model.bin"));
  CHECK(fs::exists(pre / "history.csv"));
  CHECK(fs::exists(pre / "config.json"));

  const auto ad = dir / "adapt";
  const auto adapt_log = (dir / "adapt.log").string();
  REQUIRE(run("adapt --config " + cfg.string() + " --model " + (pre / "model.bin").string() +
                  " --out " + ad.string(),
              adapt_log) == 0);
  CHECK(fs::exists(ad / "adapted.bin"));
  CHECK(fs::exists(ad / "metrics.json"));
  const std::string adapt_out = slurp(adapt_log);
  CHECK(adapt_out.find("frozen params:") != std::string::npos);
  CHECK(adapt_out.find("trainable params:") != std::string::npos);
  CHECK(adapt_out.find("trainable fraction:") != std::string::npos);

  const auto e1 = dir / "eval1";
  const auto e2 = dir / "eval2";
  REQUIRE(run("eval --config " + cfg.string() + " --task hurst-regression --model " +
              (pre / "model.bin").string() + " --out " + e1.string()) == 0);
  REQUIRE(run("eval --config " + cfg.string() + " --task hurst-regression --model " +
              (pre / "model.bin").string() + " --out " + e2.string()) == 0);
  const std::string m1 = slurp((e1 / "metrics.json").string());
  const std::string m2 = slurp((e2 / "metrics.json").string());
  CHECK(!m1.empty());
  CHECK(m1 == m2);  // byte-identical across re-runs
  CHECK(m1.find("\"mae\"") != std::string::npos);
  CHECK(m1.find("runtime") == std::string::npos);

  // PCA export from the pretrained model.
  const auto pc = dir / "pca";
  REQUIRE(run("pca --config " + cfg.string() + " --model " + (pre / "model.bin").string() +
              " --samples 2 --out " + pc.string()) == 0);
  CHECK(fs::exists(pc / "pca.csv"));
  fs::remove_all(dir);
}

TEST_CASE("NOTS_OUT_DIR provides the default output directory") {
  const auto dir = temp_dir("envout");
  setenv("NOTS_OUT_DIR", dir.string().c_str(), 1);
  CHECK(run("generate --kind fbm --n 16 --count 2") == 0);
  unsetenv("NOTS_OUT_DIR");
  CHECK(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}
