#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nots/harness.hpp"
#include "nots/rng.hpp"
#include "nots/synthgen.hpp"

namespace fs = std::filesystem;
using namespace nots;

namespace {

std::string resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NOTS_OUT_DIR"); env && *env) return env;
  return ".";
}

ExperimentConfig load_cfg(const std::string& path, bool seed_set, std::uint64_t seed) {
  ExperimentConfig cfg = load_config(path);
  if (seed_set) {
    cfg.seed = seed;
    cfg.pretrain.seed = seed + 101;
    cfg.tune.seed = seed + 202;
  }
  return cfg;
}

DatasetFile load_cfg_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty())
    throw std::invalid_argument("config: 'dataset' path is required for this command");
  return load_dataset(cfg.dataset);
}

void archive_run(const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream f(dir + "/config.json");
  f << dump_config(cfg) << "\n";
}

int cmd_generate(const std::string& kind, int n, double hurst, int count, int channels,
                 std::uint64_t seed, double amplitude, double noise_scale,
                 const std::string& out) {
  if (count < 1) throw std::invalid_argument("generate: --count must be >= 1");
  if (channels < 1) throw std::invalid_argument("generate: --channels must be >= 1");

  DatasetFile ds;
  ds.channels = channels;
  ds.length = n;
  ds.seed = seed;
  nlohmann::json spec;
  if (kind == "fbm" || kind == "anomaly") {
    ds.name = "fbm";
    ds.label_schema = {{"hurst", 1}};
    spec = {{"kind", "fbm"}, {"length", n}, {"hurst", hurst}, {"channels", channels}};
    FbmGenerator gen(n, hurst);
    for (int i = 0; i < count; ++i) {
      LabeledSample s;
      s.signal = Signal({channels, n});
      for (int c = 0; c < channels; ++c) {
        LabeledSample one = gen.generate(seed + 1000003ULL * i + c);
        for (int t = 0; t < n; ++t) s.signal.at(c, t) = one.signal.at(0, t);
      }
      s.labels["hurst"] = {hurst};
      ds.samples.push_back(std::move(s));
    }
  } else if (kind == "sinusoid") {
    ds.name = "sinusoid";
    spec = {{"kind", "sinusoid"},
            {"length", n},
            {"channels", channels},
            {"noise_scale", noise_scale}};
    for (int i = 0; i < count; ++i) {
      LabeledSample s;
      s.signal = Signal({channels, n});
      for (int c = 0; c < channels; ++c) {
        SinusoidSpec sp;
        sp.length = n;
        sp.noise_scale = noise_scale;
        sp.seed = seed + 1000003ULL * i + c;
        LabeledSample one = gen_sinusoids(sp);
        for (int t = 0; t < n; ++t) s.signal.at(c, t) = one.signal.at(0, t);
      }
      ds.samples.push_back(std::move(s));
    }
  } else {
    throw std::invalid_argument("generate: unknown --kind '" + kind + "'");
  }
  ds.generation_spec = spec.dump();

  if (kind == "anomaly") ds = inject_anomalies(ds, count, amplitude, seed + 7777);

  fs::create_directories(out);
  save_dataset(ds, out);
  std::cout << "wrote " << ds.samples.size() << " samples (C=" << ds.channels
            << ", T=" << ds.length << ") to " << out << "\n";
  return 0;
}

int cmd_pretrain(const ExperimentConfig& cfg, const std::string& out) {
  DatasetFile ds = load_cfg_dataset(cfg);
  cfg.validate_for_dataset(ds.channels, ds.length);
  auto [train_idx, test_idx] = train_test_split(ds, cfg.train_fraction, cfg.seed);
  std::vector<Signal> signals;
  for (std::size_t i : train_idx) signals.push_back(ds.samples[i].signal);

  ModelState state = init_base_model(cfg, cfg.seed);
  FitHistory history = pretrain_fit(state, cfg, signals);

  archive_run(cfg, out);
  state.save(out + "/model.bin");
  history.write_csv(out + "/history.csv");
  std::cout << "pretrained " << state.total_params() << " params on " << signals.size()
            << " samples; final loss " << history.records.back().mean_loss << "\n";
  return 0;
}

int cmd_adapt(const ExperimentConfig& cfg, const std::string& model_path,
              const std::string& out) {
  DatasetFile ds = load_cfg_dataset(cfg);
  ModelState base = ModelState::load(model_path);
  AdaptedModel model;
  FitHistory history;
  MetricsReport report = run_feature_regression(cfg, ds, &base, &model, &history);

  archive_run(cfg, out);
  model.state.save(out + "/adapted.bin");
  history.write_csv(out + "/history.csv");
  report.write(out + "/metrics.json");
  const ParamPartition part = model.partition();
  std::cout << "frozen params: " << part.frozen << "\n"
            << "trainable params: " << part.trainable << "\n"
            << "trainable fraction: " << part.trainable_fraction() << "\n"
            << "held-out mae: " << report.get("mae") << "\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg_in, const std::string& task,
             const std::string& model_path, const std::string& out) {
  ExperimentConfig cfg = cfg_in;
  DatasetFile ds = load_cfg_dataset(cfg);
  ModelState base;
  const ModelState* base_ptr = nullptr;
  if (!model_path.empty()) {
    base = ModelState::load(model_path);
    base_ptr = &base;
  }

  MetricsReport report;
  if (task == "hurst-regression" || task == "feature-regression") {
    if (task == "hurst-regression") cfg.task_target = "hurst";
    report = run_feature_regression(cfg, ds, base_ptr);
  } else if (task == "imputation") {
    report = run_imputation(cfg, ds, base_ptr);
  } else if (task == "anomaly") {
    report = run_anomaly(cfg, ds, base_ptr);
  } else {
    throw std::invalid_argument("eval: unknown --task '" + task + "'");
  }

  archive_run(cfg, out);
  report.write(out + "/metrics.json");
  std::cout << report.to_json();
  std::cout << "runtime: " << report.runtime_seconds << " s\n";
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, int jobs, const std::string& out) {
  DatasetFile ds = load_cfg_dataset(cfg);
  MetricsReport report = run_ablation_matrix(cfg, ds, jobs);
  archive_run(cfg, out);
  report.write(out + "/metrics.json");
  std::cout << report.to_json();
  return 0;
}

int cmd_pca(const ExperimentConfig& cfg, const std::string& model_path, int samples,
            const std::string& out) {
  DatasetFile ds = load_cfg_dataset(cfg);
  ModelState base = ModelState::load(model_path);
  fs::create_directories(out);
  pca_export(cfg, base, ds, out + "/pca.csv", samples);
  std::cout << "wrote " << out << "/pca.csv\n";
  return 0;
}

int cmd_gradcheck(double tol) {
  GradCheckReport report = run_gradcheck_suite(tol);
  std::cout << report.to_string();
  return report.pass ? 0 : 2;
}

int cmd_validate(const std::string& config_path, bool seed_set, std::uint64_t seed) {
  ExperimentConfig cfg = load_cfg(config_path, seed_set, seed);
  if (!cfg.dataset.empty() && fs::exists(cfg.dataset + "/manifest.json")) {
    DatasetFile ds = load_dataset(cfg.dataset);
    cfg.validate_for_dataset(ds.channels, ds.length);
  }
  std::cout << "config ok (hash " << config_hash(cfg) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"next-function-prediction time-series pre-training"};
  app.require_subcommand(1);

  std::string config_path, out_flag, model_path, kind = "fbm", task = "hurst-regression";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int n = 128, count = 64, channels = 1, jobs = 1, pca_samples = 16;
  double hurst = 0.7, amplitude = 5.0, noise_scale = 0.05, tol = 1e-4;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override all random seeds")
        ->each([&](const std::string&) { seed_set = true; });
  };
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_flag, "output directory (default $NOTS_OUT_DIR or .)");
  };

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
  generate->add_option("--kind", kind, "fbm | sinusoid | anomaly");
  generate->add_option("--n", n, "signal length T");
  generate->add_option("--hurst", hurst, "Hurst index (fbm)");
  generate->add_option("--count", count, "number of samples");
  generate->add_option("--channels", channels, "channels per sample");
  generate->add_option("--amplitude", amplitude, "anomaly injection amplitude");
  generate->add_option("--noise-scale", noise_scale, "sinusoid noise scale");
  add_seed(generate);
  add_out(generate);

  CLI::App* pretrain = app.add_subcommand("pretrain", "pre-train a base model");
  add_config(pretrain);
  add_seed(pretrain);
  add_out(pretrain);

  CLI::App* adapt = app.add_subcommand("adapt", "attach and tune frozen-base adaptors");
  add_config(adapt);
  adapt->add_option("--model", model_path, "pretrained base model")->required();
  add_seed(adapt);
  add_out(adapt);

  CLI::App* eval = app.add_subcommand("eval", "run an evaluation protocol");
  add_config(eval);
  eval->add_option("--task", task,
                   "hurst-regression | feature-regression | imputation | anomaly");
  eval->add_option("--model", model_path, "pretrained base model (default: pre-train)");
  add_seed(eval);
  add_out(eval);

  CLI::App* ablate = app.add_subcommand("ablate", "run the ablation matrix");
  add_config(ablate);
  ablate->add_option("--jobs", jobs, "parallel variant runs");
  add_seed(ablate);
  add_out(ablate);

  CLI::App* pca = app.add_subcommand("pca", "export token-space PCA");
  add_config(pca);
  pca->add_option("--model", model_path, "pretrained base model")->required();
  pca->add_option("--samples", pca_samples, "samples to project");
  add_seed(pca);
  add_out(pca);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference verification");
  gradcheck->add_option("--tol", tol, "relative tolerance");

  CLI::App* validate = app.add_subcommand("validate", "config check only");
  add_config(validate);
  add_seed(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const std::string out = resolve_out(out_flag);
    if (generate->parsed())
      return cmd_generate(kind, n, hurst, count, channels, seed, amplitude, noise_scale,
                          out);
    if (pretrain->parsed())
      return cmd_pretrain(load_cfg(config_path, seed_set, seed), out);
    if (adapt->parsed())
      return cmd_adapt(load_cfg(config_path, seed_set, seed), model_path, out);
    if (eval->parsed())
      return cmd_eval(load_cfg(config_path, seed_set, seed), task, model_path, out);
    if (ablate->parsed())
      return cmd_ablate(load_cfg(config_path, seed_set, seed), jobs, out);
    if (pca->parsed())
      return cmd_pca(load_cfg(config_path, seed_set, seed), model_path, pca_samples, out);
    if (gradcheck->parsed()) return cmd_gradcheck(tol);
    if (validate->parsed()) return cmd_validate(config_path, seed_set, seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
