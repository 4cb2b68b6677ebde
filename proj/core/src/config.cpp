#include "nots/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "nots/dataset_io.hpp"

namespace nots {

namespace {
using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in '" + where + "'");
}

DegradationSchedule parse_schedule(const json& j) {
  check_keys(j, "schedule", {"kind", "windows", "cutoffs", "sigmas", "seed"});
  const std::string kind = j.at("kind").get<std::string>();
  DegradationSchedule s;
  if (kind == "local") {
    for (int w : j.at("windows").get<std::vector<int>>())
      s.ops.push_back(DegradationOp::local(w));
  } else if (kind == "global") {
    for (double c : j.at("cutoffs").get<std::vector<double>>())
      s.ops.push_back(DegradationOp::global(c));
  } else if (kind == "noise") {
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    for (double sg : j.at("sigmas").get<std::vector<double>>())
      s.ops.push_back(DegradationOp::noise(sg, seed));
  } else {
    throw std::invalid_argument("config: schedule kind '" + kind +
                                "' is not one of local/global/noise");
  }
  return s;
}

json schedule_json(const DegradationSchedule& s) {
  json j;
  if (s.ops.empty()) {
    j["kind"] = "local";
    j["windows"] = json::array();
    return j;
  }
  switch (s.ops.front().kind) {
    case DegradeKind::LocalSmooth: {
      j["kind"] = "local";
      auto& w = j["windows"] = json::array();
      for (const auto& op : s.ops) w.push_back(op.window);
      break;
    }
    case DegradeKind::GlobalSmooth: {
      j["kind"] = "global";
      auto& c = j["cutoffs"] = json::array();
      for (const auto& op : s.ops) c.push_back(op.cutoff);
      break;
    }
    case DegradeKind::GaussianNoise: {
      j["kind"] = "noise";
      j["seed"] = s.ops.front().seed;
      auto& sg = j["sigmas"] = json::array();
      for (const auto& op : s.ops) sg.push_back(op.sigma);
      break;
    }
  }
  return j;
}

TrainConfig parse_train(const json& j, const std::string& where, TrainConfig base) {
  check_keys(j, where,
             {"lr", "milestones", "lr_factor", "epochs", "batch_size", "beta1", "beta2",
              "weight_decay", "seed", "precision"});
  TrainConfig t = base;
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("milestones")) t.milestones = j.at("milestones").get<std::vector<int>>();
  if (j.contains("lr_factor")) t.lr_factor = j.at("lr_factor").get<double>();
  if (j.contains("epochs")) t.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int>();
  if (j.contains("beta1")) t.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) t.beta2 = j.at("beta2").get<double>();
  if (j.contains("weight_decay")) t.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("precision")) t.precision = j.at("precision").get<std::string>();
  return t;
}

json train_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"milestones", t.milestones},
          {"lr_factor", t.lr_factor},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"weight_decay", t.weight_decay},
          {"seed", t.seed},
          {"precision", t.precision}};
}

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Regression: return "regression";
    case TaskKind::Classification: return "classification";
    case TaskKind::Imputation: return "imputation";
    case TaskKind::Anomaly: return "anomaly";
  }
  return "regression";
}

}  // namespace

void ExperimentConfig::validate() const {
  schedule.validate();
  tokenizer.validate();
  transformer.validate();
  if (tokenizer.token_dim != transformer.token_dim)
    throw std::invalid_argument("config: tokenizer token_dim " +
                                std::to_string(tokenizer.token_dim) +
                                " != transformer token_dim " +
                                std::to_string(transformer.token_dim));
  if (schedule.levels() - 1 > transformer.max_levels)
    throw std::invalid_argument("config: schedule has " +
                                std::to_string(schedule.levels() - 1) +
                                " transformer levels, max_levels is " +
                                std::to_string(transformer.max_levels));
  pretrain.validate();
  tune.validate();
  features.validate();
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("config: train_fraction must be in (0,1)");
  if (anomaly_percentile < 0.0 || anomaly_percentile > 100.0)
    throw std::invalid_argument("config: anomaly_percentile must be in [0,100]");
  for (double r : imputation_ratios)
    if (r <= 0.0 || r >= 1.0)
      throw std::invalid_argument("config: imputation ratio must be in (0,1)");
  if (task.prompts < 1 || task.prompts > transformer.max_prompts)
    throw std::invalid_argument("config: task prompts outside [1, max_prompts]");
  if (out_channels < 0 || out_channels > transformer.max_channels)
    throw std::invalid_argument("config: out_channels outside [0, max_channels]");
}

void ExperimentConfig::validate_for_dataset(int channels, int length) const {
  validate();
  tokenizer.token_count(length);  // throws naming the stride divisor
  objective.validate(length);
  if (length % features.segment_length != 0)
    throw std::invalid_argument("config: signal length " + std::to_string(length) +
                                " is not divisible by feature segment length L = " +
                                std::to_string(features.segment_length));
  const int c_in = channels;
  const int c_eff = out_channels > 0 ? out_channels : c_in;
  if (c_eff > transformer.max_channels)
    throw std::invalid_argument("config: effective channel count " +
                                std::to_string(c_eff) + " exceeds max_channels " +
                                std::to_string(transformer.max_channels));
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j = json::parse(json_text);
  check_keys(j, "<root>",
             {"dataset", "output_dir", "seed", "schedule", "tokenizer", "transformer",
              "objective", "pretrain", "tune", "task", "features", "train_fraction",
              "anomaly_percentile", "imputation_ratios", "out_channels"});

  ExperimentConfig c;
  c.tune.epochs = 30;
  c.tune.milestones = {20};
  c.dataset = j.value("dataset", std::string{});
  c.output_dir = j.value("output_dir", std::string{});
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"));
  else c.schedule = DegradationSchedule::default_local();

  if (j.contains("tokenizer")) {
    const json& t = j.at("tokenizer");
    check_keys(t, "tokenizer",
               {"stage_widths", "blocks_per_stage", "first_kernel", "kernel", "token_dim",
                "stage_stride"});
    if (t.contains("stage_widths"))
      c.tokenizer.stage_widths = t.at("stage_widths").get<std::vector<int>>();
    if (t.contains("blocks_per_stage"))
      c.tokenizer.blocks_per_stage = t.at("blocks_per_stage").get<int>();
    if (t.contains("first_kernel")) c.tokenizer.first_kernel = t.at("first_kernel").get<int>();
    if (t.contains("kernel")) c.tokenizer.kernel = t.at("kernel").get<int>();
    if (t.contains("token_dim")) c.tokenizer.token_dim = t.at("token_dim").get<int>();
    if (t.contains("stage_stride")) c.tokenizer.stage_stride = t.at("stage_stride").get<int>();
  }

  if (j.contains("transformer")) {
    const json& t = j.at("transformer");
    check_keys(t, "transformer",
               {"layers", "heads", "token_dim", "ff_mult", "max_levels", "max_channels",
                "max_prompts", "rotary_base"});
    if (t.contains("layers")) c.transformer.layers = t.at("layers").get<int>();
    if (t.contains("heads")) c.transformer.heads = t.at("heads").get<int>();
    if (t.contains("token_dim")) c.transformer.token_dim = t.at("token_dim").get<int>();
    if (t.contains("ff_mult")) c.transformer.ff_mult = t.at("ff_mult").get<int>();
    if (t.contains("max_levels")) c.transformer.max_levels = t.at("max_levels").get<int>();
    if (t.contains("max_channels"))
      c.transformer.max_channels = t.at("max_channels").get<int>();
    if (t.contains("max_prompts")) c.transformer.max_prompts = t.at("max_prompts").get<int>();
    if (t.contains("rotary_base")) c.transformer.rotary_base = t.at("rotary_base").get<double>();
  }

  if (j.contains("objective")) {
    const json& o = j.at("objective");
    check_keys(o, "objective", {"kind", "period_length", "mask_ratio", "ar_target_next"});
    if (o.contains("kind"))
      c.objective.kind = objective_kind_from_string(o.at("kind").get<std::string>());
    if (o.contains("period_length")) c.objective.period_length = o.at("period_length").get<int>();
    if (o.contains("mask_ratio")) c.objective.mask_ratio = o.at("mask_ratio").get<double>();
    if (o.contains("ar_target_next"))
      c.objective.ar_target_next = o.at("ar_target_next").get<bool>();
  }
  c.objective.schedule = c.schedule;

  if (j.contains("pretrain")) c.pretrain = parse_train(j.at("pretrain"), "pretrain", c.pretrain);
  if (j.contains("tune")) c.tune = parse_train(j.at("tune"), "tune", c.tune);

  if (j.contains("task")) {
    const json& t = j.at("task");
    check_keys(t, "task", {"kind", "output_dim", "prompts", "target"});
    if (t.contains("kind")) c.task.kind = task_kind_from_string(t.at("kind").get<std::string>());
    if (t.contains("output_dim")) c.task.output_dim = t.at("output_dim").get<int>();
    if (t.contains("prompts")) c.task.prompts = t.at("prompts").get<int>();
    if (t.contains("target")) c.task_target = t.at("target").get<std::string>();
  }
  c.out_channels = j.value("out_channels", 0);

  if (j.contains("features")) {
    const json& f = j.at("features");
    check_keys(f, "features",
               {"segment_length", "ssc_threshold", "wamp_threshold", "bands",
                "sampling_rate"});
    if (f.contains("segment_length"))
      c.features.segment_length = f.at("segment_length").get<int>();
    if (f.contains("ssc_threshold")) c.features.ssc_threshold = f.at("ssc_threshold").get<double>();
    if (f.contains("wamp_threshold"))
      c.features.wamp_threshold = f.at("wamp_threshold").get<double>();
    if (f.contains("bands")) {
      c.features.bands.clear();
      for (const auto& b : f.at("bands")) {
        if (!b.is_array() || b.size() != 2)
          throw std::invalid_argument("config: each band must be [lo, hi]");
        c.features.bands.emplace_back(b[0].get<double>(), b[1].get<double>());
      }
    }
    if (f.contains("sampling_rate")) c.features.sampling_rate = f.at("sampling_rate").get<double>();
  }

  if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
  if (j.contains("anomaly_percentile"))
    c.anomaly_percentile = j.at("anomaly_percentile").get<double>();
  if (j.contains("imputation_ratios"))
    c.imputation_ratios = j.at("imputation_ratios").get<std::vector<double>>();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["schedule"] = schedule_json(c.schedule);
  j["tokenizer"] = {{"stage_widths", c.tokenizer.stage_widths},
                    {"blocks_per_stage", c.tokenizer.blocks_per_stage},
                    {"first_kernel", c.tokenizer.first_kernel},
                    {"kernel", c.tokenizer.kernel},
                    {"token_dim", c.tokenizer.token_dim},
                    {"stage_stride", c.tokenizer.stage_stride}};
  j["transformer"] = {{"layers", c.transformer.layers},
                      {"heads", c.transformer.heads},
                      {"token_dim", c.transformer.token_dim},
                      {"ff_mult", c.transformer.ff_mult},
                      {"max_levels", c.transformer.max_levels},
                      {"max_channels", c.transformer.max_channels},
                      {"max_prompts", c.transformer.max_prompts},
                      {"rotary_base", c.transformer.rotary_base}};
  j["objective"] = {{"kind", objective_kind_name(c.objective.kind)},
                    {"period_length", c.objective.period_length},
                    {"mask_ratio", c.objective.mask_ratio},
                    {"ar_target_next", c.objective.ar_target_next}};
  j["pretrain"] = train_json(c.pretrain);
  j["tune"] = train_json(c.tune);
  j["task"] = {{"kind", task_kind_name(c.task.kind)},
               {"output_dim", c.task.output_dim},
               {"prompts", c.task.prompts},
               {"target", c.task_target}};
  j["out_channels"] = c.out_channels;
  json bands = json::array();
  for (const auto& [lo, hi] : c.features.bands) bands.push_back({lo, hi});
  j["features"] = {{"segment_length", c.features.segment_length},
                   {"ssc_threshold", c.features.ssc_threshold},
                   {"wamp_threshold", c.features.wamp_threshold},
                   {"bands", bands},
                   {"sampling_rate", c.features.sampling_rate}};
  j["train_fraction"] = c.train_fraction;
  j["anomaly_percentile"] = c.anomaly_percentile;
  j["imputation_ratios"] = c.imputation_ratios;
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string canon = dump_config(c);
  return sha256_hex(canon.data(), canon.size());
}

}  // namespace nots
