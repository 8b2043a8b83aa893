#pragma once

// Run configuration: one JSON document drives every subcommand. CLI flags
// override config keys (flag > config > default); the effective config is
// snapshotted into the output directory so a run can be reproduced from its
// own artifacts.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatbench/checkpoint.hpp"
#include "heatbench/data.hpp"
#include "heatbench/errors.hpp"
#include "heatbench/resources.hpp"
#include "heatbench/train.hpp"
#include "heatbench/windowing.hpp"

namespace heatbench {

struct RunConfig {
  // data source: a corpus directory, or the synthetic generator when empty
  std::string data_dir;
  SynthSpec synth;
  std::vector<std::string> weather_channels;  // empty = synth schema / meteostat default
  std::string holidays_path;                  // empty = <data_dir>/holidays.csv

  PipelineOptions pipeline;
  WindowSpec window;

  ModelKind model = ModelKind::Fcn;
  std::size_t hidden = 32;
  std::size_t heads = 4;
  std::size_t blocks = 0;  // 0 = per-kind default (xlstm 1 pair, te 4 blocks)
  double dropout = 0.05;
  std::size_t conv_kernel = 4;

  TrainConfig train;
  std::vector<std::uint64_t> seeds{1};

  DeviceProfile device;
  double carbon_intensity_g_per_kwh = kDefaultCarbonIntensity;

  SweepSpec sweep;

  std::string out_dir = "runs/out";

  bool use_synth() const { return data_dir.empty(); }

  std::size_t effective_blocks() const {
    if (blocks > 0) return blocks;
    return model == ModelKind::Te ? 4 : 1;
  }

  ModelSpec model_spec(std::size_t n_c, std::size_t n_s) const {
    ModelSpec s;
    s.kind = model;
    s.n_in = window.n_in;
    s.n_out = window.n_out;
    s.hidden = hidden;
    s.heads = heads;
    s.blocks = effective_blocks();
    s.dropout = dropout;
    s.conv_kernel = conv_kernel;
    if (window.feature_config == FeatureConfig::PastOnly) {
      s.n_c = 0;
      s.n_s = 0;
    } else {
      s.n_c = n_c;
      s.n_s = window.feature_config == FeatureConfig::All ? n_s : 0;
    }
    if (s.kind == ModelKind::Naive) s.n_in = std::max(s.n_in, s.n_out);
    return s;
  }

  void validate() const {
    if (seeds.empty()) throw UsageError("config: seeds must be non-empty");
    window.validate();
    train.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Unknown keys are rejected to catch typos early.

namespace detail_config {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw UsageError("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail_config

inline FeatureConfig feature_config_from(int v) {
  switch (v) {
    case 1: return FeatureConfig::PastOnly;
    case 2: return FeatureConfig::NoBuilding;
    case 3: return FeatureConfig::All;
  }
  throw UsageError("feature-config must be 1, 2 or 3");
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  detail_config::check_keys(j,
                            {"data", "pipeline", "window", "model", "train", "seeds",
                             "device_profile", "carbon_intensity_g_per_kwh", "sweep", "out"},
                            "top level");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail_config::check_keys(d, {"source", "synth", "weather_schema", "holidays"}, "data");
    const std::string source = d.value("source", "synth");
    if (source != "synth") c.data_dir = source;
    if (d.contains("synth")) {
      const auto& s = d.at("synth");
      detail_config::check_keys(s, {"buildings", "days", "seed", "weather_channels"}, "data.synth");
      c.synth.n_buildings = s.value("buildings", c.synth.n_buildings);
      c.synth.days = s.value("days", c.synth.days);
      c.synth.seed = s.value("seed", c.synth.seed);
      c.synth.weather_channels = s.value("weather_channels", c.synth.weather_channels);
    }
    if (d.contains("weather_schema"))
      c.weather_channels = d.at("weather_schema").get<std::vector<std::string>>();
    c.holidays_path = d.value("holidays", "");
  }

  if (j.contains("pipeline")) {
    const auto& p = j.at("pipeline");
    detail_config::check_keys(p, {"iqr_k", "max_interpolated_fraction"}, "pipeline");
    c.pipeline.iqr_k = p.value("iqr_k", c.pipeline.iqr_k);
    c.pipeline.max_interpolated_fraction =
        p.value("max_interpolated_fraction", c.pipeline.max_interpolated_fraction);
  }

  if (j.contains("window")) {
    const auto& w = j.at("window");
    detail_config::check_keys(w, {"n_in", "n_out", "n_future", "feature_config"}, "window");
    c.window.n_in = w.value("n_in", c.window.n_in);
    c.window.n_out = w.value("n_out", c.window.n_out);
    c.window.n_future = w.value("n_future", c.window.n_future);
    if (w.contains("feature_config"))
      c.window.feature_config = feature_config_from(w.at("feature_config").get<int>());
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail_config::check_keys(m, {"kind", "hidden", "heads", "blocks", "dropout", "conv_kernel"},
                              "model");
    if (m.contains("kind")) c.model = model_kind_from(m.at("kind").get<std::string>());
    c.hidden = m.value("hidden", c.hidden);
    c.heads = m.value("heads", c.heads);
    c.blocks = m.value("blocks", c.blocks);
    c.dropout = m.value("dropout", c.dropout);
    c.conv_kernel = m.value("conv_kernel", c.conv_kernel);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail_config::check_keys(
        t, {"batch_size", "epochs", "learning_rate", "shuffle", "early_stop"}, "train");
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.shuffle_train = t.value("shuffle", c.train.shuffle_train);
    if (t.contains("early_stop") && !t.at("early_stop").is_null()) {
      const auto& e = t.at("early_stop");
      detail_config::check_keys(e, {"patience", "min_delta"}, "train.early_stop");
      EarlyStop es;
      es.patience = e.value("patience", es.patience);
      es.min_delta = e.value("min_delta", es.min_delta);
      c.train.early_stop = es;
    }
  }

  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  if (j.contains("device_profile")) {
    const auto& d = j.at("device_profile");
    detail_config::check_keys(d, {"name", "avg_power_watts"}, "device_profile");
    c.device.name = d.value("name", c.device.name);
    c.device.avg_power_watts = d.value("avg_power_watts", c.device.avg_power_watts);
  }
  c.carbon_intensity_g_per_kwh = j.value("carbon_intensity_g_per_kwh", c.carbon_intensity_g_per_kwh);

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail_config::check_keys(s, {"mode", "budget", "master_seed", "axes"}, "sweep");
    const std::string mode = s.value("mode", "grid");
    if (mode == "grid")
      c.sweep.mode = SweepSpec::Mode::Grid;
    else if (mode == "random")
      c.sweep.mode = SweepSpec::Mode::Random;
    else
      throw UsageError("sweep.mode must be 'grid' or 'random'");
    c.sweep.budget = s.value("budget", c.sweep.budget);
    c.sweep.master_seed = s.value("master_seed", c.sweep.master_seed);
    if (s.contains("axes")) {
      const auto& a = s.at("axes");
      detail_config::check_keys(
          a, {"batch_size", "epochs", "hidden", "heads", "n_in", "n_future", "dropout"},
          "sweep.axes");
      auto get_sz = [&a](const char* k) {
        return a.contains(k) ? a.at(k).get<std::vector<std::size_t>>() : std::vector<std::size_t>{};
      };
      c.sweep.axes.batch_size = get_sz("batch_size");
      c.sweep.axes.epochs = get_sz("epochs");
      c.sweep.axes.hidden = get_sz("hidden");
      c.sweep.axes.heads = get_sz("heads");
      c.sweep.axes.n_in = get_sz("n_in");
      c.sweep.axes.n_future = get_sz("n_future");
      if (a.contains("dropout")) c.sweep.axes.dropout = a.at("dropout").get<std::vector<double>>();
    }
  }

  c.out_dir = j.value("out", c.out_dir);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  return parse_run_config(j);
}

inline nlohmann::json run_config_json(const RunConfig& c) {
  nlohmann::json j;
  j["data"]["source"] = c.use_synth() ? "synth" : c.data_dir;
  j["data"]["synth"] = {{"buildings", c.synth.n_buildings},
                        {"days", c.synth.days},
                        {"seed", c.synth.seed},
                        {"weather_channels", c.synth.weather_channels}};
  if (!c.weather_channels.empty()) j["data"]["weather_schema"] = c.weather_channels;
  if (!c.holidays_path.empty()) j["data"]["holidays"] = c.holidays_path;
  j["pipeline"] = {{"iqr_k", c.pipeline.iqr_k},
                   {"max_interpolated_fraction", c.pipeline.max_interpolated_fraction}};
  j["window"] = {{"n_in", c.window.n_in},
                 {"n_out", c.window.n_out},
                 {"n_future", c.window.n_future},
                 {"feature_config", static_cast<int>(c.window.feature_config)}};
  j["model"] = {{"kind", to_string(c.model)}, {"hidden", c.hidden},       {"heads", c.heads},
                {"blocks", c.blocks},         {"dropout", c.dropout},     {"conv_kernel", c.conv_kernel}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"shuffle", c.train.shuffle_train}};
  if (c.train.early_stop)
    j["train"]["early_stop"] = {{"patience", c.train.early_stop->patience},
                                {"min_delta", c.train.early_stop->min_delta}};
  else
    j["train"]["early_stop"] = nullptr;
  j["seeds"] = c.seeds;
  j["device_profile"] = {{"name", c.device.name}, {"avg_power_watts", c.device.avg_power_watts}};
  j["carbon_intensity_g_per_kwh"] = c.carbon_intensity_g_per_kwh;
  j["sweep"] = {{"mode", c.sweep.mode == SweepSpec::Mode::Grid ? "grid" : "random"},
                {"budget", c.sweep.budget},
                {"master_seed", c.sweep.master_seed},
                {"axes",
                 {{"batch_size", c.sweep.axes.batch_size},
                  {"epochs", c.sweep.axes.epochs},
                  {"hidden", c.sweep.axes.hidden},
                  {"heads", c.sweep.axes.heads},
                  {"n_in", c.sweep.axes.n_in},
                  {"n_future", c.sweep.axes.n_future},
                  {"dropout", c.sweep.axes.dropout}}}};
  j["out"] = c.out_dir;
  return j;
}

}  // namespace heatbench
