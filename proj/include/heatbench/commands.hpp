#pragma once

// Subcommand implementations: synth, preprocess, train, evaluate, sweep.
// The CLI in tools/ is a thin argument parser over these functions; tests
// call them directly. Every command snapshots the effective config into the
// output directory, and evaluate only reads artifacts train produced.
//
// Output layout under <out>/:
//   config.snapshot.json
//   corpus/                                synth: building CSVs + metadata + holidays
//   preprocessed/stats.json                per-series transforms and frame index
//   preprocessed/report.json               cleaning/interpolation counters per series
//   preprocessed/frames/<series>.csv       standardized feature frames
//   checkpoints/<model>_h<n>_seed<s>.*     manifest + parameter buffer
//   curves/<model>_h<n>_seed<s>.csv        per-epoch train/val loss and wall time
//   evaluation/*.csv, summary.json, resources.json
//   sweep/trials.csv

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatbench/checkpoint.hpp"
#include "heatbench/config.hpp"
#include "heatbench/csv.hpp"
#include "heatbench/data.hpp"
#include "heatbench/errors.hpp"
#include "heatbench/metrics.hpp"
#include "heatbench/models.hpp"
#include "heatbench/resources.hpp"
#include "heatbench/train.hpp"
#include "heatbench/windowing.hpp"

namespace heatbench {

namespace fs = std::filesystem;

inline std::string safe_series_filename(const std::string& series_id) {
  std::string out = series_id;
  for (char& c : out)
    if (c == '#') c = '_';
  return out;
}

inline void write_config_snapshot(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  std::ofstream out(fs::path(config.out_dir) / "config.snapshot.json");
  out << run_config_json(config).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// synth

inline std::string cmd_synth(const RunConfig& config) {
  write_config_snapshot(config);
  SynthResult synth = synthesize_corpus(config.synth);
  const std::string dir = (fs::path(config.out_dir) / "corpus").string();
  write_corpus(dir, synth.series, synth.schema, synth.holidays);
  return dir;
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessResult {
  std::vector<FeatureFrame> frames;  // standardized
  std::map<std::string, SeriesStats> stats;
  std::vector<SeriesReport> reports;
  WeatherSchema schema;
  std::vector<std::string> warnings;

  std::size_t covariate_count() const {
    std::size_t n = 0;
    for (const auto r : frames.at(0).roles)
      if (r == ColumnRole::Covariate) ++n;
    return n;
  }
  std::size_t static_count() const {
    std::size_t n = 0;
    for (const auto r : frames.at(0).roles)
      if (r == ColumnRole::StaticAttr) ++n;
    return n;
  }
};

inline PreprocessResult run_pipeline(const std::vector<RawSeries>& corpus,
                                     const WeatherSchema& schema, const HolidayCalendar& holidays,
                                     const RunConfig& config) {
  PreprocessResult out;
  out.schema = schema;

  std::vector<BuildingMeta> metas;
  for (const auto& s : corpus) metas.push_back(s.meta);
  const auto statics = static_transforms(metas);

  for (const auto& raw : corpus) {
    SeriesReport rep;
    rep.building_id = raw.meta.building_id;
    rep.raw_points = raw.observed_points();

    RawSeries cleaned = remove_outliers_iqr(raw, config.pipeline.iqr_k, &rep);
    std::vector<Segment> segments = split_and_interpolate(cleaned, &rep);

    std::vector<FeatureFrame> frames;
    std::size_t total_points = 0;
    for (const auto& seg : segments) {
      frames.push_back(engineer_features(seg, raw.meta, holidays, schema, &rep));
      total_points += seg.length();
    }
    rep.interpolated_fraction =
        total_points ? static_cast<double>(rep.interpolated_points) / total_points : 0.0;
    rep.interpolation_warning = rep.interpolated_fraction > config.pipeline.max_interpolated_fraction;
    if (rep.interpolation_warning)
      out.warnings.push_back("series " + raw.meta.building_id + ": interpolated fraction " +
                             std::to_string(rep.interpolated_fraction) + " exceeds the ceiling");

    std::vector<const FeatureFrame*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    const HourStamp boundary = series_fit_boundary(ptrs, config.window);
    SeriesStats stats = fit_series_stats(frames, boundary, statics);
    apply_series_stats(frames, stats);

    out.stats[raw.meta.building_id] = std::move(stats);
    out.reports.push_back(rep);
    for (auto& f : frames) out.frames.push_back(std::move(f));
  }
  return out;
}

namespace detail_cmd {

inline const char* role_name(ColumnRole r) {
  switch (r) {
    case ColumnRole::Target: return "target";
    case ColumnRole::Covariate: return "covariate";
    case ColumnRole::StaticAttr: return "static";
  }
  return "?";
}

inline ColumnRole role_from(const std::string& s) {
  if (s == "target") return ColumnRole::Target;
  if (s == "covariate") return ColumnRole::Covariate;
  if (s == "static") return ColumnRole::StaticAttr;
  throw DataError("unknown column role '" + s + "'");
}

}  // namespace detail_cmd

inline void save_preprocessed(const std::string& out_dir, const PreprocessResult& result,
                              const RunConfig& config) {
  const fs::path base = fs::path(out_dir) / "preprocessed";
  fs::create_directories(base / "frames");

  nlohmann::json stats;
  stats["schema"] = result.schema.channels;
  stats["window"] = {{"n_in", config.window.n_in}, {"n_out", config.window.n_out}};
  for (const auto& [building, s] : result.stats) {
    nlohmann::json b;
    b["columns"] = s.names;
    nlohmann::json transforms = nlohmann::json::array();
    for (const auto& t : s.transforms) transforms.push_back({{"offset", t.offset}, {"scale", t.scale}});
    b["transforms"] = transforms;
    stats["buildings"][building] = b;
  }
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : result.frames) {
    nlohmann::json roles = nlohmann::json::array();
    for (const auto r : f.roles) roles.push_back(detail_cmd::role_name(r));
    frames.push_back({{"series_id", f.series_id},
                      {"building", f.building_id},
                      {"start_hour", f.start},
                      {"columns", f.names},
                      {"roles", roles},
                      {"file", "frames/" + safe_series_filename(f.series_id) + ".csv"}});
  }
  stats["frames"] = frames;
  stats["warnings"] = result.warnings;
  {
    std::ofstream out(base / "stats.json");
    out << stats.dump(2) << '\n';
  }

  nlohmann::json report;
  nlohmann::json series = nlohmann::json::array();
  for (const auto& r : result.reports)
    series.push_back({{"building_id", r.building_id},
                      {"raw_points", r.raw_points},
                      {"removed_negative", r.removed_negative},
                      {"removed_outliers", r.removed_outliers},
                      {"interpolated_points", r.interpolated_points},
                      {"interpolated_fraction", r.interpolated_fraction},
                      {"interpolation_warning", r.interpolation_warning},
                      {"segments", r.segments},
                      {"avg_daily_fallback_days", r.avg_daily_fallback_days}});
  report["series"] = series;
  report["warnings"] = result.warnings;
  {
    std::ofstream out(base / "report.json");
    out << report.dump(2) << '\n';
  }

  for (const auto& f : result.frames) {
    csv::Writer w((base / "frames" / (safe_series_filename(f.series_id) + ".csv")).string());
    std::vector<std::string> header{"timestamp"};
    header.insert(header.end(), f.names.begin(), f.names.end());
    header.push_back("interpolated");
    w.row(header);
    for (std::size_t i = 0; i < f.length(); ++i) {
      std::vector<std::string> row{timeutil::format_hour(f.hour_at(i))};
      for (const auto& col : f.cols) row.push_back(csv::format_double(col[i]));
      row.push_back(f.interpolated[i] ? "1" : "0");
      w.row(row);
    }
  }
}

inline PreprocessResult load_preprocessed(const std::string& out_dir) {
  const fs::path base = fs::path(out_dir) / "preprocessed";
  std::ifstream in(base / "stats.json");
  if (!in)
    throw DataError("no preprocessed corpus under '" + out_dir + "' (run `heatbench preprocess` first)");
  nlohmann::json stats = nlohmann::json::parse(in);

  PreprocessResult result;
  result.schema.channels = stats.at("schema").get<std::vector<std::string>>();
  for (const auto& [building, b] : stats.at("buildings").items()) {
    SeriesStats s;
    s.building_id = building;
    s.names = b.at("columns").get<std::vector<std::string>>();
    for (const auto& t : b.at("transforms"))
      s.transforms.push_back({t.at("offset").get<double>(), t.at("scale").get<double>()});
    for (std::size_t c = 0; c < s.names.size(); ++c)
      if (s.names[c] == kColConsumption) s.consumption = s.transforms[c];
    result.stats[building] = std::move(s);
  }
  if (stats.contains("warnings"))
    result.warnings = stats.at("warnings").get<std::vector<std::string>>();

  for (const auto& fj : stats.at("frames")) {
    FeatureFrame f;
    f.series_id = fj.at("series_id").get<std::string>();
    f.building_id = fj.at("building").get<std::string>();
    f.start = fj.at("start_hour").get<HourStamp>();
    f.names = fj.at("columns").get<std::vector<std::string>>();
    for (const auto& r : fj.at("roles")) f.roles.push_back(detail_cmd::role_from(r.get<std::string>()));

    csv::Table t = csv::read_file((base / fj.at("file").get<std::string>()).string());
    f.cols.assign(f.names.size(), {});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      for (std::size_t c = 0; c < f.names.size(); ++c)
        f.cols[c].push_back(csv::parse_cell(t, r, c + 1).value());
      f.interpolated.push_back(t.rows[r][f.names.size() + 1] == "1");
    }
    result.frames.push_back(std::move(f));
  }
  if (result.frames.empty()) throw DataError(out_dir + ": preprocessed corpus has no frames");
  return result;
}

inline PreprocessResult cmd_preprocess(const RunConfig& config) {
  write_config_snapshot(config);

  std::vector<RawSeries> corpus;
  WeatherSchema schema;
  HolidayCalendar holidays;
  if (config.use_synth()) {
    SynthResult synth = synthesize_corpus(config.synth);
    corpus = std::move(synth.series);
    schema = synth.schema;
    holidays = synth.holidays;
  } else {
    schema.channels = config.weather_channels;
    if (schema.channels.empty()) schema = WeatherSchema::meteostat_default();
    corpus = load_corpus(config.data_dir, schema);
    const std::string holi = config.holidays_path.empty()
                                 ? (fs::path(config.data_dir) / "holidays.csv").string()
                                 : config.holidays_path;
    holidays = load_holidays(holi);
  }

  PreprocessResult result = run_pipeline(corpus, schema, holidays, config);
  save_preprocessed(config.out_dir, result, config);
  return result;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  std::vector<std::string> checkpoint_bases;  // one per successful seed
  std::vector<std::string> failures;          // "seed N: error"
};

inline std::string checkpoint_base(const RunConfig& config, ModelKind kind, std::size_t n_out,
                                   std::uint64_t seed) {
  return (fs::path(config.out_dir) / "checkpoints" /
          (to_string(kind) + "_h" + std::to_string(n_out) + "_seed" + std::to_string(seed)))
      .string();
}

inline TrainOutcome cmd_train(const RunConfig& config) {
  config.validate();
  if (config.model == ModelKind::Naive)
    throw UsageError("the naive baseline has nothing to train; it is always present in evaluate");
  write_config_snapshot(config);
  PreprocessResult data = load_preprocessed(config.out_dir);

  const ModelSpec spec = config.model_spec(data.covariate_count(), data.static_count());
  const Layout layout = spec.kind == ModelKind::Fcn ? Layout::Flat : Layout::Sequential;
  SplitWindows split = build_split_datasets(data.frames, config.window, layout);
  if (split.train.rows() == 0) throw DataError("no training windows; corpus too short");

  fs::create_directories(fs::path(config.out_dir) / "checkpoints");
  fs::create_directories(fs::path(config.out_dir) / "curves");

  TrainOutcome outcome;
  for (std::uint64_t seed : config.seeds) {
    TrainConfig tcfg = config.train;
    tcfg.seed = seed;
    try {
      auto model = make_forecaster(spec, seed);
      TrainedModel trained = train(*model, split.train, split.val, tcfg);

      const std::string base = checkpoint_base(config, spec.kind, spec.n_out, seed);
      save_checkpoint(base, trained);

      csv::Writer curve((fs::path(config.out_dir) / "curves" /
                         (to_string(spec.kind) + "_h" + std::to_string(spec.n_out) + "_seed" +
                          std::to_string(seed) + ".csv"))
                            .string());
      curve.row({"epoch", "train_loss", "val_loss", "seconds"});
      for (std::size_t e = 0; e < trained.curve.size(); ++e)
        curve.row({std::to_string(e), csv::format_double(trained.curve[e].train_loss),
                   csv::format_double(trained.curve[e].val_loss),
                   csv::format_double(trained.curve[e].seconds)});

      outcome.checkpoint_bases.push_back(base);
    } catch (const TrainError& e) {
      outcome.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  if (outcome.checkpoint_bases.empty())
    throw TrainError("all seed runs failed: " +
                     (outcome.failures.empty() ? "no seeds" : outcome.failures.front()));
  return outcome;
}

// ---------------------------------------------------------------------------
// evaluate

struct ModelEvaluation {
  std::string model;
  std::vector<std::uint64_t> seeds;
  std::vector<EvaluationReport> per_seed;
  OverallMetrics mean;  // metric means across seeds
  CiResult rmse_ci, mae_ci;
  std::vector<double> per_step_mean;  // per-step RMSE averaged across seeds
  std::vector<ResourceReport> resources;
};

struct EvaluateOutcome {
  std::vector<ModelEvaluation> models;  // naive row first
};

namespace detail_cmd {

inline FeatureConfig feature_config_of(const ModelSpec& spec) {
  if (spec.n_c == 0 && spec.n_s == 0) return FeatureConfig::PastOnly;
  if (spec.n_s == 0) return FeatureConfig::NoBuilding;
  return FeatureConfig::All;
}

inline ModelEvaluation summarize(const std::string& name,
                                 const std::vector<std::uint64_t>& seeds,
                                 std::vector<EvaluationReport> reports) {
  ModelEvaluation ev;
  ev.model = name;
  ev.seeds = seeds;
  std::vector<double> rmses, maes;
  for (const auto& r : reports) {
    ev.mean.mse += r.overall.mse;
    ev.mean.mae += r.overall.mae;
    rmses.push_back(r.overall.rmse);
    maes.push_back(r.overall.mae);
  }
  const double n = static_cast<double>(reports.size());
  // Pool squared errors across seeds (equal counts), then derive RMSE and
  // nRMSE from the pooled MSE so the summary row keeps the metric
  // identities RMSE^2 == MSE and nRMSE * range == RMSE exactly.
  ev.mean.mse /= n;
  ev.mean.mae /= n;
  ev.mean.rmse = std::sqrt(ev.mean.mse);
  const double range = reports.front().overall.rmse / reports.front().overall.nrmse;
  ev.mean.nrmse = ev.mean.rmse / range;
  ev.rmse_ci = seed_ci(rmses);
  ev.mae_ci = seed_ci(maes);
  ev.per_step_mean.assign(reports.front().per_step.size(), 0.0);
  for (const auto& r : reports)
    for (std::size_t t = 0; t < r.per_step.size(); ++t) ev.per_step_mean[t] += r.per_step[t] / n;
  ev.per_seed = std::move(reports);
  return ev;
}

}  // namespace detail_cmd

inline EvaluateOutcome cmd_evaluate(const RunConfig& config) {
  write_config_snapshot(config);
  PreprocessResult data = load_preprocessed(config.out_dir);

  // discover checkpoints
  const fs::path ckpt_dir = fs::path(config.out_dir) / "checkpoints";
  std::vector<std::string> bases;
  if (fs::exists(ckpt_dir))
    for (const auto& entry : fs::directory_iterator(ckpt_dir))
      if (entry.path().extension() == ".json")
        bases.push_back((ckpt_dir / entry.path().stem()).string());
  std::sort(bases.begin(), bases.end());

  // group checkpoints by model kind
  std::map<std::string, std::vector<Checkpoint>> by_model;
  for (const auto& base : bases) {
    Checkpoint ckpt = load_checkpoint(base);
    if (ckpt.spec.n_out != config.window.n_out) continue;  // other horizon's artifacts
    by_model[to_string(ckpt.spec.kind)].push_back(std::move(ckpt));
  }

  // One test dataset per distinct window geometry. The naive baseline runs
  // on the first evaluated geometry (or the config window when evaluating
  // without checkpoints) so its rows are directly comparable.
  struct DsKey {
    Layout layout;
    std::size_t n_in, n_out;
    FeatureConfig fc;
    bool operator<(const DsKey& o) const {
      return std::tie(layout, n_in, n_out, fc) < std::tie(o.layout, o.n_in, o.n_out, o.fc);
    }
  };
  std::map<DsKey, SplitWindows> datasets;
  auto dataset_for = [&](const DsKey& key) -> SplitWindows& {
    auto it = datasets.find(key);
    if (it == datasets.end()) {
      WindowSpec w;
      w.n_in = key.n_in;
      w.n_out = key.n_out;
      w.feature_config = key.fc;
      it = datasets.emplace(key, build_split_datasets(data.frames, w, key.layout)).first;
    }
    return it->second;
  };

  EvaluateOutcome outcome;
  const WindowedDataset* naive_ds = nullptr;
  std::size_t naive_n_in = config.window.n_in;

  for (auto& [name, ckpts] : by_model) {
    std::vector<EvaluationReport> reports;
    std::vector<std::uint64_t> seeds;
    std::vector<ResourceReport> resources;
    for (auto& ckpt : ckpts) {
      const DsKey key{ckpt.spec.kind == ModelKind::Fcn ? Layout::Flat : Layout::Sequential,
                      ckpt.spec.n_in, ckpt.spec.n_out, detail_cmd::feature_config_of(ckpt.spec)};
      SplitWindows& split = dataset_for(key);
      if (split.test.rows() == 0) throw DataError("no test windows for model " + name);
      if (!naive_ds) {
        naive_ds = &split.test;
        naive_n_in = ckpt.spec.n_in;
      }
      auto model = restore_model(ckpt);
      ForecastSet fc = make_forecasts(*model, split.test, data.stats);
      reports.push_back(build_evaluation_report(name, fc));
      seeds.push_back(ckpt.seed);

      TrainedModel meta;
      meta.spec = ckpt.spec;
      meta.seed = ckpt.seed;
      meta.curve.resize(ckpt.epochs);
      meta.total_seconds = ckpt.total_seconds;
      resources.push_back(
          build_resource_report(meta, config.device, config.carbon_intensity_g_per_kwh));
    }
    ModelEvaluation ev = detail_cmd::summarize(name, seeds, std::move(reports));
    ev.resources = std::move(resources);
    outcome.models.push_back(std::move(ev));
  }

  // naive baseline row, always present
  {
    if (!naive_ds) {
      const DsKey key{Layout::Sequential, std::max(config.window.n_in, config.window.n_out),
                      config.window.n_out, config.window.feature_config};
      SplitWindows& split = dataset_for(key);
      if (split.test.rows() == 0) throw DataError("no test windows for the naive baseline");
      naive_ds = &split.test;
      naive_n_in = key.n_in;
    }
    ModelSpec nspec;
    nspec.kind = ModelKind::Naive;
    nspec.n_in = naive_n_in;
    nspec.n_out = config.window.n_out;
    NaiveForecaster naive(nspec);
    ForecastSet fc = make_forecasts(naive, *naive_ds, data.stats);
    ModelEvaluation ev =
        detail_cmd::summarize("naive", {0}, {build_evaluation_report("naive", fc)});
    outcome.models.insert(outcome.models.begin(), std::move(ev));
  }

  // ---- write the report set
  const fs::path eval_dir = fs::path(config.out_dir) / "evaluation";
  fs::create_directories(eval_dir);

  {
    csv::Writer w((eval_dir / "summary.csv").string());
    w.row({"model", "nrmse", "rmse", "mse", "mae", "seeds"});
    for (const auto& ev : outcome.models)
      w.row({ev.model, csv::format_double(ev.mean.nrmse), csv::format_double(ev.mean.rmse),
             csv::format_double(ev.mean.mse), csv::format_double(ev.mean.mae),
             std::to_string(ev.per_seed.size())});
  }
  {
    csv::Writer w((eval_dir / "per_seed.csv").string());
    w.row({"model", "seed", "nrmse", "rmse", "mse", "mae"});
    for (const auto& ev : outcome.models)
      for (std::size_t i = 0; i < ev.per_seed.size(); ++i)
        w.row({ev.model, std::to_string(ev.seeds[i]),
               csv::format_double(ev.per_seed[i].overall.nrmse),
               csv::format_double(ev.per_seed[i].overall.rmse),
               csv::format_double(ev.per_seed[i].overall.mse),
               csv::format_double(ev.per_seed[i].overall.mae)});
  }
  {
    csv::Writer w((eval_dir / "per_seed_ci.csv").string());
    w.row({"model", "metric", "mean", "ci95_half_width", "n_seeds"});
    for (const auto& ev : outcome.models) {
      w.row({ev.model, "rmse", csv::format_double(ev.rmse_ci.mean),
             ev.rmse_ci.defined ? csv::format_double(ev.rmse_ci.half_width) : "",
             std::to_string(ev.rmse_ci.n)});
      w.row({ev.model, "mae", csv::format_double(ev.mae_ci.mean),
             ev.mae_ci.defined ? csv::format_double(ev.mae_ci.half_width) : "",
             std::to_string(ev.mae_ci.n)});
    }
  }
  {
    csv::Writer w((eval_dir / "per_step.csv").string());
    w.row({"model", "step", "rmse"});
    for (const auto& ev : outcome.models)
      for (std::size_t t = 0; t < ev.per_step_mean.size(); ++t)
        w.row({ev.model, std::to_string(t + 1), csv::format_double(ev.per_step_mean[t])});
  }
  {
    csv::Writer w((eval_dir / "per_building_nrse.csv").string());
    w.row({"model", "seed", "series_id", "nrse"});
    for (const auto& ev : outcome.models)
      for (std::size_t i = 0; i < ev.per_seed.size(); ++i)
        for (const auto& [series, values] : ev.per_seed[i].nrse)
          for (double v : values)
            w.row({ev.model, std::to_string(ev.seeds[i]), series, csv::format_double(v)});
  }
  {
    nlohmann::json j;
    for (const auto& ev : outcome.models) {
      nlohmann::json m;
      m["model"] = ev.model;
      m["seeds"] = ev.seeds;
      m["mean"] = {{"mse", ev.mean.mse},
                   {"rmse", ev.mean.rmse},
                   {"mae", ev.mean.mae},
                   {"nrmse", ev.mean.nrmse}};
      m["rmse_ci95"] = {{"mean", ev.rmse_ci.mean},
                        {"half_width", ev.rmse_ci.half_width},
                        {"defined", ev.rmse_ci.defined}};
      m["mae_ci95"] = {{"mean", ev.mae_ci.mean},
                       {"half_width", ev.mae_ci.half_width},
                       {"defined", ev.mae_ci.defined}};
      m["per_step_rmse"] = ev.per_step_mean;
      j["models"].push_back(m);
    }
    std::ofstream out(eval_dir / "summary.json");
    out << j.dump(2) << '\n';
  }
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& ev : outcome.models)
      for (const auto& r : ev.resources)
        j.push_back({{"model", r.model},
                     {"seed", r.seed},
                     {"trainable_params", r.trainable_params},
                     {"epochs", r.epochs},
                     {"runtime_per_epoch_min", r.runtime_per_epoch_min},
                     {"total_runtime_min", r.total_runtime_min},
                     {"device", {{"name", r.device.name}, {"avg_power_watts", r.device.avg_power_watts}}},
                     {"carbon_intensity_g_per_kwh", r.carbon_intensity_g_per_kwh},
                     {"energy_kwh", r.energy_kwh},
                     {"emissions_g", r.emissions_g}});
    std::ofstream out(eval_dir / "resources.json");
    out << j.dump(2) << '\n';
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// sweep

inline std::vector<TrialResult> cmd_sweep(const RunConfig& config) {
  config.validate();
  write_config_snapshot(config);
  PreprocessResult data = load_preprocessed(config.out_dir);

  SweepContext ctx;
  ctx.frames = &data.frames;
  ctx.stats = &data.stats;
  ctx.base_spec = config.model_spec(data.covariate_count(), data.static_count());
  ctx.base_window = config.window;
  ctx.base_train = config.train;

  std::vector<TrialResult> results = sweep(ctx, config.sweep);

  const fs::path dir = fs::path(config.out_dir) / "sweep";
  fs::create_directories(dir);
  csv::Writer w((dir / "trials.csv").string());
  w.row({"rank", "trial", "ok", "model", "hidden", "heads", "dropout", "n_in", "n_future",
         "batch_size", "epochs", "seed", "val_rmse", "val_mae", "seconds", "error"});
  for (std::size_t rank = 0; rank < results.size(); ++rank) {
    const auto& r = results[rank];
    w.row({std::to_string(rank), std::to_string(r.index), r.ok ? "1" : "0",
           to_string(r.spec.kind), std::to_string(r.spec.hidden), std::to_string(r.spec.heads),
           csv::format_double(r.spec.dropout), std::to_string(r.window.n_in),
           std::to_string(r.window.n_future), std::to_string(r.config.batch_size),
           std::to_string(r.config.epochs), std::to_string(r.config.seed),
           r.ok ? csv::format_double(r.val_rmse) : "", r.ok ? csv::format_double(r.val_mae) : "",
           csv::format_double(r.seconds), r.error});
  }
  return results;
}

}  // namespace heatbench
