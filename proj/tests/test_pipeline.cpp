#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "heatbench/commands.hpp"

using namespace heatbench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig small_config(const std::string& out) {
  RunConfig c;
  c.synth.n_buildings = 3;
  c.synth.days = 40;
  c.synth.seed = 5;
  c.window.n_in = 24;
  c.window.n_out = 3;
  c.window.feature_config = FeatureConfig::All;
  c.model = ModelKind::Fcn;
  c.hidden = 16;
  c.dropout = 0.0;
  c.train.batch_size = 64;
  c.train.epochs = 2;
  c.seeds = {1};
  c.out_dir = out;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("preprocess reports every series and the injected long gap") {
  TempDir dir("hb_pipe_preprocess");
  RunConfig config = small_config(dir.path.string());
  config.synth.n_buildings = 5;
  PreprocessResult result = cmd_preprocess(config);

  CHECK(result.reports.size() == 5);
  // building 0 carries the 30-hour gap: exactly one extra segment
  std::size_t total_segments = 0;
  for (const auto& r : result.reports) {
    total_segments += r.segments;
    if (r.building_id == "B0") CHECK(r.segments == 2);
  }
  CHECK(total_segments == 6);
  CHECK(result.frames.size() == 6);

  // artifacts exist
  CHECK(fs::exists(dir.path / "preprocessed" / "stats.json"));
  CHECK(fs::exists(dir.path / "preprocessed" / "report.json"));
  CHECK(fs::exists(dir.path / "config.snapshot.json"));

  // standardized training range has mean ~0 / std ~1 per building
  for (const auto& [building, stats] : result.stats) {
    CHECK(stats.consumption.scale > 0.0);
  }
}

TEST_CASE("preprocess output round-trips through the on-disk format") {
  TempDir dir("hb_pipe_roundtrip");
  RunConfig config = small_config(dir.path.string());
  PreprocessResult a = cmd_preprocess(config);
  PreprocessResult b = load_preprocessed(config.out_dir);

  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    REQUIRE(a.frames[i].series_id == b.frames[i].series_id);
    REQUIRE(a.frames[i].length() == b.frames[i].length());
    for (std::size_t c = 0; c < a.frames[i].cols.size(); ++c)
      for (std::size_t t = 0; t < a.frames[i].length(); ++t)
        CHECK(a.frames[i].cols[c][t] == b.frames[i].cols[c][t]);  // %.17g round trip
  }
  for (const auto& [k, s] : a.stats) {
    CHECK(b.stats.at(k).consumption.offset == s.consumption.offset);
    CHECK(b.stats.at(k).consumption.scale == s.consumption.scale);
  }
}

TEST_CASE("re-running the cleaning pipeline on its own output changes nothing") {
  TempDir dir("hb_pipe_idem");
  RunConfig config = small_config(dir.path.string());
  config.synth.n_buildings = 5;
  config.synth.days = 120;
  config.synth.seed = 42;

  SynthResult synth = synthesize_corpus(config.synth);
  PreprocessResult first = run_pipeline(synth.series, synth.schema, synth.holidays, config);

  // rebuild a raw corpus from the cleaned frames (de-standardized)
  std::vector<RawSeries> second_corpus;
  std::map<std::string, const RawSeries*> raw_by_id;
  for (const auto& s : synth.series) raw_by_id[s.meta.building_id] = &s;
  std::map<std::string, std::vector<const FeatureFrame*>> by_building;
  for (const auto& f : first.frames) by_building[f.building_id].push_back(&f);

  for (const auto& [building, frames] : by_building) {
    const SeriesStats& stats = first.stats.at(building);
    for (const auto* f : frames) {
      RawSeries rs;
      rs.meta = raw_by_id.at(building)->meta;
      rs.meta.building_id = safe_series_filename(f->series_id);
      rs.start = f->start;
      const std::size_t ci = f->col_index(kColConsumption);
      for (std::size_t t = 0; t < f->length(); ++t)
        rs.consumption.push_back(stats.transforms[ci].invert(f->cols[ci][t]));
      for (std::size_t w = 0; w < synth.schema.channels.size(); ++w) {
        const std::size_t wc = f->col_index(synth.schema.channels[w]);
        rs.weather.emplace_back();
        for (std::size_t t = 0; t < f->length(); ++t)
          rs.weather[w].push_back(stats.transforms[wc].invert(f->cols[wc][t]));
      }
      second_corpus.push_back(std::move(rs));
    }
  }

  PreprocessResult second = run_pipeline(second_corpus, synth.schema, synth.holidays, config);
  std::size_t removed = 0, interpolated = 0, splits = 0;
  for (const auto& r : second.reports) {
    removed += r.removed_outliers + r.removed_negative;
    interpolated += r.interpolated_points;
    splits += r.segments;
  }
  CHECK(removed == 0);
  CHECK(interpolated == 0);
  CHECK(splits == second_corpus.size());  // no further splitting
}

TEST_CASE("train emits one checkpoint and curve per seed, restartable evaluate") {
  TempDir dir("hb_pipe_train");
  RunConfig config = small_config(dir.path.string());
  config.seeds = {1, 2, 3};
  cmd_preprocess(config);
  TrainOutcome outcome = cmd_train(config);
  REQUIRE(outcome.checkpoint_bases.size() == 3);
  CHECK(outcome.failures.empty());
  for (std::uint64_t seed : config.seeds) {
    CHECK(fs::exists(dir.path / "checkpoints" / ("fcn_h3_seed" + std::to_string(seed) + ".json")));
    CHECK(fs::exists(dir.path / "checkpoints" / ("fcn_h3_seed" + std::to_string(seed) + ".bin")));
    CHECK(fs::exists(dir.path / "curves" / ("fcn_h3_seed" + std::to_string(seed) + ".csv")));
  }

  // checkpoints restore to the exact trained forward function
  Checkpoint ckpt = load_checkpoint(outcome.checkpoint_bases[0]);
  CHECK(ckpt.spec.kind == ModelKind::Fcn);
  CHECK(ckpt.spec.n_out == 3);
  auto model = restore_model(ckpt);
  CHECK(model->parameter_count() == count_parameters(ckpt.spec));

  EvaluateOutcome eval = cmd_evaluate(config);
  REQUIRE(eval.models.size() == 2);
  CHECK(eval.models[0].model == "naive");
  CHECK(eval.models[1].model == "fcn");
  CHECK(eval.models[1].per_seed.size() == 3);

  // metric identities on the emitted summary
  for (const auto& ev : eval.models) {
    CHECK(std::abs(ev.mean.rmse * ev.mean.rmse - ev.mean.mse) <= 1e-9 * ev.mean.mse);
    CHECK(ev.mean.mae <= ev.mean.rmse);
  }

  // per-step file: exactly n_out rows per model
  csv::Table per_step = csv::read_file((dir.path / "evaluation" / "per_step.csv").string());
  std::map<std::string, std::size_t> rows_per_model;
  for (const auto& row : per_step.rows) rows_per_model[row[0]]++;
  CHECK(rows_per_model.at("naive") == 3);
  CHECK(rows_per_model.at("fcn") == 3);

  CHECK(fs::exists(dir.path / "evaluation" / "summary.csv"));
  CHECK(fs::exists(dir.path / "evaluation" / "per_seed_ci.csv"));
  CHECK(fs::exists(dir.path / "evaluation" / "per_building_nrse.csv"));
  CHECK(fs::exists(dir.path / "evaluation" / "resources.json"));
  CHECK(fs::exists(dir.path / "evaluation" / "summary.json"));
}

TEST_CASE("identical config reruns give bitwise-identical curves") {
  TempDir dir("hb_pipe_dup");
  RunConfig config = small_config(dir.path.string());
  cmd_preprocess(config);

  // the loss columns are the determinism contract; the wall-clock column is
  // a measurement and may differ between runs
  auto losses = [&] {
    csv::Table t = csv::read_file((dir.path / "curves" / "fcn_h3_seed1.csv").string());
    std::string out;
    for (const auto& row : t.rows) out += row[0] + "," + row[1] + "," + row[2] + "\n";
    return out;
  };
  cmd_train(config);
  const std::string curve1 = losses();
  cmd_train(config);
  const std::string curve2 = losses();
  CHECK(curve1 == curve2);
}

TEST_CASE("the horizon flag controls emitted target widths") {
  TempDir dir("hb_pipe_horizon");
  RunConfig config = small_config(dir.path.string());
  config.window.n_out = 24;
  config.train.epochs = 1;
  cmd_preprocess(config);
  TrainOutcome outcome = cmd_train(config);
  Checkpoint ckpt = load_checkpoint(outcome.checkpoint_bases[0]);
  CHECK(ckpt.spec.n_out == 24);

  PreprocessResult data = load_preprocessed(config.out_dir);
  SplitWindows split = build_split_datasets(data.frames, config.window, Layout::Flat);
  CHECK(split.train.n_out == 24);
  CHECK(split.train.y_data.size() == split.train.rows() * 24);
}

TEST_CASE("evaluate requires a preprocessed corpus") {
  TempDir dir("hb_pipe_missing");
  RunConfig config = small_config(dir.path.string());
  CHECK_THROWS_AS(cmd_evaluate(config), DataError);
  CHECK_THROWS_AS(cmd_train(config), DataError);
}

TEST_CASE("training the naive baseline is rejected as a usage error") {
  TempDir dir("hb_pipe_naive");
  RunConfig config = small_config(dir.path.string());
  config.model = ModelKind::Naive;
  CHECK_THROWS_AS(cmd_train(config), UsageError);
}

TEST_CASE("sweep writes a ranked trial table") {
  TempDir dir("hb_pipe_sweep");
  RunConfig config = small_config(dir.path.string());
  config.synth.n_buildings = 1;
  config.window.feature_config = FeatureConfig::PastOnly;
  config.train.epochs = 1;
  config.sweep.axes.dropout = {0.0, 0.1};
  config.sweep.axes.batch_size = {32, 64};
  cmd_preprocess(config);
  auto results = cmd_sweep(config);
  REQUIRE(results.size() == 4);
  csv::Table trials = csv::read_file((dir.path / "sweep" / "trials.csv").string());
  CHECK(trials.rows.size() == 4);
}

TEST_CASE("config JSON round-trips through parse and dump") {
  RunConfig config = small_config("/tmp/hb_out");
  config.sweep.axes.hidden = {8, 16};
  config.train.early_stop = EarlyStop{3, 0.001};
  nlohmann::json j = run_config_json(config);
  RunConfig back = parse_run_config(j);
  CHECK(back.synth.n_buildings == config.synth.n_buildings);
  CHECK(back.window.n_out == config.window.n_out);
  CHECK(back.model == config.model);
  CHECK(back.train.early_stop.has_value());
  CHECK(back.train.early_stop->patience == 3);
  CHECK(back.sweep.axes.hidden == config.sweep.axes.hidden);
  CHECK(back.out_dir == config.out_dir);

  nlohmann::json bad = j;
  bad["modle"] = {{"kind", "fcn"}};
  CHECK_THROWS_AS(parse_run_config(bad), UsageError);
}
