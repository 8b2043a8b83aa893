#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "heatbench/train.hpp"
#include "testutil.hpp"

using namespace heatbench;

namespace {

// synth -> clean -> split -> features -> standardize, sized for fast tests
struct PreparedData {
  std::vector<FeatureFrame> frames;
  std::map<std::string, SeriesStats> stats;
};

PreparedData prepare(int buildings, int days, std::uint64_t seed, const WindowSpec& wspec) {
  SynthSpec sspec;
  sspec.n_buildings = buildings;
  sspec.days = days;
  sspec.seed = seed;
  SynthResult synth = synthesize_corpus(sspec);

  PreparedData out;
  const auto statics = static_transforms([&] {
    std::vector<BuildingMeta> metas;
    for (const auto& s : synth.series) metas.push_back(s.meta);
    return metas;
  }());

  for (const auto& raw : synth.series) {
    RawSeries cleaned = remove_outliers_iqr(raw, 1.5, nullptr);
    std::vector<FeatureFrame> frames;
    for (const auto& seg : split_and_interpolate(cleaned))
      frames.push_back(engineer_features(seg, raw.meta, synth.holidays, synth.schema, nullptr));
    std::vector<const FeatureFrame*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    const HourStamp boundary = series_fit_boundary(ptrs, wspec);
    SeriesStats stats = fit_series_stats(frames, boundary, statics);
    apply_series_stats(frames, stats);
    out.stats[raw.meta.building_id] = stats;
    for (auto& f : frames) out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST_CASE("train config invariants") {
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.epochs = 1;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.batch_size = 1;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("adam leaves parameters alone on a fresh zero gradient") {
  std::vector<NamedParam> params{{"w", Tensor::from({3}, {1, 2, 3}, true)}};
  Adam adam;
  adam.step(params);  // no grad accumulated anywhere
  CHECK(adam.t() == 1);
  CHECK(params[0].tensor.values()[0] == 1.0);
  CHECK(params[0].tensor.values()[1] == 2.0);
  CHECK(params[0].tensor.values()[2] == 3.0);
}

TEST_CASE("adam's first step is approximately -lr * sign(g)") {
  Tensor w = Tensor::from({2}, {0.5, -0.5}, true);
  std::vector<NamedParam> params{{"w", w}};
  {
    Tape tape;
    // loss = 3*w0 - 7*w1: gradients (3, -7), both far above eps
    Tensor coeff = Tensor::from({2}, {3.0, -7.0});
    backward(sum(mul(coeff, w)), tape);
  }
  Adam adam(0.001);
  adam.step(params);
  CHECK(w.values()[0] == Catch::Approx(0.5 - 0.001).epsilon(1e-6));
  CHECK(w.values()[1] == Catch::Approx(-0.5 + 0.001).epsilon(1e-6));
}

TEST_CASE("adam walks down a quadratic bowl monotonically") {
  // default learning rate: each step is ~1e-3, far from overshooting zero
  Tensor w = Tensor::from({1}, {1.0}, true);
  std::vector<NamedParam> params{{"w", w}};
  Adam adam(0.001);
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    w.zero_grad();
    {
      Tape tape;
      backward(sum(mul(w, w)), tape);
    }
    adam.step(params);
    const double cur = std::abs(w.values()[0]);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(prev < 0.92);  // walked ~0.001 per step from 1.0
}

TEST_CASE("fcn training beats the naive baseline on synthetic data") {
  WindowSpec wspec;
  wspec.n_in = 24;
  wspec.n_out = 3;
  wspec.feature_config = FeatureConfig::All;
  PreparedData data = prepare(2, 60, 7, wspec);
  SplitWindows split = build_split_datasets(data.frames, wspec, Layout::Flat);
  REQUIRE(split.val.rows() > 0);
  REQUIRE(split.test.rows() > 0);

  ModelSpec spec;
  spec.kind = ModelKind::Fcn;
  spec.n_in = 24;
  spec.n_out = 3;
  spec.hidden = 24;
  spec.dropout = 0.05;
  spec.n_c = data.frames[0].names.size() - 4;  // all minus target minus statics
  spec.n_s = 3;
  // frames carry: target + (weather 3 + calendar 3 + avg 1) + static 3
  spec.n_c = 7;

  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.epochs = 5;
  cfg.seed = 21;

  auto model = make_forecaster(spec, cfg.seed);
  TrainedModel trained = train(*model, split.train, split.val, cfg);
  CHECK(trained.epochs_run() == 5);
  CHECK(trained.total_seconds > 0.0);

  ForecastSet fcn_fc = make_forecasts(*model, split.test, data.stats);

  ModelSpec nspec;
  nspec.kind = ModelKind::Naive;
  nspec.n_in = 24;
  nspec.n_out = 3;
  nspec.n_c = spec.n_c;
  nspec.n_s = spec.n_s;
  NaiveForecaster naive(nspec);
  // naive reads the flat consumption block, so the same dataset works
  ForecastSet naive_fc = make_forecasts(naive, split.test, data.stats);

  CHECK(rmse(naive_fc) > 0.0);
  CHECK(rmse(fcn_fc) < rmse(naive_fc));

  // training loss dropped: mean of last 3 epochs below epoch 1
  const auto& curve = trained.curve;
  double tail = (curve[2].train_loss + curve[3].train_loss + curve[4].train_loss) / 3.0;
  CHECK(tail < curve[0].train_loss);

  // best-validation bookkeeping
  double min_val = std::numeric_limits<double>::infinity();
  for (const auto& e : curve) min_val = std::min(min_val, e.val_loss);
  CHECK(trained.best_val_loss == min_val);
}

TEST_CASE("identical seeds give bitwise-identical loss curves") {
  WindowSpec wspec;
  wspec.n_in = 12;
  wspec.n_out = 3;
  wspec.feature_config = FeatureConfig::PastOnly;
  PreparedData data = prepare(1, 30, 3, wspec);
  SplitWindows split = build_split_datasets(data.frames, wspec, Layout::Flat);

  ModelSpec spec;
  spec.kind = ModelKind::Fcn;
  spec.n_in = 12;
  spec.n_out = 3;
  spec.hidden = 8;
  spec.dropout = 0.1;  // dropout masks must reseed identically too

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 3;
  cfg.seed = 99;

  auto m1 = make_forecaster(spec, cfg.seed);
  auto m2 = make_forecaster(spec, cfg.seed);
  TrainedModel t1 = train(*m1, split.train, split.val, cfg);
  TrainedModel t2 = train(*m2, split.train, split.val, cfg);
  REQUIRE(t1.curve.size() == t2.curve.size());
  for (std::size_t i = 0; i < t1.curve.size(); ++i) {
    CHECK(t1.curve[i].train_loss == t2.curve[i].train_loss);
    CHECK(t1.curve[i].val_loss == t2.curve[i].val_loss);
  }

  TrainConfig other = cfg;
  other.seed = 100;
  auto m3 = make_forecaster(spec, other.seed);
  TrainedModel t3 = train(*m3, split.train, split.val, other);
  CHECK(t3.curve[0].train_loss != t1.curve[0].train_loss);
}

TEST_CASE("non-finite losses abort with the offending batch named") {
  WindowSpec wspec;
  wspec.n_in = 12;
  wspec.n_out = 3;
  wspec.feature_config = FeatureConfig::PastOnly;
  PreparedData data = prepare(1, 20, 5, wspec);
  SplitWindows split = build_split_datasets(data.frames, wspec, Layout::Flat);

  ModelSpec spec;
  spec.kind = ModelKind::Fcn;
  spec.n_in = 12;
  spec.n_out = 3;
  spec.hidden = 4;
  auto model = make_forecaster(spec, 1);
  for (auto& np : model->parameters())
    if (np.name == "fc1.w")
      for (double& v : np.tensor.mutable_values()) v = 1e200;

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 1;
  try {
    train(*model, split.train, split.val, cfg);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("layout mismatch is a training error") {
  WindowSpec wspec;
  wspec.n_in = 12;
  wspec.n_out = 3;
  wspec.feature_config = FeatureConfig::PastOnly;
  PreparedData data = prepare(1, 20, 5, wspec);
  SplitWindows split = build_split_datasets(data.frames, wspec, Layout::Sequential);
  ModelSpec spec;
  spec.kind = ModelKind::Fcn;
  spec.n_in = 12;
  spec.n_out = 3;
  spec.hidden = 4;
  auto model = make_forecaster(spec, 1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(*model, split.train, split.val, cfg), TrainError);
}

TEST_CASE("early stopping halts on a validation plateau") {
  WindowSpec wspec;
  wspec.n_in = 12;
  wspec.n_out = 3;
  wspec.feature_config = FeatureConfig::PastOnly;
  PreparedData data = prepare(1, 30, 3, wspec);
  SplitWindows split = build_split_datasets(data.frames, wspec, Layout::Flat);

  ModelSpec spec;
  spec.kind = ModelKind::Fcn;
  spec.n_in = 12;
  spec.n_out = 3;
  spec.hidden = 8;
  auto model = make_forecaster(spec, 1);

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 50;
  cfg.early_stop = EarlyStop{2, 1e9};  // impossible improvement bar
  TrainedModel trained = train(*model, split.train, split.val, cfg);
  CHECK(trained.epochs_run() == 3);  // first epoch improves from +inf, then patience 2
}

TEST_CASE("after one optimizer step every counted parameter has moved") {
  for (ModelKind kind : {ModelKind::Fcn, ModelKind::Lstm, ModelKind::Xlstm, ModelKind::Te}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.n_out = 2;
    spec.n_in = 4;
    spec.hidden = kind == ModelKind::Fcn || kind == ModelKind::Lstm ? 3 : 8;
    spec.heads = 2;
    spec.blocks = kind == ModelKind::Te ? 2 : 1;
    spec.n_c = 1;
    spec.n_s = kind == ModelKind::Lstm || kind == ModelKind::Te ? 0 : 1;
    auto model = make_forecaster(spec, 77);

    // every scalar nonzero so the ridge term gives every one a gradient
    Rng rng(78);
    for (auto& np : model->parameters())
      for (double& v : np.tensor.mutable_values()) v = rng.uniform(0.05, 0.4);

    std::vector<double> before;
    for (auto& np : model->parameters())
      before.insert(before.end(), np.tensor.values().begin(), np.tensor.values().end());

    Tensor x = testutil::random_tensor(
        kind == ModelKind::Fcn ? Shape{3, spec.flat_width()} : Shape{3, spec.n_in, spec.seq_features()},
        rng);
    Tensor target = testutil::random_tensor({3, spec.n_out}, rng);
    {
      Tape tape;
      Tensor loss = mse_loss(model->forward(x), target);
      for (auto& np : model->parameters())
        loss = add(loss, mul_scalar(sum(mul(np.tensor, np.tensor)), 1e-3));
      backward(loss, tape);
    }
    Adam adam(0.01);
    adam.step(model->parameters());

    std::size_t moved = 0, total = 0;
    std::size_t off = 0;
    for (auto& np : model->parameters())
      for (double v : np.tensor.values()) {
        if (v != before[off]) ++moved;
        ++total;
        ++off;
      }
    CHECK(total == count_parameters(spec));
    CHECK(moved == total);
  }
}

TEST_CASE("sweep executes the requested trials and ranks them") {
  WindowSpec wspec;
  wspec.n_in = 12;
  wspec.n_out = 3;
  wspec.feature_config = FeatureConfig::PastOnly;
  PreparedData data = prepare(1, 40, 13, wspec);

  ModelSpec base;
  base.kind = ModelKind::Fcn;
  base.n_in = 12;
  base.n_out = 3;
  base.hidden = 8;

  TrainConfig tcfg;
  tcfg.batch_size = 64;
  tcfg.epochs = 2;

  SweepContext ctx;
  ctx.frames = &data.frames;
  ctx.stats = &data.stats;
  ctx.base_spec = base;
  ctx.base_window = wspec;
  ctx.base_train = tcfg;

  SECTION("budget 1 gives exactly one trial") {
    SweepSpec sspec;
    sspec.budget = 1;
    auto results = sweep(ctx, sspec);
    REQUIRE(results.size() == 1);
    CHECK(results[0].ok);
  }

  SECTION("a 4x2 grid gives 8 trials, best config from the sampled set") {
    SweepSpec sspec;
    sspec.axes.dropout = {0.0, 0.05, 0.1, 0.2};
    sspec.axes.batch_size = {32, 64};
    auto results = sweep(ctx, sspec);
    REQUIRE(results.size() == 8);
    for (const auto& r : results) CHECK(r.ok);
    // ranked by objective
    for (std::size_t i = 1; i < results.size(); ++i)
      CHECK(results[i - 1].val_rmse <= results[i].val_rmse);
    // the winner's settings come from the grid
    bool drop_ok = false, batch_ok = false;
    for (double d : sspec.axes.dropout) drop_ok = drop_ok || results[0].spec.dropout == d;
    for (std::size_t b : sspec.axes.batch_size)
      batch_ok = batch_ok || results[0].config.batch_size == b;
    CHECK(drop_ok);
    CHECK(batch_ok);
  }

  SECTION("failed trials are recorded and the sweep continues") {
    SweepSpec sspec;
    sspec.axes.n_future = {0, 50};  // 50 > n_in -> window validation error
    auto results = sweep(ctx, sspec);
    REQUIRE(results.size() == 2);
    std::size_t ok = 0, failed = 0;
    for (const auto& r : results) {
      if (r.ok)
        ++ok;
      else {
        ++failed;
        CHECK_FALSE(r.error.empty());
      }
    }
    CHECK(ok == 1);
    CHECK(failed == 1);
  }

  SECTION("random mode is reproducible under the master seed") {
    SweepSpec sspec;
    sspec.mode = SweepSpec::Mode::Random;
    sspec.budget = 3;
    sspec.axes.dropout = {0.0, 0.1, 0.2};
    sspec.axes.hidden = {4, 8, 16};
    auto a = sweep(ctx, sspec);
    auto b = sweep(ctx, sspec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].spec.hidden == b[i].spec.hidden);
      CHECK(a[i].val_rmse == b[i].val_rmse);
    }
  }
}
