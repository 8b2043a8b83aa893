#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "heatbench/windowing.hpp"

using namespace heatbench;

namespace {

// A hand-built frame whose cell values encode (column, time) so window
// contents can be asserted exactly: consumption = t, covariate = 1000 + t,
// static = 7.
FeatureFrame coded_frame(std::size_t n, const std::string& series_id = "S#0",
                         const std::string& building = "S", HourStamp start = 500000) {
  FeatureFrame f;
  f.series_id = series_id;
  f.building_id = building;
  f.start = start;
  f.names = {kColConsumption, "temp", kColHeatedArea};
  f.roles = {ColumnRole::Target, ColumnRole::Covariate, ColumnRole::StaticAttr};
  f.cols.resize(3);
  for (std::size_t t = 0; t < n; ++t) {
    f.cols[0].push_back(static_cast<double>(t));
    f.cols[1].push_back(1000.0 + static_cast<double>(t));
    f.cols[2].push_back(7.0);
  }
  f.interpolated.assign(n, false);
  return f;
}

}  // namespace

TEST_CASE("window count follows L - n_in - n_out + 1") {
  WindowSpec spec;
  spec.n_in = 72;
  spec.n_out = 3;
  CHECK(window_count(100, spec) == 26);
  CHECK(window_count(75, spec) == 1);   // L == n_in + n_out exactly
  CHECK(window_count(74, spec) == 0);
  CHECK(window_count(10, spec) == 0);

  FeatureFrame f = coded_frame(100);
  spec.feature_config = FeatureConfig::All;
  WindowedDataset ds = make_windows(f, spec, Layout::Sequential);
  CHECK(ds.rows() == 26);
}

TEST_CASE("window contents respect input and target ranges") {
  WindowSpec spec;
  spec.n_in = 4;
  spec.n_out = 2;
  spec.feature_config = FeatureConfig::All;
  FeatureFrame f = coded_frame(10);

  WindowedDataset seq = make_windows(f, spec, Layout::Sequential);
  REQUIRE(seq.rows() == 5);
  REQUIRE(seq.channels == 2);
  REQUIRE(seq.n_static == 1);

  // window 0: inputs t=0..3, targets t=4..5
  // sequential row layout: (t, [consumption, temp, static])
  const std::size_t rw = seq.x_row_size();
  CHECK(seq.x_data[0 * rw + 0] == 0.0);       // consumption at t=0
  CHECK(seq.x_data[0 * rw + 1] == 1000.0);    // temp at t=0
  CHECK(seq.x_data[0 * rw + 2] == 7.0);       // static
  CHECK(seq.x_data[0 * rw + 3 * 3 + 0] == 3.0);  // consumption at t=3
  CHECK(seq.y_data[0] == 4.0);
  CHECK(seq.y_data[1] == 5.0);

  // window 3: inputs 3..6, targets 7..8
  CHECK(seq.x_data[3 * rw + 0] == 3.0);
  CHECK(seq.y_data[3 * 2 + 0] == 7.0);

  // y contains consumption only
  for (std::size_t i = 0; i < seq.y_data.size(); ++i) CHECK(seq.y_data[i] < 1000.0);

  // provenance records the first input hour
  CHECK(seq.provenance[0].window_start == f.start);
  CHECK(seq.provenance[3].window_start == f.start + 3);
}

TEST_CASE("feature configurations control the input width") {
  FeatureFrame f = coded_frame(80);

  WindowSpec past;
  past.n_in = 38;
  past.n_out = 24;
  past.feature_config = FeatureConfig::PastOnly;
  WindowedDataset flat = make_windows(f, past, Layout::Flat);
  CHECK(flat.channels == 1);
  CHECK(flat.n_static == 0);
  CHECK(flat.x_row_size() == 38);  // c*n_in + n_s = 1*38 + 0

  WindowSpec all = past;
  all.feature_config = FeatureConfig::All;
  WindowedDataset seq = make_windows(f, all, Layout::Sequential);
  CHECK(seq.x_row_shape() == Shape{38, 3});  // 1 + n_c + n_s

  WindowSpec nb = past;
  nb.feature_config = FeatureConfig::NoBuilding;
  WindowedDataset seq_nb = make_windows(f, nb, Layout::Sequential);
  // all vs no_building differ exactly by the static columns
  CHECK(seq.channels == seq_nb.channels);
  CHECK(seq.n_static == seq_nb.n_static + 1);
}

TEST_CASE("static values repeat along the time axis in sequential layout") {
  FeatureFrame f = coded_frame(12);
  WindowSpec spec;
  spec.n_in = 6;
  spec.n_out = 2;
  spec.feature_config = FeatureConfig::All;
  WindowedDataset seq = make_windows(f, spec, Layout::Sequential);
  const std::size_t fwidth = seq.channels + seq.n_static;
  for (std::size_t t = 0; t < 6; ++t) CHECK(seq.x_data[t * fwidth + 2] == 7.0);
}

TEST_CASE("layout round-trip is exact") {
  FeatureFrame f = coded_frame(20);
  WindowSpec spec;
  spec.n_in = 5;
  spec.n_out = 1;
  spec.feature_config = FeatureConfig::All;
  WindowedDataset seq = make_windows(f, spec, Layout::Sequential);
  WindowedDataset flat = make_windows(f, spec, Layout::Flat);
  REQUIRE(seq.rows() == flat.rows());

  for (std::size_t r = 0; r < seq.rows(); ++r) {
    std::span<const double> srow(seq.x_data.data() + r * seq.x_row_size(), seq.x_row_size());
    std::span<const double> frow(flat.x_data.data() + r * flat.x_row_size(), flat.x_row_size());
    auto to_flat = flat_from_sequential(srow, 5, seq.channels, seq.n_static);
    REQUIRE(to_flat.size() == frow.size());
    for (std::size_t i = 0; i < frow.size(); ++i) CHECK(to_flat[i] == frow[i]);
    auto back = sequential_from_flat(frow, 5, seq.channels, seq.n_static);
    for (std::size_t i = 0; i < srow.size(); ++i) CHECK(back[i] == srow[i]);
  }
}

TEST_CASE("future covariates carry covariate values over the horizon") {
  FeatureFrame f = coded_frame(12);
  WindowSpec spec;
  spec.n_in = 6;
  spec.n_out = 3;
  spec.n_future = 2;
  spec.feature_config = FeatureConfig::All;
  WindowedDataset ds = make_windows(f, spec, Layout::Sequential);
  REQUIRE(ds.n_future == 2);
  // window 0: future covers t = 6, 7; covariate channel only (values 1006, 1007)
  CHECK(ds.future_data[0] == 1006.0);
  CHECK(ds.future_data[1] == 1007.0);
  for (double v : ds.future_data) CHECK(v >= 1000.0);  // never consumption
}

TEST_CASE("n_future is capped") {
  WindowSpec spec;
  spec.n_in = 4;
  spec.n_out = 8;
  spec.n_future = 5;
  CHECK_THROWS_AS(spec.validate(), DataError);  // > n_in
  spec.n_in = 24;
  spec.n_out = 3;
  spec.n_future = 5;
  CHECK_THROWS_AS(spec.validate(), DataError);  // > n_out
}

TEST_CASE("split counts follow exact ratio arithmetic") {
  SplitCounts c = split_counts(1000);
  CHECK(c.train == 800);
  CHECK(c.val == 100);
  CHECK(c.test == 100);
  CHECK_FALSE(c.all_train);

  SplitCounts tiny = split_counts(9);
  CHECK(tiny.all_train);
  CHECK(tiny.train == 9);
}

TEST_CASE("chronological split keeps partitions ordered with no leakage") {
  WindowSpec spec;
  spec.n_in = 24;
  spec.n_out = 3;
  spec.feature_config = FeatureConfig::All;

  // two segments of one series plus a second building
  std::vector<FeatureFrame> frames;
  frames.push_back(coded_frame(500, "A#0", "A", 100000));
  frames.push_back(coded_frame(300, "A#1", "A", 101000));
  frames.push_back(coded_frame(400, "B#0", "B", 100500));

  SplitWindows split = build_split_datasets(frames, spec, Layout::Sequential);

  const std::size_t total = window_count(500, spec) + window_count(300, spec) +
                            window_count(400, spec);
  CHECK(split.train.rows() + split.val.rows() + split.test.rows() == total);

  // per-series counts match the ratio arithmetic
  const std::size_t a_windows = window_count(500, spec) + window_count(300, spec);
  const std::size_t b_windows = window_count(400, spec);
  const SplitCounts ca = split_counts(a_windows);
  const SplitCounts cb = split_counts(b_windows);
  CHECK(split.train.rows() == ca.train + cb.train);
  CHECK(split.val.rows() == ca.val + cb.val);
  CHECK(split.test.rows() == ca.test + cb.test);

  CHECK(leakage_violations(split) == 0);

  // max train input hour < min val target hour, per series
  for (const std::string series : {"A", "B"}) {
    HourStamp max_train_input = std::numeric_limits<HourStamp>::min();
    for (std::size_t i = 0; i < split.train.rows(); ++i)
      if (split.train.provenance[i].series_id.rfind(series, 0) == 0)
        max_train_input = std::max(max_train_input,
                                   split.train.provenance[i].window_start +
                                       static_cast<HourStamp>(spec.n_in) - 1);
    HourStamp min_val_target = std::numeric_limits<HourStamp>::max();
    for (std::size_t i = 0; i < split.val.rows(); ++i)
      if (split.val.provenance[i].series_id.rfind(series, 0) == 0)
        min_val_target = std::min(min_val_target,
                                  split.val.provenance[i].window_start +
                                      static_cast<HourStamp>(spec.n_in));
    CHECK(max_train_input < min_val_target);
  }

  // fit boundary equals the first val target hour
  HourStamp min_val_target_a = std::numeric_limits<HourStamp>::max();
  for (std::size_t i = 0; i < split.val.rows(); ++i)
    if (split.val.provenance[i].series_id.rfind("A", 0) == 0)
      min_val_target_a =
          std::min(min_val_target_a,
                   split.val.provenance[i].window_start + static_cast<HourStamp>(spec.n_in));
  CHECK(split.fit_boundaries.at("A") == min_val_target_a);
}

TEST_CASE("short series fall back to train with a warning") {
  WindowSpec spec;
  spec.n_in = 24;
  spec.n_out = 3;
  std::vector<FeatureFrame> frames{coded_frame(30, "S#0", "S")};  // 4 windows
  SplitWindows split = build_split_datasets(frames, spec, Layout::Flat);
  CHECK(split.train.rows() == 4);
  CHECK(split.val.rows() == 0);
  CHECK(split.test.rows() == 0);
  REQUIRE_FALSE(split.warnings.empty());
  CHECK(split.warnings[0].find("fully to train") != std::string::npos);
}

TEST_CASE("too-short segments produce zero windows and a report entry") {
  WindowSpec spec;
  spec.n_in = 72;
  spec.n_out = 3;
  std::vector<FeatureFrame> frames{coded_frame(10, "S#0", "S"), coded_frame(200, "S#1", "S")};
  SplitWindows split = build_split_datasets(frames, spec, Layout::Flat);
  CHECK(split.train.rows() + split.val.rows() + split.test.rows() == window_count(200, spec));
  bool mentioned = false;
  for (const auto& w : split.warnings) mentioned = mentioned || w.find("S#0") != std::string::npos;
  CHECK(mentioned);
}

TEST_CASE("window count identity over many segment lengths") {
  WindowSpec spec;
  spec.n_in = 24;
  spec.n_out = 24;
  std::vector<FeatureFrame> frames;
  std::size_t expected = 0;
  const std::size_t lengths[] = {47, 48, 49, 100, 333, 10};
  for (std::size_t i = 0; i < std::size(lengths); ++i) {
    frames.push_back(coded_frame(lengths[i], "S#" + std::to_string(i), "S",
                                 100000 + static_cast<HourStamp>(i) * 10000));
    expected += window_count(lengths[i], spec);
  }
  SplitWindows split = build_split_datasets(frames, spec, Layout::Sequential);
  CHECK(split.train.rows() + split.val.rows() + split.test.rows() == expected);
}
