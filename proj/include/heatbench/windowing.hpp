#pragma once

// Sliding-window supervised datasets. A window at start index s of a segment
// uses rows [s, s+n_in) as input and rows [s+n_in, s+n_in+n_out) as target,
// with step 1. The split is chronological per series (earliest 80% of a
// series' windows -> train, next 10% -> val, rest -> test), so no window's
// input can overlap a later partition's targets.
//
// Two layouts:
//   flat       (n, c*n_in + n_s)      channel-major blocks, statics appended once
//   sequential (n, n_in, c + n_s)     statics repeated along the time axis

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heatbench/data.hpp"
#include "heatbench/errors.hpp"
#include "heatbench/tensor.hpp"

namespace heatbench {

enum class FeatureConfig {
  PastOnly = 1,    // consumption only
  NoBuilding = 2,  // consumption + weather + calendar + avg_daily
  All = 3,         // everything incl. static building attributes
};

enum class Layout { Flat, Sequential };

struct WindowSpec {
  std::size_t n_in = 24;
  std::size_t n_out = 3;
  std::size_t n_future = 0;
  FeatureConfig feature_config = FeatureConfig::All;

  void validate() const {
    if (n_in < 1 || n_out < 1) throw DataError("WindowSpec: n_in and n_out must be >= 1");
    if (n_future > n_in) throw DataError("WindowSpec: n_future must not exceed n_in");
    if (n_future > n_out)
      throw DataError("WindowSpec: n_future beyond the horizon would change the window count");
  }
};

inline std::size_t window_count(std::size_t segment_length, const WindowSpec& spec) {
  return segment_length >= spec.n_in + spec.n_out ? segment_length - spec.n_in - spec.n_out + 1 : 0;
}

// Column indices of the frame selected by a feature configuration, target
// first. Statics are reported separately.
struct SelectedColumns {
  std::vector<std::size_t> series_cols;  // target + time-varying covariates
  std::vector<std::size_t> static_cols;
};

inline SelectedColumns apply_feature_config(const FeatureFrame& frame, FeatureConfig config) {
  SelectedColumns sel;
  sel.series_cols.push_back(frame.col_index(kColConsumption));
  if (config == FeatureConfig::PastOnly) return sel;
  for (std::size_t c = 0; c < frame.names.size(); ++c)
    if (frame.roles[c] == ColumnRole::Covariate) sel.series_cols.push_back(c);
  if (config == FeatureConfig::All)
    for (std::size_t c = 0; c < frame.names.size(); ++c)
      if (frame.roles[c] == ColumnRole::StaticAttr) sel.static_cols.push_back(c);
  return sel;
}

struct WindowProvenance {
  std::string series_id;
  HourStamp window_start = 0;  // hour of the first input row
};

struct WindowedDataset {
  Layout layout = Layout::Sequential;
  std::size_t n_in = 0, n_out = 0, n_future = 0;
  std::size_t channels = 0;  // c = 1 + n_c (target first)
  std::size_t n_static = 0;  // n_s

  std::vector<double> x_data;       // row-major
  std::vector<double> y_data;       // rows x n_out
  std::vector<double> future_data;  // rows x n_future x (channels-1)
  std::vector<WindowProvenance> provenance;

  std::size_t rows() const { return provenance.size(); }

  std::size_t x_row_size() const {
    return layout == Layout::Flat ? channels * n_in + n_static : n_in * (channels + n_static);
  }

  Shape x_row_shape() const {
    return layout == Layout::Flat ? Shape{channels * n_in + n_static}
                                  : Shape{n_in, channels + n_static};
  }

  Tensor X() const {
    if (rows() == 0) throw DataError("WindowedDataset: no rows");
    Shape s = layout == Layout::Flat ? Shape{rows(), x_row_size()}
                                     : Shape{rows(), n_in, channels + n_static};
    return Tensor::from(std::move(s), x_data);
  }

  Tensor y() const {
    if (rows() == 0) throw DataError("WindowedDataset: no rows");
    return Tensor::from({rows(), n_out}, y_data);
  }

  Tensor future() const {
    if (n_future == 0) throw DataError("WindowedDataset: no future covariates requested");
    return Tensor::from({rows(), n_future, channels - 1}, future_data);
  }

  Tensor x_batch(std::span<const std::size_t> idx) const {
    const std::size_t w = x_row_size();
    std::vector<double> out(idx.size() * w);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(x_data.data() + idx[i] * w, w, out.data() + i * w);
    Shape s = layout == Layout::Flat ? Shape{idx.size(), w}
                                     : Shape{idx.size(), n_in, channels + n_static};
    return Tensor::from(std::move(s), std::move(out));
  }

  Tensor y_batch(std::span<const std::size_t> idx) const {
    std::vector<double> out(idx.size() * n_out);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(y_data.data() + idx[i] * n_out, n_out, out.data() + i * n_out);
    return Tensor::from({idx.size(), n_out}, std::move(out));
  }

  void append(const WindowedDataset& other) {
    if (rows() == 0) {
      *this = other;
      return;
    }
    if (layout != other.layout || n_in != other.n_in || n_out != other.n_out ||
        channels != other.channels || n_static != other.n_static || n_future != other.n_future)
      throw DataError("WindowedDataset::append: configuration mismatch");
    x_data.insert(x_data.end(), other.x_data.begin(), other.x_data.end());
    y_data.insert(y_data.end(), other.y_data.begin(), other.y_data.end());
    future_data.insert(future_data.end(), other.future_data.begin(), other.future_data.end());
    provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
  }
};

// All windows of one segment. A segment shorter than n_in + n_out yields an
// empty dataset (callers report it; it is not an error).
inline WindowedDataset make_windows(const FeatureFrame& frame, const WindowSpec& spec,
                                    Layout layout) {
  spec.validate();
  const SelectedColumns sel = apply_feature_config(frame, spec.feature_config);

  WindowedDataset ds;
  ds.layout = layout;
  ds.n_in = spec.n_in;
  ds.n_out = spec.n_out;
  ds.n_future = spec.n_future;
  ds.channels = sel.series_cols.size();
  ds.n_static = sel.static_cols.size();

  const std::size_t count = window_count(frame.length(), spec);
  if (count == 0) return ds;

  const std::size_t target_col = sel.series_cols[0];
  ds.x_data.reserve(count * ds.x_row_size());
  ds.y_data.reserve(count * spec.n_out);
  for (std::size_t s = 0; s < count; ++s) {
    if (layout == Layout::Flat) {
      for (std::size_t c : sel.series_cols)
        for (std::size_t t = 0; t < spec.n_in; ++t) ds.x_data.push_back(frame.cols[c][s + t]);
      for (std::size_t c : sel.static_cols) ds.x_data.push_back(frame.cols[c][s]);
    } else {
      for (std::size_t t = 0; t < spec.n_in; ++t) {
        for (std::size_t c : sel.series_cols) ds.x_data.push_back(frame.cols[c][s + t]);
        for (std::size_t c : sel.static_cols) ds.x_data.push_back(frame.cols[c][s + t]);
      }
    }
    for (std::size_t t = 0; t < spec.n_out; ++t)
      ds.y_data.push_back(frame.cols[target_col][s + spec.n_in + t]);
    for (std::size_t t = 0; t < spec.n_future; ++t)
      for (std::size_t ci = 1; ci < sel.series_cols.size(); ++ci)
        ds.future_data.push_back(frame.cols[sel.series_cols[ci]][s + spec.n_in + t]);
    ds.provenance.push_back({frame.series_id, frame.hour_at(s)});
  }
  return ds;
}

// Round-trip helpers between the two layouts for a single window row.
inline std::vector<double> flat_from_sequential(std::span<const double> seq, std::size_t n_in,
                                                std::size_t channels, std::size_t n_static) {
  std::vector<double> flat;
  flat.reserve(channels * n_in + n_static);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < n_in; ++t) flat.push_back(seq[t * (channels + n_static) + c]);
  for (std::size_t s = 0; s < n_static; ++s) flat.push_back(seq[channels + s]);
  return flat;
}

inline std::vector<double> sequential_from_flat(std::span<const double> flat, std::size_t n_in,
                                                std::size_t channels, std::size_t n_static) {
  std::vector<double> seq(n_in * (channels + n_static));
  for (std::size_t t = 0; t < n_in; ++t) {
    for (std::size_t c = 0; c < channels; ++c) seq[t * (channels + n_static) + c] = flat[c * n_in + t];
    for (std::size_t s = 0; s < n_static; ++s)
      seq[t * (channels + n_static) + channels + s] = flat[channels * n_in + s];
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Chronological split

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
  bool all_train = false;  // series too short for three non-empty partitions
};

inline SplitCounts split_counts(std::size_t n, unsigned train_pct = 80, unsigned val_pct = 10) {
  SplitCounts c;
  c.train = n * train_pct / 100;
  c.val = n * val_pct / 100;
  c.test = n - c.train - c.val;
  if (c.val == 0 || c.test == 0) {
    c = SplitCounts{n, 0, 0, true};
  }
  return c;
}

struct SplitWindows {
  WindowedDataset train, val, test;
  std::vector<std::string> warnings;         // series forced fully into train, empty segments
  std::map<std::string, HourStamp> fit_boundaries;  // per building: first val target hour
};

// The hour stamp strictly before which data may be used to fit per-series
// statistics: the first validation window's first target hour.
inline HourStamp series_fit_boundary(const std::vector<const FeatureFrame*>& frames,
                                     const WindowSpec& spec) {
  std::vector<HourStamp> starts;
  for (const auto* f : frames) {
    const std::size_t count = window_count(f->length(), spec);
    for (std::size_t s = 0; s < count; ++s) starts.push_back(f->hour_at(s));
  }
  std::sort(starts.begin(), starts.end());
  const SplitCounts counts = split_counts(starts.size());
  if (counts.all_train || starts.empty()) return std::numeric_limits<HourStamp>::max();
  return starts[counts.train] + static_cast<HourStamp>(spec.n_in);
}

// Builds the three partitions over all frames, split per series (grouped by
// building) along the time axis.
inline SplitWindows build_split_datasets(const std::vector<FeatureFrame>& frames,
                                         const WindowSpec& spec, Layout layout) {
  spec.validate();
  std::map<std::string, std::vector<const FeatureFrame*>> by_building;
  for (const auto& f : frames) by_building[f.building_id].push_back(&f);

  SplitWindows out;
  for (auto& [building, fs] : by_building) {
    std::sort(fs.begin(), fs.end(),
              [](const FeatureFrame* a, const FeatureFrame* b) { return a->start < b->start; });
    WindowedDataset series_ds;
    for (const auto* f : fs) {
      WindowedDataset ds = make_windows(*f, spec, layout);
      if (ds.rows() == 0) {
        out.warnings.push_back("segment " + f->series_id + " too short for any window (" +
                               std::to_string(f->length()) + " rows)");
        continue;
      }
      series_ds.append(ds);
    }
    const SplitCounts counts = split_counts(series_ds.rows());
    if (counts.all_train)
      out.warnings.push_back("series " + building +
                             " too short for an 80/10/10 split; assigned fully to train");
    out.fit_boundaries[building] =
        counts.all_train || series_ds.rows() == 0
            ? std::numeric_limits<HourStamp>::max()
            : series_ds.provenance[counts.train].window_start + static_cast<HourStamp>(spec.n_in);

    auto take = [&](std::size_t from, std::size_t n, WindowedDataset& dst) {
      if (n == 0) return;
      WindowedDataset part;
      part.layout = series_ds.layout;
      part.n_in = series_ds.n_in;
      part.n_out = series_ds.n_out;
      part.n_future = series_ds.n_future;
      part.channels = series_ds.channels;
      part.n_static = series_ds.n_static;
      const std::size_t w = series_ds.x_row_size();
      part.x_data.assign(series_ds.x_data.begin() + from * w,
                         series_ds.x_data.begin() + (from + n) * w);
      part.y_data.assign(series_ds.y_data.begin() + from * spec.n_out,
                         series_ds.y_data.begin() + (from + n) * spec.n_out);
      const std::size_t fw = spec.n_future * (series_ds.channels - 1);
      if (fw > 0)
        part.future_data.assign(series_ds.future_data.begin() + from * fw,
                                series_ds.future_data.begin() + (from + n) * fw);
      part.provenance.assign(series_ds.provenance.begin() + from,
                             series_ds.provenance.begin() + from + n);
      dst.append(part);
    };
    take(0, counts.train, out.train);
    take(counts.train, counts.val, out.val);
    take(counts.train + counts.val, counts.test, out.test);
  }
  return out;
}

// Counts (earlier partition input) x (later partition target) hour overlaps
// per series. Must be zero for any split this module produces.
inline std::size_t leakage_violations(const SplitWindows& split) {
  auto ranges = [](const WindowedDataset& ds, bool targets) {
    // per series: list of [lo, hi] hour ranges
    std::map<std::string, std::vector<std::pair<HourStamp, HourStamp>>> m;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      const auto& p = ds.provenance[i];
      const HourStamp in_end = p.window_start + static_cast<HourStamp>(ds.n_in) - 1;
      if (targets)
        m[p.series_id].push_back({in_end + 1, in_end + static_cast<HourStamp>(ds.n_out)});
      else
        m[p.series_id].push_back({p.window_start, in_end});
    }
    return m;
  };
  std::size_t violations = 0;
  const WindowedDataset* parts[3] = {&split.train, &split.val, &split.test};
  for (int earlier = 0; earlier < 3; ++earlier)
    for (int later = earlier + 1; later < 3; ++later) {
      auto inputs = ranges(*parts[earlier], false);
      auto targets = ranges(*parts[later], true);
      for (const auto& [series, ins] : inputs) {
        auto it = targets.find(series);
        if (it == targets.end()) continue;
        for (const auto& in : ins)
          for (const auto& tg : it->second)
            if (in.first <= tg.second && tg.first <= in.second) ++violations;
      }
    }
  return violations;
}

}  // namespace heatbench
