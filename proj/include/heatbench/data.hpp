#pragma once

// Per-building series ingestion, cleaning, feature engineering, and the
// synthetic corpus generator.
//
// Pipeline order is fixed: clean (IQR) -> split/interpolate -> engineer
// features -> standardize. Cleaning turns suspect readings into missing
// values; the gap rules then decide between interpolation (<= 24 h) and
// splitting (> 24 h).
//
// Missing values are NaN throughout the raw stage. Segments are gap-free by
// construction: consecutive rows are exactly one hour apart.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "heatbench/csv.hpp"
#include "heatbench/errors.hpp"
#include "heatbench/rng.hpp"
#include "heatbench/timeutil.hpp"

namespace heatbench {

// ---------------------------------------------------------------------------
// Domain types

enum class HeatingType { Gas, DistrictHeat };

inline std::string to_string(HeatingType t) {
  return t == HeatingType::Gas ? "gas" : "district_heat";
}

inline HeatingType heating_type_from(const std::string& s) {
  if (s == "gas") return HeatingType::Gas;
  if (s == "district_heat") return HeatingType::DistrictHeat;
  throw DataError("unknown heating_type '" + s + "'");
}

struct BuildingMeta {
  std::string building_id;
  double heated_area_m2 = 0.0;
  int num_apartments = 0;
  HeatingType heating_type = HeatingType::Gas;
  std::string holiday_region;
};

struct WeatherSchema {
  std::vector<std::string> channels;

  // The ten hourly channels meteostat serves, used when a config names none.
  static WeatherSchema meteostat_default() {
    return WeatherSchema{{"temp", "dwpt", "rhum", "prcp", "snow", "wdir", "wspd", "wpgt", "pres",
                          "tsun"}};
  }
};

// region -> set of holiday day numbers (days since epoch, UTC)
struct HolidayCalendar {
  std::map<std::string, std::set<std::int64_t>> regions;

  bool is_holiday(const std::string& region, std::int64_t day) const {
    auto it = regions.find(region);
    if (it == regions.end())
      throw DataError("no holiday calendar for region '" + region + "'");
    return it->second.count(day) > 0;
  }
};

// One building's hourly arrays on a contiguous hour index; NaN = missing.
struct RawSeries {
  BuildingMeta meta;
  HourStamp start = 0;
  std::vector<double> consumption;
  std::vector<std::vector<double>> weather;  // [channel][t], aligned with schema

  std::size_t length() const { return consumption.size(); }
  std::size_t observed_points() const {
    std::size_t n = 0;
    for (double v : consumption)
      if (std::isfinite(v)) ++n;
    return n;
  }
};

// Gap-free run produced by split_and_interpolate.
struct Segment {
  std::string series_id;  // "<building_id>#<k>"
  HourStamp start = 0;
  std::vector<double> consumption;           // kWh, finite
  std::vector<std::vector<double>> weather;  // finite
  std::vector<bool> interpolated;            // true where the value was filled

  std::size_t length() const { return consumption.size(); }
};

enum class ColumnRole { Target, Covariate, StaticAttr };

// Engineered per-timestep columns for one segment. Values are raw
// (kWh, degrees, calendar integers) until standardize() is applied.
struct FeatureFrame {
  std::string series_id;
  std::string building_id;
  HourStamp start = 0;
  std::vector<std::string> names;
  std::vector<ColumnRole> roles;
  std::vector<std::vector<double>> cols;  // [col][t]
  std::vector<bool> interpolated;

  std::size_t length() const { return cols.empty() ? 0 : cols[0].size(); }
  HourStamp hour_at(std::size_t i) const { return start + static_cast<HourStamp>(i); }

  std::size_t col_index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw DataError("no column '" + name + "' in frame " + series_id);
  }
};

// Every column is mapped by y = (x - offset) / scale; the inverse restores
// original units (kWh for consumption).
struct ColumnTransform {
  double offset = 0.0;
  double scale = 1.0;
  double apply(double x) const { return (x - offset) / scale; }
  double invert(double y) const { return y * scale + offset; }
};

struct SeriesStats {
  std::string building_id;
  std::vector<std::string> names;
  std::vector<ColumnTransform> transforms;
  ColumnTransform consumption;  // convenience copy of the target transform
};

struct PipelineOptions {
  double iqr_k = 1.5;
  double max_interpolated_fraction = 0.10;  // warn above this
};

struct SeriesReport {
  std::string building_id;
  std::size_t raw_points = 0;
  std::size_t removed_negative = 0;
  std::size_t removed_outliers = 0;
  std::size_t interpolated_points = 0;
  std::size_t segments = 0;
  double interpolated_fraction = 0.0;
  bool interpolation_warning = false;
  std::size_t avg_daily_fallback_days = 0;
};

// ---------------------------------------------------------------------------
// Cleaning

namespace detail_data {

inline double median_sorted(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo;
  const std::size_t mid = lo + n / 2;
  return (n % 2 == 1) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace detail_data

// Tukey quartiles on the sorted sample: Q1/Q3 are the medians of the lower
// and upper halves (median excluded for odd n).
inline void iqr_fences(std::vector<double> sorted, double k, double& lo, double& hi) {
  const std::size_t n = sorted.size();
  const double q1 = detail_data::median_sorted(sorted, 0, n / 2);
  const double q3 = detail_data::median_sorted(sorted, (n + 1) / 2, n);
  const double iqr = q3 - q1;
  lo = q1 - k * iqr;
  hi = q3 + k * iqr;
}

// Values outside [Q1 - k*IQR, Q3 + k*IQR] become missing (inclusive bounds,
// so a constant series is untouched). Negative readings are meter errors
// and are removed first. Quartiles are computed on the full raw series,
// before any splitting, and the fences are re-applied until nothing else
// falls outside: removal shifts the quartiles, and only the fixpoint makes
// the cleaning pass idempotent.
inline RawSeries remove_outliers_iqr(const RawSeries& series, double k, SeriesReport* report = nullptr) {
  if (series.observed_points() == 0)
    throw DataError("series empty: " + series.meta.building_id);
  RawSeries out = series;
  std::size_t removed_negative = 0, removed_outliers = 0;

  for (double& v : out.consumption)
    if (std::isfinite(v) && v < 0.0) {
      v = std::numeric_limits<double>::quiet_NaN();
      ++removed_negative;
    }

  for (;;) {
    std::vector<double> observed;
    observed.reserve(out.length());
    for (double v : out.consumption)
      if (std::isfinite(v)) observed.push_back(v);
    if (observed.empty())
      throw DataError("series empty after cleaning: " + series.meta.building_id);
    if (observed.size() < 4) break;  // too little data to fence

    std::sort(observed.begin(), observed.end());
    double lo, hi;
    iqr_fences(observed, k, lo, hi);
    std::size_t removed_now = 0;
    for (double& v : out.consumption)
      if (std::isfinite(v) && (v < lo || v > hi)) {
        v = std::numeric_limits<double>::quiet_NaN();
        ++removed_now;
      }
    removed_outliers += removed_now;
    if (removed_now == 0) break;
  }

  if (out.observed_points() == 0)
    throw DataError("series empty after cleaning: " + series.meta.building_id);
  if (report) {
    report->removed_negative += removed_negative;
    report->removed_outliers += removed_outliers;
  }
  return out;
}

inline RawSeries remove_outliers_iqr(const RawSeries& series) {
  return remove_outliers_iqr(series, 1.5);
}

namespace detail_data {

// Linear interpolation of a channel between observed points; segment edges
// take the nearest observed value. A channel with no data at all is an
// error: silently zero-filling would poison training.
inline void fill_channel(std::vector<double>& v, const std::string& what) {
  std::vector<std::size_t> obs;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i])) obs.push_back(i);
  if (obs.empty()) throw DataError(what + ": channel has no observed data");
  for (std::size_t i = 0; i < obs.front(); ++i) v[i] = v[obs.front()];
  for (std::size_t i = obs.back() + 1; i < v.size(); ++i) v[i] = v[obs.back()];
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const std::size_t a = obs[k], b = obs[k + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double f = static_cast<double>(i - a) / static_cast<double>(b - a);
      v[i] = v[a] + (v[b] - v[a]) * f;
    }
  }
}

}  // namespace detail_data

// Missing spans of more than 24 hours split the series; spans of up to and
// including 24 hours are filled linearly between the flanking observations
// and flagged. Leading and trailing missing values are trimmed.
inline std::vector<Segment> split_and_interpolate(const RawSeries& series,
                                                  SeriesReport* report = nullptr) {
  std::vector<std::size_t> obs;
  for (std::size_t i = 0; i < series.length(); ++i)
    if (std::isfinite(series.consumption[i])) obs.push_back(i);
  if (obs.empty()) throw DataError("series empty: " + series.meta.building_id);

  // segment boundaries on the observed index list
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // inclusive index ranges
  std::size_t seg_start = obs.front();
  for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
    const std::size_t gap = obs[k + 1] - obs[k] - 1;
    if (gap > 24) {
      ranges.emplace_back(seg_start, obs[k]);
      seg_start = obs[k + 1];
    }
  }
  ranges.emplace_back(seg_start, obs.back());

  std::vector<Segment> segments;
  std::size_t interpolated_total = 0;
  for (std::size_t si = 0; si < ranges.size(); ++si) {
    const auto [a, b] = ranges[si];
    Segment seg;
    seg.series_id = series.meta.building_id + "#" + std::to_string(si);
    seg.start = series.start + static_cast<HourStamp>(a);
    seg.consumption.assign(series.consumption.begin() + a, series.consumption.begin() + b + 1);
    seg.interpolated.assign(seg.consumption.size(), false);
    for (std::size_t i = 0; i < seg.consumption.size(); ++i)
      if (!std::isfinite(seg.consumption[i])) {
        seg.interpolated[i] = true;
        ++interpolated_total;
      }
    detail_data::fill_channel(seg.consumption, seg.series_id + " consumption");
    seg.weather.resize(series.weather.size());
    for (std::size_t c = 0; c < series.weather.size(); ++c) {
      seg.weather[c].assign(series.weather[c].begin() + a, series.weather[c].begin() + b + 1);
      detail_data::fill_channel(seg.weather[c], seg.series_id + " weather[" + std::to_string(c) + "]");
    }
    segments.push_back(std::move(seg));
  }

  if (report) {
    report->interpolated_points += interpolated_total;
    report->segments = segments.size();
  }
  return segments;
}

// ---------------------------------------------------------------------------
// Feature engineering

// Canonical engineered column names.
inline constexpr const char* kColConsumption = "consumption_kwh";
inline constexpr const char* kColDayOfMonth = "day_of_month";
inline constexpr const char* kColDayOfWeek = "day_of_week";
inline constexpr const char* kColIsHoliday = "is_holiday";
inline constexpr const char* kColAvgDaily = "avg_daily_consumption";
inline constexpr const char* kColHeatedArea = "heated_area_m2";
inline constexpr const char* kColNumApartments = "num_apartments";
inline constexpr const char* kColHeatingType = "heating_type";

// Builds the full engineered frame for one segment: calendar columns from
// the timestamps, holiday flags from the calendar, avg_daily_consumption as
// the mean of all *completed prior* days' totals within the segment (the
// first day falls back to its own total and is counted in the report), and
// static building attributes broadcast along the time axis.
inline FeatureFrame engineer_features(const Segment& seg, const BuildingMeta& meta,
                                      const HolidayCalendar& holidays, const WeatherSchema& schema,
                                      SeriesReport* report = nullptr) {
  const std::size_t n = seg.length();
  FeatureFrame f;
  f.series_id = seg.series_id;
  f.building_id = meta.building_id;
  f.start = seg.start;
  f.interpolated = seg.interpolated;

  auto add_col = [&f](const std::string& name, ColumnRole role, std::vector<double> vals) {
    f.names.push_back(name);
    f.roles.push_back(role);
    f.cols.push_back(std::move(vals));
  };

  add_col(kColConsumption, ColumnRole::Target, seg.consumption);
  for (std::size_t c = 0; c < schema.channels.size(); ++c)
    add_col(schema.channels[c], ColumnRole::Covariate, seg.weather[c]);

  std::vector<double> dom(n), dow(n), hol(n);
  for (std::size_t i = 0; i < n; ++i) {
    const HourStamp h = seg.start + static_cast<HourStamp>(i);
    dom[i] = static_cast<double>(timeutil::day_of_month(h));
    dow[i] = static_cast<double>(timeutil::weekday_of(h));
    hol[i] = holidays.is_holiday(meta.holiday_region, timeutil::day_of(h)) ? 1.0 : 0.0;
  }
  add_col(kColDayOfMonth, ColumnRole::Covariate, std::move(dom));
  add_col(kColDayOfWeek, ColumnRole::Covariate, std::move(dow));
  add_col(kColIsHoliday, ColumnRole::Covariate, std::move(hol));

  // Daily totals, estimated as 24 * mean of the day's observed hours so that
  // partial boundary days are comparable to full ones.
  std::vector<std::int64_t> day_of_point(n);
  for (std::size_t i = 0; i < n; ++i)
    day_of_point[i] = timeutil::day_of(seg.start + static_cast<HourStamp>(i));
  std::vector<std::pair<std::int64_t, double>> day_totals;  // (day, total)
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < n && day_of_point[j] == day_of_point[i]) sum += seg.consumption[j], ++j;
    day_totals.emplace_back(day_of_point[i], 24.0 * sum / static_cast<double>(j - i));
    i = j;
  }
  std::vector<double> avg_daily(n);
  double running_sum = 0.0;
  std::size_t completed = 0, fallback_days = 0;
  std::size_t pos = 0;
  for (const auto& [day, total] : day_totals) {
    double value;
    if (completed == 0) {
      value = total;  // first day of the segment: no prior day exists
      ++fallback_days;
    } else {
      value = running_sum / static_cast<double>(completed);
    }
    while (pos < n && day_of_point[pos] == day) avg_daily[pos++] = value;
    running_sum += total;
    ++completed;
  }
  add_col(kColAvgDaily, ColumnRole::Covariate, std::move(avg_daily));

  add_col(kColHeatedArea, ColumnRole::StaticAttr, std::vector<double>(n, meta.heated_area_m2));
  add_col(kColNumApartments, ColumnRole::StaticAttr,
          std::vector<double>(n, static_cast<double>(meta.num_apartments)));
  add_col(kColHeatingType, ColumnRole::StaticAttr,
          std::vector<double>(n, meta.heating_type == HeatingType::Gas ? 0.0 : 1.0));

  if (report) report->avg_daily_fallback_days += fallback_days;
  return f;
}

// ---------------------------------------------------------------------------
// Standardization

// Static attributes are constant within a series, so their scaling is fit
// across the corpus metadata (no time dimension, hence no leakage).
inline std::map<std::string, ColumnTransform> static_transforms(
    const std::vector<BuildingMeta>& metas) {
  auto fit = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    const double sd = std::sqrt(var);
    return ColumnTransform{mean, sd > 1e-12 ? sd : 1.0};
  };
  std::vector<double> area, apts, heat;
  for (const auto& m : metas) {
    area.push_back(m.heated_area_m2);
    apts.push_back(static_cast<double>(m.num_apartments));
    heat.push_back(m.heating_type == HeatingType::Gas ? 0.0 : 1.0);
  }
  return {{kColHeatedArea, fit(area)}, {kColNumApartments, fit(apts)}, {kColHeatingType, fit(heat)}};
}

// Fits per-series transforms on points strictly before `fit_boundary` (an
// hour stamp; pass max() to fit on everything). Consumption and continuous
// covariates get z-scores with population std; calendar columns get fixed
// range scaling; statics use the supplied corpus transforms.
inline SeriesStats fit_series_stats(const std::vector<FeatureFrame>& frames, HourStamp fit_boundary,
                                    const std::map<std::string, ColumnTransform>& statics) {
  if (frames.empty()) throw DataError("fit_series_stats: no frames");
  SeriesStats stats;
  stats.building_id = frames.front().building_id;
  stats.names = frames.front().names;
  stats.transforms.resize(stats.names.size());

  for (std::size_t c = 0; c < stats.names.size(); ++c) {
    const std::string& name = stats.names[c];
    const ColumnRole role = frames.front().roles[c];
    if (role == ColumnRole::StaticAttr) {
      stats.transforms[c] = statics.at(name);
      continue;
    }
    if (name == kColDayOfMonth) {
      stats.transforms[c] = ColumnTransform{1.0, 30.0};  // [1,31] -> [0,1]
      continue;
    }
    if (name == kColDayOfWeek) {
      stats.transforms[c] = ColumnTransform{0.0, 6.0};  // [0,6] -> [0,1]
      continue;
    }
    if (name == kColIsHoliday) {
      stats.transforms[c] = ColumnTransform{0.0, 1.0};
      continue;
    }
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (const auto& fr : frames)
      for (std::size_t i = 0; i < fr.length(); ++i) {
        if (fr.hour_at(i) >= fit_boundary) break;
        sum += fr.cols[c][i];
        sq += fr.cols[c][i] * fr.cols[c][i];
        ++count;
      }
    if (count == 0) throw DataError("fit_series_stats: empty fit range for " + stats.building_id);
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
    double sd = std::sqrt(var);
    if (name == kColConsumption && sd <= 1e-12)
      throw DataError("zero variance on fit range: " + stats.building_id);
    if (sd <= 1e-12) sd = 1.0;  // constant covariate: pass through centered
    stats.transforms[c] = ColumnTransform{mean, sd};
  }
  stats.consumption = stats.transforms[frames.front().col_index(kColConsumption)];
  return stats;
}

inline void apply_series_stats(std::vector<FeatureFrame>& frames, const SeriesStats& stats) {
  for (auto& fr : frames) {
    if (fr.names != stats.names) throw DataError("apply_series_stats: column mismatch");
    for (std::size_t c = 0; c < fr.cols.size(); ++c)
      for (double& v : fr.cols[c]) v = stats.transforms[c].apply(v);
  }
}

// ---------------------------------------------------------------------------
// Corpus files
//
//   <dir>/metadata.csv   building_id,heated_area_m2,num_apartments,heating_type,holiday_region
//   <dir>/holidays.csv   region,date
//   <dir>/<building>.csv timestamp,consumption_kwh,<weather_1>,...,<weather_k>
//
// Timestamps are ISO-8601 UTC; an empty cell is a missing value.

inline HolidayCalendar load_holidays(const std::string& path) {
  HolidayCalendar cal;
  csv::Table t = csv::read_file(path);
  if (t.header != std::vector<std::string>{"region", "date"})
    throw DataError(path + ": expected header region,date");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    try {
      cal.regions[t.rows[r][0]].insert(timeutil::parse_date(t.rows[r][1]));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": " + e.what());
    }
  }
  return cal;
}

inline std::vector<BuildingMeta> load_metadata(const std::string& path) {
  csv::Table t = csv::read_file(path);
  const std::vector<std::string> want{"building_id", "heated_area_m2", "num_apartments",
                                      "heating_type", "holiday_region"};
  if (t.header != want) throw DataError(path + ": unexpected metadata header");
  std::vector<BuildingMeta> metas;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string at = path + ":" + std::to_string(t.line_numbers[r]) + ": ";
    try {
      BuildingMeta m;
      m.building_id = t.rows[r][0];
      m.heated_area_m2 = csv::parse_cell(t, r, 1).value_or(0.0);
      m.num_apartments = static_cast<int>(csv::parse_cell(t, r, 2).value_or(-1.0));
      m.heating_type = heating_type_from(t.rows[r][3]);
      m.holiday_region = t.rows[r][4];
      if (m.heated_area_m2 <= 0.0) throw DataError("heated_area_m2 must be > 0");
      if (m.num_apartments < 0) throw DataError("num_apartments must be >= 0");
      metas.push_back(std::move(m));
    } catch (const DataError& e) {
      throw DataError(at + e.what());
    }
  }
  if (metas.empty()) throw DataError(path + ": no buildings");
  return metas;
}

inline RawSeries load_building_csv(const std::string& path, const BuildingMeta& meta,
                                   const WeatherSchema& schema) {
  csv::Table t = csv::read_file(path);
  std::vector<std::string> want{"timestamp", "consumption_kwh"};
  want.insert(want.end(), schema.channels.begin(), schema.channels.end());
  if (t.header != want)
    throw DataError(path + ": header does not match the configured weather schema");

  struct Row {
    HourStamp hour;
    double kwh;
    std::vector<double> weather;
    std::size_t line;
  };
  std::vector<Row> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string at = path + ":" + std::to_string(t.line_numbers[r]) + ": ";
    try {
      Row row;
      row.hour = timeutil::parse_hour(t.rows[r][0]);
      row.kwh = csv::parse_cell(t, r, 1).value_or(std::numeric_limits<double>::quiet_NaN());
      for (std::size_t c = 0; c < schema.channels.size(); ++c)
        row.weather.push_back(
            csv::parse_cell(t, r, c + 2).value_or(std::numeric_limits<double>::quiet_NaN()));
      row.line = t.line_numbers[r];
      rows.push_back(std::move(row));
    } catch (const DataError& e) {
      throw DataError(at + e.what());
    }
  }
  if (rows.empty()) throw DataError(path + ": no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.hour < b.hour; });
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r].hour == rows[r - 1].hour)
      throw DataError(path + ":" + std::to_string(rows[r].line) + ": duplicate timestamp " +
                      timeutil::format_hour(rows[r].hour));

  RawSeries s;
  s.meta = meta;
  s.start = rows.front().hour;
  const std::size_t n = static_cast<std::size_t>(rows.back().hour - rows.front().hour) + 1;
  s.consumption.assign(n, std::numeric_limits<double>::quiet_NaN());
  s.weather.assign(schema.channels.size(),
                   std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (const Row& row : rows) {
    const std::size_t i = static_cast<std::size_t>(row.hour - s.start);
    s.consumption[i] = row.kwh;
    for (std::size_t c = 0; c < schema.channels.size(); ++c) s.weather[c][i] = row.weather[c];
  }
  return s;
}

// Directory -> one RawSeries per metadata row, timestamp-sorted and
// schema-validated.
inline std::vector<RawSeries> load_corpus(const std::string& dir, const WeatherSchema& schema) {
  namespace fs = std::filesystem;
  const auto metas = load_metadata((fs::path(dir) / "metadata.csv").string());
  std::vector<RawSeries> out;
  for (const auto& meta : metas)
    out.push_back(
        load_building_csv((fs::path(dir) / (meta.building_id + ".csv")).string(), meta, schema));
  return out;
}

inline void write_corpus(const std::string& dir, const std::vector<RawSeries>& corpus,
                         const WeatherSchema& schema, const HolidayCalendar& holidays) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    csv::Writer w((fs::path(dir) / "metadata.csv").string());
    w.row({"building_id", "heated_area_m2", "num_apartments", "heating_type", "holiday_region"});
    for (const auto& s : corpus)
      w.row({s.meta.building_id, csv::format_double(s.meta.heated_area_m2),
             std::to_string(s.meta.num_apartments), to_string(s.meta.heating_type),
             s.meta.holiday_region});
  }
  {
    csv::Writer w((fs::path(dir) / "holidays.csv").string());
    w.row({"region", "date"});
    for (const auto& [region, days] : holidays.regions)
      for (std::int64_t d : days) w.row({region, timeutil::format_date(d)});
  }
  for (const auto& s : corpus) {
    csv::Writer w((fs::path(dir) / (s.meta.building_id + ".csv")).string());
    std::vector<std::string> header{"timestamp", "consumption_kwh"};
    header.insert(header.end(), schema.channels.begin(), schema.channels.end());
    w.row(header);
    for (std::size_t i = 0; i < s.length(); ++i) {
      // rows with no reading at all are simply absent from the file
      bool any = std::isfinite(s.consumption[i]);
      for (const auto& ch : s.weather) any = any || std::isfinite(ch[i]);
      if (!any) continue;
      std::vector<std::string> row{timeutil::format_hour(s.start + static_cast<HourStamp>(i))};
      row.push_back(std::isfinite(s.consumption[i]) ? csv::format_double(s.consumption[i]) : "");
      for (const auto& ch : s.weather)
        row.push_back(std::isfinite(ch[i]) ? csv::format_double(ch[i]) : "");
      w.row(row);
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthSpec {
  int n_buildings = 5;
  int days = 120;
  std::uint64_t seed = 1;
  int weather_channels = 3;  // temp, humidity, wind (+ smooth noise channels)
};

struct SynthTruth {
  struct PerBuilding {
    std::size_t injected_outliers = 0;
    std::size_t short_gaps = 0;
    std::size_t long_gaps = 0;  // gaps > 24 h, each adds one segment split
  };
  std::vector<PerBuilding> buildings;
};

struct SynthResult {
  std::vector<RawSeries> series;
  WeatherSchema schema;
  HolidayCalendar holidays;
  SynthTruth truth;
};

// Heat demand = building scale * (base + slope * heating degree) * daily
// usage shape * weekly factor + noise, driven by a sinusoidal annual
// temperature with a diurnal cycle. Injected spikes and gaps exercise the
// cleaning path; their positions are recorded as ground truth.
inline SynthResult synthesize_corpus(const SynthSpec& spec) {
  if (spec.n_buildings < 1) throw DataError("synthesize_corpus: need at least one building");
  if (spec.days < 2) throw DataError("synthesize_corpus: need at least two days");
  if (spec.weather_channels < 1 || spec.weather_channels > 10)
    throw DataError("synthesize_corpus: weather_channels must be in [1,10]");

  SynthResult result;
  const char* names[10] = {"temp", "rhum", "wspd", "prcp", "pres", "dwpt", "snow", "wdir", "wpgt",
                           "tsun"};
  for (int c = 0; c < spec.weather_channels; ++c) result.schema.channels.push_back(names[c]);

  const HourStamp start = timeutil::days_from_civil(2021, 1, 1) * 24;
  const std::int64_t start_day = timeutil::day_of(start);
  const std::size_t n = static_cast<std::size_t>(spec.days) * 24;

  // fixed-date holidays for every year the corpus can touch
  for (int year = 2021; year <= 2021 + spec.days / 365 + 1; ++year)
    for (auto [m, d] : {std::pair{1u, 1u}, {5u, 1u}, {10u, 3u}, {12u, 25u}, {12u, 26u}})
      result.holidays.regions["DE"].insert(timeutil::days_from_civil(year, m, d));

  result.truth.buildings.resize(static_cast<std::size_t>(spec.n_buildings));
  for (int b = 0; b < spec.n_buildings; ++b) {
    Rng rng = Rng::derive(spec.seed, static_cast<std::uint64_t>(b));
    RawSeries s;
    s.meta.building_id = "B" + std::to_string(b);
    s.meta.heated_area_m2 = rng.uniform(500.0, 2800.0);
    s.meta.num_apartments = rng.uniform_int(4, 40);
    s.meta.heating_type = (b % 2 == 0) ? HeatingType::Gas : HeatingType::DistrictHeat;
    s.meta.holiday_region = "DE";
    s.start = start;
    s.consumption.resize(n);
    s.weather.assign(result.schema.channels.size(), std::vector<double>(n));

    const double amp = 2.0 + s.meta.heated_area_m2 / 400.0 + s.meta.num_apartments / 8.0;
    const double slope = rng.uniform(0.7, 1.1);
    const double phase = rng.uniform(-1.0, 1.0);
    auto& truth = result.truth.buildings[static_cast<std::size_t>(b)];

    std::vector<double> extra(result.schema.channels.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const HourStamp h = start + static_cast<HourStamp>(i);
      const double doy = static_cast<double>((timeutil::day_of(h) - start_day) % 365);
      const double hod = static_cast<double>(timeutil::hour_of_day(h));
      const double two_pi = 6.283185307179586;

      const double temp = 8.0 - 11.0 * std::cos(two_pi * (doy - 20.0) / 365.25) +
                          5.0 * std::sin(two_pi * (hod - 14.0) / 24.0 + phase) +
                          rng.normal(0.0, 1.2);
      s.weather[0][i] = temp;
      if (s.weather.size() > 1)
        s.weather[1][i] = std::clamp(78.0 - 1.1 * (temp - 8.0) + rng.normal(0.0, 6.0), 15.0, 100.0);
      if (s.weather.size() > 2) s.weather[2][i] = std::abs(rng.normal(3.2, 1.8));
      for (std::size_t c = 3; c < s.weather.size(); ++c) {
        extra[c] = 0.95 * extra[c] + rng.normal(0.0, 0.3);
        s.weather[c][i] = extra[c];
      }

      auto bump = [](double x, double mu, double w) {
        const double d = x - mu;
        return std::exp(-d * d / (2.0 * w * w));
      };
      double usage = 0.55 + 0.50 * bump(hod, 7.0, 2.8) + 0.65 * bump(hod, 19.0, 3.2);
      const unsigned wd = timeutil::weekday_of(h);
      if (wd >= 5) usage *= 1.12;
      if (result.holidays.regions["DE"].count(timeutil::day_of(h))) usage *= 1.2;

      const double heating = std::max(0.0, 16.0 - temp) / 20.0;
      double demand = amp * (0.25 + slope * heating) * usage + rng.normal(0.0, 0.03 * amp + 0.05);
      demand = std::max(demand, 0.05);

      if (rng.uniform() < 0.0015) {
        demand *= rng.uniform(8.0, 20.0);  // connection-error spike
        ++truth.injected_outliers;
      }
      s.consumption[i] = demand;
    }

    // short gaps everywhere; one 30-hour gap in building 0 to force a split
    auto inject_gap = [&s](std::size_t at, std::size_t len) {
      for (std::size_t i = at; i < std::min(at + len, s.length()); ++i)
        s.consumption[i] = std::numeric_limits<double>::quiet_NaN();
    };
    for (int g = 0; g < 2; ++g) {
      const std::size_t len = static_cast<std::size_t>(rng.uniform_int(2, 12));
      const std::size_t at = static_cast<std::size_t>(rng.uniform_int(48, static_cast<int>(n) - 96));
      inject_gap(at, len);
      ++truth.short_gaps;
    }
    if (b == 0) {
      inject_gap(static_cast<std::size_t>(0.45 * static_cast<double>(n)), 30);
      ++truth.long_gaps;
    }

    result.series.push_back(std::move(s));
  }
  return result;
}

}  // namespace heatbench
