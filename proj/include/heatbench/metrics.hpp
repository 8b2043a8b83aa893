#pragma once

// The evaluation metric suite. Forecasts are de-standardized back to kWh
// before any metric is computed; errors are pooled over all (window, step)
// pairs unless a view says otherwise.
//
//   MSE   mean squared error (kWh^2)
//   RMSE  sqrt(MSE) (kWh)
//   MAE   mean absolute error (kWh)
//   nRMSE RMSE / (max(y) - min(y)) over the pooled true values
//   per-step RMSE: one value per horizon offset
//   NRSE  per window: sqrt(mean over horizon of squared error) divided by
//         the series' mean test consumption
//   seed CI: t-distribution mean +- quantile * s / sqrt(n)
//
// MAPE is deliberately absent: heat consumption hits zero in warm periods.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "heatbench/data.hpp"
#include "heatbench/errors.hpp"
#include "heatbench/models.hpp"
#include "heatbench/windowing.hpp"

namespace heatbench {

struct ForecastRow {
  std::string series_id;
  HourStamp window_start = 0;
  std::vector<double> y_true;  // kWh, length n_out
  std::vector<double> y_pred;  // kWh
};

struct ForecastSet {
  std::size_t n_out = 0;
  std::vector<ForecastRow> rows;

  void check_nonempty() const {
    if (rows.empty()) throw DataError("forecast set is empty");
  }
};

inline std::string building_of(const std::string& series_id) {
  const auto pos = series_id.find('#');
  return pos == std::string::npos ? series_id : series_id.substr(0, pos);
}

// Runs the model over a dataset in eval mode and de-standardizes predictions
// and targets with the emitting series' stored transform.
inline ForecastSet make_forecasts(Forecaster& model, const WindowedDataset& ds,
                                  const std::map<std::string, SeriesStats>& stats,
                                  std::size_t eval_batch = 256) {
  ForecastSet out;
  out.n_out = ds.n_out;
  if (ds.rows() == 0) return out;
  std::vector<std::size_t> idx(ds.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  for (std::size_t from = 0; from < idx.size(); from += eval_batch) {
    const std::size_t n = std::min(eval_batch, idx.size() - from);
    std::span<const std::size_t> batch(idx.data() + from, n);
    Tensor x = ds.x_batch(batch);
    Tensor pred = model.forward(x, false, nullptr);
    Tensor truth = ds.y_batch(batch);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& prov = ds.provenance[from + i];
      const auto it = stats.find(building_of(prov.series_id));
      if (it == stats.end())
        throw DataError("no standardization stats for series " + prov.series_id);
      const ColumnTransform& tr = it->second.consumption;
      ForecastRow row;
      row.series_id = prov.series_id;
      row.window_start = prov.window_start;
      row.y_true.resize(ds.n_out);
      row.y_pred.resize(ds.n_out);
      for (std::size_t t = 0; t < ds.n_out; ++t) {
        row.y_true[t] = tr.invert(truth.values()[i * ds.n_out + t]);
        row.y_pred[t] = tr.invert(pred.values()[i * ds.n_out + t]);
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooled metrics

inline double mse(const ForecastSet& f) {
  f.check_nonempty();
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& row : f.rows)
    for (std::size_t t = 0; t < f.n_out; ++t) {
      const double e = row.y_true[t] - row.y_pred[t];
      acc += e * e;
      ++n;
    }
  return acc / static_cast<double>(n);
}

inline double rmse(const ForecastSet& f) { return std::sqrt(mse(f)); }

inline double mae(const ForecastSet& f) {
  f.check_nonempty();
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& row : f.rows)
    for (std::size_t t = 0; t < f.n_out; ++t) {
      acc += std::abs(row.y_true[t] - row.y_pred[t]);
      ++n;
    }
  return acc / static_cast<double>(n);
}

// RMSE normalized by the range of the pooled true values.
inline double nrmse(const ForecastSet& f) {
  f.check_nonempty();
  double lo = f.rows[0].y_true[0], hi = lo;
  for (const auto& row : f.rows)
    for (double v : row.y_true) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi <= lo) throw DataError("nrmse: zero range in true values");
  return rmse(f) / (hi - lo);
}

inline std::vector<double> per_step_rmse(const ForecastSet& f) {
  f.check_nonempty();
  for (const auto& row : f.rows)
    if (row.y_true.size() != f.n_out || row.y_pred.size() != f.n_out)
      throw DataError("per_step_rmse: ragged horizons");
  std::vector<double> acc(f.n_out, 0.0);
  for (const auto& row : f.rows)
    for (std::size_t t = 0; t < f.n_out; ++t) {
      const double e = row.y_true[t] - row.y_pred[t];
      acc[t] += e * e;
    }
  for (double& v : acc) v = std::sqrt(v / static_cast<double>(f.rows.size()));
  return acc;
}

// Mean test-set consumption per series, the NRSE normalizer.
inline std::map<std::string, double> test_mean_consumption(const ForecastSet& f) {
  std::map<std::string, double> sum;
  std::map<std::string, std::size_t> count;
  for (const auto& row : f.rows)
    for (double v : row.y_true) {
      sum[row.series_id] += v;
      count[row.series_id] += 1;
    }
  for (auto& [k, v] : sum) v /= static_cast<double>(count[k]);
  return sum;
}

// One NRSE value per forecast window, grouped by series.
inline std::map<std::string, std::vector<double>> per_building_nrse(
    const ForecastSet& f, const std::map<std::string, double>& test_means) {
  f.check_nonempty();
  std::map<std::string, std::vector<double>> out;
  for (const auto& row : f.rows) {
    const auto it = test_means.find(row.series_id);
    if (it == test_means.end())
      throw DataError("per_building_nrse: no test mean for " + row.series_id);
    if (it->second <= 0.0)
      throw DataError("per_building_nrse: non-positive mean consumption for " + row.series_id);
    double acc = 0.0;
    for (std::size_t t = 0; t < f.n_out; ++t) {
      const double e = row.y_true[t] - row.y_pred[t];
      acc += e * e;
    }
    const double rse = std::sqrt(acc / static_cast<double>(f.n_out));
    out[row.series_id].push_back(rse / it->second);
  }
  return out;
}

inline std::map<std::string, std::vector<double>> per_building_nrse(const ForecastSet& f) {
  return per_building_nrse(f, test_mean_consumption(f));
}

// ---------------------------------------------------------------------------
// Across-seed confidence intervals

struct CiResult {
  double mean = 0.0;
  double half_width = 0.0;
  bool defined = false;  // needs >= 2 seeds
  std::size_t n = 0;
};

inline CiResult seed_ci(const std::vector<double>& values, double level = 0.95) {
  if (values.empty()) throw DataError("seed_ci: no values");
  CiResult r;
  r.n = values.size();
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;  // mean only, CI undefined

  double var = 0.0;
  for (double v : values) var += (v - r.mean) * (v - r.mean);
  var /= static_cast<double>(values.size() - 1);  // sample variance
  const double s = std::sqrt(var);
  boost::math::students_t dist(static_cast<double>(values.size() - 1));
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  r.half_width = q * s / std::sqrt(static_cast<double>(values.size()));
  r.defined = true;
  return r;
}

// ---------------------------------------------------------------------------
// Aggregate report

struct OverallMetrics {
  double mse = 0.0, rmse = 0.0, mae = 0.0, nrmse = 0.0;
};

struct EvaluationReport {
  std::string model;
  OverallMetrics overall;
  std::vector<double> per_step;                            // RMSE per horizon offset
  std::map<std::string, std::vector<double>> nrse;         // series -> window NRSEs
  std::map<std::string, double> test_means;                // series -> mean kWh
};

inline EvaluationReport build_evaluation_report(const std::string& model_name,
                                                const ForecastSet& f) {
  EvaluationReport rep;
  rep.model = model_name;
  rep.overall.mse = mse(f);
  rep.overall.rmse = rmse(f);
  rep.overall.mae = mae(f);
  rep.overall.nrmse = nrmse(f);
  rep.per_step = per_step_rmse(f);
  rep.test_means = test_mean_consumption(f);
  rep.nrse = per_building_nrse(f, rep.test_means);
  return rep;
}

}  // namespace heatbench
