#pragma once

// Optimizer and training loop. One call to train() is one isolated,
// single-threaded, fully seeded run: the corpus seed, the init seed and the
// shuffle seed determine the loss curve bit for bit.

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "heatbench/errors.hpp"
#include "heatbench/metrics.hpp"
#include "heatbench/models.hpp"
#include "heatbench/rng.hpp"
#include "heatbench/tensor.hpp"
#include "heatbench/windowing.hpp"

namespace heatbench {

struct EarlyStop {
  std::size_t patience = 5;
  double min_delta = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double learning_rate = 0.001;
  std::uint64_t seed = 1;
  bool shuffle_train = true;
  std::optional<EarlyStop> early_stop;  // off by default: fixed-epoch training

  void validate() const {
    if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw UsageError("TrainConfig: epochs must be >= 1");
    if (learning_rate <= 0.0) throw UsageError("TrainConfig: learning_rate must be > 0");
  }
};

// Adam with bias correction (defaults beta1=0.9, beta2=0.999, eps=1e-8).
// State advances on every step; a zero gradient on a fresh state leaves the
// parameter untouched.
class Adam {
 public:
  explicit Adam(double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  std::size_t t() const { return t_; }

  void step(std::vector<NamedParam>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw TensorError("adam: parameter list changed size");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto vals = params[i].tensor.mutable_values();
      if (m_[i].size() != vals.size()) throw TensorError("adam: shape mismatch for " + params[i].name);
      const bool has_grad = params[i].tensor.has_grad();
      std::span<const double> g;
      if (has_grad) g = params[i].tensor.grad();
      for (std::size_t j = 0; j < vals.size(); ++j) {
        const double gj = has_grad ? g[j] : 0.0;
        m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * gj;
        v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * gj * gj;
        const double mhat = m_[i][j] / c1;
        const double vhat = v_[i][j] / c2;
        vals[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------

struct EpochStats {
  double train_loss = 0.0;  // pooled MSE on standardized targets
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<NamedParam> parameters;  // best-validation snapshot
  std::uint64_t seed = 0;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;  // 0-based index into curve
  double best_val_loss = std::numeric_limits<double>::infinity();
  double total_seconds = 0.0;

  std::size_t epochs_run() const { return curve.size(); }
  double seconds_per_epoch() const {
    return curve.empty() ? 0.0 : total_seconds / static_cast<double>(curve.size());
  }
};

// Pooled MSE over a dataset in eval mode.
inline double evaluate_loss(Forecaster& model, const WindowedDataset& ds,
                            std::size_t eval_batch = 256) {
  if (ds.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> idx(ds.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  double acc = 0.0;
  for (std::size_t from = 0; from < idx.size(); from += eval_batch) {
    const std::size_t n = std::min(eval_batch, idx.size() - from);
    std::span<const std::size_t> batch(idx.data() + from, n);
    Tensor pred = model.forward(ds.x_batch(batch), false, nullptr);
    Tensor loss = mse_loss(pred, ds.y_batch(batch));
    acc += loss.item() * static_cast<double>(n);
  }
  return acc / static_cast<double>(ds.rows());
}

namespace detail_train {

inline std::vector<NamedParam> snapshot(const std::vector<NamedParam>& params) {
  std::vector<NamedParam> out;
  out.reserve(params.size());
  for (const auto& p : params)
    out.push_back({p.name, Tensor::from(p.tensor.shape(),
                                        std::vector<double>(p.tensor.values().begin(),
                                                            p.tensor.values().end()))});
  return out;
}

inline void restore(std::vector<NamedParam>& params, const std::vector<NamedParam>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    const auto src = snap[i].tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace detail_train

// Mini-batch training with seeded shuffling; dropout is active on training
// batches and disabled for validation. The parameters with the lowest
// validation loss are restored into the model and returned. Validation
// falls back to the training loss when the validation split is empty.
inline TrainedModel train(Forecaster& model, const WindowedDataset& train_ds,
                          const WindowedDataset& val_ds, const TrainConfig& cfg) {
  cfg.validate();
  if (train_ds.rows() == 0) throw TrainError("train: empty training set");
  if ((model.input_layout() == Layout::Flat) != (train_ds.layout == Layout::Flat))
    throw TrainError("train: dataset layout does not match the model");

  TrainedModel result;
  result.spec = model.spec();
  result.seed = cfg.seed;

  Adam adam(cfg.learning_rate);
  std::vector<std::size_t> order(train_ds.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t since_improve = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    if (cfg.shuffle_train) {
      Rng shuffle_rng = Rng::derive(cfg.seed, 0x5u + epoch);
      shuffle_rng.shuffle(order);
    }
    Rng dropout_rng = Rng::derive(cfg.seed, 0xD0u + epoch);

    double epoch_loss = 0.0;
    for (std::size_t from = 0, batch_index = 0; from < order.size();
         from += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - from);
      std::span<const std::size_t> batch(order.data() + from, n);
      try {
        Tape tape;
        Tensor pred = model.forward(train_ds.x_batch(batch), true, &dropout_rng);
        Tensor loss = mse_loss(pred, train_ds.y_batch(batch));
        if (!std::isfinite(loss.item()))
          throw TensorError("mse_loss: non-finite value produced");
        epoch_loss += loss.item() * static_cast<double>(n);
        backward(loss, tape);
      } catch (const TensorError& e) {
        throw TrainError("epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch_index) + ": " + e.what());
      }
      adam.step(model.parameters());
      model.zero_grad();
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val_loss =
        val_ds.rows() > 0 ? evaluate_loss(model, val_ds) : epoch_loss;
    const auto toc = std::chrono::steady_clock::now();

    EpochStats stats;
    stats.train_loss = epoch_loss;
    stats.val_loss = val_loss;
    stats.seconds = std::chrono::duration<double>(toc - tic).count();
    result.curve.push_back(stats);
    result.total_seconds += stats.seconds;

    const double delta = cfg.early_stop ? cfg.early_stop->min_delta : 0.0;
    if (val_loss < result.best_val_loss - delta || result.parameters.empty()) {
      result.best_val_loss = std::min(result.best_val_loss, val_loss);
      result.best_epoch = epoch;
      result.parameters = detail_train::snapshot(model.parameters());
      since_improve = 0;
    } else {
      ++since_improve;
      if (cfg.early_stop && since_improve >= cfg.early_stop->patience) break;
    }
  }

  detail_train::restore(model.parameters(), result.parameters);
  return result;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep (seeded grid or random search). This replaces the
// externally hosted Bayesian search; the objective is the same: validation
// RMSE in kWh.

struct SweepAxes {
  std::vector<std::size_t> batch_size;
  std::vector<std::size_t> epochs;
  std::vector<std::size_t> hidden;
  std::vector<std::size_t> heads;
  std::vector<std::size_t> n_in;
  std::vector<std::size_t> n_future;
  std::vector<double> dropout;
};

struct SweepSpec {
  enum class Mode { Grid, Random };
  Mode mode = Mode::Grid;
  SweepAxes axes;
  std::size_t budget = 0;  // grid: 0 = every point; random: number of draws
  std::uint64_t master_seed = 1;
};

struct TrialResult {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  ModelSpec spec;
  WindowSpec window;
  TrainConfig config;
  double val_rmse = std::numeric_limits<double>::quiet_NaN();
  double val_mae = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct SweepContext {
  const std::vector<FeatureFrame>* frames = nullptr;  // standardized
  const std::map<std::string, SeriesStats>* stats = nullptr;
  ModelSpec base_spec;
  WindowSpec base_window;
  TrainConfig base_train;
};

namespace detail_train {

struct TrialPoint {
  std::size_t batch_size, epochs, hidden, heads, n_in, n_future;
  double dropout;
};

template <class T>
const std::vector<T>& axis_or(const std::vector<T>& axis, const std::vector<T>& fallback) {
  return axis.empty() ? fallback : axis;
}

}  // namespace detail_train

inline std::vector<TrialResult> sweep(const SweepContext& ctx, const SweepSpec& spec) {
  if (!ctx.frames || !ctx.stats) throw UsageError("sweep: missing data context");
  using detail_train::TrialPoint;

  const std::vector<std::size_t> base_batch{ctx.base_train.batch_size};
  const std::vector<std::size_t> base_epochs{ctx.base_train.epochs};
  const std::vector<std::size_t> base_hidden{ctx.base_spec.hidden};
  const std::vector<std::size_t> base_heads{ctx.base_spec.heads};
  const std::vector<std::size_t> base_nin{ctx.base_window.n_in};
  const std::vector<std::size_t> base_nfut{ctx.base_window.n_future};
  const std::vector<double> base_drop{ctx.base_spec.dropout};

  const auto& ax_batch = detail_train::axis_or(spec.axes.batch_size, base_batch);
  const auto& ax_epochs = detail_train::axis_or(spec.axes.epochs, base_epochs);
  const auto& ax_hidden = detail_train::axis_or(spec.axes.hidden, base_hidden);
  const auto& ax_heads = detail_train::axis_or(spec.axes.heads, base_heads);
  const auto& ax_nin = detail_train::axis_or(spec.axes.n_in, base_nin);
  const auto& ax_nfut = detail_train::axis_or(spec.axes.n_future, base_nfut);
  const auto& ax_drop = detail_train::axis_or(spec.axes.dropout, base_drop);

  std::vector<TrialPoint> points;
  if (spec.mode == SweepSpec::Mode::Grid) {
    for (auto b : ax_batch)
      for (auto e : ax_epochs)
        for (auto h : ax_hidden)
          for (auto hd : ax_heads)
            for (auto ni : ax_nin)
              for (auto nf : ax_nfut)
                for (auto dr : ax_drop) points.push_back({b, e, h, hd, ni, nf, dr});
    if (spec.budget > 0 && points.size() > spec.budget) points.resize(spec.budget);
  } else {
    if (spec.budget < 1) throw UsageError("sweep: random mode needs budget >= 1");
    for (std::size_t i = 0; i < spec.budget; ++i) {
      Rng rng = Rng::derive(spec.master_seed, 0x5EED + i);
      auto pick_sz = [&rng](const std::vector<std::size_t>& v) {
        return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.size()) - 1))];
      };
      auto pick_d = [&rng](const std::vector<double>& v) {
        return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(v.size()) - 1))];
      };
      points.push_back({pick_sz(ax_batch), pick_sz(ax_epochs), pick_sz(ax_hidden),
                        pick_sz(ax_heads), pick_sz(ax_nin), pick_sz(ax_nfut), pick_d(ax_drop)});
    }
  }

  std::vector<TrialResult> results;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    TrialResult r;
    r.index = i;
    r.spec = ctx.base_spec;
    r.spec.hidden = pt.hidden;
    r.spec.heads = pt.heads;
    r.spec.dropout = pt.dropout;
    r.spec.n_in = pt.n_in;
    r.window = ctx.base_window;
    r.window.n_in = pt.n_in;
    r.window.n_future = pt.n_future;
    r.config = ctx.base_train;
    r.config.batch_size = pt.batch_size;
    r.config.epochs = pt.epochs;
    r.config.seed = Rng::derive(spec.master_seed, 0xA110C + i).next_u64();

    const auto tic = std::chrono::steady_clock::now();
    try {
      const Layout layout =
          r.spec.kind == ModelKind::Fcn ? Layout::Flat : Layout::Sequential;
      SplitWindows split = build_split_datasets(*ctx.frames, r.window, layout);
      auto model = make_forecaster(r.spec, r.config.seed);
      train(*model, split.train, split.val, r.config);
      if (split.val.rows() > 0) {
        ForecastSet val = make_forecasts(*model, split.val, *ctx.stats);
        r.val_rmse = rmse(val);
        r.val_mae = mae(val);
      } else {
        ForecastSet tr = make_forecasts(*model, split.train, *ctx.stats);
        r.val_rmse = rmse(tr);
        r.val_mae = mae(tr);
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    results.push_back(std::move(r));
  }

  std::stable_sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.ok != b.ok) return a.ok;
    return a.val_rmse < b.val_rmse;
  });
  return results;
}

}  // namespace heatbench
