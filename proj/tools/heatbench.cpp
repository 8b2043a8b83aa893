// heatbench: multi-building heat-demand forecasting benchmark.
//
//   heatbench synth      --config cfg.json [--out dir]
//   heatbench preprocess --config cfg.json [--out dir]
//   heatbench train      --config cfg.json [--model fcn] [--horizon 3] [--seeds 1,2,3]
//   heatbench evaluate   --config cfg.json [--out dir]
//   heatbench sweep      --config cfg.json [--out dir]
//
// Flags override config keys. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 training failure.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heatbench/commands.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) seeds.push_back(std::stoull(cur));
      cur.clear();
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    } else {
      throw heatbench::UsageError("bad --seeds list '" + s + "'");
    }
  }
  if (seeds.empty()) throw heatbench::UsageError("--seeds list is empty");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace heatbench;

  CLI::App app{"multi-building heat-demand forecasting benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string model_flag, seeds_flag, out_flag;
  int horizon_flag = 0, feature_config_flag = 0;

  app.add_option("--config", config_path, "run configuration JSON");
  app.add_option("--model", model_flag, "naive|fcn|lstm|xlstm|te");
  app.add_option("--horizon", horizon_flag, "forecast horizon in hours (3 or 24)");
  app.add_option("--feature-config", feature_config_flag,
                 "1 = past only, 2 = no building attrs, 3 = all features");
  app.add_option("--seeds", seeds_flag, "comma-separated training seeds");
  app.add_option("--out", out_flag, "output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus as CSV files");
  auto* preprocess = app.add_subcommand("preprocess", "clean, split, feature-engineer, standardize");
  auto* train_cmd = app.add_subcommand("train", "train one model across seeds");
  auto* evaluate = app.add_subcommand("evaluate", "compute the metric and resource reports");
  auto* sweep_cmd = app.add_subcommand("sweep", "grid/random hyperparameter search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!model_flag.empty()) config.model = model_kind_from(model_flag);
    if (horizon_flag != 0) {
      if (horizon_flag != 3 && horizon_flag != 24) throw UsageError("--horizon must be 3 or 24");
      config.window.n_out = static_cast<std::size_t>(horizon_flag);
      if (config.window.n_future > config.window.n_out) config.window.n_future = 0;
    }
    if (feature_config_flag != 0)
      config.window.feature_config = feature_config_from(feature_config_flag);
    if (!seeds_flag.empty()) config.seeds = parse_seed_list(seeds_flag);
    if (!out_flag.empty()) config.out_dir = out_flag;

    if (synth->parsed()) {
      const std::string dir = cmd_synth(config);
      std::printf("synthetic corpus written to %s\n", dir.c_str());
    } else if (preprocess->parsed()) {
      PreprocessResult result = cmd_preprocess(config);
      std::printf("preprocessed %zu series into %zu segments under %s\n", result.reports.size(),
                  result.frames.size(), config.out_dir.c_str());
      for (const auto& w : result.warnings) std::printf("warning: %s\n", w.c_str());
    } else if (train_cmd->parsed()) {
      TrainOutcome outcome = cmd_train(config);
      std::printf("trained %zu checkpoint(s)\n", outcome.checkpoint_bases.size());
      for (const auto& f : outcome.failures) std::printf("failed: %s\n", f.c_str());
    } else if (evaluate->parsed()) {
      EvaluateOutcome outcome = cmd_evaluate(config);
      std::printf("%-8s %10s %10s %12s %10s\n", "model", "nRMSE", "RMSE", "MSE", "MAE");
      for (const auto& ev : outcome.models)
        std::printf("%-8s %10.4f %10.4f %12.4f %10.4f\n", ev.model.c_str(), ev.mean.nrmse,
                    ev.mean.rmse, ev.mean.mse, ev.mean.mae);
      std::printf("reports under %s/evaluation\n", config.out_dir.c_str());
    } else if (sweep_cmd->parsed()) {
      auto results = cmd_sweep(config);
      std::size_t ok = 0;
      for (const auto& r : results) ok += r.ok ? 1 : 0;
      std::printf("sweep finished: %zu/%zu trials ok; table under %s/sweep/trials.csv\n", ok,
                  results.size(), config.out_dir.c_str());
      if (ok > 0)
        std::printf("best: hidden=%zu dropout=%.3g batch=%zu val_rmse=%.4f kWh\n",
                    results[0].spec.hidden, results[0].spec.dropout, results[0].config.batch_size,
                    results[0].val_rmse);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const TrainError& e) {
    std::fprintf(stderr, "training failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const TensorError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  }
  return 0;
}
