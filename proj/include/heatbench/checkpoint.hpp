#pragma once

// Model checkpoints: a JSON manifest (<base>.json) describing the spec,
// training provenance and parameter table, next to a raw buffer
// (<base>.bin) holding every parameter concatenated as little-endian
// float64 in manifest order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatbench/errors.hpp"
#include "heatbench/models.hpp"
#include "heatbench/train.hpp"

namespace heatbench {

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"n_in", s.n_in},
                     {"n_out", s.n_out},
                     {"hidden", s.hidden},
                     {"heads", s.heads},
                     {"blocks", s.blocks},
                     {"dropout", s.dropout},
                     {"conv_kernel", s.conv_kernel},
                     {"n_c", s.n_c},
                     {"n_s", s.n_s}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.kind = model_kind_from(j.at("kind").get<std::string>());
  s.n_in = j.at("n_in").get<std::size_t>();
  s.n_out = j.at("n_out").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::size_t>();
  s.heads = j.at("heads").get<std::size_t>();
  s.blocks = j.at("blocks").get<std::size_t>();
  s.dropout = j.at("dropout").get<double>();
  s.conv_kernel = j.at("conv_kernel").get<std::size_t>();
  s.n_c = j.at("n_c").get<std::size_t>();
  s.n_s = j.at("n_s").get<std::size_t>();
}

struct Checkpoint {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double total_seconds = 0.0;
  std::vector<NamedParam> params;
};

namespace detail_ckpt {

static_assert(sizeof(double) == 8);

inline void write_doubles(std::ofstream& out, std::span<const double> vals) {
  // x86-64 is little-endian; the format pins that byte order
  out.write(reinterpret_cast<const char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
}

}  // namespace detail_ckpt

inline void save_checkpoint(const std::string& base_path, const TrainedModel& trained) {
  nlohmann::json manifest;
  manifest["format"] = "heatbench-checkpoint-v1";
  manifest["spec"] = trained.spec;
  manifest["seed"] = trained.seed;
  manifest["epochs"] = trained.epochs_run();
  manifest["best_epoch"] = trained.best_epoch;
  manifest["best_val_loss"] = trained.best_val_loss;
  manifest["total_seconds"] = trained.total_seconds;

  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : trained.parameters) {
    params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
    offset += p.tensor.size();
  }
  manifest["params"] = params;
  manifest["total_values"] = offset;

  std::ofstream jf(base_path + ".json");
  if (!jf) throw DataError("cannot write " + base_path + ".json");
  jf << manifest.dump(2) << '\n';

  std::ofstream bf(base_path + ".bin", std::ios::binary);
  if (!bf) throw DataError("cannot write " + base_path + ".bin");
  for (const auto& p : trained.parameters) detail_ckpt::write_doubles(bf, p.tensor.values());
}

inline Checkpoint load_checkpoint(const std::string& base_path) {
  std::ifstream jf(base_path + ".json");
  if (!jf) throw DataError("missing checkpoint " + base_path + ".json");
  nlohmann::json manifest = nlohmann::json::parse(jf);
  if (manifest.value("format", "") != "heatbench-checkpoint-v1")
    throw DataError(base_path + ".json: not a heatbench checkpoint");

  Checkpoint ckpt;
  ckpt.spec = manifest.at("spec").get<ModelSpec>();
  ckpt.seed = manifest.at("seed").get<std::uint64_t>();
  ckpt.epochs = manifest.at("epochs").get<std::size_t>();
  ckpt.best_epoch = manifest.at("best_epoch").get<std::size_t>();
  ckpt.best_val_loss = manifest.at("best_val_loss").get<double>();
  ckpt.total_seconds = manifest.at("total_seconds").get<double>();

  std::ifstream bf(base_path + ".bin", std::ios::binary);
  if (!bf) throw DataError("missing checkpoint " + base_path + ".bin");
  std::vector<char> bytes((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
  const std::size_t total = manifest.at("total_values").get<std::size_t>();
  if (bytes.size() != total * sizeof(double))
    throw DataError(base_path + ".bin: expected " + std::to_string(total * sizeof(double)) +
                    " bytes, found " + std::to_string(bytes.size()));

  for (const auto& item : manifest.at("params")) {
    const std::string name = item.at("name").get<std::string>();
    const Shape shape = item.at("shape").get<Shape>();
    const std::size_t offset = item.at("offset").get<std::size_t>();
    const std::size_t n = detail::shape_numel(shape);
    if ((offset + n) * sizeof(double) > bytes.size())
      throw DataError(base_path + ": parameter " + name + " overruns the buffer");
    std::vector<double> vals(n);
    std::memcpy(vals.data(), bytes.data() + offset * sizeof(double), n * sizeof(double));
    ckpt.params.push_back({name, Tensor::from(shape, std::move(vals))});
  }
  return ckpt;
}

// Rebuilds the architecture from the stored spec and installs the stored
// parameter values.
inline std::unique_ptr<Forecaster> restore_model(const Checkpoint& ckpt) {
  auto model = make_forecaster(ckpt.spec, ckpt.seed);
  auto& params = model->parameters();
  if (params.size() != ckpt.params.size())
    throw DataError("checkpoint parameter table does not match the architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != ckpt.params[i].name ||
        params[i].tensor.shape() != ckpt.params[i].tensor.shape())
      throw DataError("checkpoint parameter " + ckpt.params[i].name + " does not match the plan");
    auto dst = params[i].tensor.mutable_values();
    const auto src = ckpt.params[i].tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return model;
}

}  // namespace heatbench
