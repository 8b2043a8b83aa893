#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "heatbench/models.hpp"
#include "testutil.hpp"

using namespace heatbench;
using testutil::max_rel_grad_error;
using testutil::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

ModelSpec toy_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.n_out = 2;
  s.dropout = 0.0;
  switch (kind) {
    case ModelKind::Naive:
      s.n_in = 4;
      break;
    case ModelKind::Fcn:
      s.n_in = 6;
      s.hidden = 5;
      s.n_c = 1;
      s.n_s = 1;
      break;
    case ModelKind::Lstm:
      s.n_in = 5;
      s.hidden = 4;
      s.n_c = 1;
      break;
    case ModelKind::Xlstm:
      s.n_in = 4;
      s.hidden = 8;
      s.heads = 2;
      s.blocks = 1;
      s.conv_kernel = 4;
      s.n_c = 1;
      s.n_s = 1;
      break;
    case ModelKind::Te:
      s.n_in = 4;
      s.hidden = 8;
      s.heads = 2;
      s.blocks = 2;
      s.n_c = 1;
      break;
  }
  return s;
}

Tensor model_input(const ModelSpec& spec, Rng& rng, std::size_t batch = 3) {
  if (spec.kind == ModelKind::Fcn) return random_tensor({batch, spec.flat_width()}, rng);
  return random_tensor({batch, spec.n_in, spec.seq_features()}, rng);
}

double model_grad_error(ModelKind kind, std::uint64_t seed) {
  ModelSpec spec = toy_spec(kind);
  auto model = make_forecaster(spec, seed);
  Rng rng(seed ^ 0xABCD);
  Tensor x = model_input(spec, rng);
  Tensor target = random_tensor({x.dim(0), spec.n_out}, rng);
  std::vector<Tensor> params;
  for (auto& np : model->parameters()) params.push_back(np.tensor);
  return max_rel_grad_error(params, [&] { return mse_loss(model->forward(x), target); });
}

}  // namespace

TEST_CASE("naive forecast copies the most recent observations") {
  ModelSpec spec = toy_spec(ModelKind::Naive);
  spec.n_in = 3;
  spec.n_out = 3;
  NaiveForecaster naive(spec);

  // one batch row, consumption channel carries 5,6,7
  Tensor x = Tensor::from({1, 3, 1}, {5, 6, 7});
  Tensor y = naive.forward(x);
  REQUIRE(y.shape() == Shape{1, 3});
  CHECK(y.values()[0] == 5.0);
  CHECK(y.values()[1] == 6.0);
  CHECK(y.values()[2] == 7.0);

  // constant history forecasts the constant
  Tensor xc = Tensor::full({2, 3, 1}, 4.2);
  Tensor yc = naive.forward(xc);
  for (double v : yc.values()) CHECK(v == 4.2);

  // flat layout: consumption block first, trailing values are the tail
  ModelSpec flat_spec = spec;
  flat_spec.n_in = 5;
  NaiveForecaster naive5(flat_spec);
  Tensor xf = Tensor::from({1, 5}, {1, 2, 3, 4, 5});
  Tensor yf = naive5.forward(xf);
  CHECK(yf.values()[0] == 3.0);
  CHECK(yf.values()[2] == 5.0);
}

TEST_CASE("naive forecast needs enough history") {
  ModelSpec spec;
  spec.kind = ModelKind::Naive;
  spec.n_in = 2;
  spec.n_out = 3;
  CHECK_THROWS_AS(spec.validate(), UsageError);
}

TEST_CASE("fcn collapses to its output bias when weights are zero") {
  ModelSpec spec = toy_spec(ModelKind::Fcn);
  auto model = make_forecaster(spec, 1);
  for (auto& np : model->parameters())
    for (double& v : np.tensor.mutable_values()) v = 0.0;
  Rng rng(2);
  Tensor x = model_input(spec, rng);
  Tensor y = model->forward(x);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("fcn dropout p=0 makes train and eval identical") {
  ModelSpec spec = toy_spec(ModelKind::Fcn);
  spec.dropout = 0.0;
  auto model = make_forecaster(spec, 3);
  Rng rng(4), drop_rng(5);
  Tensor x = model_input(spec, rng);
  Tensor a = model->forward(x, true, &drop_rng);
  Tensor b = model->forward(x, false, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values()[i] == b.values()[i]);
}

TEST_CASE("parameter count anchors") {
  // best published 24-hour FCN: univariate, n_in 38, hidden 131
  ModelSpec fcn;
  fcn.kind = ModelKind::Fcn;
  fcn.n_in = 38;
  fcn.hidden = 131;
  fcn.n_out = 24;
  CHECK(count_parameters(fcn) == 8277);  // 38*131 + 131 + 131*24 + 24

  ModelSpec tiny;
  tiny.kind = ModelKind::Fcn;
  tiny.n_in = 1;
  tiny.hidden = 1;
  tiny.n_out = 1;
  CHECK(count_parameters(tiny) == 4);
}

TEST_CASE("parameter ordering at published scale") {
  const std::size_t n_c = 14, n_s = 3;
  const auto fcn = paper_best_config(ModelKind::Fcn, 24, n_c, n_s);
  const auto lstm = paper_best_config(ModelKind::Lstm, 24, n_c, n_s);
  const auto xlstm = paper_best_config(ModelKind::Xlstm, 24, n_c, n_s);
  const auto te = paper_best_config(ModelKind::Te, 24, n_c, n_s);

  const std::size_t p_fcn = count_parameters(fcn.spec);
  const std::size_t p_lstm = count_parameters(lstm.spec);
  const std::size_t p_xlstm = count_parameters(xlstm.spec);
  const std::size_t p_te = count_parameters(te.spec);

  CHECK(p_fcn == 8277);
  CHECK(p_fcn < p_lstm);
  CHECK(p_lstm < p_xlstm);
  CHECK(p_xlstm < p_te);

  CHECK(std::abs(static_cast<double>(p_xlstm) / 2.1e6 - 1.0) < 0.15);
  CHECK(std::abs(static_cast<double>(p_te) / 3.7e6 - 1.0) < 0.15);
}

TEST_CASE("constructed models match their parameter plan exactly") {
  for (ModelKind kind : {ModelKind::Fcn, ModelKind::Lstm, ModelKind::Xlstm, ModelKind::Te}) {
    ModelSpec spec = toy_spec(kind);
    auto model = make_forecaster(spec, 11);
    CHECK(model->parameter_count() == count_parameters(spec));
    std::size_t audited = 0;
    for (const auto& row : audit_params(*model)) audited += row.count;
    CHECK(audited == count_parameters(spec));
  }
}

TEST_CASE("lstm with zero weights emits its head bias") {
  ModelSpec spec = toy_spec(ModelKind::Lstm);
  auto model = make_forecaster(spec, 1);
  for (auto& np : model->parameters())
    for (double& v : np.tensor.mutable_values()) v = np.name == "head.b" ? 0.5 : 0.0;
  Rng rng(9);
  Tensor x = model_input(spec, rng);
  Tensor y = model->forward(x);
  for (double v : y.values()) CHECK(v == 0.5);
}

TEST_CASE("every trainable model passes the finite-difference suite at toy dims") {
  CHECK(model_grad_error(ModelKind::Fcn, 101) < kGradTol);
  CHECK(model_grad_error(ModelKind::Lstm, 102) < kGradTol);
  CHECK(model_grad_error(ModelKind::Xlstm, 103) < kGradTol);
  CHECK(model_grad_error(ModelKind::Te, 104) < kGradTol);
}

TEST_CASE("model forwards have the contracted output shape and are finite") {
  for (ModelKind kind : {ModelKind::Fcn, ModelKind::Lstm, ModelKind::Xlstm, ModelKind::Te}) {
    ModelSpec spec = toy_spec(kind);
    auto model = make_forecaster(spec, 21);
    Rng rng(22);
    Tensor x = model_input(spec, rng, 4);
    Tensor y = model->forward(x);
    REQUIRE(y.shape() == Shape{4, spec.n_out});
    for (double v : y.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("layout mismatches are rejected") {
  auto fcn = make_forecaster(toy_spec(ModelKind::Fcn), 1);
  auto lstm = make_forecaster(toy_spec(ModelKind::Lstm), 1);
  Rng rng(3);
  Tensor seq = random_tensor({2, 5, 2}, rng);
  Tensor flat = random_tensor({2, 13}, rng);
  CHECK_THROWS_AS(fcn->forward(seq), TensorError);
  CHECK_THROWS_AS(lstm->forward(flat), TensorError);
}

TEST_CASE("eval-mode forward is a pure function") {
  ModelSpec spec = toy_spec(ModelKind::Xlstm);
  spec.dropout = 0.3;  // must not fire at eval
  auto model = make_forecaster(spec, 31);
  Rng rng(32);
  Tensor x = model_input(spec, rng);
  Tensor a = model->forward(x, false, nullptr);
  Tensor b = model->forward(x, false, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values()[i] == b.values()[i]);
}

TEST_CASE("xlstm blocks are causal") {
  ModelSpec spec = toy_spec(ModelKind::Xlstm);
  auto model = make_forecaster(spec, 41);
  auto* xlstm = dynamic_cast<XlstmForecaster*>(model.get());
  REQUIRE(xlstm != nullptr);

  Rng rng(42);
  Tensor x = model_input(spec, rng, 2);
  Tensor base = xlstm->forward_sequence(x);

  const std::size_t t_perturb = 2;
  Tensor x2 = x.clone();
  x2.mutable_values()[(0 * spec.n_in + t_perturb) * spec.seq_features()] += 0.7;
  Tensor moved = xlstm->forward_sequence(x2);

  const std::size_t d = spec.hidden;
  bool later_changed = false;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < spec.n_in; ++t)
      for (std::size_t c = 0; c < d; ++c) {
        const double va = base.values()[(b * spec.n_in + t) * d + c];
        const double vb = moved.values()[(b * spec.n_in + t) * d + c];
        if (t < t_perturb || b != 0) {
          CHECK(va == vb);  // strictly causal and batch-separated
        } else if (va != vb) {
          later_changed = true;
        }
      }
  CHECK(later_changed);
}

TEST_CASE("xlstm stays finite under bounded-input stress") {
  ModelSpec spec = toy_spec(ModelKind::Xlstm);
  auto model = make_forecaster(spec, 51);
  Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({2, spec.n_in, spec.seq_features()}, rng, -10.0, 10.0);
    Tensor y = model->forward(x);  // op-boundary checks throw on any non-finite
    for (double v : y.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("te attention rows sum to one") {
  ModelSpec spec = toy_spec(ModelKind::Te);
  auto model = make_forecaster(spec, 61);
  auto* te = dynamic_cast<TeForecaster*>(model.get());
  REQUIRE(te != nullptr);
  te->set_capture_attention(true);
  Rng rng(62);
  Tensor x = model_input(spec, rng);
  te->forward(x);
  REQUIRE(te->last_attention().size() == spec.blocks);
  for (const Tensor& att : te->last_attention()) {
    const std::size_t T = att.dim(1);
    for (std::size_t r = 0; r < att.dim(0) * T; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < T; ++c) s += att.values()[r * T + c];
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("te with zeroed positional embedding is permutation invariant") {
  ModelSpec spec = toy_spec(ModelKind::Te);
  auto model = make_forecaster(spec, 71);
  for (auto& np : model->parameters())
    if (np.name == "pos")
      for (double& v : np.tensor.mutable_values()) v = 0.0;

  Rng rng(72);
  Tensor x = model_input(spec, rng, 2);
  Tensor y1 = model->forward(x);

  // reverse the time axis
  const std::size_t T = spec.n_in, F = spec.seq_features();
  std::vector<double> rev(x.size());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f)
        rev[(b * T + t) * F + f] = x.values()[(b * T + (T - 1 - t)) * F + f];
  Tensor y2 = model->forward(Tensor::from(x.shape(), std::move(rev)));

  for (std::size_t i = 0; i < y1.size(); ++i)
    CHECK(y1.values()[i] == Catch::Approx(y2.values()[i]).margin(1e-9));
}

TEST_CASE("te with live positional embedding is order sensitive") {
  ModelSpec spec = toy_spec(ModelKind::Te);
  auto model = make_forecaster(spec, 81);
  Rng rng(82);
  Tensor x = model_input(spec, rng, 1);
  Tensor y1 = model->forward(x);
  const std::size_t T = spec.n_in, F = spec.seq_features();
  std::vector<double> rev(x.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f) rev[t * F + f] = x.values()[(T - 1 - t) * F + f];
  Tensor y2 = model->forward(Tensor::from(x.shape(), std::move(rev)));
  double diff = 0.0;
  for (std::size_t i = 0; i < y1.size(); ++i) diff += std::abs(y1.values()[i] - y2.values()[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("same seed builds bitwise-identical models") {
  ModelSpec spec = toy_spec(ModelKind::Te);
  auto a = make_forecaster(spec, 91);
  auto b = make_forecaster(spec, 91);
  REQUIRE(a->parameters().size() == b->parameters().size());
  for (std::size_t i = 0; i < a->parameters().size(); ++i) {
    const auto& ta = a->parameters()[i].tensor;
    const auto& tb = b->parameters()[i].tensor;
    for (std::size_t j = 0; j < ta.size(); ++j) CHECK(ta.values()[j] == tb.values()[j]);
  }
}
