#pragma once

// The five forecasters behind one interface, plus exact parameter
// accounting. All trainable models read a window tensor and emit the full
// horizon in one shot: (batch, n_out).
//
//   naive  copies the last n_out observed consumption values
//   fcn    flat input  -> hidden ReLU -> dropout -> linear
//   lstm   sequential  -> LSTM recurrence -> dropout -> linear
//   xlstm  sequential  -> up-projection -> [mLSTM block, sLSTM block] stack
//                         -> post layer-norm -> flatten -> linear
//   te     sequential  -> up-projection + learned positional embedding
//                         -> encoder blocks -> mean pool -> ff -> linear
//
// The xLSTM cells use exponential gating with a max-stabilizer state m. The
// cell output is mathematically invariant to m (it cancels between numerator
// and normalizer), so m is computed outside the autodiff graph; the
// finite-difference suite in the tests confirms the gradients stay exact.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "heatbench/errors.hpp"
#include "heatbench/nn.hpp"
#include "heatbench/rng.hpp"
#include "heatbench/tensor.hpp"
#include "heatbench/windowing.hpp"

namespace heatbench {

enum class ModelKind { Naive, Fcn, Lstm, Xlstm, Te };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Naive: return "naive";
    case ModelKind::Fcn: return "fcn";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Xlstm: return "xlstm";
    case ModelKind::Te: return "te";
  }
  return "?";
}

inline ModelKind model_kind_from(const std::string& s) {
  if (s == "naive") return ModelKind::Naive;
  if (s == "fcn") return ModelKind::Fcn;
  if (s == "lstm") return ModelKind::Lstm;
  if (s == "xlstm") return ModelKind::Xlstm;
  if (s == "te") return ModelKind::Te;
  throw UsageError("unknown model '" + s + "'");
}

struct ModelSpec {
  ModelKind kind = ModelKind::Fcn;
  std::size_t n_in = 24;
  std::size_t n_out = 3;
  std::size_t hidden = 32;  // FCN/LSTM hidden units; xLSTM/TE embedding dim d
  std::size_t heads = 4;
  std::size_t blocks = 1;  // xLSTM: mLSTM+sLSTM pairs; TE: encoder blocks
  double dropout = 0.0;
  std::size_t conv_kernel = 4;
  std::size_t n_c = 0;  // time-varying covariate channels
  std::size_t n_s = 0;  // static attribute columns

  std::size_t channels() const { return 1 + n_c; }
  std::size_t seq_features() const { return 1 + n_c + n_s; }
  std::size_t flat_width() const { return channels() * n_in + n_s; }

  void validate() const {
    if (n_in < 1 || n_out < 1 || hidden < 1) throw UsageError("ModelSpec: dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw UsageError("ModelSpec: dropout must be in [0,1)");
    if ((kind == ModelKind::Xlstm || kind == ModelKind::Te) && hidden % heads != 0)
      throw UsageError("ModelSpec: embedding dim must be divisible by the number of heads");
    if (kind == ModelKind::Xlstm && (2 * hidden) % heads != 0)
      throw UsageError("ModelSpec: 2*d must be divisible by heads");
    if (kind == ModelKind::Xlstm && conv_kernel < 1)
      throw UsageError("ModelSpec: conv_kernel must be >= 1");
    if (kind == ModelKind::Naive && n_out > n_in)
      throw UsageError("naive forecast needs at least n_out observed values");
  }
};

// ---------------------------------------------------------------------------
// Parameter plan: one ordered list of named tensors per architecture. The
// constructors materialize exactly this plan, so the arithmetic count and
// the audited model agree by construction.

enum class InitKind { Glorot, Zero, One };

struct ParamItem {
  std::string name;
  Shape shape;
  InitKind init = InitKind::Glorot;

  std::size_t count() const { return detail::shape_numel(shape); }
};

inline std::size_t slstm_ffn_dim(std::size_t d) { return std::max<std::size_t>(1, d * 4 / 3); }

inline std::vector<ParamItem> parameter_plan(const ModelSpec& spec) {
  spec.validate();
  std::vector<ParamItem> plan;
  auto weight = [&plan](const std::string& n, Shape s) { plan.push_back({n, std::move(s), InitKind::Glorot}); };
  auto bias = [&plan](const std::string& n, Shape s) { plan.push_back({n, std::move(s), InitKind::Zero}); };
  auto norm = [&plan](const std::string& n, std::size_t d) {
    plan.push_back({n + ".gamma", {d}, InitKind::One});
    plan.push_back({n + ".beta", {d}, InitKind::Zero});
  };

  const std::size_t f = spec.seq_features();
  const std::size_t d = spec.hidden;
  switch (spec.kind) {
    case ModelKind::Naive:
      break;
    case ModelKind::Fcn:
      weight("fc1.w", {spec.flat_width(), d});
      bias("fc1.b", {d});
      weight("fc2.w", {d, spec.n_out});
      bias("fc2.b", {spec.n_out});
      break;
    case ModelKind::Lstm:
      weight("lstm.w", {f, 4 * d});
      weight("lstm.r", {d, 4 * d});
      bias("lstm.b", {4 * d});
      weight("head.w", {d, spec.n_out});
      bias("head.b", {spec.n_out});
      break;
    case ModelKind::Xlstm: {
      weight("up.w", {f, d});
      bias("up.b", {d});
      const std::size_t di = 2 * d;            // mLSTM inner width
      const std::size_t dff = slstm_ffn_dim(d);  // sLSTM feed-forward width
      for (std::size_t j = 0; j < spec.blocks; ++j) {
        const std::string m = "mlstm" + std::to_string(j);
        norm(m + ".norm", d);
        weight(m + ".up.w", {d, 2 * di});
        bias(m + ".up.b", {2 * di});
        weight(m + ".conv.w", {di, spec.conv_kernel});
        bias(m + ".conv.b", {di});
        weight(m + ".q.w", {di, di});
        bias(m + ".q.b", {di});
        weight(m + ".k.w", {di, di});
        bias(m + ".k.b", {di});
        weight(m + ".v.w", {di, di});
        bias(m + ".v.b", {di});
        weight(m + ".ifgate.w", {di, 2 * spec.heads});
        bias(m + ".ifgate.b", {2 * spec.heads});
        norm(m + ".outnorm", di);
        weight(m + ".down.w", {di, d});
        bias(m + ".down.b", {d});

        const std::string s = "slstm" + std::to_string(j);
        const std::size_t dh = d / spec.heads;
        norm(s + ".norm", d);
        weight(s + ".conv.w", {d, spec.conv_kernel});
        bias(s + ".conv.b", {d});
        for (const char* g : {"i", "f", "z", "o"}) {
          weight(s + ".w" + g, {d, d});
          bias(s + ".b" + g, {d});
          weight(s + ".r" + g, {spec.heads, dh, dh});
        }
        norm(s + ".outnorm", d);
        weight(s + ".ffn.up.w", {d, 2 * dff});
        bias(s + ".ffn.up.b", {2 * dff});
        weight(s + ".ffn.down.w", {dff, d});
        bias(s + ".ffn.down.b", {d});
      }
      norm("post", d);
      weight("head.w", {d * spec.n_in, spec.n_out});
      bias("head.b", {spec.n_out});
      break;
    }
    case ModelKind::Te: {
      weight("up.w", {f, d});
      bias("up.b", {d});
      weight("pos", {spec.n_in, d});
      for (std::size_t j = 0; j < spec.blocks; ++j) {
        const std::string b = "enc" + std::to_string(j);
        for (const char* m : {"q", "k", "v", "o"}) {
          weight(b + ".attn." + m + ".w", {d, d});
          bias(b + ".attn." + m + ".b", {d});
        }
        norm(b + ".ln1", d);
        weight(b + ".ff1.w", {d, 4 * d});
        bias(b + ".ff1.b", {4 * d});
        weight(b + ".ff2.w", {4 * d, d});
        bias(b + ".ff2.b", {d});
        norm(b + ".ln2", d);
      }
      weight("pool_ff.w", {d, d});
      bias("pool_ff.b", {d});
      weight("out.w", {d, spec.n_out});
      bias("out.b", {spec.n_out});
      break;
    }
  }
  return plan;
}

inline std::size_t count_parameters(const ModelSpec& spec) {
  std::size_t total = 0;
  for (const auto& item : parameter_plan(spec)) total += item.count();
  return total;
}

// ---------------------------------------------------------------------------
// Forecaster interface

struct NamedParam {
  std::string name;
  Tensor tensor;
};

class Forecaster {
 public:
  virtual ~Forecaster() = default;

  const ModelSpec& spec() const { return spec_; }
  virtual Layout input_layout() const = 0;

  // x per input_layout(); result (batch, n_out). Dropout draws from `rng`
  // when training; eval mode is a pure function.
  virtual Tensor forward(const Tensor& x, bool training = false, Rng* rng = nullptr) = 0;

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

 protected:
  explicit Forecaster(ModelSpec spec) : spec_(std::move(spec)) {}

  void materialize(std::uint64_t seed) {
    Rng rng(seed);
    for (const auto& item : parameter_plan(spec_)) {
      Tensor t;
      switch (item.init) {
        case InitKind::Glorot: t = glorot_init(item.shape, rng); break;
        case InitKind::Zero: t = Tensor::zeros(item.shape, true); break;
        case InitKind::One: t = Tensor::full(item.shape, 1.0, true); break;
      }
      params_.push_back({item.name, std::move(t)});
    }
  }

  Tensor& p(const std::string& name) {
    for (auto& np : params_)
      if (np.name == name) return np.tensor;
    throw TensorError("no parameter '" + name + "' in " + to_string(spec_.kind));
  }

  void check_input(const Tensor& x) const {
    if (input_layout() == Layout::Flat) {
      if (x.rank() != 2 || x.dim(1) != spec_.flat_width())
        throw TensorError("layout mismatch: " + to_string(spec_.kind) + " expects flat (batch, " +
                          std::to_string(spec_.flat_width()) + "), got " +
                          detail::shape_str(x.shape()));
    } else {
      if (x.rank() != 3 || x.dim(1) != spec_.n_in || x.dim(2) != spec_.seq_features())
        throw TensorError("layout mismatch: " + to_string(spec_.kind) + " expects sequential (batch, " +
                          std::to_string(spec_.n_in) + ", " + std::to_string(spec_.seq_features()) +
                          "), got " + detail::shape_str(x.shape()));
    }
  }

  ModelSpec spec_;
  std::vector<NamedParam> params_;
};

// ---------------------------------------------------------------------------
// Naive: prediction for (t+1 .. t+n_out) is the observation at (t-n_out+1 .. t).

class NaiveForecaster final : public Forecaster {
 public:
  explicit NaiveForecaster(ModelSpec spec) : Forecaster(std::move(spec)) { spec_.validate(); }

  Layout input_layout() const override { return Layout::Sequential; }

  Tensor forward(const Tensor& x, bool = false, Rng* = nullptr) override {
    const std::size_t n_in = spec_.n_in, n_out = spec_.n_out;
    if (n_out > n_in) throw TensorError("naive: insufficient history");
    if (x.rank() == 3) {
      // consumption is channel 0
      Tensor tail = narrow(x, 1, n_in - n_out, n_out);
      return reshape(narrow(tail, 2, 0, 1), {x.dim(0), n_out});
    }
    if (x.rank() == 2) {
      // flat layout: the consumption block occupies the first n_in columns
      return narrow(x, 1, n_in - n_out, n_out);
    }
    throw TensorError("naive: unsupported input rank");
  }
};

// ---------------------------------------------------------------------------
// FCN

class FcnForecaster final : public Forecaster {
 public:
  FcnForecaster(ModelSpec spec, std::uint64_t seed) : Forecaster(std::move(spec)) {
    materialize(seed);
  }

  Layout input_layout() const override { return Layout::Flat; }

  Tensor forward(const Tensor& x, bool training = false, Rng* rng = nullptr) override {
    check_input(x);
    Tensor h = relu(linear(x, p("fc1.w"), p("fc1.b")));
    h = dropout(h, spec_.dropout, training, rng);
    return linear(h, p("fc2.w"), p("fc2.b"));
  }
};

// ---------------------------------------------------------------------------
// LSTM

class LstmForecaster final : public Forecaster {
 public:
  LstmForecaster(ModelSpec spec, std::uint64_t seed) : Forecaster(std::move(spec)) {
    materialize(seed);
  }

  Layout input_layout() const override { return Layout::Sequential; }

  Tensor forward(const Tensor& x, bool training = false, Rng* rng = nullptr) override {
    check_input(x);
    const std::size_t B = x.dim(0), T = spec_.n_in, H = spec_.hidden;
    Tensor h = Tensor::zeros({B, H});
    Tensor c = Tensor::zeros({B, H});
    const Tensor& w = p("lstm.w");
    const Tensor& r = p("lstm.r");
    const Tensor& b = p("lstm.b");
    for (std::size_t t = 0; t < T; ++t) {
      Tensor xt = reshape(narrow(x, 1, t, 1), {B, spec_.seq_features()});
      Tensor z = add(add(matmul(xt, w), matmul(h, r)), b);
      Tensor gi = sigmoid(narrow(z, 1, 0, H));
      Tensor gf = sigmoid(narrow(z, 1, H, H));
      Tensor gg = tanh(narrow(z, 1, 2 * H, H));
      Tensor go = sigmoid(narrow(z, 1, 3 * H, H));
      c = add(mul(gf, c), mul(gi, gg));
      h = mul(go, tanh(c));
    }
    h = dropout(h, spec_.dropout, training, rng);
    return linear(h, p("head.w"), p("head.b"));
  }
};

// ---------------------------------------------------------------------------
// xLSTM

class XlstmForecaster final : public Forecaster {
 public:
  XlstmForecaster(ModelSpec spec, std::uint64_t seed) : Forecaster(std::move(spec)) {
    materialize(seed);
  }

  Layout input_layout() const override { return Layout::Sequential; }

  Tensor forward(const Tensor& x, bool training = false, Rng* rng = nullptr) override {
    Tensor h = forward_sequence(x, training, rng);
    const std::size_t B = x.dim(0);
    Tensor flat = reshape(h, {B, spec_.hidden * spec_.n_in});
    return linear(flat, p("head.w"), p("head.b"));
  }

  // The residual stream before flattening: (batch, n_in, d). Exposed for
  // the causality probes.
  Tensor forward_sequence(const Tensor& x, bool training = false, Rng* rng = nullptr) {
    check_input(x);
    Tensor h = linear(x, p("up.w"), p("up.b"));
    for (std::size_t j = 0; j < spec_.blocks; ++j) {
      h = mlstm_block(h, "mlstm" + std::to_string(j), training, rng);
      h = slstm_block(h, "slstm" + std::to_string(j), training, rng);
    }
    return layer_norm(h, p("post.gamma"), p("post.beta"));
  }

 private:
  // Matrix-memory cell in a pre-norm residual block. Gates use exponential
  // input gating with a log-sigmoid forget gate; the stabilizer m keeps
  // every exponent <= 0.
  Tensor mlstm_block(const Tensor& x, const std::string& id, bool training, Rng* rng) {
    const std::size_t B = x.dim(0), T = x.dim(1);
    const std::size_t d = spec_.hidden, di = 2 * d, H = spec_.heads, dh = di / H;
    const std::size_t BH = B * H;

    Tensor hin = layer_norm(x, p(id + ".norm.gamma"), p(id + ".norm.beta"));
    Tensor u = linear(hin, p(id + ".up.w"), p(id + ".up.b"));
    Tensor main = narrow(u, 2, 0, di);
    Tensor gate_stream = narrow(u, 2, di, di);
    Tensor cpath = swish(conv1d_causal(main, p(id + ".conv.w"), &p(id + ".conv.b")));

    Tensor q_all = linear(cpath, p(id + ".q.w"), p(id + ".q.b"));
    Tensor k_all = mul_scalar(linear(cpath, p(id + ".k.w"), p(id + ".k.b")),
                              1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor v_all = linear(main, p(id + ".v.w"), p(id + ".v.b"));
    Tensor gates_all = linear(cpath, p(id + ".ifgate.w"), p(id + ".ifgate.b"));

    Tensor C = Tensor::zeros({BH, dh, dh});
    Tensor n_state = Tensor::zeros({BH, dh});
    Tensor m_prev = Tensor::zeros({BH, 1});
    std::vector<Tensor> steps;
    steps.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      Tensor qt = reshape(narrow(q_all, 1, t, 1), {BH, dh});
      Tensor kt = reshape(narrow(k_all, 1, t, 1), {BH, dh});
      Tensor vt = reshape(narrow(v_all, 1, t, 1), {BH, dh});
      Tensor g = reshape(narrow(gates_all, 1, t, 1), {B, 2 * H});
      Tensor itilde = reshape(narrow(g, 1, 0, H), {BH, 1});
      Tensor ftilde = reshape(narrow(g, 1, H, H), {BH, 1});

      Tensor logf = neg(softplus(neg(ftilde)));  // log sigmoid(ftilde)
      Tensor f_shift = add(logf, m_prev);
      Tensor m_new = detached_max(f_shift, itilde);
      Tensor iprime = exp(sub(itilde, m_new));
      Tensor fprime = exp(sub(f_shift, m_new));

      Tensor outer = matmul(reshape(vt, {BH, dh, 1}), reshape(kt, {BH, 1, dh}));
      C = add(mul(reshape(fprime, {BH, 1, 1}), C), mul(reshape(iprime, {BH, 1, 1}), outer));
      n_state = add(mul(fprime, n_state), mul(iprime, kt));
      m_prev = m_new;

      Tensor numer = reshape(matmul(C, reshape(qt, {BH, dh, 1})), {BH, dh});
      Tensor dot = reshape(matmul(reshape(n_state, {BH, 1, dh}), reshape(qt, {BH, dh, 1})), {BH, 1});
      // The stabilized state carries a factor exp(-m), so the normalizer
      // floor is exp(-m) here (it is 1 in unstabilized form). Both sides of
      // the division then scale identically with m, keeping the output
      // invariant to the detached stabilizer and its gradients exact.
      std::vector<double> floor_vals(BH);
      for (std::size_t i = 0; i < BH; ++i) floor_vals[i] = std::exp(-m_new.at(i));
      Tensor floor = Tensor::from({BH, 1}, std::move(floor_vals));
      Tensor denom = add(relu(sub(abs(dot), floor)), floor);  // max(|n^T q|, exp(-m))
      steps.push_back(reshape(div(numer, denom), {B, di}));
    }
    Tensor hseq = stack_steps(steps);
    Tensor hn = layer_norm(hseq, p(id + ".outnorm.gamma"), p(id + ".outnorm.beta"));
    Tensor gated = mul(hn, swish(gate_stream));
    Tensor out = linear(gated, p(id + ".down.w"), p(id + ".down.b"));
    out = dropout(out, spec_.dropout, training, rng);
    return add(x, out);
  }

  // Scalar-memory cell with per-head block-diagonal recurrence and a GeGLU
  // feed-forward, in one pre-norm residual block. The convolved path feeds
  // the i/f gates; z and o read the normalized input directly.
  Tensor slstm_block(const Tensor& x, const std::string& id, bool training, Rng* rng) {
    const std::size_t B = x.dim(0), T = x.dim(1), d = spec_.hidden;
    const std::size_t dff = slstm_ffn_dim(d);

    Tensor hin = layer_norm(x, p(id + ".norm.gamma"), p(id + ".norm.beta"));
    Tensor cpath = swish(conv1d_causal(hin, p(id + ".conv.w"), &p(id + ".conv.b")));

    Tensor h = Tensor::zeros({B, d});
    Tensor c = Tensor::zeros({B, d});
    Tensor n_state = Tensor::zeros({B, d});
    Tensor m_prev = Tensor::zeros({B, d});
    std::vector<Tensor> steps;
    steps.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      Tensor xt = reshape(narrow(hin, 1, t, 1), {B, d});
      Tensor ct = reshape(narrow(cpath, 1, t, 1), {B, d});
      Tensor itilde = add(linear(ct, p(id + ".wi"), p(id + ".bi")), headwise_linear(h, p(id + ".ri")));
      Tensor ftilde = add(linear(ct, p(id + ".wf"), p(id + ".bf")), headwise_linear(h, p(id + ".rf")));
      Tensor zt = tanh(add(linear(xt, p(id + ".wz"), p(id + ".bz")), headwise_linear(h, p(id + ".rz"))));
      Tensor ot = sigmoid(add(linear(xt, p(id + ".wo"), p(id + ".bo")), headwise_linear(h, p(id + ".ro"))));

      Tensor f_shift = add(ftilde, m_prev);
      Tensor m_new = detached_max(f_shift, itilde);
      Tensor iprime = exp(sub(itilde, m_new));
      Tensor fprime = exp(sub(f_shift, m_new));

      c = add(mul(fprime, c), mul(iprime, zt));
      n_state = add(mul(fprime, n_state), iprime);
      m_prev = m_new;
      h = mul(ot, div(c, n_state));
      steps.push_back(h);
    }
    Tensor hseq = stack_steps(steps);
    Tensor hn = layer_norm(hseq, p(id + ".outnorm.gamma"), p(id + ".outnorm.beta"));
    Tensor up = linear(hn, p(id + ".ffn.up.w"), p(id + ".ffn.up.b"));
    Tensor a = narrow(up, 2, 0, dff);
    Tensor g = narrow(up, 2, dff, dff);
    Tensor ff = linear(mul(gelu(a), g), p(id + ".ffn.down.w"), p(id + ".ffn.down.b"));
    ff = dropout(ff, spec_.dropout, training, rng);
    return add(x, ff);
  }
};

// ---------------------------------------------------------------------------
// Transformer encoder

class TeForecaster final : public Forecaster {
 public:
  TeForecaster(ModelSpec spec, std::uint64_t seed) : Forecaster(std::move(spec)) {
    if (spec_.blocks == 0) throw UsageError("te: needs at least one encoder block");
    materialize(seed);
  }

  Layout input_layout() const override { return Layout::Sequential; }

  // When enabled, eval-time attention weights of the most recent forward
  // pass are kept for inspection (one (B*heads, T, T) tensor per block).
  void set_capture_attention(bool on) { capture_attention_ = on; }
  const std::vector<Tensor>& last_attention() const { return last_attention_; }

  Tensor forward(const Tensor& x, bool training = false, Rng* rng = nullptr) override {
    check_input(x);
    last_attention_.clear();
    const std::size_t B = x.dim(0), T = spec_.n_in, d = spec_.hidden, H = spec_.heads;
    const std::size_t dh = d / H;

    Tensor h = add(linear(x, p("up.w"), p("up.b")), p("pos"));
    for (std::size_t j = 0; j < spec_.blocks; ++j) {
      const std::string b = "enc" + std::to_string(j);
      auto split_heads = [&](const Tensor& t) {
        return reshape(permute(reshape(t, {B, T, H, dh}), {0, 2, 1, 3}), {B * H, T, dh});
      };
      Tensor q = split_heads(linear(h, p(b + ".attn.q.w"), p(b + ".attn.q.b")));
      Tensor k = split_heads(linear(h, p(b + ".attn.k.w"), p(b + ".attn.k.b")));
      Tensor v = split_heads(linear(h, p(b + ".attn.v.w"), p(b + ".attn.v.b")));
      Tensor scores = mul_scalar(matmul(q, permute(k, {0, 2, 1})),
                                 1.0 / std::sqrt(static_cast<double>(dh)));
      Tensor att = softmax_lastdim(scores);
      if (capture_attention_) last_attention_.push_back(att.detach());
      att = dropout(att, spec_.dropout, training, rng);
      Tensor ctx = reshape(permute(reshape(matmul(att, v), {B, H, T, dh}), {0, 2, 1, 3}), {B, T, d});
      Tensor attn_out = linear(ctx, p(b + ".attn.o.w"), p(b + ".attn.o.b"));
      h = layer_norm(add(h, dropout(attn_out, spec_.dropout, training, rng)), p(b + ".ln1.gamma"),
                     p(b + ".ln1.beta"));
      Tensor ff = linear(relu(linear(h, p(b + ".ff1.w"), p(b + ".ff1.b"))), p(b + ".ff2.w"),
                         p(b + ".ff2.b"));
      h = layer_norm(add(h, dropout(ff, spec_.dropout, training, rng)), p(b + ".ln2.gamma"),
                     p(b + ".ln2.beta"));
    }
    Tensor pooled = mean(h, 1);  // global average over time
    Tensor ff = dropout(relu(linear(pooled, p("pool_ff.w"), p("pool_ff.b"))), spec_.dropout,
                        training, rng);
    return linear(ff, p("out.w"), p("out.b"));
  }

 private:
  bool capture_attention_ = false;
  std::vector<Tensor> last_attention_;
};

// ---------------------------------------------------------------------------

inline std::unique_ptr<Forecaster> make_forecaster(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case ModelKind::Naive: return std::make_unique<NaiveForecaster>(spec);
    case ModelKind::Fcn: return std::make_unique<FcnForecaster>(spec, seed);
    case ModelKind::Lstm: return std::make_unique<LstmForecaster>(spec, seed);
    case ModelKind::Xlstm: return std::make_unique<XlstmForecaster>(spec, seed);
    case ModelKind::Te: return std::make_unique<TeForecaster>(spec, seed);
  }
  throw UsageError("make_forecaster: unknown kind");
}

// Itemized audit of a constructed model; must sum to count_parameters(spec).
struct AuditRow {
  std::string name;
  std::size_t count;
};

inline std::vector<AuditRow> audit_params(const Forecaster& model) {
  std::vector<AuditRow> rows;
  for (const auto& np : model.parameters()) rows.push_back({np.name, np.tensor.size()});
  return rows;
}

// ---------------------------------------------------------------------------
// Best-performing configurations as published (per horizon). Feature
// configuration 1 means univariate; the feature dims for configurations 2/3
// are supplied by the dataset at hand.

struct BestConfig {
  ModelSpec spec;
  FeatureConfig features = FeatureConfig::All;
  std::size_t n_future = 0;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
};

inline BestConfig paper_best_config(ModelKind kind, std::size_t horizon, std::size_t n_c,
                                    std::size_t n_s) {
  if (horizon != 3 && horizon != 24) throw UsageError("paper_best_config: horizon must be 3 or 24");
  const bool h3 = horizon == 3;
  BestConfig c;
  c.spec.kind = kind;
  c.spec.n_out = horizon;
  switch (kind) {
    case ModelKind::Naive:
      c.spec.n_in = horizon;
      c.features = FeatureConfig::PastOnly;
      break;
    case ModelKind::Fcn:
      c.spec.n_in = h3 ? 72 : 38;
      c.spec.hidden = h3 ? 51 : 131;
      c.spec.dropout = h3 ? 0.05 : 0.19;
      c.batch_size = h3 ? 100 : 104;
      c.epochs = h3 ? 34 : 78;
      c.features = FeatureConfig::PastOnly;
      break;
    case ModelKind::Lstm:
      c.spec.n_in = h3 ? 59 : 38;
      c.spec.hidden = h3 ? 121 : 131;
      c.spec.dropout = 0.1;
      c.batch_size = h3 ? 100 : 32;
      c.epochs = h3 ? 28 : 78;
      c.features = FeatureConfig::All;
      c.n_future = h3 ? 0 : 24;
      break;
    case ModelKind::Xlstm:
      c.spec.n_in = 72;
      c.spec.hidden = 256;
      c.spec.heads = 4;
      c.spec.blocks = 1;
      c.spec.dropout = 0.1;
      c.spec.conv_kernel = 4;
      c.batch_size = h3 ? 32 : 64;
      c.epochs = h3 ? 10 : 30;
      c.features = FeatureConfig::All;
      break;
    case ModelKind::Te:
      c.spec.n_in = 72;
      c.spec.hidden = 256;
      c.spec.heads = h3 ? 8 : 4;
      c.spec.blocks = 4;
      c.spec.dropout = h3 ? 0.17 : 0.1;
      c.batch_size = h3 ? 76 : 32;
      c.epochs = 10;
      c.features = FeatureConfig::PastOnly;
      break;
  }
  if (c.features == FeatureConfig::PastOnly) {
    c.spec.n_c = 0;
    c.spec.n_s = 0;
  } else {
    c.spec.n_c = n_c;
    c.spec.n_s = c.features == FeatureConfig::All ? n_s : 0;
  }
  return c;
}

}  // namespace heatbench
