#pragma once

// Layer-level building blocks on top of the tensor core: causal depthwise
// convolution, layer normalization, inverted dropout, softmax, per-head
// linear maps, and Glorot initialization.

#include <cmath>
#include <vector>

#include "heatbench/rng.hpp"
#include "heatbench/tensor.hpp"

namespace heatbench {

// Uniform in +-sqrt(6 / (fan_in + fan_out)). Weight matrices are (in, out);
// for a depthwise conv kernel (channels, k) the fans are (k, 1); for a
// per-head stack (heads, in, out) the per-head fans apply. Biases are
// zero-initialized by the callers.
inline Tensor glorot_init(Shape shape, Rng& rng) {
  std::size_t fan_in = 1, fan_out = 1;
  if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() == 3) {
    fan_in = shape[1];
    fan_out = shape[2];
  } else {
    throw TensorError("glorot_init: expected a rank-2 or rank-3 weight shape");
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> vals(detail::shape_numel(shape));
  for (auto& v : vals) v = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(vals), true);
}

inline Tensor glorot_init(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  return glorot_init(std::move(shape), rng);
}

// x (..., in) @ w (in, out) + b (out). Leading axes are flattened through
// the matmul and restored afterwards.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t in = w.dim(0);
  if (x.shape().back() != in)
    throw TensorError("linear: input width " + std::to_string(x.shape().back()) +
                      " does not match weight " + detail::shape_str(w.shape()));
  Tensor x2 = x.rank() == 2 ? x : reshape(x, {x.size() / in, in});
  Tensor y = add(matmul(x2, w), b);
  if (x.rank() != 2) {
    Shape out_shape = x.shape();
    out_shape.back() = w.dim(1);
    y = reshape(y, out_shape);
  }
  return y;
}

inline Tensor linear_nobias(const Tensor& x, const Tensor& w) {
  const std::size_t in = w.dim(0);
  Tensor x2 = x.rank() == 2 ? x : reshape(x, {x.size() / in, in});
  Tensor y = matmul(x2, w);
  if (x.rank() != 2) {
    Shape out_shape = x.shape();
    out_shape.back() = w.dim(1);
    y = reshape(y, out_shape);
  }
  return y;
}

// Block-diagonal linear map: x (B, H*in) with w (H, in, out) -> (B, H*out).
// Each head sees only its own slice. This is the recurrence structure of the
// sLSTM (per-head recurrent kernels).
inline Tensor headwise_linear(const Tensor& x, const Tensor& w) {
  if (x.rank() != 2 || w.rank() != 3) throw TensorError("headwise_linear: expected (B,H*in) x (H,in,out)");
  const std::size_t heads = w.dim(0), in = w.dim(1), out_w = w.dim(2);
  if (x.dim(1) != heads * in)
    throw TensorError("headwise_linear: input width " + std::to_string(x.dim(1)) +
                      " != heads*in = " + std::to_string(heads * in));
  const std::size_t batch = x.dim(0);
  // (B, H, in) -> (H, B, in) batched against (H, in, out) -> (H, B, out) -> (B, H*out)
  Tensor xh = permute(reshape(x, {batch, heads, in}), {1, 0, 2});
  Tensor yh = matmul(xh, w);
  (void)out_w;
  return reshape(permute(yh, {1, 0, 2}), {batch, heads * w.dim(2)});
}

// Causal depthwise 1-D convolution over (B, T, C) with kernel (C, K) and
// optional bias (C). Position t sees inputs at positions <= t only; the
// left edge is zero-padded so the output length equals the input length.
inline Tensor conv1d_causal(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr) {
  if (x.rank() != 3) throw TensorError("conv1d_causal: input must be (batch, seq, channels)");
  if (w.rank() != 2) throw TensorError("conv1d_causal: kernel must be (channels, k)");
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), K = w.dim(1);
  if (w.dim(0) != C) throw TensorError("conv1d_causal: kernel channels do not match input");
  if (K < 1) throw TensorError("conv1d_causal: kernel size must be >= 1");
  if (bias && (bias->rank() != 1 || bias->dim(0) != C))
    throw TensorError("conv1d_causal: bias must be (channels)");

  const auto xv = x.values();
  const auto wv = w.values();
  std::vector<double> vals(B * T * C, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = bias ? bias->at(c) : 0.0;
        for (std::size_t j = 0; j < K; ++j) {
          // w[c][K-1] aligns with the current position.
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(K - 1 - j);
          if (src < 0) continue;
          acc += wv[c * K + j] * xv[(b * T + static_cast<std::size_t>(src)) * C + c];
        }
        vals[(b * T + t) * C + c] = acc;
      }
  detail::check_finite("conv1d_causal", vals);
  Tensor out = Tensor::from({B, T, C}, std::move(vals));

  const bool needs_grad =
      x.requires_grad() || w.requires_grad() || (bias && bias->requires_grad());
  if (Tape* tape = Tape::active(); tape && needs_grad) {
    out.set_requires_grad(true);
    auto xn = x.node(), wn = w.node(), on = out.node();
    detail::NodePtr bn = bias ? bias->node() : nullptr;
    std::vector<detail::NodePtr> inputs{xn, wn};
    if (bn) inputs.push_back(bn);
    tape->record("conv1d_causal", inputs, on, [xn, wn, bn, on, B, T, C, K] {
      if (xn->requires_grad) xn->ensure_grad();
      if (wn->requires_grad) wn->ensure_grad();
      if (bn && bn->requires_grad) bn->ensure_grad();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < C; ++c) {
            const double g = on->grad[(b * T + t) * C + c];
            if (g == 0.0) continue;
            if (bn && bn->requires_grad) bn->grad[c] += g;
            for (std::size_t j = 0; j < K; ++j) {
              const std::ptrdiff_t src =
                  static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(K - 1 - j);
              if (src < 0) continue;
              const std::size_t xi = (b * T + static_cast<std::size_t>(src)) * C + c;
              if (wn->requires_grad) wn->grad[c * K + j] += g * xn->values[xi];
              if (xn->requires_grad) xn->grad[xi] += g * wn->values[c * K + j];
            }
          }
    });
  }
  return out;
}

// Per-position normalization over the last axis to zero mean / unit
// variance (epsilon-guarded), then learned scale and shift.
inline constexpr double kLayerNormEps = 1e-5;

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = kLayerNormEps) {
  const std::size_t D = x.shape().back();
  if (gamma.size() != D || beta.size() != D)
    throw TensorError("layer_norm: scale/shift size " + std::to_string(gamma.size()) +
                      " does not match feature size " + std::to_string(D));
  const std::size_t rows = x.size() / D;
  const auto xv = x.values();
  std::vector<double> vals(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_sigma(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* px = xv.data() + r * D;
    double mu = 0.0;
    for (std::size_t i = 0; i < D; ++i) mu += px[i];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t i = 0; i < D; ++i) var += (px[i] - mu) * (px[i] - mu);
    var /= static_cast<double>(D);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t i = 0; i < D; ++i) {
      const double h = (px[i] - mu) * is;
      xhat[r * D + i] = h;
      vals[r * D + i] = h * gamma.at(i) + beta.at(i);
    }
  }
  detail::check_finite("layer_norm", vals);
  Tensor out = Tensor::from(x.shape(), std::move(vals));

  const bool needs_grad = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  if (Tape* tape = Tape::active(); tape && needs_grad) {
    out.set_requires_grad(true);
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    tape->record("layer_norm", {xn, gn, bn}, on,
                 [xn, gn, bn, on, rows, D, xhat, inv_sigma] {
      if (xn->requires_grad) xn->ensure_grad();
      if (gn->requires_grad) gn->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = on->grad.data() + r * D;
        const double* h = xhat.data() + r * D;
        double sum_gg = 0.0, sum_ggh = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
          const double gg = g[i] * gn->values[i];
          sum_gg += gg;
          sum_ggh += gg * h[i];
          if (gn->requires_grad) gn->grad[i] += g[i] * h[i];
          if (bn->requires_grad) bn->grad[i] += g[i];
        }
        if (xn->requires_grad) {
          const double inv_d = 1.0 / static_cast<double>(D);
          for (std::size_t i = 0; i < D; ++i) {
            const double gg = g[i] * gn->values[i];
            xn->grad[r * D + i] +=
                inv_sigma[r] * (gg - inv_d * sum_gg - h[i] * inv_d * sum_ggh);
          }
        }
      }
    });
  }
  return out;
}

// Inverted dropout: at train time each element is kept with probability
// 1-p and scaled by 1/(1-p); at eval time the function is the identity.
inline Tensor dropout(const Tensor& x, double p, bool training, Rng* rng) {
  if (p < 0.0 || p >= 1.0) throw TensorError("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  if (!rng) throw TensorError("dropout: rng required in training mode");
  const double scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng->uniform() >= p ? scale : 0.0;
  std::vector<double> vals(x.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = x.at(i) * mask[i];
  Tensor out = Tensor::from(x.shape(), std::move(vals));
  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record("dropout", {xn}, on, [xn, on, mask] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * mask[i];
    });
  }
  return out;
}

// Softmax over the last axis, stabilized by subtracting the row maximum
// (a constant shift; the function value and Jacobian are unchanged).
inline Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t D = x.shape().back();
  const std::size_t rows = x.size() / D;
  const auto xv = x.values();
  std::vector<double> vals(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* px = xv.data() + r * D;
    double mx = px[0];
    for (std::size_t i = 1; i < D; ++i) mx = std::max(mx, px[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double e = std::exp(px[i] - mx);
      vals[r * D + i] = e;
      z += e;
    }
    for (std::size_t i = 0; i < D; ++i) vals[r * D + i] /= z;
  }
  detail::check_finite("softmax", vals);
  Tensor out = Tensor::from(x.shape(), std::move(vals));
  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record("softmax", {xn}, on, [xn, on, rows, D] {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = on->grad.data() + r * D;
        const double* y = on->values.data() + r * D;
        double dot = 0.0;
        for (std::size_t i = 0; i < D; ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < D; ++i) xn->grad[r * D + i] += (g[i] - dot) * y[i];
      }
    });
  }
  return out;
}

// x * sigmoid(x)
inline Tensor swish(const Tensor& x) { return mul(x, sigmoid(x)); }

// tanh-approximated GELU; composed from primitives so its gradient flows
// through the existing backward rules.
inline Tensor gelu(const Tensor& x) {
  const double c = std::sqrt(2.0 / 3.141592653589793238462643383279503);
  Tensor x3 = mul(mul(x, x), x);
  Tensor inner = mul_scalar(add(x, mul_scalar(x3, 0.044715)), c);
  return mul(mul_scalar(x, 0.5), add_scalar(tanh(inner), 1.0));
}

// Mean squared error over all elements.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw TensorError("mse_loss: shape mismatch " + detail::shape_str(pred.shape()) + " vs " +
                      detail::shape_str(target.shape()));
  Tensor d = sub(pred, target);
  return mean(mul(d, d));
}

}  // namespace heatbench
