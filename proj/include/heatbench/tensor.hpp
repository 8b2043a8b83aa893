#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// Design:
//  * A Tensor is a shared handle to an immutable value buffer plus an
//    optional gradient buffer. Shapes are row-major.
//  * A Tape records one backward closure per differentiable operation, in
//    execution order. backward() replays the closures in reverse, so every
//    recorded operation is visited exactly once.
//  * Operations record onto the innermost active Tape (RAII activation).
//    With no tape active the same functions are plain math.
//  * Every operation validates its output for NaN/Inf and fails loudly,
//    naming the operation.
//
// Broadcasting is restricted: shapes must match after left-padding the
// shorter shape with 1s, and only size-1 dimensions expand. This covers the
// two cases the models need (bias rows appended on the trailing axes, and
// per-row scalars with trailing 1x1 dims) while keeping backward rules
// auditable.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace heatbench {

using Shape = std::vector<std::size_t>;

class TensorError : public std::runtime_error {
 public:
  explicit TensorError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<TensorNode>;

}  // namespace detail

class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (detail::shape_numel(shape) != values.size())
      throw TensorError("Tensor: shape " + detail::shape_str(shape) + " does not match buffer size " +
                        std::to_string(values.size()));
    for (std::size_t d : shape)
      if (d == 0) throw TensorError("Tensor: zero dimension in shape " + detail::shape_str(shape));
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(detail::shape_numel(shape), 0.0);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    std::vector<double> v(detail::shape_numel(shape), value);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

  std::span<const double> values() const { return node_->values; }

  // In-place mutation is reserved for code running outside any tape
  // (optimizer updates, test setup). Mutating values that a recorded
  // closure still references would corrupt the backward pass.
  std::span<double> mutable_values() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const {
    if (node_->grad.empty())
      throw TensorError("Tensor::grad: no gradient accumulated");
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  double item() const {
    if (size() != 1) throw TensorError("Tensor::item: tensor has " + std::to_string(size()) + " elements");
    return node_->values[0];
  }

  double at(std::size_t flat_index) const { return node_->values.at(flat_index); }

  // Value copy outside the autodiff graph.
  Tensor detach() const {
    return from(node_->shape, node_->values, false);
  }

  Tensor clone() const {
    Tensor t = from(node_->shape, node_->values, node_->requires_grad);
    return t;
  }

  detail::NodePtr node() const { return node_; }

 private:
  detail::NodePtr node_;
};

// ---------------------------------------------------------------------------
// Tape

class Tape {
 public:
  Tape() : prev_(active_ref()) { active_ref() = this; }
  ~Tape() { active_ref() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_ref(); }

  void record(const char* op, std::vector<detail::NodePtr> inputs, detail::NodePtr output,
              std::function<void()> backward_fn) {
    entries_.push_back(Entry{op, std::move(inputs), std::move(output), std::move(backward_fn)});
  }

  std::size_t size() const { return entries_.size(); }

  friend void backward(const Tensor& loss, Tape& tape);

 private:
  struct Entry {
    const char* op;
    std::vector<detail::NodePtr> inputs;
    detail::NodePtr output;
    std::function<void()> fn;
  };

  static Tape*& active_ref() {
    thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<Entry> entries_;
  Tape* prev_;
};

namespace detail {

inline void check_finite(const char* op, const std::vector<double>& vals) {
  for (double v : vals)
    if (!std::isfinite(v))
      throw TensorError(std::string(op) + ": non-finite value produced");
}

inline void check_inputs_finite(const char* op, const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v))
      throw TensorError(std::string(op) + ": non-finite input");
}

// Returns true (and the broadcast result shape) when the two shapes are
// compatible under the restricted rule: left-pad with 1s, then every
// dimension pair must be equal or contain a 1.
inline bool broadcast_shape(const Shape& a, const Shape& b, Shape& out) {
  const std::size_t r = std::max(a.size(), b.size());
  out.assign(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) return false;
    out[i] = std::max(da, db);
  }
  return true;
}

// Row-major strides; broadcast dimensions get stride 0.
inline std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t acc = 1;
  const std::size_t pad = out.size() - s.size();
  for (std::size_t i = s.size(); i-- > 0;) {
    strides[i + pad] = (s[i] == 1 && out[i + pad] != 1) ? 0 : acc;
    acc *= s[i];
  }
  return strides;
}

// Reduce a buffer shaped like `out` back onto the (broadcast) shape `s`.
inline void reduce_to_shape(const std::vector<double>& big, const Shape& out, const Shape& s,
                            std::vector<double>& dst) {
  const auto strides = broadcast_strides(s, out);
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> idx(out.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < out.size(); ++d) src += idx[d] * strides[d];
    dst[src] += big[flat];
    for (std::size_t d = out.size(); d-- > 0;) {
      if (++idx[d] < out[d]) break;
      idx[d] = 0;
    }
  }
}

}  // namespace detail

// Runs the recorded closures in reverse order, seeding d(loss)/d(loss) = 1.
// Gradients accumulate additively on every tensor with requires_grad.
inline void backward(const Tensor& loss, Tape& tape) {
  if (loss.size() != 1) throw TensorError("backward: loss must be scalar");
  if (!loss.requires_grad())
    throw TensorError("backward: loss is not connected to the tape (detached graph)");
  auto node = loss.node();
  node->ensure_grad();
  node->grad[0] = 1.0;
  for (std::size_t i = tape.entries_.size(); i-- > 0;) {
    auto& e = tape.entries_[i];
    if (e.output->grad.empty()) continue;  // no gradient flowed here
    e.fn();
  }
  // Surface non-finite gradients as loudly as non-finite values.
  for (auto& e : tape.entries_) {
    for (auto& in : e.inputs) {
      if (!in->grad.empty())
        for (double g : in->grad)
          if (!std::isfinite(g))
            throw TensorError(std::string(e.op) + ": non-finite gradient produced");
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise binary operations (restricted broadcasting)

namespace detail {

template <class FwdFn, class BwdFn>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, FwdFn fwd, BwdFn bwd) {
  Shape out_shape;
  if (!broadcast_shape(a.shape(), b.shape(), out_shape))
    throw TensorError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  const std::size_t n = shape_numel(out_shape);
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);

  std::vector<double> vals(n);
  std::vector<std::size_t> ia(n), ib(n);
  {
    std::vector<std::size_t> idx(out_shape.size(), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
      std::size_t oa = 0, ob = 0;
      for (std::size_t d = 0; d < out_shape.size(); ++d) {
        oa += idx[d] * sa[d];
        ob += idx[d] * sb[d];
      }
      ia[flat] = oa;
      ib[flat] = ob;
      vals[flat] = fwd(a.at(oa), b.at(ob));
      for (std::size_t d = out_shape.size(); d-- > 0;) {
        if (++idx[d] < out_shape[d]) break;
        idx[d] = 0;
      }
    }
  }
  check_finite(name, vals);
  Tensor out = Tensor::from(out_shape, std::move(vals));

  if (Tape* tape = Tape::active(); tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    auto ia_c = std::move(ia), ib_c = std::move(ib);
    tape->record(name, {an, bn}, on, [an, bn, on, ia_c, ib_c, bwd] {
      const auto& g = on->grad;
      if (an->requires_grad) an->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double da = 0.0, db = 0.0;
        bwd(an->values[ia_c[i]], bn->values[ib_c[i]], da, db);
        if (an->requires_grad) an->grad[ia_c[i]] += g[i] * da;
        if (bn->requires_grad) bn->grad[ib_c[i]] += g[i] * db;
      }
    });
  }
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double& da, double& db) { da = 1.0; db = 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double& da, double& db) { da = 1.0; db = -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double& da, double& db) { da = y; db = x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double& da, double& db) {
        da = 1.0 / y;
        db = -x / (y * y);
      });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

inline Tensor add_scalar(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
inline Tensor mul_scalar(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }

// ---------------------------------------------------------------------------
// Elementwise unary operations

namespace detail {

template <class FwdFn, class BwdFn>
Tensor unary_op(const char* name, const Tensor& x, FwdFn fwd, BwdFn bwd) {
  std::vector<double> vals(x.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = fwd(x.at(i));
  check_finite(name, vals);
  Tensor out = Tensor::from(x.shape(), std::move(vals));
  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(name, {xn}, on, [xn, on, bwd] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        xn->grad[i] += on->grad[i] * bwd(xn->values[i], on->values[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor neg(const Tensor& x) {
  return detail::unary_op(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary_op(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  for (double v : x.values())
    if (v <= 0.0) throw TensorError("log: non-positive input");
  return detail::unary_op(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_op(
      "sigmoid", x,
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

// log(1 + e^x), computed without overflow.
inline Tensor softplus(const Tensor& x) {
  return detail::unary_op(
      "softplus", x,
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      });
}

inline Tensor abs(const Tensor& x) {
  return detail::unary_op(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v >= 0.0 ? 1.0 : -1.0; });
}

// ---------------------------------------------------------------------------
// Matrix multiplication: rank-2 x rank-2, or rank-3 x rank-3 with equal
// leading (batch) dimension.

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_inputs_finite("matmul", a);
  detail::check_inputs_finite("matmul", b);
  const bool batched = a.rank() == 3 && b.rank() == 3;
  if (!(batched || (a.rank() == 2 && b.rank() == 2)))
    throw TensorError("matmul: expected two rank-2 or two rank-3 tensors, got " +
                      detail::shape_str(a.shape()) + " x " + detail::shape_str(b.shape()));
  const std::size_t nbatch = batched ? a.dim(0) : 1;
  if (batched && b.dim(0) != nbatch)
    throw TensorError("matmul: batch dimensions disagree: " + detail::shape_str(a.shape()) + " x " +
                      detail::shape_str(b.shape()));
  const std::size_t rows = a.dim(batched ? 1 : 0);
  const std::size_t inner = a.dim(batched ? 2 : 1);
  const std::size_t cols = b.dim(batched ? 2 : 1);
  if (b.dim(batched ? 1 : 0) != inner)
    throw TensorError("matmul: inner dimensions disagree: " + detail::shape_str(a.shape()) + " x " +
                      detail::shape_str(b.shape()));

  std::vector<double> vals(nbatch * rows * cols, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t n = 0; n < nbatch; ++n) {
    const double* ap = av.data() + n * rows * inner;
    const double* bp = bv.data() + n * inner * cols;
    double* cp = vals.data() + n * rows * cols;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < inner; ++k) {
        const double aik = ap[i * inner + k];
        if (aik == 0.0) continue;
        const double* brow = bp + k * cols;
        double* crow = cp + i * cols;
        for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
      }
  }
  detail::check_finite("matmul", vals);
  Shape out_shape = batched ? Shape{nbatch, rows, cols} : Shape{rows, cols};
  Tensor out = Tensor::from(std::move(out_shape), std::move(vals));

  if (Tape* tape = Tape::active(); tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    tape->record("matmul", {an, bn}, on, [an, bn, on, nbatch, rows, inner, cols] {
      const auto& g = on->grad;
      if (an->requires_grad) an->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (std::size_t n = 0; n < nbatch; ++n) {
        const double* gp = g.data() + n * rows * cols;
        const double* ap = an->values.data() + n * rows * inner;
        const double* bp = bn->values.data() + n * inner * cols;
        if (an->requires_grad) {
          double* dap = an->grad.data() + n * rows * inner;
          // dA = dC * B^T
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
              const double gij = gp[i * cols + j];
              if (gij == 0.0) continue;
              for (std::size_t k = 0; k < inner; ++k) dap[i * inner + k] += gij * bp[k * cols + j];
            }
        }
        if (bn->requires_grad) {
          double* dbp = bn->grad.data() + n * inner * cols;
          // dB = A^T * dC
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = 0; k < inner; ++k) {
              const double aik = ap[i * inner + k];
              if (aik == 0.0) continue;
              for (std::size_t j = 0; j < cols; ++j) dbp[k * cols + j] += aik * gp[i * cols + j];
            }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

enum class Reduce { Sum, Mean, Max, Min };

namespace detail {

inline const char* reduce_name(Reduce r) {
  switch (r) {
    case Reduce::Sum: return "sum";
    case Reduce::Mean: return "mean";
    case Reduce::Max: return "max";
    case Reduce::Min: return "min";
  }
  return "?";
}

}  // namespace detail

// Full reduction to a scalar.
inline Tensor reduce_all(Reduce op, const Tensor& x) {
  if (x.size() == 0) throw TensorError("reduce: empty tensor");
  const char* name = detail::reduce_name(op);
  double acc;
  std::size_t arg = 0;
  const auto v = x.values();
  switch (op) {
    case Reduce::Sum:
    case Reduce::Mean:
      acc = std::accumulate(v.begin(), v.end(), 0.0);
      if (op == Reduce::Mean) acc /= static_cast<double>(x.size());
      break;
    case Reduce::Max:
      arg = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
      acc = v[arg];
      break;
    case Reduce::Min:
      arg = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
      acc = v[arg];
      break;
    default:
      throw TensorError("reduce: unknown op");
  }
  std::vector<double> vals{acc};
  detail::check_finite(name, vals);
  Tensor out = Tensor::from({1}, std::move(vals));
  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    const std::size_t n = x.size();
    tape->record(name, {xn}, on, [xn, on, op, n, arg] {
      xn->ensure_grad();
      const double g = on->grad[0];
      switch (op) {
        case Reduce::Sum:
          for (auto& d : xn->grad) d += g;
          break;
        case Reduce::Mean: {
          const double s = g / static_cast<double>(n);
          for (auto& d : xn->grad) d += s;
          break;
        }
        case Reduce::Max:
        case Reduce::Min:
          xn->grad[arg] += g;  // subgradient routed to the first extremum
          break;
      }
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x) { return reduce_all(Reduce::Sum, x); }
inline Tensor mean(const Tensor& x) { return reduce_all(Reduce::Mean, x); }
inline Tensor max(const Tensor& x) { return reduce_all(Reduce::Max, x); }
inline Tensor min(const Tensor& x) { return reduce_all(Reduce::Min, x); }

// Reduction along one axis; the axis is removed from the result shape.
inline Tensor reduce_axis(Reduce op, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw TensorError("reduce: axis " + std::to_string(axis) + " out of range for rank " +
                      std::to_string(x.rank()));
  if (x.size() == 0) throw TensorError("reduce: empty tensor");
  const char* name = detail::reduce_name(op);

  const Shape& s = x.shape();
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  std::size_t outer = 1, reduce_n = s[axis], inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

  const std::size_t out_n = outer * inner;
  std::vector<double> vals(out_n, 0.0);
  std::vector<std::size_t> args(op == Reduce::Max || op == Reduce::Min ? out_n : 0, 0);
  const auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t dst = o * inner + in;
      double acc = (op == Reduce::Max) ? -1.0 / 0.0 : (op == Reduce::Min ? 1.0 / 0.0 : 0.0);
      for (std::size_t k = 0; k < reduce_n; ++k) {
        const double val = v[(o * reduce_n + k) * inner + in];
        switch (op) {
          case Reduce::Sum:
          case Reduce::Mean: acc += val; break;
          case Reduce::Max:
            if (val > acc) { acc = val; args[dst] = k; }
            break;
          case Reduce::Min:
            if (val < acc) { acc = val; args[dst] = k; }
            break;
        }
      }
      if (op == Reduce::Mean) acc /= static_cast<double>(reduce_n);
      vals[dst] = acc;
    }
  detail::check_finite(name, vals);
  Tensor out = Tensor::from(std::move(out_shape), std::move(vals));

  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(name, {xn}, on, [xn, on, op, outer, reduce_n, inner, args] {
      xn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t src = o * inner + in;
          const double g = on->grad[src];
          if (g == 0.0) continue;
          switch (op) {
            case Reduce::Sum:
              for (std::size_t k = 0; k < reduce_n; ++k)
                xn->grad[(o * reduce_n + k) * inner + in] += g;
              break;
            case Reduce::Mean: {
              const double s = g / static_cast<double>(reduce_n);
              for (std::size_t k = 0; k < reduce_n; ++k)
                xn->grad[(o * reduce_n + k) * inner + in] += s;
              break;
            }
            case Reduce::Max:
            case Reduce::Min:
              xn->grad[(o * reduce_n + args[src]) * inner + in] += g;
              break;
          }
        }
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x, std::size_t axis) { return reduce_axis(Reduce::Sum, x, axis); }
inline Tensor mean(const Tensor& x, std::size_t axis) { return reduce_axis(Reduce::Mean, x, axis); }
inline Tensor max(const Tensor& x, std::size_t axis) { return reduce_axis(Reduce::Max, x, axis); }
inline Tensor min(const Tensor& x, std::size_t axis) { return reduce_axis(Reduce::Min, x, axis); }

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (detail::shape_numel(shape) != x.size())
    throw TensorError("reshape: cannot view " + detail::shape_str(x.shape()) + " as " +
                      detail::shape_str(shape));
  Tensor out = Tensor::from(shape, std::vector<double>(x.values().begin(), x.values().end()));
  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record("reshape", {xn}, on, [xn, on] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return out;
}

// Generalized transpose. perm[i] gives the source axis for result axis i.
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  if (perm.size() != x.rank()) throw TensorError("permute: permutation rank mismatch");
  const Shape& s = x.shape();
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= s.size()) throw TensorError("permute: axis out of range");
    out_shape[i] = s[perm[i]];
  }
  std::vector<std::size_t> src_strides(s.size());
  {
    std::size_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
      src_strides[i] = acc;
      acc *= s[i];
    }
  }
  const std::size_t n = x.size();
  std::vector<double> vals(n);
  std::vector<std::size_t> mapping(n);
  std::vector<std::size_t> idx(out_shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < out_shape.size(); ++d) src += idx[d] * src_strides[perm[d]];
    mapping[flat] = src;
    vals[flat] = x.at(src);
    for (std::size_t d = out_shape.size(); d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  Tensor out = Tensor::from(std::move(out_shape), std::move(vals));
  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record("permute", {xn}, on, [xn, on, mapping] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[mapping[i]] += on->grad[i];
    });
  }
  return out;
}

inline Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw TensorError("transpose2d: rank-2 tensor required");
  return permute(x, {1, 0});
}

// Contiguous slab [start, start+len) along one axis.
inline Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= x.rank()) throw TensorError("narrow: axis out of range");
  const Shape& s = x.shape();
  if (start + len > s[axis] || len == 0)
    throw TensorError("narrow: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                      ") invalid for axis size " + std::to_string(s[axis]));
  Shape out_shape = s;
  out_shape[axis] = len;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

  std::vector<double> vals(outer * len * inner);
  const auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < len; ++k)
      std::copy_n(v.data() + (o * s[axis] + start + k) * inner, inner,
                  vals.data() + (o * len + k) * inner);
  Tensor out = Tensor::from(std::move(out_shape), std::move(vals));

  if (Tape* tape = Tape::active(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    const std::size_t full = s[axis];
    tape->record("narrow", {xn}, on, [xn, on, outer, inner, len, start, full] {
      xn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < len; ++k) {
          const double* g = on->grad.data() + (o * len + k) * inner;
          double* dst = xn->grad.data() + (o * full + start + k) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
        }
    });
  }
  return out;
}

// Stacks T tensors of shape (B, F) into a sequence tensor (B, T, F).
inline Tensor stack_steps(const std::vector<Tensor>& steps) {
  if (steps.empty()) throw TensorError("stack_steps: empty input");
  const std::size_t batch = steps[0].dim(0);
  const std::size_t feat = steps[0].dim(1);
  bool any_grad = false;
  for (const auto& t : steps) {
    if (t.rank() != 2 || t.dim(0) != batch || t.dim(1) != feat)
      throw TensorError("stack_steps: all steps must share shape");
    any_grad = any_grad || t.requires_grad();
  }
  const std::size_t T = steps.size();
  std::vector<double> vals(batch * T * feat);
  for (std::size_t t = 0; t < T; ++t) {
    const auto v = steps[t].values();
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(v.data() + b * feat, feat, vals.data() + (b * T + t) * feat);
  }
  Tensor out = Tensor::from({batch, T, feat}, std::move(vals));

  if (Tape* tape = Tape::active(); tape && any_grad) {
    out.set_requires_grad(true);
    std::vector<detail::NodePtr> nodes;
    nodes.reserve(T);
    for (const auto& t : steps) nodes.push_back(t.node());
    auto on = out.node();
    tape->record("stack_steps", nodes, on, [nodes, on, batch, T, feat] {
      for (std::size_t t = 0; t < T; ++t) {
        auto& xn = nodes[t];
        if (!xn->requires_grad) continue;
        xn->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b) {
          const double* g = on->grad.data() + (b * T + t) * feat;
          double* dst = xn->grad.data() + b * feat;
          for (std::size_t f = 0; f < feat; ++f) dst[f] += g[f];
        }
      }
    });
  }
  return out;
}

// Elementwise maximum of two value buffers, deliberately outside the graph.
// Used for gate stabilizer states, whose contribution to the output cancels
// analytically; see nn.hpp.
inline Tensor detached_max(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw TensorError("detached_max: shape mismatch");
  std::vector<double> vals(a.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = std::max(a.at(i), b.at(i));
  return Tensor::from(a.shape(), std::move(vals));
}

}  // namespace heatbench
