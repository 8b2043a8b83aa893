#pragma once

// Shared test helpers. The finite-difference checker is the independent
// oracle for every gradient assertion: it perturbs raw parameter buffers
// and re-runs the forward function with no tape, so it cannot share a code
// path with the analytic backward pass it is checking.

#include <algorithm>
#include <cmath>
#include <vector>

#include "heatbench/rng.hpp"
#include "heatbench/tensor.hpp"

namespace testutil {

// make_loss() must rebuild the forward computation from the current
// parameter values and return a scalar tensor. It is called once under a
// tape (analytic pass) and 2N times without one (central differences).
template <class LossFn>
double max_rel_grad_error(std::vector<heatbench::Tensor>& params, LossFn make_loss,
                          double eps = 1e-5) {
  using heatbench::Tape;

  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    heatbench::Tensor loss = make_loss();
    heatbench::backward(loss, tape);
  }
  for (auto& p : params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(p.size(), 0.0);
  }

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + eps;
      const double lp = make_loss().item();
      vals[i] = orig - eps;
      const double lm = make_loss().item();
      vals[i] = orig;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

inline heatbench::Tensor random_tensor(heatbench::Shape shape, heatbench::Rng& rng, double lo = -2.0,
                                       double hi = 2.0) {
  std::vector<double> vals(heatbench::detail::shape_numel(shape));
  for (auto& v : vals) v = rng.uniform(lo, hi);
  return heatbench::Tensor::from(std::move(shape), std::move(vals));
}

}  // namespace testutil
