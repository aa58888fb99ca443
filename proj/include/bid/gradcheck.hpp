#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "bid/errors.hpp"
#include "bid/mat.hpp"
#include "bid/tape.hpp"

namespace bid {

// Finite-difference verification harness. `build` constructs a fresh
// forward pass over the given inputs and returns the scalar loss node plus
// the leaf ids corresponding to the inputs, in order. Analytic gradients
// from one backward pass are compared against central differences
// (f(x+eps) - f(x-eps)) / (2 eps) for every element of every input.
//
// Relative error uses a small denominator floor so finite-difference noise
// on exactly-zero gradients does not register as error:
//   rel = |ga - gn| / max(1e-4, |ga|, |gn|)
template <class BuildFn>
double grad_check_max_rel_error(BuildFn&& build, std::vector<Mat<double>> inputs,
                                double eps = 1e-5) {
  std::vector<Mat<double>> analytic;
  {
    Tape<double> tape;
    auto [loss, leaves] = build(tape, inputs);
    if (!std::isfinite(static_cast<double>(tape.val(loss).at(0, 0))))
      throw NumericalError("grad_check: non-finite forward value");
    tape.add_seed(loss, 1.0);
    tape.backward();
    analytic.reserve(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      // A leaf id of -1 marks an input the forward never touched; its
      // gradient is zero.
      if (leaves[i] < 0) {
        analytic.push_back(Mat<double>(inputs[i].rows, inputs[i].cols));
        continue;
      }
      const Mat<double>& g = tape.grad_of(leaves[i]);
      analytic.push_back(g.empty() ? Mat<double>(inputs[i].rows, inputs[i].cols) : g);
    }
  }

  const auto eval = [&](const std::vector<Mat<double>>& xs) {
    Tape<double> tape;
    auto [loss, leaves] = build(tape, xs);
    (void)leaves;
    const double v = tape.val(loss).at(0, 0);
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite forward value");
    return v;
  };

  double max_rel = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t e = 0; e < inputs[i].size(); ++e) {
      const double saved = inputs[i].v[e];
      inputs[i].v[e] = saved + eps;
      const double fp = eval(inputs);
      inputs[i].v[e] = saved - eps;
      const double fm = eval(inputs);
      inputs[i].v[e] = saved;
      const double gn = (fp - fm) / (2.0 * eps);
      const double ga = analytic[i].v[e];
      const double denom = std::max({1e-4, std::fabs(ga), std::fabs(gn)});
      max_rel = std::max(max_rel, std::fabs(ga - gn) / denom);
    }
  }
  return max_rel;
}

}  // namespace bid
