#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relic/tensor.hpp"

namespace relic {

// Central finite-difference oracle for reverse-mode gradients.
//
// The error reported per coordinate is |ad - fd| / max(|ad|, |fd|, tau)
// with tau = abs_tol / rel_tol, so "err <= rel_tol" is exactly the
// acceptance rule "relative error <= rel_tol, absolute <= abs_tol near
// zero" folded into one number.
struct GradCheckResult {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param 2 [5]" style locator for the worst coordinate
  bool pass(double rel_tol = 1e-4) const { return max_error <= rel_tol; }
};

// loss_fn must rebuild the scalar loss from the current values of params on
// every call. Analytic adjoints are taken from one taped evaluation; finite
// differences perturb each coordinate in place with step h.
inline GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn,
                                       const std::vector<Tensor>& params,
                                       double h = 1e-5, double rel_tol = 1e-4,
                                       double abs_tol = 1e-7) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = loss_fn();
    }
    tape.backward(loss);
    for (const Tensor& p : params) analytic.push_back(p.adjoint());
  }

  const double tau = abs_tol / rel_tol;
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      const double saved = p.values()[k];
      p.mutable_values()[k] = saved + h;
      const double up = loss_fn().item();
      p.mutable_values()[k] = saved - h;
      const double down = loss_fn().item();
      p.mutable_values()[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic[pi][k];
      const double denom = std::max({std::abs(ad), std::abs(fd), tau});
      const double err = std::abs(ad - fd) / denom;
      ++result.checked;
      if (err > result.max_error) {
        result.max_error = err;
        result.worst =
            "param " + std::to_string(pi) + " [" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace relic
