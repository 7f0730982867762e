#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "drpn/numerics/param_store.hpp"
#include "drpn/numerics/tape.hpp"
#include "drpn/numerics/tensor.hpp"

namespace drpn::num {

struct GradCheckEntry {
  std::string label;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;
  std::vector<GradCheckEntry> failures;
  bool passed() const noexcept { return failures.empty(); }
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is zero from dividing rounding noise by zero.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares an analytic gradient against central differences of f.
GradCheckReport grad_check(const std::function<double(const Tensor&)>& f,
                           const std::function<Tensor(const Tensor&)>& gradient, const Tensor& point,
                           double step, double tol);

/// Builds a scalar loss on a fresh tape.
using LossBuilder = std::function<Var(Tape&)>;

/// Checks every coordinate of every trainable slot of store (or at most
/// max_per_slot evenly spaced coordinates when non-zero).
GradCheckReport grad_check_params(ParamStore& store, const LossBuilder& loss, double step, double tol,
                                  std::size_t max_per_slot = 0);

}  // namespace drpn::num
