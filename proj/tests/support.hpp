#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "drpn/numerics/gradcheck.hpp"
#include "drpn/numerics/ops.hpp"
#include "drpn/numerics/param_store.hpp"
#include "drpn/numerics/tape.hpp"

namespace testing {

using drpn::num::ParamSpec;
using drpn::num::ParamStore;
using drpn::num::Tape;
using drpn::num::Tensor;
using drpn::num::Var;

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Store with slots x0, x1, ... filled with the given tensors.
inline ParamStore store_of(const std::vector<Tensor>& inputs) {
  ParamStore s;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto id = s.add({"x" + std::to_string(i), inputs[i].rows(), inputs[i].cols()});
    s.slot(id).value = inputs[i];
  }
  return s;
}

// Gradient check of sum(op(x...) ⊙ W) for a fixed random W, so every output
// coordinate carries a distinct weight.
template <class Op>
drpn::num::GradCheckReport check_op(const std::vector<Tensor>& inputs, Op op, std::uint64_t seed,
                                    double tol = 1e-4) {
  ParamStore store = store_of(inputs);
  std::mt19937_64 rng(seed);
  Tensor weights;
  auto loss = [&](Tape& t) {
    std::vector<Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) xs.push_back(t.param(static_cast<drpn::num::SlotId>(i)));
    Var out = op(xs);
    if (weights.empty()) weights = random_tensor(rng, out.rows(), out.cols());
    return drpn::num::sum_all(drpn::num::elementwise_mul(out, t.constant(weights)));
  };
  return drpn::num::grad_check_params(store, loss, 1e-5, tol);
}

}  // namespace testing
