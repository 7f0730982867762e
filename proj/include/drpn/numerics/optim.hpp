#pragma once

#include <cstdint>
#include <vector>

#include "drpn/numerics/param_store.hpp"

namespace drpn::num {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment state is kept per slot and can be
/// exported for checkpointing.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update to every trainable slot from its accumulated gradient.
  void step(ParamStore& store);

  const AdamOptions& options() const noexcept { return options_; }
  void set_lr(double lr) noexcept { options_.lr = lr; }
  std::uint64_t steps() const noexcept { return steps_; }

  // Checkpoint access.
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  void restore(std::uint64_t steps, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  void ensure_state(const ParamStore& store);

  AdamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace drpn::num
