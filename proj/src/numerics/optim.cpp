#include "drpn/numerics/optim.hpp"

#include <cmath>

#include "drpn/errors.hpp"

namespace drpn::num {

void Adam::ensure_state(const ParamStore& store) {
  if (m_.size() == store.size()) return;
  if (!m_.empty()) throw ShapeError("adam: optimizer state was built for a different store");
  for (const auto& s : store.slots()) {
    m_.emplace_back(s.value.rows(), s.value.cols());
    v_.emplace_back(s.value.rows(), s.value.cols());
  }
}

void Adam::step(ParamStore& store) {
  ensure_state(store);
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t id = 0; id < store.size(); ++id) {
    Slot& s = store.slot(static_cast<SlotId>(id));
    if (!s.trainable) continue;
    Tensor& m = m_[id];
    Tensor& v = v_[id];
    for (std::size_t i = 0; i < s.value.size(); ++i) {
      const double g = s.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      s.value[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::restore(std::uint64_t steps, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (m.size() != v.size()) throw ShapeError("adam: moment lists differ in length");
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace drpn::num
