#include "drpn/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "drpn/errors.hpp"

namespace drpn::num {

namespace {

void note(GradCheckReport& report, GradCheckEntry entry, double tol) {
  if (report.checked == 0 || entry.rel_error > report.max_rel_error) {
    report.max_rel_error = entry.rel_error;
    report.worst = entry.label + "[" + std::to_string(entry.index) + "]";
  }
  ++report.checked;
  if (!(entry.rel_error < tol)) report.failures.push_back(std::move(entry));
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double(const Tensor&)>& f,
                           const std::function<Tensor(const Tensor&)>& gradient, const Tensor& point,
                           double step, double tol) {
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");
  const Tensor analytic = gradient(point);
  if (!analytic.same_shape(point)) {
    throw ShapeError("grad_check: gradient " + analytic.shape_string() + " for point " +
                     point.shape_string());
  }
  GradCheckReport report;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = f(probe);
    probe[i] = point[i] - step;
    const double down = f(probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * step);
    note(report, {"x", i, analytic[i], numeric, relative_error(analytic[i], numeric)}, tol);
  }
  return report;
}

GradCheckReport grad_check_params(ParamStore& store, const LossBuilder& loss, double step, double tol,
                                  std::size_t max_per_slot) {
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");
  GradBuffer buffer(store);
  {
    Tape tape(store, &buffer);
    tape.backward(loss(tape));
  }
  store.zero_grads();
  store.accumulate(buffer);

  auto evaluate = [&]() {
    Tape tape(store);
    return loss(tape).value().item();
  };

  GradCheckReport report;
  for (std::size_t id = 0; id < store.size(); ++id) {
    Slot& slot = store.slot(static_cast<SlotId>(id));
    if (!slot.trainable) continue;
    const std::size_t n = slot.value.size();
    const std::size_t stride = (max_per_slot == 0 || n <= max_per_slot) ? 1 : n / max_per_slot;
    for (std::size_t i = 0; i < n; i += stride) {
      const double original = slot.value[i];
      slot.value[i] = original + step;
      const double up = evaluate();
      slot.value[i] = original - step;
      const double down = evaluate();
      slot.value[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = slot.grad[i];
      note(report, {slot.name, i, analytic, numeric, relative_error(analytic, numeric)}, tol);
    }
  }
  store.zero_grads();
  return report;
}

}  // namespace drpn::num
