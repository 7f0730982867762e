#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drpn/numerics/tensor.hpp"

namespace drpn::num {

using SlotId = std::uint32_t;

enum class InitKind : std::uint8_t {
  kGlorot = 0,  // uniform(±sqrt(6 / (fan_in + fan_out)))
  kZero = 1,    // biases
  kOne = 2,     // layer-norm gains and the denoising gate
};

struct ParamSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  InitKind init = InitKind::kGlorot;
  bool trainable = true;
};

struct Slot {
  std::string name;
  Tensor value;
  Tensor grad;
  InitKind init = InitKind::kGlorot;
  bool trainable = true;
};

class GradBuffer;

/// Named learnable tensors with their accumulated gradients.
class ParamStore {
 public:
  SlotId add(const ParamSpec& spec);

  SlotId id(std::string_view name) const;
  std::optional<SlotId> find(std::string_view name) const;

  Slot& slot(SlotId id) { return slots_.at(id); }
  const Slot& slot(SlotId id) const { return slots_.at(id); }
  std::span<Slot> slots() noexcept { return slots_; }
  std::span<const Slot> slots() const noexcept { return slots_; }
  std::size_t size() const noexcept { return slots_.size(); }
  std::size_t parameter_count() const noexcept;

  void zero_grads();
  /// grad += buffer, slot by slot in id order and rows in ascending order.
  void accumulate(const GradBuffer& buffer);

  /// True when names, shapes and values match exactly.
  bool same_values(const ParamStore& other) const;

 private:
  std::vector<Slot> slots_;
  std::map<std::string, SlotId, std::less<>> index_;
};

/// Deterministic Glorot/zero/one initialisation. Each slot draws from its own
/// stream seeded by (seed, slot name), so adding a slot never perturbs others.
ParamStore init_params(std::span<const ParamSpec> specs, std::uint64_t seed);

/// Per-sample gradient sink. Dense slots are allocated on first touch; table
/// slots (embeddings) may instead receive sparse row updates.
class GradBuffer {
 public:
  explicit GradBuffer(const ParamStore& store);

  Tensor& dense(SlotId id);
  void add_row(SlotId id, std::size_t row, std::span<const double> g);
  void clear();

  const ParamStore& store() const noexcept { return *store_; }
  bool touched(SlotId id) const;

 private:
  friend class ParamStore;
  const ParamStore* store_;
  std::vector<Tensor> dense_;
  std::vector<std::map<std::size_t, std::vector<double>>> rows_;
};

}  // namespace drpn::num
