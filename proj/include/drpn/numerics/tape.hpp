#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "drpn/numerics/param_store.hpp"
#include "drpn/numerics/tensor.hpp"

namespace drpn::num {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const noexcept { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Ordered record of executed ops over one ParamStore. With a gradient sink
/// the tape keeps backward closures; without one it only evaluates.
///
/// Node storage is a deque, so references returned by value() stay valid while
/// more ops are recorded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(const ParamStore& store, GradBuffer* sink = nullptr);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return sink_ != nullptr; }
  const ParamStore& store() const noexcept { return *store_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value);
  /// Leaf bound to a parameter slot; repeated calls return the same node.
  Var param(SlotId id);
  Var param(std::string_view name) { return param(store_->id(name)); }
  /// Gathers rows of a table slot; gradients flow back as sparse row updates.
  Var table_rows(SlotId table, std::span<const std::size_t> rows);

  /// Reverse sweep from a 1×1 loss. Returns the number of ops visited.
  std::size_t backward(Var loss);

  // Op-construction interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  Tensor& grad(std::uint32_t id);
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  const ParamStore* store_;
  GradBuffer* sink_;
  std::deque<Node> nodes_;
  std::vector<std::int64_t> param_nodes_;
  bool swept_ = false;
};

}  // namespace drpn::num
