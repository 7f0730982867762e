#include "drpn/numerics/tape.hpp"

#include <string>

#include "drpn/errors.hpp"

namespace drpn::num {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ShapeError("value() on an unbound Var");
  return tape_->value(id_);
}

Tape::Tape(const ParamStore& store, GradBuffer* sink)
    : store_(&store), sink_(sink), param_nodes_(store.size(), -1) {
  if (sink_ != nullptr && &sink_->store() != store_) {
    throw ShapeError("tape: gradient sink belongs to a different ParamStore");
  }
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(SlotId id) {
  auto& cached = param_nodes_.at(id);
  if (cached >= 0) return Var(this, static_cast<std::uint32_t>(cached));
  const Slot& slot = store_->slot(id);
  Node node{slot.value, {}, {}, recording() && slot.trainable};
  if (node.needs_grad) {
    node.backward = [this, id](Tape& t, std::uint32_t self) {
      Tensor& dst = sink_->dense(id);
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    };
  }
  nodes_.push_back(std::move(node));
  cached = static_cast<std::int64_t>(nodes_.size() - 1);
  return Var(this, static_cast<std::uint32_t>(cached));
}

Var Tape::table_rows(SlotId table, std::span<const std::size_t> rows) {
  const Slot& slot = store_->slot(table);
  const Tensor& src = slot.value;
  Tensor out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.rows()) {
      throw ShapeError("table_rows: row " + std::to_string(rows[i]) + " outside '" + slot.name +
                       "' " + src.shape_string());
    }
    auto s = src.row(rows[i]);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  Node node{std::move(out), {}, {}, recording() && slot.trainable};
  if (node.needs_grad) {
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    node.backward = [this, table, idx = std::move(idx)](Tape& t, std::uint32_t self) {
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < idx.size(); ++i) sink_->add_row(table, idx[i], g.row(i));
    };
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  if (recording()) {
    for (const Var& in : inputs) {
      if (&in.tape() != this) throw ShapeError("op mixes Vars from different tapes");
      needs = needs || nodes_[in.id()].needs_grad;
    }
  }
  Node node{std::move(value), {}, {}, needs};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

std::size_t Tape::backward(Var loss) {
  if (!recording()) throw ShapeError("backward: tape was created without a gradient sink");
  if (&loss.tape() != this) throw ShapeError("backward: loss belongs to another tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  if (swept_) throw ShapeError("backward: tape already swept");
  swept_ = true;
  grad(loss.id())[0] += 1.0;
  std::size_t visited = 0;
  for (std::int64_t i = static_cast<std::int64_t>(loss.id()); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, static_cast<std::uint32_t>(i));
    ++visited;
  }
  return visited;
}

}  // namespace drpn::num
