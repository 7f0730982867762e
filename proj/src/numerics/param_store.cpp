#include "drpn/numerics/param_store.hpp"

#include <cmath>
#include <random>

#include "drpn/errors.hpp"

namespace drpn::num {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Top 53 bits of a 64-bit draw mapped to [0, 1); platform independent unlike
// std::uniform_real_distribution.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SlotId ParamStore::add(const ParamSpec& spec) {
  if (spec.rows == 0 || spec.cols == 0) {
    throw ShapeError("param '" + spec.name + "' has an empty shape");
  }
  if (index_.contains(spec.name)) throw ConfigError("duplicate param name '" + spec.name + "'");
  const auto id = static_cast<SlotId>(slots_.size());
  slots_.push_back(Slot{spec.name, Tensor(spec.rows, spec.cols), Tensor(spec.rows, spec.cols),
                        spec.init, spec.trainable});
  index_.emplace(spec.name, id);
  return id;
}

SlotId ParamStore::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw ConfigError("unknown param '" + std::string(name) + "'");
  return *found;
}

std::optional<SlotId> ParamStore::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& s : slots_) s.grad.fill(0.0);
}

void ParamStore::accumulate(const GradBuffer& buffer) {
  if (buffer.store_ != this) throw ShapeError("accumulate: gradient buffer belongs to another store");
  for (std::size_t id = 0; id < slots_.size(); ++id) {
    auto& grad = slots_[id].grad;
    const auto& dense = buffer.dense_[id];
    if (!dense.empty()) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += dense[i];
    }
    for (const auto& [row, g] : buffer.rows_[id]) {
      auto dst = grad.row(row);
      for (std::size_t c = 0; c < g.size(); ++c) dst[c] += g[c];
    }
  }
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name != other.slots_[i].name) return false;
    if (!(slots_[i].value == other.slots_[i].value)) return false;
  }
  return true;
}

ParamStore init_params(std::span<const ParamSpec> specs, std::uint64_t seed) {
  ParamStore store;
  for (const auto& spec : specs) {
    const SlotId id = store.add(spec);
    Tensor& value = store.slot(id).value;
    switch (spec.init) {
      case InitKind::kZero:
        value.fill(0.0);
        break;
      case InitKind::kOne:
        value.fill(1.0);
        break;
      case InitKind::kGlorot: {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(fnv1a(spec.name)),
                          static_cast<std::uint32_t>(fnv1a(spec.name) >> 32)};
        std::mt19937_64 rng(seq);
        const double bound = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
        for (auto& v : value.values()) v = (2.0 * unit_draw(rng) - 1.0) * bound;
        break;
      }
    }
  }
  return store;
}

GradBuffer::GradBuffer(const ParamStore& store)
    : store_(&store), dense_(store.size()), rows_(store.size()) {}

Tensor& GradBuffer::dense(SlotId id) {
  auto& t = dense_.at(id);
  if (t.empty()) {
    const auto& v = store_->slot(id).value;
    t = Tensor(v.rows(), v.cols());
  }
  return t;
}

void GradBuffer::add_row(SlotId id, std::size_t row, std::span<const double> g) {
  const auto& v = store_->slot(id).value;
  if (row >= v.rows() || g.size() != v.cols()) {
    throw ShapeError("add_row: row " + std::to_string(row) + " width " + std::to_string(g.size()) +
                     " does not fit '" + store_->slot(id).name + "' " + v.shape_string());
  }
  auto [it, inserted] = rows_[id].try_emplace(row, g.begin(), g.end());
  if (!inserted) {
    for (std::size_t c = 0; c < g.size(); ++c) it->second[c] += g[c];
  }
}

void GradBuffer::clear() {
  for (auto& t : dense_) t = Tensor();
  for (auto& r : rows_) r.clear();
}

bool GradBuffer::touched(SlotId id) const { return !dense_.at(id).empty() || !rows_.at(id).empty(); }

}  // namespace drpn::num
