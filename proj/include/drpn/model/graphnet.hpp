#pragma once

#include <cstddef>
#include <vector>

#include "drpn/model/interest.hpp"

namespace drpn::model {

/// ID-table rows of the nodes to encode and of each node's stored neighbors.
struct NodeBatch {
  std::vector<std::size_t> centers;
  std::vector<std::vector<std::size_t>> neighbors;
};

/// Multi-head neighbor aggregation: row i concatenates, per head m,
/// Σ_k α^m_ik (u_k W3_m) with α^m_i a softmax over the admissible pairs of
/// (c_i W1_m)(u_k W2_m)ᵀ / sqrt(d / heads). pair_mask is centers × candidates.
/// Rows without any admissible neighbor are zero.
Var neighbor_aggregate(Tape& tape, const GraphIds& ids, Var centers, Var candidates, const Mask& pair_mask);

/// σ([r; r̂] Wf1) ⊙ tanh([r; r̂] Wf2), row-wise.
Var fuse_node(Tape& tape, const GraphIds& ids, Var r, Var r_hat);

/// One graph layer over the batch; isolated nodes fuse with a zero aggregate.
Var encode_graph_nodes(Tape& tape, const GraphIds& ids, const NodeBatch& batch);

/// Per-head neighbor weights of one node, for inspection; heads × neighbors.
num::Tensor neighbor_weights(const num::ParamStore& store, const GraphIds& ids, std::size_t center,
                             const std::vector<std::size_t>& neighbors);

}  // namespace drpn::model
