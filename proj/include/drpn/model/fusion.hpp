#pragma once

#include "drpn/model/interest.hpp"

namespace drpn::model {

/// Gated aggregation over the row concatenation [P | N] of the sequences
/// that take part; excluded sequences contribute no rows. 1×d.
Var pair_aggregate(Tape& tape, const GatedAggIds& ids, const Sequence* pos, const Sequence* neg);

/// f = [u_f; r_c] for every candidate row: C×2d.
Var pair_context(Var user_row, Var candidates);

/// One unnormalized weight per candidate (C×1).
Var fusion_weight(Tape& tape, const ScorerIds& ids, Var context);

/// Σ_k weight_k · v_k over the bundle members that are present; C×d.
Var fuse_user(Tape& tape, const FusionIds& ids, const InterestBundle& bundle, Var context);

/// Row-wise u · r.
Var dot_rows(Var users, Var candidates);

/// Mean over samples of −log softmax(row)[0], positive in column 0.
Var training_loss(Var scores);

}  // namespace drpn::model
