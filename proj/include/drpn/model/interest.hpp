#pragma once

#include <cstddef>

#include "drpn/model/encoders.hpp"

namespace drpn::model {

/// An encoded feedback sequence: one row per entry plus the mask of real rows.
/// A sequence with no real entries is a single zero placeholder row with
/// mask [1] and empty = true.
struct Sequence {
  Var rows;
  Mask mask;
  bool empty = false;

  std::size_t size() const { return rows.rows(); }
  static Sequence placeholder(Tape& tape, std::size_t d);
};

/// [residual_ln(X, MH(X, X, X)) when configured] then gated aggregation; 1×d.
Var content_aggregate(Tape& tape, const ContentAggIds& ids, const Sequence& seq);

/// Row j holds (Σ_{i≠j} α_ji x_i) Wv; a row with no other real entry is zero.
Var intra_attend(Tape& tape, const DenoiseIds& ids, const Sequence& seq);
/// Row j holds Attn(x_j Wq, Y Wk', Y Wv') over the real rows of the opposite sequence Y.
Var inter_attend(Tape& tape, const DenoiseIds& ids, const Sequence& seq, const Sequence& opposite);

/// tanh(input W1 + b1) W2 + b2, one score per row.
Var score_rows(Tape& tape, const ScorerIds& ids, Var input);
/// score_rows over the column concatenation [a; b].
Var pair_scores(Tape& tape, const ScorerIds& ids, Var a, Var b);

/// softmax over real rows of s_p − ReLU(γ)·s_n; without s_n the softmax of s_p.
/// Returns an n×1 column.
Var gated_softmax(Var s_p, Var s_n, Var gamma, const Mask& mask);

/// α for every row of seq. opposite == nullptr drops the inter comparison.
Var denoise_weights(Tape& tape, const DenoiseIds& ids, const Sequence& seq, const Sequence* opposite);
/// Σ_j α_j x_j as a 1×d row.
Var denoise_aggregate(Var seq_rows, Var alpha);

struct InterestBundle {
  Var ps, ns, ph, nh;             // invalid when the variant skips them
  Var alpha_pos, alpha_neg;       // denoising weights, n×1
};

struct InterestIds {
  const ContentAggIds& ca_pos;
  const ContentAggIds& ca_neg;
  const DenoiseIds& da_pos;
  const DenoiseIds& da_neg;
};

struct BundleOptions {
  bool positive = true;
  bool negative = true;
  bool denoise = true;
};

/// p_s, n_s from the content aggregators; p_h denoises P against N and n_h
/// is the dual with roles swapped. An excluded or empty opposite sequence
/// drops the inter comparison.
InterestBundle encode_interests(Tape& tape, const InterestIds& ids, const Sequence& pos, const Sequence& neg,
                                const BundleOptions& options);

}  // namespace drpn::model
