#include "drpn/model/interest.hpp"

namespace drpn::model {

Sequence Sequence::placeholder(Tape& tape, std::size_t d) {
  return {tape.constant(num::Tensor(1, d)), Mask{1}, true};
}

Var content_aggregate(Tape& tape, const ContentAggIds& ids, const Sequence& seq) {
  Var x = seq.rows;
  if (ids.self_attention) {
    auto layout = num::AttentionLayout::single(x.rows(), x.rows(), seq.mask);
    x = residual_ln(tape, ids.ln, x, multi_head(tape, ids.mh, x, x, x, layout), ids.ln_eps);
  }
  return gated_aggregate(tape, ids.agg, x, seq.mask);
}

Var intra_attend(Tape& tape, const DenoiseIds& ids, const Sequence& seq) {
  Var x = seq.rows;
  auto layout = num::AttentionLayout::single(x.rows(), x.rows(), seq.mask);
  layout.exclude_self = true;
  Var q = num::matmul(x, tape.param(ids.wq));
  Var k = num::matmul(x, tape.param(ids.wk));
  // (Σ α x_i) Wv = Σ α (x_i Wv)
  Var v = num::matmul(x, tape.param(ids.wv));
  return num::attention(q, k, v, layout, 1);
}

Var inter_attend(Tape& tape, const DenoiseIds& ids, const Sequence& seq, const Sequence& opposite) {
  Var q = num::matmul(seq.rows, tape.param(ids.wq));
  Var k = num::matmul(opposite.rows, tape.param(ids.wk_x));
  Var v = num::matmul(opposite.rows, tape.param(ids.wv_x));
  return num::attention(q, k, v, num::AttentionLayout::single(q.rows(), k.rows(), opposite.mask), 1);
}

Var score_rows(Tape& tape, const ScorerIds& ids, Var input) {
  Var h = num::tanh(num::add_row(num::matmul(input, tape.param(ids.w1)), tape.param(ids.b1)));
  return num::add_row(num::matmul(h, tape.param(ids.w2)), tape.param(ids.b2));
}

Var pair_scores(Tape& tape, const ScorerIds& ids, Var a, Var b) {
  const Var parts[] = {a, b};
  return score_rows(tape, ids, num::concat_cols(parts));
}

Var gated_softmax(Var s_p, Var s_n, Var gamma, const Mask& mask) {
  Var logits = s_p;
  if (s_n.valid()) logits = num::sub(s_p, num::scale_by(s_n, num::relu(gamma)));
  const std::size_t offsets[] = {0, logits.rows()};
  return num::segment_softmax(logits, offsets, mask);
}

Var denoise_weights(Tape& tape, const DenoiseIds& ids, const Sequence& seq, const Sequence* opposite) {
  Var s_p = pair_scores(tape, ids.intra_scorer, seq.rows, intra_attend(tape, ids, seq));
  Var s_n;
  if (opposite != nullptr) {
    s_n = pair_scores(tape, ids.inter_scorer, seq.rows, inter_attend(tape, ids, seq, *opposite));
  }
  return gated_softmax(s_p, s_n, tape.param(ids.gamma), seq.mask);
}

Var denoise_aggregate(Var seq_rows, Var alpha) {
  const std::size_t offsets[] = {0, seq_rows.rows()};
  return num::segment_weighted_sum(alpha, seq_rows, offsets);
}

InterestBundle encode_interests(Tape& tape, const InterestIds& ids, const Sequence& pos, const Sequence& neg,
                                const BundleOptions& options) {
  InterestBundle b;
  const bool pos_as_opposite = options.positive && !pos.empty;
  const bool neg_as_opposite = options.negative && !neg.empty;
  if (options.positive) {
    b.ps = content_aggregate(tape, ids.ca_pos, pos);
    if (options.denoise) {
      b.alpha_pos = denoise_weights(tape, ids.da_pos, pos, neg_as_opposite ? &neg : nullptr);
      b.ph = denoise_aggregate(pos.rows, b.alpha_pos);
    }
  }
  if (options.negative) {
    b.ns = content_aggregate(tape, ids.ca_neg, neg);
    if (options.denoise) {
      b.alpha_neg = denoise_weights(tape, ids.da_neg, neg, pos_as_opposite ? &pos : nullptr);
      b.nh = denoise_aggregate(neg.rows, b.alpha_neg);
    }
  }
  return b;
}

}  // namespace drpn::model
