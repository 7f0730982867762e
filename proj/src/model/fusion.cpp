#include "drpn/model/fusion.hpp"

#include <algorithm>
#include <vector>

#include "drpn/errors.hpp"

namespace drpn::model {

Var pair_aggregate(Tape& tape, const GatedAggIds& ids, const Sequence* pos, const Sequence* neg) {
  std::vector<Var> parts;
  Mask mask;
  for (const Sequence* s : {pos, neg}) {
    if (s == nullptr) continue;
    parts.push_back(s->rows);
    for (auto m : s->mask) mask.push_back(s->empty ? 0 : m);
  }
  if (parts.empty()) throw ConfigError("pair context needs at least one sequence");
  // Nothing real on either side: fall back to the placeholder row.
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) mask[0] = 1;
  Var rows = parts.size() == 1 ? parts[0] : num::concat_rows(parts);
  return gated_aggregate(tape, ids, rows, mask);
}

Var pair_context(Var user_row, Var candidates) {
  const Var parts[] = {num::repeat_rows(user_row, candidates.rows()), candidates};
  return num::concat_cols(parts);
}

Var fusion_weight(Tape& tape, const ScorerIds& ids, Var context) { return score_rows(tape, ids, context); }

Var fuse_user(Tape& tape, const FusionIds& ids, const InterestBundle& bundle, Var context) {
  const std::pair<const ScorerIds*, Var> terms[] = {
      {&ids.ps, bundle.ps}, {&ids.ns, bundle.ns}, {&ids.ph, bundle.ph}, {&ids.nh, bundle.nh}};
  Var u;
  for (const auto& [scorer, v] : terms) {
    if (!v.valid()) continue;
    // (C×1)(1×d): each candidate's weight times the interest vector.
    Var term = num::matmul(fusion_weight(tape, *scorer, context), v);
    u = u.valid() ? num::add(u, term) : term;
  }
  if (!u.valid()) throw ConfigError("fusion over an empty interest bundle");
  return u;
}

Var dot_rows(Var users, Var candidates) { return num::sum_rows(num::elementwise_mul(users, candidates)); }

Var training_loss(Var scores) {
  return num::scalar_mul(num::softmax_xent_first(scores), 1.0 / double(scores.rows()));
}

}  // namespace drpn::model
