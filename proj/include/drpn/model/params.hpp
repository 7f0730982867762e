#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "drpn/model/config.hpp"
#include "drpn/numerics/param_store.hpp"

namespace drpn::model {

using num::SlotId;

/// Per-head projections stored as d×d matrices whose column blocks are the
/// individual heads, plus the output projection.
struct MultiHeadIds {
  SlotId wq = 0, wk = 0, wv = 0, wo = 0;
  std::size_t heads = 1;
};

struct LayerNormIds {
  SlotId gain = 0, bias = 0;
};

struct GatedAggIds {
  SlotId wa = 0, ba = 0, wg = 0;
};

struct TitleEncoderIds {
  SlotId word_table = 0;
  MultiHeadIds mh;
  LayerNormIds ln;
  GatedAggIds agg;
  double ln_eps = 1e-5;
};

/// Content-based aggregator; the collaborative one has no attention sub-layer.
struct ContentAggIds {
  bool self_attention = true;
  MultiHeadIds mh;
  LayerNormIds ln;
  GatedAggIds agg;
  double ln_eps = 1e-5;
};

/// tanh([a; b] W1 + b1) W2 + b2
struct ScorerIds {
  SlotId w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

struct DenoiseIds {
  SlotId wq = 0, wk = 0, wv = 0;  // intra comparison (wq is shared with inter)
  SlotId wk_x = 0, wv_x = 0;      // inter comparison
  ScorerIds intra_scorer;         // s^p
  ScorerIds inter_scorer;         // s^n
  SlotId gamma = 0;
};

struct GraphIds {
  SlotId news_table = 0;
  SlotId w1 = 0, w2 = 0, w3 = 0;  // per-head blocks as columns
  SlotId wf1 = 0, wf2 = 0;
  std::size_t heads = 2;
};

struct FusionIds {
  GatedAggIds pair_agg;
  ScorerIds ps, ns, ph, nh;
};

struct ModelIds {
  TitleEncoderIds title;
  ContentAggIds sem_ca_pos, sem_ca_neg;
  DenoiseIds sem_da_pos, sem_da_neg;
  GraphIds graph;
  ContentAggIds col_ca_pos, col_ca_neg;
  DenoiseIds col_da_pos, col_da_neg;
  FusionIds fuse_sem, fuse_col;
};

/// Every slot of the model. All variants share one layout; a variant simply
/// leaves the slots it excludes untouched.
std::vector<num::ParamSpec> model_param_specs(const ModelConfig& config, std::size_t word_rows,
                                              std::size_t news_rows);

/// Resolves slot ids by name; throws ConfigError when a slot is missing.
ModelIds bind_model(const num::ParamStore& store, const ModelConfig& config);

}  // namespace drpn::model
