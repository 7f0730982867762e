#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "drpn/ingest/catalog.hpp"
#include "drpn/model/params.hpp"
#include "drpn/numerics/ops.hpp"

namespace drpn::model {

using num::Mask;
using num::Tape;
using num::Var;

/// softmax(Q Kᵀ / sqrt(d)) V, single head, masked keys excluded.
Var attn(Var q, Var k, Var v, const Mask& key_mask = {});

/// [head_1; ...; head_h] W^I over the given attention layout (self-attention
/// over several independent blocks is one call).
Var multi_head(Tape& tape, const MultiHeadIds& ids, Var q, Var k, Var v, const num::AttentionLayout& layout);

/// LN(x + sub) with affine gain and bias.
Var residual_ln(Tape& tape, const LayerNormIds& ids, Var x, Var sub, double eps);

/// softmax(tanh(X Wa + ba) Wg)ᵀ X over unmasked rows; returns 1×d.
/// Throws DataError when every row is masked.
Var gated_aggregate(Tape& tape, const GatedAggIds& ids, Var x, const Mask& mask = {});

/// Segment-wise gated aggregation: one output row per [offsets[s], offsets[s+1]).
Var gated_aggregate_segments(Tape& tape, const GatedAggIds& ids, Var x, std::span<const std::size_t> offsets,
                             const Mask& mask = {});

/// Word-embedding rows of several titles laid end to end.
/// Row 0 of the word table is PAD, so word id w lives in row w + 1.
struct TitleBatch {
  std::vector<std::size_t> word_rows;
  std::vector<std::size_t> offsets{0};
  Mask mask;

  std::size_t size() const noexcept { return offsets.size() - 1; }
  /// Appends a title, padded with masked PAD rows up to pad_to. An empty
  /// title becomes a single unmasked PAD row.
  void add(std::span<const std::uint32_t> tokens, std::size_t pad_to = 0);
};

/// One row per title.
Var encode_titles(Tape& tape, const TitleEncoderIds& ids, const TitleBatch& batch);

struct EmbeddingCoverage {
  std::size_t matched = 0;
  std::size_t vocabulary = 0;
  std::size_t file_vectors = 0;
  double fraction() const { return vocabulary == 0 ? 0.0 : double(matched) / double(vocabulary); }
};

/// Reads "word v1 ... vd" lines into the word table (row = word id + 1).
/// Words outside the vocabulary are skipped; a vector of the wrong width is a DataError.
EmbeddingCoverage load_pretrained_embeddings(const std::filesystem::path& path, const ingest::Vocabulary& vocab,
                                             num::ParamStore& store, SlotId word_table);

}  // namespace drpn::model
