#include "drpn/model/encoders.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::model {

Var attn(Var q, Var k, Var v, const Mask& key_mask) {
  return num::attention(q, k, v, num::AttentionLayout::single(q.rows(), k.rows(), key_mask), 1);
}

Var multi_head(Tape& tape, const MultiHeadIds& ids, Var q, Var k, Var v, const num::AttentionLayout& layout) {
  if (q.cols() % ids.heads != 0) {
    throw ConfigError("width " + std::to_string(q.cols()) + " is not divisible by " + std::to_string(ids.heads) +
                      " heads");
  }
  Var qh = num::matmul(q, tape.param(ids.wq));
  Var kh = num::matmul(k, tape.param(ids.wk));
  Var vh = num::matmul(v, tape.param(ids.wv));
  return num::matmul(num::attention(qh, kh, vh, layout, ids.heads), tape.param(ids.wo));
}

Var residual_ln(Tape& tape, const LayerNormIds& ids, Var x, Var sub, double eps) {
  Var y = num::layer_norm(num::add(x, sub), eps);
  return num::add_row(num::mul_row(y, tape.param(ids.gain)), tape.param(ids.bias));
}

Var gated_aggregate_segments(Tape& tape, const GatedAggIds& ids, Var x, std::span<const std::size_t> offsets,
                             const Mask& mask) {
  if (!mask.empty()) {
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      bool any = false;
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) any = any || mask[i] != 0;
      if (!any) throw DataError("gated aggregation over a fully masked sequence");
    }
  }
  Var hidden = num::tanh(num::add_row(num::matmul(x, tape.param(ids.wa)), tape.param(ids.ba)));
  Var logits = num::matmul(hidden, tape.param(ids.wg));
  return num::segment_weighted_sum(num::segment_softmax(logits, offsets, mask), x, offsets);
}

Var gated_aggregate(Tape& tape, const GatedAggIds& ids, Var x, const Mask& mask) {
  const std::size_t offsets[] = {0, x.rows()};
  if (x.rows() == 0) throw DataError("gated aggregation over an empty sequence");
  return gated_aggregate_segments(tape, ids, x, offsets, mask);
}

void TitleBatch::add(std::span<const std::uint32_t> tokens, std::size_t pad_to) {
  if (tokens.empty()) {
    word_rows.push_back(0);
    mask.push_back(1);
  }
  for (auto t : tokens) {
    word_rows.push_back(std::size_t{t} + 1);
    mask.push_back(1);
  }
  for (std::size_t n = std::max<std::size_t>(tokens.size(), 1); n < pad_to; ++n) {
    word_rows.push_back(0);
    mask.push_back(0);
  }
  offsets.push_back(word_rows.size());
}

Var encode_titles(Tape& tape, const TitleEncoderIds& ids, const TitleBatch& batch) {
  if (batch.size() == 0) throw DataError("no titles to encode");
  Var x = tape.table_rows(ids.word_table, batch.word_rows);
  num::AttentionLayout layout;
  layout.key_mask = batch.mask;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    layout.blocks.push_back({batch.offsets[s], batch.offsets[s + 1], batch.offsets[s], batch.offsets[s + 1]});
  }
  Var h = multi_head(tape, ids.mh, x, x, x, layout);
  Var y = residual_ln(tape, ids.ln, x, h, ids.ln_eps);
  return gated_aggregate_segments(tape, ids.agg, y, batch.offsets, batch.mask);
}

EmbeddingCoverage load_pretrained_embeddings(const std::filesystem::path& path, const ingest::Vocabulary& vocab,
                                             num::ParamStore& store, SlotId word_table) {
  auto in = ingest::open_input(path);
  num::Tensor& table = store.slot(word_table).value;
  const std::size_t d = table.cols();
  EmbeddingCoverage cov;
  cov.vocabulary = vocab.size();
  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = ingest::split_ws(line);
    if (fields.empty()) continue;
    // A word2vec-style "count dim" header line.
    if (line_no == 1 && fields.size() == 2) continue;
    ++cov.file_vectors;
    auto id = vocab.find(fields[0]);
    if (!id || seen[*id]) continue;
    if (fields.size() != d + 1) {
      throw DataError(ingest::where(path.string(), line_no) + "expected " + std::to_string(d) + " values, found " +
                      std::to_string(fields.size() - 1));
    }
    auto row = table.row(std::size_t{*id} + 1);
    for (std::size_t c = 0; c < d; ++c) {
      const auto& f = fields[c + 1];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw DataError(ingest::where(path.string(), line_no) + "bad value '" + std::string(f) + "'");
      }
      row[c] = v;
    }
    seen[*id] = true;
    ++cov.matched;
  }
  return cov;
}

}  // namespace drpn::model
