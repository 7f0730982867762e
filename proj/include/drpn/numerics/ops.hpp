#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "drpn/numerics/tape.hpp"

namespace drpn::num {

/// 1 marks a real entry, 0 a padded one.
using Mask = std::vector<std::uint8_t>;

// Every op validates shapes (ShapeError naming the op and shapes) and rejects
// non-finite outputs (NumericError).

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1×c row to every row of a.
Var add_row(Var a, Var row);
/// Multiplies every row of a elementwise by a 1×c row.
Var mul_row(Var a, Var row);
Var scalar_mul(Var a, double s);
/// Multiplies a by the 1×1 value s.
Var scale_by(Var a, Var s);
Var elementwise_mul(Var a, Var b);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);

/// Row-wise softmax. mask is empty, one entry per column (shared by all
/// rows), or rows×cols. Masked positions are exactly 0; a fully masked row
/// yields zeros.
Var softmax_rows(Var a, const Mask& mask = {});
/// Row-wise (x - mean) / sqrt(var + eps), no affine terms.
Var layer_norm(Var a, double eps = 1e-5);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// out.row(i) = a.row(idx[i]); a negative index produces a zero row.
Var index_rows(Var a, std::span<const std::ptrdiff_t> idx);
Var repeat_rows(Var row, std::size_t n);
Var reshape(Var a, std::size_t rows, std::size_t cols);

/// n×c → n×1 row sums.
Var sum_rows(Var a);
Var sum_all(Var a);

/// Blocks of a (possibly batched) attention. Query rows [q_begin, q_end)
/// attend key rows [k_begin, k_end). Query rows outside every block, or with
/// no admissible key, produce zeros.
struct AttentionBlock {
  std::size_t q_begin = 0, q_end = 0, k_begin = 0, k_end = 0;
};

struct AttentionLayout {
  std::vector<AttentionBlock> blocks;
  Mask key_mask;             // per key row; empty admits all
  Mask pair_mask;            // dense q_rows × k_rows; empty admits all
  bool exclude_self = false;  // query i never attends key i (row-aligned Q and K)

  static AttentionLayout single(std::size_t q_rows, std::size_t k_rows, Mask key_mask = {});
};

/// softmax(Q Kᵀ / sqrt(dk)) V computed per head on contiguous column blocks
/// of Q, K (dk = cols / heads) and V; head outputs are concatenated.
Var attention(Var q, Var k, Var v, const AttentionLayout& layout, std::size_t heads = 1);

/// Softmax of an n×1 column within each segment [offsets[s], offsets[s+1]).
Var segment_softmax(Var logits, std::span<const std::size_t> offsets, const Mask& mask = {});
/// out.row(s) = Σ_{i in segment s} w[i] · x.row(i).
Var segment_weighted_sum(Var weights, Var x, std::span<const std::size_t> offsets);

/// Σ_i −log softmax(logits.row(i))[0], evaluated with max subtraction.
Var softmax_xent_first(Var logits);

}  // namespace drpn::num
