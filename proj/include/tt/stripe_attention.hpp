#pragma once

#include <cstdint>
#include <vector>

#include "tt/graph.hpp"
#include "tt/ops.hpp"
#include "tt/parameters.hpp"

namespace tt {

// How block neighborhoods wrap at the edges of the block sequence. Flattened
// applies the modulus on flattened block ids, (i + r*l + c) mod l*l, so a
// horizontal step past a row edge lands in the next block row. Torus wraps
// rows and columns independently.
enum class WrapMode : uint8_t { Flattened = 0, Torus = 1 };

struct StripeConfig {
  Index b = 2;       // block width, cells
  Index w = 3;       // window width, blocks; odd, w <= l
  Index heads = 4;
  WrapMode wrap = WrapMode::Flattened;

  void validate(Index l, Index d_prime) const;
};

// Partition of a padded n×n table into l² blocks of b×b cells. Cells inside a
// block are enumerated row-major.
class BlockGrid {
 public:
  BlockGrid(Index n_padded, Index b);

  Index n_padded() const { return n_; }
  Index b() const { return b_; }
  Index l() const { return l_; }
  Index num_blocks() const { return l_ * l_; }
  Index cells_per_block() const { return b_ * b_; }

  Index block_of_cell(Index row, Index col) const { return (row / b_) * l_ + (col / b_); }
  Index block_of_token(Index token) const { return block_of_cell(token / n_, token % n_); }

  // Flattened token ids of a block's cells, row-major within the block.
  std::vector<Index> block_tokens(Index block) const;

 private:
  Index n_, b_, l_;
};

// Counted multiply-accumulate operations for the two attention matmuls
// (query·key scores and weight·value mixing), exact deterministic functions of
// the attention geometry. Forward passes only.
struct FlopLedger {
  uint64_t score_macs = 0;
  uint64_t value_macs = 0;

  FlopLedger& operator+=(const FlopLedger& o) {
    score_macs += o.score_macs;
    value_macs += o.value_macs;
    return *this;
  }
  bool operator==(const FlopLedger&) const = default;
};

enum class AttnMode : uint8_t { Stripe = 0, Full = 1 };

// Closed-form MAC counts for one attention pass over a padded n×n table.
FlopLedger flops(Index n_padded, Index b, Index w, Index heads, Index d_prime, AttnMode mode);

// Neighbor blocks of block i in a w×w window, cyclically wrapped; returned in
// window order (row offsets outer, column offsets inner). Always w² distinct
// ids when w <= l.
std::vector<Index> neighbor_indices(Index i, Index l, Index w,
                                    WrapMode wrap = WrapMode::Flattened);

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Token-pair mask over the flattened padded table: mask(q, k) is true iff k's
// block lies in the w×w neighborhood of q's block. Every row has exactly
// w²·b² true entries.
BoolGrid build_stripe_mask(Index n_padded, Index b, Index w, WrapMode wrap = WrapMode::Flattened);

// 0 where allowed, -1e9 where masked; applied additively before softmax.
Tensor additive_mask(const BoolGrid& allowed);

// Q/K/V/output projection weights for one multi-head attention layer.
struct AttentionParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

// Multi-head attention over the flattened table where each query token
// attends exactly to the w²·b² tokens of its block's neighborhood. Gathers
// keys and values per block; never materializes the full score matrix.
// x: [n,n,d'] with n a multiple of cfg.b. ledger, when given, accrues the
// score/value MACs of this pass.
Var stripe_attention_forward(Var x, const AttentionParams& params, const StripeConfig& cfg,
                             FlopLedger* ledger = nullptr);

// Standard multi-head attention over the flattened n² sequence with an
// optional additive mask. Serves as the oracle for stripe attention and as
// the full-attention ablation path.
Var full_attention_forward(Var x, const AttentionParams& params, Index heads,
                           const Tensor* mask = nullptr, FlopLedger* ledger = nullptr);

// Cyclic table translation toward the upper left: out[r][c] = x[(r+s)%n][(c+s)%n].
Var loop_shift(Var x, Index s);

// Inverse translation: out[r][c] = x[(r-s)%n][(c-s)%n].
Var loop_unshift(Var x, Index s);

}  // namespace tt
