#include "tt/stripe_attention.hpp"

#include <cmath>

namespace tt {

void StripeConfig::validate(Index l, Index d_prime) const {
  if (b < 1) throw ConfigError("block width b must be >= 1, got " + std::to_string(b));
  if (w % 2 == 0) throw ConfigError("window width w must be odd, got " + std::to_string(w));
  if (w < 1 || w > l)
    throw ConfigError("window width w must satisfy 1 <= w <= l, got w=" + std::to_string(w) +
                      " with l=" + std::to_string(l));
  if (heads < 1 || d_prime % heads != 0)
    throw ConfigError("d_prime=" + std::to_string(d_prime) + " not divisible by heads=" +
                      std::to_string(heads));
}

BlockGrid::BlockGrid(Index n_padded, Index b) : n_(n_padded), b_(b) {
  if (b < 1) throw ConfigError("block width b must be >= 1");
  if (n_padded < 1 || n_padded % b != 0)
    throw ConfigError("table side " + std::to_string(n_padded) + " is not a multiple of block width " +
                      std::to_string(b) + "; pad the table first");
  l_ = n_padded / b;
}

std::vector<Index> BlockGrid::block_tokens(Index block) const {
  const Index br = (block / l_) * b_;
  const Index bc = (block % l_) * b_;
  std::vector<Index> out;
  out.reserve(static_cast<size_t>(b_ * b_));
  for (Index r = 0; r < b_; ++r)
    for (Index c = 0; c < b_; ++c) out.push_back((br + r) * n_ + bc + c);
  return out;
}

FlopLedger flops(Index n_padded, Index b, Index w, Index heads, Index d_prime, AttnMode mode) {
  BlockGrid grid(n_padded, b);
  StripeConfig cfg;
  cfg.b = b;
  cfg.w = w;
  cfg.heads = heads;
  cfg.validate(grid.l(), d_prime);
  const uint64_t tokens = static_cast<uint64_t>(n_padded) * static_cast<uint64_t>(n_padded);
  const uint64_t keys = mode == AttnMode::Stripe
                            ? static_cast<uint64_t>(w) * w * b * b
                            : tokens;
  FlopLedger ledger;
  ledger.score_macs = tokens * keys * static_cast<uint64_t>(d_prime);
  ledger.value_macs = tokens * keys * static_cast<uint64_t>(d_prime);
  return ledger;
}

std::vector<Index> neighbor_indices(Index i, Index l, Index w, WrapMode wrap) {
  if (l < 1) throw ConfigError("neighbor_indices: l must be >= 1");
  if (i < 0 || i >= l * l)
    throw ConfigError("neighbor_indices: block id " + std::to_string(i) + " out of " +
                      std::to_string(l * l));
  if (w % 2 == 0) throw ConfigError("window width w must be odd, got " + std::to_string(w));
  if (w < 1 || w > l)
    throw ConfigError("window width w must satisfy 1 <= w <= l, got w=" + std::to_string(w) +
                      " with l=" + std::to_string(l));
  const Index half = w / 2;
  const Index total = l * l;
  std::vector<Index> out;
  out.reserve(static_cast<size_t>(w * w));
  for (Index r = -half; r <= half; ++r) {
    for (Index c = -half; c <= half; ++c) {
      if (wrap == WrapMode::Flattened) {
        Index v = (i + r * l + c) % total;
        if (v < 0) v += total;
        out.push_back(v);
      } else {
        const Index rr = (((i / l) + r) % l + l) % l;
        const Index cc = (((i % l) + c) % l + l) % l;
        out.push_back(rr * l + cc);
      }
    }
  }
  return out;
}

BoolGrid build_stripe_mask(Index n_padded, Index b, Index w, WrapMode wrap) {
  BlockGrid grid(n_padded, b);
  const Index tokens = n_padded * n_padded;
  BoolGrid mask = BoolGrid::Constant(tokens, tokens, false);
  for (Index block = 0; block < grid.num_blocks(); ++block) {
    const std::vector<Index> queries = grid.block_tokens(block);
    for (Index nb : neighbor_indices(block, grid.l(), w, wrap)) {
      const std::vector<Index> keys = grid.block_tokens(nb);
      for (Index q : queries)
        for (Index k : keys) mask(q, k) = true;
    }
  }
  return mask;
}

Tensor additive_mask(const BoolGrid& allowed) {
  const Index rows = allowed.rows(), cols = allowed.cols();
  Tensor out({rows, cols});
  auto m = out.as_matrix(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = allowed(r, c) ? 0.0 : -1e9;
  return out;
}

namespace {

// Rows of x (viewed [T, d']) restricted to one head's columns, gathered by
// token index into a dense scratch matrix.
template <typename Mat>
void gather_head(const Mat& src, const std::vector<Index>& tokens, Index head_off, Index dh,
                 MatrixRM& out) {
  out.resize(static_cast<Index>(tokens.size()), dh);
  for (size_t i = 0; i < tokens.size(); ++i)
    out.row(static_cast<Index>(i)) = src.block(tokens[i], head_off, 1, dh);
}

void rowwise_softmax(MatrixRM& scores) {
  for (Index r = 0; r < scores.rows(); ++r) {
    const double mx = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - mx).exp();
    scores.row(r) /= scores.row(r).sum();
  }
}

struct QkvIds {
  int32_t q, k, v;
};

// Fused stripe multi-head attention node over projected q/k/v, all [T, d'].
Var stripe_core(Var q, Var k, Var v, const BlockGrid& grid, const StripeConfig& cfg,
                FlopLedger* ledger) {
  Graph& g = *q.graph;
  const Index t = q.dim(0), d_prime = q.dim(1);
  const Index heads = cfg.heads, dh = d_prime / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index nblocks = grid.num_blocks();
  const Index bcells = grid.cells_per_block();
  const Index nkeys = cfg.w * cfg.w * bcells;

  std::vector<std::vector<Index>> block_cells(static_cast<size_t>(nblocks));
  std::vector<std::vector<Index>> nb_cells(static_cast<size_t>(nblocks));
  for (Index blk = 0; blk < nblocks; ++blk) {
    block_cells[static_cast<size_t>(blk)] = grid.block_tokens(blk);
    std::vector<Index>& keys = nb_cells[static_cast<size_t>(blk)];
    keys.reserve(static_cast<size_t>(nkeys));
    for (Index nb : neighbor_indices(blk, grid.l(), cfg.w, cfg.wrap))
      for (Index cell : grid.block_tokens(nb)) keys.push_back(cell);
  }

  Tensor out({t, d_prime});
  auto om = out.as_matrix(t, d_prime);
  auto qm = q.value().as_matrix(t, d_prime);
  auto km = k.value().as_matrix(t, d_prime);
  auto vm = v.value().as_matrix(t, d_prime);

  // softmax weights saved for backward: [block][head][query cell][key]
  std::vector<double> probs(static_cast<size_t>(nblocks * heads * bcells * nkeys));
  MatrixRM qi, kn, vn, scores;
  for (Index blk = 0; blk < nblocks; ++blk) {
    const auto& queries = block_cells[static_cast<size_t>(blk)];
    const auto& keys = nb_cells[static_cast<size_t>(blk)];
    for (Index h = 0; h < heads; ++h) {
      const Index off = h * dh;
      gather_head(qm, queries, off, dh, qi);
      gather_head(km, keys, off, dh, kn);
      gather_head(vm, keys, off, dh, vn);
      scores.noalias() = qi * kn.transpose() * scl;
      rowwise_softmax(scores);
      double* dst = probs.data() + (blk * heads + h) * bcells * nkeys;
      Eigen::Map<MatrixRM>(dst, bcells, nkeys) = scores;
      const MatrixRM mixed = scores * vn;
      for (size_t i = 0; i < queries.size(); ++i)
        om.block(queries[i], off, 1, dh) = mixed.row(static_cast<Index>(i));
    }
  }
  if (ledger) {
    const uint64_t macs = static_cast<uint64_t>(t) * nkeys * d_prime;
    ledger->score_macs += macs;
    ledger->value_macs += macs;
  }

  const QkvIds ids{q.id, k.id, v.id};
  return g.make(std::move(out), [ids, block_cells = std::move(block_cells),
                                 nb_cells = std::move(nb_cells), probs = std::move(probs), t,
                                 d_prime, heads, dh, scl, nblocks, bcells,
                                 nkeys](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(t, d_prime);
    auto qm = g.value_of(ids.q).as_matrix(t, d_prime);
    auto km = g.value_of(ids.k).as_matrix(t, d_prime);
    auto vm = g.value_of(ids.v).as_matrix(t, d_prime);
    auto dq = g.grad_of(ids.q).as_matrix(t, d_prime);
    auto dk = g.grad_of(ids.k).as_matrix(t, d_prime);
    auto dv = g.grad_of(ids.v).as_matrix(t, d_prime);
    MatrixRM qi, kn, vn, dout, dp, ds;
    for (Index blk = 0; blk < nblocks; ++blk) {
      const auto& queries = block_cells[static_cast<size_t>(blk)];
      const auto& keys = nb_cells[static_cast<size_t>(blk)];
      for (Index h = 0; h < heads; ++h) {
        const Index off = h * dh;
        gather_head(qm, queries, off, dh, qi);
        gather_head(km, keys, off, dh, kn);
        gather_head(vm, keys, off, dh, vn);
        Eigen::Map<const MatrixRM> p(probs.data() + (blk * heads + h) * bcells * nkeys, bcells,
                                     nkeys);
        gather_head(dy, queries, off, dh, dout);
        // dV
        const MatrixRM dvn = p.transpose() * dout;
        for (size_t i = 0; i < keys.size(); ++i)
          dv.block(keys[i], off, 1, dh) += dvn.row(static_cast<Index>(i));
        // softmax backward
        dp.noalias() = dout * vn.transpose();
        ds = p.cwiseProduct(dp);
        const Eigen::VectorXd rowsums = ds.rowwise().sum();
        ds.noalias() = p.cwiseProduct(dp.colwise() - rowsums);
        ds *= scl;
        const MatrixRM dqi = ds * kn;
        for (size_t i = 0; i < queries.size(); ++i)
          dq.block(queries[i], off, 1, dh) += dqi.row(static_cast<Index>(i));
        const MatrixRM dkn = ds.transpose() * qi;
        for (size_t i = 0; i < keys.size(); ++i)
          dk.block(keys[i], off, 1, dh) += dkn.row(static_cast<Index>(i));
      }
    }
  });
}

// Fused full multi-head attention node over projected q/k/v, optional
// additive mask shared across heads.
Var full_core(Var q, Var k, Var v, Index heads, const Tensor* mask, FlopLedger* ledger) {
  Graph& g = *q.graph;
  const Index t = q.dim(0), d_prime = q.dim(1);
  if (d_prime % heads != 0) throw ConfigError("d_prime not divisible by heads");
  const Index dh = d_prime / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor mask_copy;
  bool has_mask = false;
  if (mask) {
    if (mask->shape() != std::vector<Index>{t, t})
      throw ShapeError("attention mask must be " + std::to_string(t) + "x" + std::to_string(t) +
                       ", got " + shape_string(mask->shape()));
    mask_copy = *mask;
    has_mask = true;
  }

  Tensor out({t, d_prime});
  auto om = out.as_matrix(t, d_prime);
  auto qm = q.value().as_matrix(t, d_prime);
  auto km = k.value().as_matrix(t, d_prime);
  auto vm = v.value().as_matrix(t, d_prime);
  std::vector<double> probs(static_cast<size_t>(heads * t * t));
  MatrixRM scores;
  for (Index h = 0; h < heads; ++h) {
    const Index off = h * dh;
    scores.noalias() = qm.middleCols(off, dh) * km.middleCols(off, dh).transpose() * scl;
    if (has_mask) scores += mask_copy.as_matrix(t, t);
    rowwise_softmax(scores);
    Eigen::Map<MatrixRM>(probs.data() + h * t * t, t, t) = scores;
    om.middleCols(off, dh).noalias() = scores * vm.middleCols(off, dh);
  }
  if (ledger) {
    const uint64_t macs = static_cast<uint64_t>(t) * t * d_prime;
    ledger->score_macs += macs;
    ledger->value_macs += macs;
  }

  const QkvIds ids{q.id, k.id, v.id};
  return g.make(std::move(out),
                [ids, probs = std::move(probs), t, d_prime, heads, dh, scl](Graph& g, int32_t self) {
                  auto dy = g.grad_of(self).as_matrix(t, d_prime);
                  auto qm = g.value_of(ids.q).as_matrix(t, d_prime);
                  auto km = g.value_of(ids.k).as_matrix(t, d_prime);
                  auto vm = g.value_of(ids.v).as_matrix(t, d_prime);
                  auto dq = g.grad_of(ids.q).as_matrix(t, d_prime);
                  auto dk = g.grad_of(ids.k).as_matrix(t, d_prime);
                  auto dv = g.grad_of(ids.v).as_matrix(t, d_prime);
                  MatrixRM dp, ds;
                  for (Index h = 0; h < heads; ++h) {
                    const Index off = h * dh;
                    Eigen::Map<const MatrixRM> p(probs.data() + h * t * t, t, t);
                    dv.middleCols(off, dh).noalias() += p.transpose() * dy.middleCols(off, dh);
                    dp.noalias() = dy.middleCols(off, dh) * vm.middleCols(off, dh).transpose();
                    ds = p.cwiseProduct(dp);
                    const Eigen::VectorXd rowsums = ds.rowwise().sum();
                    ds = p.cwiseProduct(dp.colwise() - rowsums);
                    ds *= scl;
                    dq.middleCols(off, dh).noalias() += ds * km.middleCols(off, dh);
                    dk.middleCols(off, dh).noalias() += ds.transpose() * qm.middleCols(off, dh);
                  }
                });
}

Var check_table_input(Var x, const char* who) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(0) != xv.dim(1))
    throw ShapeError(std::string(who) + ": need [n,n,d'], got " + shape_string(xv.shape()));
  return x;
}

}  // namespace

Var stripe_attention_forward(Var x, const AttentionParams& params, const StripeConfig& cfg,
                             FlopLedger* ledger) {
  check_table_input(x, "stripe_attention_forward");
  const Index n = x.dim(0), d_prime = x.dim(2);
  if (n % cfg.b != 0)
    throw ConfigError("stripe attention input side " + std::to_string(n) +
                      " is not padded to a multiple of b=" + std::to_string(cfg.b));
  BlockGrid grid(n, cfg.b);
  cfg.validate(grid.l(), d_prime);
  Var flat = reshape(x, {n * n, d_prime});
  Var q = linear(flat, params.wq, params.bq);
  Var k = linear(flat, params.wk, params.bk);
  Var v = linear(flat, params.wv, params.bv);
  Var mixed = stripe_core(q, k, v, grid, cfg, ledger);
  Var o = linear(mixed, params.wo, params.bo);
  return reshape(o, {n, n, d_prime});
}

Var full_attention_forward(Var x, const AttentionParams& params, Index heads, const Tensor* mask,
                           FlopLedger* ledger) {
  check_table_input(x, "full_attention_forward");
  const Index n = x.dim(0), d_prime = x.dim(2);
  Var flat = reshape(x, {n * n, d_prime});
  Var q = linear(flat, params.wq, params.bq);
  Var k = linear(flat, params.wk, params.bk);
  Var v = linear(flat, params.wv, params.bv);
  Var mixed = full_core(q, k, v, heads, mask, ledger);
  Var o = linear(mixed, params.wo, params.bo);
  return reshape(o, {n, n, d_prime});
}

Var loop_shift(Var x, Index s) {
  check_table_input(x, "loop_shift");
  return cyclic_shift(x, s);
}

Var loop_unshift(Var x, Index s) {
  check_table_input(x, "loop_unshift");
  return cyclic_shift(x, -s);
}

}  // namespace tt
