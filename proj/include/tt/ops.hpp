#pragma once

#include <vector>

#include "tt/graph.hpp"

namespace tt {

// Inclusive cell rectangle in an n×n table.
struct CellRect {
  Index r0 = 0, c0 = 0, r1 = 0, c1 = 0;
};

// ---- leaves and arithmetic -------------------------------------------------

Var constant(Graph& g, Tensor t);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var sigmoid(Var x);
Var gelu(Var x);

// ---- shape plumbing ---------------------------------------------------------

Var reshape(Var x, std::vector<Index> shape);
Var concat_last(const std::vector<Var>& parts);
Var slice_last(Var x, Index start, Index len);
Var slice_rows(Var x, Index start, Index len);

// ---- reductions -------------------------------------------------------------

Var sum(Var x);
Var mean(Var x);

// ---- linear algebra ---------------------------------------------------------

Var matmul(Var a, Var b);

// y = x·W (+ b). x: [..., in], w: [in, out], b: [out].
Var linear(Var x, Var w);
Var linear(Var x, Var w, Var b);

// Row lookup into an embedding table; ids must be < table rows.
Var embedding(Var table, const std::vector<int>& ids);

// Gather rows of x viewed as [rows, last_dim].
Var gather_rows(Var x, std::vector<Index> rows);

// out[i][j] = a[i] + b[j]; a: [n,d], b: [m,d] -> [n,m,d].
Var outer_add(Var a, Var b);

// out[i][j][k] = ha[i]^T · w2[:,k,:] · ho[j]; w2: [d, k, d] -> [n,m,k].
Var bilinear_forms(Var ha, Var ho, Var w2);

// out[i][j] = elementwise max over rows min(i,j)..max(i,j) of h; [n,d] -> [n,n,d].
Var span_max_pool(Var h);

// Per-rectangle elementwise max over an inclusive cell rectangle; [n,n,C] -> [m,C].
Var rect_max_pool(Var table, const std::vector<CellRect>& rects);

// 2-D convolution, kernel 3, stride 1, zero padding 1, C -> C channels.
// x: [n,n,C], w: [3,3,C,C], b: [C].
Var conv3x3(Var x, Var w, Var b);

// ---- normalization and losses ------------------------------------------------

Var softmax(Var x, Index axis);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Mean of -log softmax(logits)[target] over rows; logits viewed as [rows, k].
// The weighted overload divides by the total weight instead of the row count.
Var cross_entropy(Var logits, const std::vector<int>& targets);
Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>& weights);

// ---- table geometry -----------------------------------------------------------

Var pad_table(Var x, Index n_padded);
Var crop_table(Var x, Index n);

// out[r][c] = x[(r+s) mod n][(c+s) mod n]; s may be negative.
Var cyclic_shift(Var x, Index s);

// g = sigmoid(gate); out = g*a + (1-g)*b. gate is a scalar or a per-channel
// vector matching the last axis of a/b.
Var convex_combine(Var a, Var b, Var gate_logit);

}  // namespace tt
