#pragma once

#include <vector>

#include "tt/graph.hpp"
#include "tt/ops.hpp"
#include "tt/parameters.hpp"

namespace tt {

struct EncoderConfig {
  Index vocab_size = 200;
  Index d = 32;          // token hidden width
  Index d_bilinear = 6;  // biaffine output width, default ceil(sqrt(d))
  Index d_prime = 48;    // compressed table width

  void validate() const;
};

Index default_d_bilinear(Index d);

// Handles to the encoder's parameters inside a store. The sentence encoder is
// a trainable embedding table; anything mapping tokens to [n, d] rows can be
// swapped in behind encode_sentence's contract.
struct EncoderParams {
  Parameter* embedding = nullptr;       // [vocab, d]
  Parameter* linear_a_w = nullptr;      // [d, d]
  Parameter* linear_a_b = nullptr;      // [d]
  Parameter* linear_o_w = nullptr;      // [d, d]
  Parameter* linear_o_b = nullptr;      // [d]
  Parameter* w1 = nullptr;              // [2d, d]
  Parameter* w2 = nullptr;              // [d, d_bilinear, d]
  Parameter* linear_d_w = nullptr;      // [2d + d_bilinear, d_prime]
  Parameter* linear_d_b = nullptr;      // [d_prime]

  static EncoderParams create(ParameterStore& store, const EncoderConfig& cfg);
  static EncoderParams lookup(ParameterStore& store, const EncoderConfig& cfg);
};

// Token ids -> H: [n, d] via embedding lookup.
Var encode_sentence(Graph& g, const EncoderParams& params, const std::vector<int>& token_ids);

// Aspect/opinion feature projections: Ha = linear_a(H), Ho = linear_o(H).
struct AspectOpinion {
  Var ha, ho;
};
AspectOpinion project_ao(Var h, const EncoderParams& params);

// Raw biaffine table: cell (i,j) is the concatenation of
//   W1·(Ha[i] ⊕ Ho[j])          (width d)
//   Ha[i]^T W2 Ho[j]            (width d_bilinear)
//   maxpool(H[min(i,j)..max(i,j)])  (width d)
// -> [n, n, 2d + d_bilinear].
Var biaffine_table(Var ha, Var ho, Var h, const EncoderParams& params);

// Per-cell affine compression to d': [n, n, 2d+d_bilinear] -> [n, n, d'].
Var compress(Var rraw, const EncoderParams& params);

}  // namespace tt
