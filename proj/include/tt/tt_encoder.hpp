#pragma once

#include <vector>

#include "tt/stripe_attention.hpp"

namespace tt {

struct TTConfig {
  Index num_layers = 2;  // even
  Index d_prime = 48;
  Index heads = 4;
  Index ffn_width = 96;
  Index b = 2;
  Index w = 3;
  bool loop_shift_enabled = true;
  AttnMode attention = AttnMode::Stripe;
  WrapMode wrap = WrapMode::Flattened;
  bool per_channel_gate = false;

  Index shift() const { return b / 2; }
  StripeConfig stripe() const { return StripeConfig{b, w, heads, wrap}; }
  void validate(Index n_padded) const;
};

struct TTLayerParams {
  AttentionParams attn;
  Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  Var ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
};

struct TTParams {
  Parameter* conv_w = nullptr;  // [3,3,d',d']
  Parameter* conv_b = nullptr;  // [d']
  Parameter* gate = nullptr;    // [1] or [d']
  std::vector<std::vector<Parameter*>> layers;  // per layer, in fixed order

  static TTParams create(ParameterStore& store, const TTConfig& cfg);
  static TTParams lookup(ParameterStore& store, const TTConfig& cfg);
  TTLayerParams layer_vars(Graph& g, Index layer) const;
};

// Convolutional front: kernel 3, stride 1, zero padding 1, d' -> d' channels.
Var conv3_forward(Var r, const TTParams& params);

// One pre-norm transformer layer over the padded table, followed by the
// loop-shift step: even layers shift up-left by s, odd layers shift back.
Var tt_layer_forward(Var x, const TTLayerParams& lp, const TTConfig& cfg, Index layer_index,
                     FlopLedger* ledger = nullptr);

// The full layer stack. Shifts pair up, so outputs are in unshifted
// coordinates.
Var tt_forward(Var r0_padded, const TTParams& params, const TTConfig& cfg,
               FlopLedger* ledger = nullptr);

// R = g·R^N + (1-g)·R^0 with g = logistic(gate).
Var weighted_residual(Var rn, Var r0, const TTParams& params);

}  // namespace tt
