#include "tt/tt_encoder.hpp"

namespace tt {

void TTConfig::validate(Index n_padded) const {
  if (num_layers < 2 || num_layers % 2 != 0)
    throw ConfigError("num_layers must be even and >= 2, got " + std::to_string(num_layers));
  if (d_prime < 1) throw ConfigError("d_prime must be >= 1");
  if (ffn_width < d_prime)
    throw ConfigError("ffn_width (" + std::to_string(ffn_width) + ") must be >= d_prime (" +
                      std::to_string(d_prime) + ")");
  if (n_padded % b != 0)
    throw ConfigError("padded side " + std::to_string(n_padded) + " not a multiple of b=" +
                      std::to_string(b));
  if (attention == AttnMode::Stripe) stripe().validate(n_padded / b, d_prime);
  else if (heads < 1 || d_prime % heads != 0)
    throw ConfigError("d_prime not divisible by heads");
}

namespace {

std::string layer_prefix(Index layer) { return "tt.layer" + std::to_string(layer) + "."; }

}  // namespace

TTParams TTParams::create(ParameterStore& store, const TTConfig& cfg) {
  TTParams p;
  const Index dp = cfg.d_prime;
  p.conv_w = &store.add_uniform("tt.conv.w", {3, 3, dp, dp});
  p.conv_b = &store.add_zeros("tt.conv.b", {dp});
  for (Index li = 0; li < cfg.num_layers; ++li) {
    const std::string pre = layer_prefix(li);
    std::vector<Parameter*> lp;
    lp.push_back(&store.add_uniform(pre + "attn.wq", {dp, dp}));
    lp.push_back(&store.add_zeros(pre + "attn.bq", {dp}));
    lp.push_back(&store.add_uniform(pre + "attn.wk", {dp, dp}));
    lp.push_back(&store.add_zeros(pre + "attn.bk", {dp}));
    lp.push_back(&store.add_uniform(pre + "attn.wv", {dp, dp}));
    lp.push_back(&store.add_zeros(pre + "attn.bv", {dp}));
    lp.push_back(&store.add_uniform(pre + "attn.wo", {dp, dp}));
    lp.push_back(&store.add_zeros(pre + "attn.bo", {dp}));
    lp.push_back(&store.add_constant(pre + "ln1.gain", {dp}, 1.0));
    lp.push_back(&store.add_zeros(pre + "ln1.bias", {dp}));
    lp.push_back(&store.add_constant(pre + "ln2.gain", {dp}, 1.0));
    lp.push_back(&store.add_zeros(pre + "ln2.bias", {dp}));
    lp.push_back(&store.add_uniform(pre + "ffn.in.w", {dp, cfg.ffn_width}));
    lp.push_back(&store.add_zeros(pre + "ffn.in.b", {cfg.ffn_width}));
    lp.push_back(&store.add_uniform(pre + "ffn.out.w", {cfg.ffn_width, dp}));
    lp.push_back(&store.add_zeros(pre + "ffn.out.b", {dp}));
    p.layers.push_back(std::move(lp));
  }
  p.gate = &store.add_zeros("tt.gate", {cfg.per_channel_gate ? dp : 1});
  return p;
}

TTParams TTParams::lookup(ParameterStore& store, const TTConfig& cfg) {
  TTParams p;
  p.conv_w = &store.at("tt.conv.w");
  p.conv_b = &store.at("tt.conv.b");
  for (Index li = 0; li < cfg.num_layers; ++li) {
    const std::string pre = layer_prefix(li);
    std::vector<Parameter*> lp;
    for (const char* name : {"attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv",
                             "attn.wo", "attn.bo", "ln1.gain", "ln1.bias", "ln2.gain", "ln2.bias",
                             "ffn.in.w", "ffn.in.b", "ffn.out.w", "ffn.out.b"})
      lp.push_back(&store.at(pre + name));
    p.layers.push_back(std::move(lp));
  }
  p.gate = &store.at("tt.gate");
  return p;
}

TTLayerParams TTParams::layer_vars(Graph& g, Index layer) const {
  const auto& lp = layers.at(static_cast<size_t>(layer));
  TTLayerParams out;
  out.attn.wq = g.param(*lp[0]);
  out.attn.bq = g.param(*lp[1]);
  out.attn.wk = g.param(*lp[2]);
  out.attn.bk = g.param(*lp[3]);
  out.attn.wv = g.param(*lp[4]);
  out.attn.bv = g.param(*lp[5]);
  out.attn.wo = g.param(*lp[6]);
  out.attn.bo = g.param(*lp[7]);
  out.ln1_gain = g.param(*lp[8]);
  out.ln1_bias = g.param(*lp[9]);
  out.ln2_gain = g.param(*lp[10]);
  out.ln2_bias = g.param(*lp[11]);
  out.ffn_in_w = g.param(*lp[12]);
  out.ffn_in_b = g.param(*lp[13]);
  out.ffn_out_w = g.param(*lp[14]);
  out.ffn_out_b = g.param(*lp[15]);
  return out;
}

Var conv3_forward(Var r, const TTParams& params) {
  Graph& g = *r.graph;
  return conv3x3(r, g.param(*params.conv_w), g.param(*params.conv_b));
}

Var tt_layer_forward(Var x, const TTLayerParams& lp, const TTConfig& cfg, Index layer_index,
                     FlopLedger* ledger) {
  Var normed = layer_norm(x, lp.ln1_gain, lp.ln1_bias);
  Var attended = cfg.attention == AttnMode::Stripe
                     ? stripe_attention_forward(normed, lp.attn, cfg.stripe(), ledger)
                     : full_attention_forward(normed, lp.attn, cfg.heads, nullptr, ledger);
  Var y = add(x, attended);
  Var normed2 = layer_norm(y, lp.ln2_gain, lp.ln2_bias);
  Var f = linear(normed2, lp.ffn_in_w, lp.ffn_in_b);
  f = gelu(f);
  f = linear(f, lp.ffn_out_w, lp.ffn_out_b);
  Var z = add(y, f);
  if (!cfg.loop_shift_enabled) return z;
  const Index s = cfg.shift();
  return layer_index % 2 == 0 ? loop_shift(z, s) : loop_unshift(z, s);
}

Var tt_forward(Var r0_padded, const TTParams& params, const TTConfig& cfg, FlopLedger* ledger) {
  const Tensor& xv = r0_padded.value();
  if (xv.rank() != 3 || xv.dim(0) != xv.dim(1))
    throw ShapeError("tt_forward: need [n,n,d'], got " + shape_string(xv.shape()));
  cfg.validate(xv.dim(0));
  Graph& g = *r0_padded.graph;
  Var x = r0_padded;
  for (Index li = 0; li < cfg.num_layers; ++li)
    x = tt_layer_forward(x, params.layer_vars(g, li), cfg, li, ledger);
  return x;
}

Var weighted_residual(Var rn, Var r0, const TTParams& params) {
  Graph& g = *rn.graph;
  return convex_combine(rn, r0, g.param(*params.gate));
}

}  // namespace tt
