#include "tt/table_encoder.hpp"

#include <cmath>

namespace tt {

Index default_d_bilinear(Index d) {
  return static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(d))));
}

void EncoderConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (d < 1) throw ConfigError("hidden width d must be >= 1");
  if (d_bilinear < 1) throw ConfigError("d_bilinear must be >= 1");
  if (d_prime < 1) throw ConfigError("d_prime must be >= 1");
}

EncoderParams EncoderParams::create(ParameterStore& store, const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  p.embedding = &store.add_uniform("enc.embedding", {cfg.vocab_size, cfg.d});
  p.linear_a_w = &store.add_uniform("enc.linear_a.w", {cfg.d, cfg.d});
  p.linear_a_b = &store.add_zeros("enc.linear_a.b", {cfg.d});
  p.linear_o_w = &store.add_uniform("enc.linear_o.w", {cfg.d, cfg.d});
  p.linear_o_b = &store.add_zeros("enc.linear_o.b", {cfg.d});
  p.w1 = &store.add_uniform("enc.w1", {2 * cfg.d, cfg.d});
  p.w2 = &store.add_uniform("enc.w2", {cfg.d, cfg.d_bilinear, cfg.d});
  p.linear_d_w = &store.add_uniform("enc.linear_d.w", {2 * cfg.d + cfg.d_bilinear, cfg.d_prime});
  p.linear_d_b = &store.add_zeros("enc.linear_d.b", {cfg.d_prime});
  return p;
}

EncoderParams EncoderParams::lookup(ParameterStore& store, const EncoderConfig& cfg) {
  EncoderParams p;
  p.embedding = &store.at("enc.embedding");
  p.linear_a_w = &store.at("enc.linear_a.w");
  p.linear_a_b = &store.at("enc.linear_a.b");
  p.linear_o_w = &store.at("enc.linear_o.w");
  p.linear_o_b = &store.at("enc.linear_o.b");
  p.w1 = &store.at("enc.w1");
  p.w2 = &store.at("enc.w2");
  p.linear_d_w = &store.at("enc.linear_d.w");
  p.linear_d_b = &store.at("enc.linear_d.b");
  (void)cfg;
  return p;
}

Var encode_sentence(Graph& g, const EncoderParams& params, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw DataError("encode_sentence: empty sentence");
  return embedding(g.param(*params.embedding), token_ids);
}

AspectOpinion project_ao(Var h, const EncoderParams& params) {
  Graph& g = *h.graph;
  return AspectOpinion{linear(h, g.param(*params.linear_a_w), g.param(*params.linear_a_b)),
                       linear(h, g.param(*params.linear_o_w), g.param(*params.linear_o_b))};
}

Var biaffine_table(Var ha, Var ho, Var h, const EncoderParams& params) {
  Graph& g = *ha.graph;
  const Index d = ha.dim(1);
  Var w1 = g.param(*params.w1);
  // W1·(Ha[i] ⊕ Ho[j]) splits into row-block matmuls plus an outer sum.
  Var concat_term = outer_add(matmul(ha, slice_rows(w1, 0, d)), matmul(ho, slice_rows(w1, d, d)));
  Var bilinear_term = bilinear_forms(ha, ho, g.param(*params.w2));
  Var pooling_term = span_max_pool(h);
  return concat_last({concat_term, bilinear_term, pooling_term});
}

Var compress(Var rraw, const EncoderParams& params) {
  Graph& g = *rraw.graph;
  return linear(rraw, g.param(*params.linear_d_w), g.param(*params.linear_d_b));
}

}  // namespace tt
