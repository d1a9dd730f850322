#include "tt/model.hpp"

#include <algorithm>

namespace tt {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (tt.d_prime != encoder.d_prime || decoder.d_prime != encoder.d_prime)
    throw ConfigError("d_prime disagrees across encoder/T-T/decoder configs");
  if (!bypass_tt) {
    if (tt.num_layers < 2 || tt.num_layers % 2 != 0)
      throw ConfigError("num_layers must be even and >= 2, got " + std::to_string(tt.num_layers));
    if (tt.attention == AttnMode::Stripe && tt.w % 2 == 0)
      throw ConfigError("window width w must be odd, got " + std::to_string(tt.w));
  }
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(cfg), store_(seed) {
  cfg_.validate();
  enc_ = EncoderParams::create(store_, cfg_.encoder);
  if (!cfg_.bypass_tt) {
    tt_ = TTParams::create(store_, cfg_.tt);
  } else {
    // the ablation without the T-T stack keeps only the convolution front
    tt_.conv_w = &store_.add_uniform("tt.conv.w", {3, 3, cfg_.tt.d_prime, cfg_.tt.d_prime});
    tt_.conv_b = &store_.add_zeros("tt.conv.b", {cfg_.tt.d_prime});
  }
  dec_ = DecoderParams::create(store_, cfg_.decoder);
}

Var Model::relation_table(Graph& g, const std::vector<int>& token_ids, FlopLedger* ledger) {
  Var h = encode_sentence(g, enc_, token_ids);
  AspectOpinion ao = project_ao(h, enc_);
  Var rraw = biaffine_table(ao.ha, ao.ho, h, enc_);
  Var r = compress(rraw, enc_);
  Var r0 = conv3_forward(r, tt_);
  if (cfg_.bypass_tt) return r0;
  const Index n = r0.dim(0);
  const Index n_pad = pad_length(static_cast<int>(n), static_cast<int>(cfg_.tt.b));
  Var r0p = pad_table(r0, n_pad);
  Var rnp = tt_forward(r0p, tt_, cfg_.tt, ledger);
  Var rn = crop_table(rnp, n);
  return weighted_residual(rn, r0, tt_);
}

namespace {

// Gold pairs first (so teacher forcing survives truncation), then all valid
// pairs of predicted cells, deduplicated, capped at max_candidates.
std::vector<CandidatePair> training_candidates(const VertexPredictions& preds,
                                               const TableLabels& gold, Index max_candidates) {
  std::vector<CandidatePair> cands;
  for (const Region& r : gold.regions) {
    const CandidatePair c{r.tl, r.br};
    if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
  }
  const std::vector<Cell> tl_cells = cells_from_logits(preds.p_tl.value());
  const std::vector<Cell> br_cells = cells_from_logits(preds.p_br.value());
  for (const CandidatePair& c : enumerate_candidates(tl_cells, br_cells, max_candidates)) {
    if (static_cast<Index>(cands.size()) >= max_candidates) break;
    if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
  }
  if (static_cast<Index>(cands.size()) > max_candidates) cands.resize(static_cast<size_t>(max_candidates));
  return cands;
}

}  // namespace

std::vector<CandidatePair> Model::mined_candidates(const std::vector<int>& token_ids,
                                                   const TableLabels& gold) {
  Graph g;
  Var table = relation_table(g, token_ids);
  VertexPredictions preds = predict_vertices(table, dec_);
  return training_candidates(preds, gold, cfg_.decoder.max_candidates);
}

Model::SentenceLoss Model::sentence_loss(Graph& g, const std::vector<int>& token_ids,
                                         const TableLabels& gold, FlopLedger* ledger,
                                         const std::vector<CandidatePair>* fixed_candidates) {
  if (static_cast<int>(token_ids.size()) != gold.n)
    throw ShapeError("sentence_loss: " + std::to_string(token_ids.size()) + " tokens vs labels for n=" +
                     std::to_string(gold.n));
  Var table = relation_table(g, token_ids, ledger);
  VertexPredictions preds = predict_vertices(table, dec_);
  SentenceLoss out;
  out.vertex = vertex_loss(preds, gold, cfg_.decoder);
  const std::vector<CandidatePair> cands =
      fixed_candidates ? *fixed_candidates
                       : training_candidates(preds, gold, cfg_.decoder.max_candidates);
  out.num_candidates = static_cast<Index>(cands.size());
  if (!cands.empty()) {
    Var logits = sentiment_logits(rectangle_reprs(table, cands), dec_);
    out.sentiment = sentiment_loss(logits, candidate_labels(cands, gold.regions, cfg_.decoder.task));
    out.total = total_loss(out.vertex, out.sentiment);
  } else {
    out.total = out.vertex;
  }
  return out;
}

std::vector<Triplet> Model::predict(const std::vector<int>& token_ids, FlopLedger* ledger) {
  Graph g;
  Var table = relation_table(g, token_ids, ledger);
  VertexPredictions preds = predict_vertices(table, dec_);
  const std::vector<Cell> tl_cells = cells_from_logits(preds.p_tl.value());
  const std::vector<Cell> br_cells = cells_from_logits(preds.p_br.value());
  const std::vector<CandidatePair> cands =
      enumerate_candidates(tl_cells, br_cells, cfg_.decoder.max_candidates);
  if (cands.empty()) return {};
  Var logits = sentiment_logits(rectangle_reprs(table, cands), dec_);
  return extract_triplets(cands, logits.value(), cfg_.decoder.task);
}

}  // namespace tt
