#pragma once

#include <vector>

#include "tt/decoder.hpp"
#include "tt/stripe_attention.hpp"
#include "tt/table_encoder.hpp"
#include "tt/tt_encoder.hpp"

namespace tt {

struct ModelConfig {
  EncoderConfig encoder;
  TTConfig tt;
  DecoderConfig decoder;
  bool bypass_tt = false;  // ablation: skip the T-T stack, R_final = R0

  void validate() const;
};

// The full table-tagging extractor: embedding encoder, biaffine table,
// convolution front, T-T stack, vertex heads and sentiment classifier, all
// parameters in one seeded store.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  Index parameter_count() const { return store_.total_entries(); }

  // Final relation table for one sentence: [n, n, d'].
  Var relation_table(Graph& g, const std::vector<int>& token_ids, FlopLedger* ledger = nullptr);

  struct SentenceLoss {
    Var total;
    Var vertex;
    Var sentiment;  // invalid Var when no candidates contributed
    Index num_candidates = 0;
  };

  // Training-graph losses for one sentence. Candidates are the gold (TL, BR)
  // pairs plus all geometrically valid pairs of predicted vertex cells,
  // deduplicated, truncated at max_candidates. Passing fixed_candidates skips
  // the mining; finite-difference checks need this because the mined set is a
  // discrete function of the parameters.
  SentenceLoss sentence_loss(Graph& g, const std::vector<int>& token_ids, const TableLabels& gold,
                             FlopLedger* ledger = nullptr,
                             const std::vector<CandidatePair>* fixed_candidates = nullptr);

  // The candidate set sentence_loss would mine at the current parameters.
  std::vector<CandidatePair> mined_candidates(const std::vector<int>& token_ids,
                                              const TableLabels& gold);

  // Inference: decoded triplets (pairs in AOPE mode, carrying a placeholder
  // polarity).
  std::vector<Triplet> predict(const std::vector<int>& token_ids, FlopLedger* ledger = nullptr);

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  EncoderParams enc_;
  TTParams tt_;
  DecoderParams dec_;
};

}  // namespace tt
